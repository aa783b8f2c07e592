#include "mhnet/nn.hpp"

#include <cmath>

namespace mhnet::nn {

Tensor glorot_uniform(std::size_t in, std::size_t out, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> u(-limit, limit);
    Tensor w({in, out});
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = u(rng);
    return w;
}

void add_affine(ad::ParamStore& params, const std::string& prefix, std::size_t in, std::size_t out, Rng& rng) {
    params.add(prefix + ".w", glorot_uniform(in, out, rng));
    params.add(prefix + ".b", Tensor({out}));
}

ad::Var affine(ad::Tape& tape, ad::ParamStore& params, const std::string& prefix, ad::Var x) {
    ad::Var w = tape.param(params.get(prefix + ".w"));
    ad::Var b = tape.param(params.get(prefix + ".b"));
    if (x.value().rank() == 1) {
        ad::Var row = ad::reshape(x, {1, x.size()});
        ad::Var y = ad::add(ad::matmul(row, w), b);
        return ad::reshape(y, {w.value().dim(1)});
    }
    return ad::add(ad::matmul(x, w), b);
}

void add_mlp(ad::ParamStore& params, const std::string& prefix, const std::vector<std::size_t>& widths, Rng& rng) {
    for (std::size_t l = 0; l + 1 < widths.size(); ++l)
        add_affine(params, prefix + ".l" + std::to_string(l), widths[l], widths[l + 1], rng);
}

ad::Var mlp(ad::Tape& tape, ad::ParamStore& params, const std::string& prefix, std::size_t layers, ad::Var x,
            double dropout, bool train, Rng& rng) {
    for (std::size_t l = 0; l < layers; ++l) {
        x = affine(tape, params, prefix + ".l" + std::to_string(l), x);
        if (l + 1 < layers) x = ad::dropout(ad::relu(x), dropout, train, rng);
    }
    return x;
}

} // namespace mhnet::nn
