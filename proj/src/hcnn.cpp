#include "mhnet/hcnn.hpp"

#include "mhnet/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace mhnet {

void HcnnConfig::validate(std::size_t input_length) const {
    if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("hcnn: dropout must lie in [0, 1)");
    if (out_dim < 1) throw std::invalid_argument("hcnn: output width must be positive");
    std::size_t len = input_length;
    for (std::size_t i = 0; i < conv.size(); ++i) {
        const auto& c = conv[i];
        if (c.kernel < 1 || c.stride < 1 || c.channels < 1) {
            throw std::invalid_argument("hcnn: conv layer " + std::to_string(i) + " has a zero kernel, stride or width");
        }
        if (c.kernel > len) {
            throw std::invalid_argument("hcnn: conv layer " + std::to_string(i) + " kernel " + std::to_string(c.kernel) +
                                        " exceeds its input length " + std::to_string(len));
        }
        len = (len - c.kernel) / c.stride + 1;
    }
}

std::size_t HcnnConfig::conv_output_size(std::size_t input_length) const {
    validate(input_length);
    std::size_t len = input_length, ch = 1;
    for (const auto& c : conv) {
        len = (len - c.kernel) / c.stride + 1;
        ch = c.channels;
    }
    return len * ch;
}

Tensor dr_flatten(const Tensor& c) {
    if (c.rank() != 2 || c.dim(0) != c.dim(1)) throw std::invalid_argument("dr_flatten: square matrix required");
    const std::size_t n = c.dim(0);
    if (n < 2) throw std::invalid_argument("dr_flatten: matrix must be at least 2 x 2");
    std::vector<double> out;
    out.reserve(n * (n - 1) / 2);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) out.push_back(c(i, j));
    return Tensor::vector(std::move(out));
}

Tensor dr_unflatten(const Tensor& x, std::size_t n) {
    if (x.rank() != 1 || x.size() != n * (n - 1) / 2) {
        throw std::invalid_argument("dr_unflatten: length " + std::to_string(x.size()) + " does not match N = " +
                                    std::to_string(n));
    }
    Tensor c = Tensor::identity(n);
    std::size_t k = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) c(i, j) = c(j, i) = x[k++];
    return c;
}

void add_hcnn(ad::ParamStore& params, const std::string& prefix, std::size_t input_length, const HcnnConfig& config,
              bool high_order, Rng& rng) {
    config.validate(input_length);
    std::size_t in_ch = 1;
    for (std::size_t i = 0; i < config.conv.size(); ++i) {
        const auto& c = config.conv[i];
        const double fan = static_cast<double>(in_ch * c.kernel);
        std::uniform_real_distribution<double> u(-std::sqrt(6.0 / fan), std::sqrt(6.0 / fan));
        Tensor k({c.channels, in_ch, c.kernel});
        for (std::size_t j = 0; j < k.size(); ++j) k[j] = u(rng);
        const std::string cp = prefix + ".conv" + std::to_string(i);
        params.add(cp + ".w", std::move(k));
        params.add(cp + ".b", Tensor({c.channels}));
        in_ch = c.channels;
    }
    std::vector<std::size_t> widths{config.conv_output_size(input_length)};
    widths.insert(widths.end(), config.mlp_hidden.begin(), config.mlp_hidden.end());
    widths.push_back(config.out_dim);
    nn::add_mlp(params, prefix + ".mlp", widths, rng);
    if (high_order) {
        const std::size_t d = config.out_dim;
        std::vector<std::size_t> hw{d * (d + 1) / 2};
        hw.insert(hw.end(), config.hop_hidden.begin(), config.hop_hidden.end());
        hw.push_back(d);
        nn::add_mlp(params, prefix + ".hop", hw, rng);
    }
}

ad::Var hcnn_first_order(ad::Tape& tape, ad::ParamStore& params, const std::string& prefix, ad::Var x,
                         const HcnnConfig& config, bool train, Rng& rng) {
    if (x.value().rank() != 1) throw std::invalid_argument("hcnn_first_order: input must be a vector");
    config.validate(x.size());
    ad::Var h = ad::reshape(x, {1, x.size()});
    for (std::size_t i = 0; i < config.conv.size(); ++i) {
        const std::string cp = prefix + ".conv" + std::to_string(i);
        h = ad::conv1d(h, tape.param(params.get(cp + ".w")), tape.param(params.get(cp + ".b")),
                       ad::Conv1dSpec{config.conv[i].stride});
        h = ad::relu(h);
    }
    h = ad::reshape(h, {h.size()});
    h = ad::dropout(h, config.dropout, train, rng);
    return nn::mlp(tape, params, prefix + ".mlp", config.mlp_hidden.size() + 1, h, config.dropout, train, rng);
}

ad::Var hop(ad::Var z_fc) { return ad::outer(z_fc, z_fc); }

ad::Var hop_concat(ad::Tape& tape, ad::ParamStore& params, const std::string& prefix, ad::Var z_fc,
                   const HcnnConfig& config, bool high_order) {
    if (!high_order) return z_fc;
    ad::Var flat = ad::triu_flatten(hop(z_fc), true);
    Rng unused(0);
    ad::Var high = nn::mlp(tape, params, prefix + ".hop", config.hop_hidden.size() + 1, flat, 0.0, false, unused);
    return ad::concat({z_fc, high});
}

} // namespace mhnet
