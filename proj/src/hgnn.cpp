#include "mhnet/hgnn.hpp"

#include "mhnet/nn.hpp"
#include "mhnet/spectral.hpp"

#include <stdexcept>

namespace mhnet {

std::string to_string(Encoder e) {
    switch (e) {
    case Encoder::gcn: return "gcn";
    case Encoder::cheb: return "cheb";
    case Encoder::res_cheb: return "res-cheb";
    }
    return "?";
}

Encoder parse_encoder(const std::string& s) {
    if (s == "gcn") return Encoder::gcn;
    if (s == "cheb") return Encoder::cheb;
    if (s == "res-cheb") return Encoder::res_cheb;
    throw std::invalid_argument("unknown encoder '" + s + "' (expected gcn|cheb|res-cheb)");
}

void HgnnConfig::validate() const {
    if (K < 1) throw std::invalid_argument("hgnn: K must be at least 1");
    if (blocks < 1) throw std::invalid_argument("hgnn: need at least one block");
    if (hidden < 1) throw std::invalid_argument("hgnn: hidden width must be positive");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("hgnn: dropout must lie in [0, 1)");
}

LevelInput prepare_level(const LevelGraph& graph) {
    LevelInput in;
    in.features = graph.features;
    in.rescaled = normalized_laplacian(graph.adjacency).rescaled;
    ad::Tape tape(false);
    in.propagation = ad::gcn_normalize(tape.constant(graph.adjacency)).value();
    in.block_offsets = graph.block_offsets;
    return in;
}

LevelVars bind_level(ad::Tape& tape, const LevelInput& in) {
    return LevelVars{tape.constant(in.features), tape.constant(in.rescaled), tape.constant(in.propagation),
                     &in.block_offsets};
}

void add_level_encoder(ad::ParamStore& params, const std::string& prefix, std::size_t in_width,
                       const HgnnConfig& config, bool high_order, Rng& rng) {
    config.validate();
    const std::size_t d = config.hidden;
    nn::add_affine(params, prefix + ".in", in_width, d, rng);
    for (std::size_t l = 0; l < config.blocks; ++l) {
        const std::string bp = prefix + ".block" + std::to_string(l);
        if (config.encoder == Encoder::gcn) {
            params.add(bp + ".w", nn::glorot_uniform(d, d, rng));
        } else {
            for (std::size_t k = 0; k < config.K; ++k) {
                Tensor theta = nn::glorot_uniform(d, d, rng);
                // Keep the summed filter at the scale of a single Glorot layer.
                for (std::size_t i = 0; i < theta.size(); ++i) theta[i] /= static_cast<double>(config.K);
                params.add(bp + ".theta" + std::to_string(k), std::move(theta));
            }
        }
        params.add(bp + ".bias", Tensor({d}));
        params.add(bp + ".norm.gamma", Tensor({d}, 1.0));
        params.add(bp + ".norm.beta", Tensor({d}));
    }
    Tensor r({config.blocks});
    std::uniform_real_distribution<double> u(-0.1, 0.1);
    for (std::size_t l = 0; l < config.blocks; ++l) r[l] = u(rng);
    params.add(prefix + ".afm.r", std::move(r));
    if (high_order) {
        std::vector<std::size_t> widths{d * (d + 1) / 2};
        widths.insert(widths.end(), config.ghop_hidden.begin(), config.ghop_hidden.end());
        widths.push_back(d);
        nn::add_mlp(params, prefix + ".ghop", widths, rng);
    }
}

ad::Var chebconv_block(ad::Tape& tape, ad::ParamStore& params, const std::string& prefix, ad::Var h_in,
                       const LevelVars& level, const HgnnConfig& config, bool train, Rng& rng) {
    ad::Var conv;
    if (config.encoder == Encoder::gcn) {
        conv = ad::matmul(ad::matmul(level.propagation, h_in), tape.param(params.get(prefix + ".w")));
    } else {
        std::vector<ad::Var> thetas;
        for (std::size_t k = 0; k < config.K; ++k) thetas.push_back(tape.param(params.get(prefix + ".theta" + std::to_string(k))));
        conv = cheb_apply(level.rescaled, h_in, thetas);
    }
    ad::Var h = ad::add(conv, tape.param(params.get(prefix + ".bias")));
    if (config.normalize) {
        h = ad::block_norm(h, *level.block_offsets, tape.param(params.get(prefix + ".norm.gamma")),
                           tape.param(params.get(prefix + ".norm.beta")));
    }
    if (config.activate) h = ad::relu(h);
    h = ad::dropout(h, config.dropout, train, rng);
    if (config.encoder == Encoder::res_cheb) h = ad::add(h, h_in);
    return h;
}

ad::Var afm_combine(const std::vector<ad::Var>& block_outputs, ad::Var r) {
    if (r.value().size() != block_outputs.size()) {
        throw std::invalid_argument("afm_combine: " + std::to_string(r.value().size()) + " weights for " +
                                    std::to_string(block_outputs.size()) + " blocks");
    }
    return ad::weighted_sum(block_outputs, ad::softmax(r));
}

ad::Var ghop(ad::Var z) { return ad::matmul(ad::transpose(z), z); }

ad::Var branch_high_order(ad::Tape& tape, ad::ParamStore& params, const std::string& prefix, ad::Var z,
                          const HgnnConfig& config, bool high_order) {
    ad::Var first = ad::mean(z, 0);
    if (!high_order) return first;
    // Gram over nodes divided by the node count: entries stay O(1) at any level size,
    // which keeps a unit Adam step on the wide first GHOP layer proportionate.
    ad::Var flat = ad::scale(ad::triu_flatten(ghop(z), true), 1.0 / static_cast<double>(z.value().dim(0)));
    Rng unused(0);
    ad::Var high = nn::mlp(tape, params, prefix + ".ghop", config.ghop_hidden.size() + 1, flat, 0.0, false, unused);
    return ad::concat({first, high});
}

ad::Var encode_level(ad::Tape& tape, ad::ParamStore& params, const std::string& prefix, const LevelVars& level,
                     const HgnnConfig& config, bool train, Rng& rng) {
    ad::Var h = nn::affine(tape, params, prefix + ".in", level.features);
    std::vector<ad::Var> outputs;
    outputs.reserve(config.blocks);
    for (std::size_t l = 0; l < config.blocks; ++l) {
        h = chebconv_block(tape, params, prefix + ".block" + std::to_string(l), h, level, config, train, rng);
        outputs.push_back(h);
    }
    return afm_combine(outputs, tape.param(params.get(prefix + ".afm.r")));
}

ad::Var multiview_fuse(ad::Var z_wan, ad::Var z_man, ad::Var z_lan) {
    const auto n = z_wan.size();
    if (z_man.size() != n || z_lan.size() != n) {
        throw std::invalid_argument("multiview_fuse: branch widths differ (" + std::to_string(n) + ", " +
                                    std::to_string(z_man.size()) + ", " + std::to_string(z_lan.size()) + ")");
    }
    return ad::concat({z_wan, z_man, z_lan});
}

} // namespace mhnet
