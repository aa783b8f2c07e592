#pragma once

#include "mhnet/autodiff.hpp"
#include "mhnet/connectivity.hpp"

#include <string>
#include <vector>

namespace mhnet {

enum class Encoder { gcn, cheb, res_cheb };
std::string to_string(Encoder e);
Encoder parse_encoder(const std::string& s);

struct HgnnConfig {
    std::size_t K = 3;
    std::size_t blocks = 3;
    std::size_t hidden = 64;
    double dropout = 0.0;
    Encoder encoder = Encoder::res_cheb;
    /// Hidden widths of the MLP applied to the flattened Gram matrix.
    std::vector<std::size_t> ghop_hidden;
    /// Per-block normalization and ReLU inside each block. Only switched off in tests.
    bool normalize = true;
    bool activate = true;

    void validate() const;
};

/// Per-subject constants for one graph level.
struct LevelInput {
    Tensor features;
    /// (2 / lambda_max) L - I for the Chebyshev encoders.
    Tensor rescaled;
    /// D^{-1/2} (A + I) D^{-1/2} for the GCN encoder.
    Tensor propagation;
    std::vector<std::size_t> block_offsets;
};

LevelInput prepare_level(const LevelGraph& graph);

/// Tape-bound view of a LevelInput.
struct LevelVars {
    ad::Var features;
    ad::Var rescaled;
    ad::Var propagation;
    const std::vector<std::size_t>* block_offsets = nullptr;
};
LevelVars bind_level(ad::Tape& tape, const LevelInput& in);

/// One level encoder (input projection, blocks, AFM and GHOP MLP) under `prefix`.
void add_level_encoder(ad::ParamStore& params, const std::string& prefix, std::size_t in_width,
                       const HgnnConfig& config, bool high_order, Rng& rng);

/// conv -> block norm -> ReLU -> dropout, plus identity skip for res-cheb.
ad::Var chebconv_block(ad::Tape& tape, ad::ParamStore& params, const std::string& prefix, ad::Var h_in,
                       const LevelVars& level, const HgnnConfig& config, bool train, Rng& rng);

/// Z = sum_l softmax(r)_l * H^(l).
ad::Var afm_combine(const std::vector<ad::Var>& block_outputs, ad::Var r);

/// Z^T Z.
ad::Var ghop(ad::Var z);

/// concat(mean over nodes of Z, MLP(upper triangle of Z^T Z / n)); the first part only when !high_order.
ad::Var branch_high_order(ad::Tape& tape, ad::ParamStore& params, const std::string& prefix, ad::Var z,
                          const HgnnConfig& config, bool high_order);

/// Multi-scale node embedding Z [m x d] of one level.
ad::Var encode_level(ad::Tape& tape, ad::ParamStore& params, const std::string& prefix, const LevelVars& level,
                     const HgnnConfig& config, bool train, Rng& rng);

/// concat(z_wan, z_man, z_lan).
ad::Var multiview_fuse(ad::Var z_wan, ad::Var z_man, ad::Var z_lan);

} // namespace mhnet
