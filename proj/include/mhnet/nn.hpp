#pragma once

#include "mhnet/autodiff.hpp"

#include <string>
#include <vector>

namespace mhnet::nn {

/// Glorot-uniform weight [in x out] and zero bias [out] under prefix.w / prefix.b.
void add_affine(ad::ParamStore& params, const std::string& prefix, std::size_t in, std::size_t out, Rng& rng);
/// x W + b for x of shape [in] (result [out]) or [n x in] (result [n x out]).
ad::Var affine(ad::Tape& tape, ad::ParamStore& params, const std::string& prefix, ad::Var x);

/// widths = {input, hidden..., output}; layers are prefix.l0, prefix.l1, ...
void add_mlp(ad::ParamStore& params, const std::string& prefix, const std::vector<std::size_t>& widths, Rng& rng);
/// Affine + ReLU (+ dropout) on hidden layers, plain affine on the last.
ad::Var mlp(ad::Tape& tape, ad::ParamStore& params, const std::string& prefix, std::size_t layers, ad::Var x,
            double dropout, bool train, Rng& rng);

Tensor glorot_uniform(std::size_t in, std::size_t out, Rng& rng);

} // namespace mhnet::nn
