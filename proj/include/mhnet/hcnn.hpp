#pragma once

#include "mhnet/autodiff.hpp"
#include "mhnet/tensor.hpp"

#include <string>
#include <vector>

namespace mhnet {

struct ConvLayerSpec {
    std::size_t kernel = 1;
    std::size_t stride = 1;
    std::size_t channels = 1;
};

struct HcnnConfig {
    std::vector<ConvLayerSpec> conv{{7, 2, 8}, {5, 2, 16}};
    /// Hidden widths of the MLP between the flattened conv output and Z_fc.
    std::vector<std::size_t> mlp_hidden;
    std::size_t out_dim = 64;
    std::vector<std::size_t> hop_hidden;
    double dropout = 0.0;

    /// Throws if a kernel does not fit the sequence it slides over.
    void validate(std::size_t input_length) const;
    /// Flattened length after the conv stack for an input of the given length.
    std::size_t conv_output_size(std::size_t input_length) const;
};

/// Strict upper triangle of a symmetric N x N matrix, row by row; length N(N-1)/2.
Tensor dr_flatten(const Tensor& c);
/// Inverse of dr_flatten: symmetric matrix with unit diagonal.
Tensor dr_unflatten(const Tensor& x, std::size_t n);

void add_hcnn(ad::ParamStore& params, const std::string& prefix, std::size_t input_length, const HcnnConfig& config,
              bool high_order, Rng& rng);

/// conv1d -> ReLU -> conv1d -> ReLU -> flatten -> MLP, giving Z_fc [d].
ad::Var hcnn_first_order(ad::Tape& tape, ad::ParamStore& params, const std::string& prefix, ad::Var x,
                         const HcnnConfig& config, bool train, Rng& rng);

/// Outer product Z_fc Z_fc^T.
ad::Var hop(ad::Var z_fc);

/// concat(Z_fc, MLP(upper triangle with diagonal of hop(Z_fc))); Z_fc alone when !high_order.
ad::Var hop_concat(ad::Tape& tape, ad::ParamStore& params, const std::string& prefix, ad::Var z_fc,
                   const HcnnConfig& config, bool high_order);

} // namespace mhnet
