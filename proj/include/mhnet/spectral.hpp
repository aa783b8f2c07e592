#pragma once

#include "mhnet/autodiff.hpp"
#include "mhnet/tensor.hpp"

#include <span>
#include <vector>

namespace mhnet {

struct GraphLaplacian {
    /// I - D^{-1/2} A D^{-1/2}; isolated nodes get D^{-1/2} = 0.
    Tensor laplacian;
    double lambda_max = 2.0;
    /// True when power iteration did not converge and lambda_max fell back to 2.
    bool lambda_fallback = false;
    /// (2 / lambda_max) L - I.
    Tensor rescaled;
};

struct PowerIterationResult {
    double eigenvalue = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
};

/// Largest eigenvalue of a symmetric PSD matrix; stops when the residual
/// ||Mv - lambda v|| drops below tol.
PowerIterationResult power_iteration(const Tensor& m, double tol = 1e-9, std::size_t max_iter = 10000);

GraphLaplacian normalized_laplacian(const Tensor& adjacency);

/// sum_{k<K} T_k(L~) H theta_k via the three-term recurrence, recorded on the
/// tape so it is differentiable in H and every theta_k.
ad::Var cheb_apply(ad::Var rescaled, ad::Var h, std::span<const ad::Var> thetas);
Tensor cheb_apply(const GraphLaplacian& lap, const Tensor& h, const std::vector<Tensor>& thetas);

/// U (sum_k T_k(Lambda~)) U^T H theta_k from a dense eigendecomposition of L~.
/// Reference path for small graphs (m <= 64); not differentiable.
Tensor spectral_filter_exact(const GraphLaplacian& lap, const Tensor& h, const std::vector<Tensor>& thetas);

/// Eigenvalues of a symmetric matrix, ascending.
std::vector<double> symmetric_eigenvalues(const Tensor& m);

} // namespace mhnet
