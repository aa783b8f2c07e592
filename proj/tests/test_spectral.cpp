#include "test_util.hpp"

#include "mhnet/spectral.hpp"

#include <gtest/gtest.h>

using namespace mhnet;
using namespace mhnet::testing;

namespace {

std::vector<Tensor> random_thetas(std::size_t k, std::size_t d_in, std::size_t d_out, Rng& rng) {
    std::vector<Tensor> out;
    for (std::size_t i = 0; i < k; ++i) out.push_back(random_tensor({d_in, d_out}, rng));
    return out;
}

Tensor permute_rows_cols(const Tensor& a, const std::vector<std::size_t>& p) {
    Tensor out(a.shape());
    for (std::size_t i = 0; i < p.size(); ++i)
        for (std::size_t j = 0; j < p.size(); ++j) out(i, j) = a(p[i], p[j]);
    return out;
}

Tensor permute_rows(const Tensor& h, const std::vector<std::size_t>& p) {
    Tensor out(h.shape());
    for (std::size_t i = 0; i < p.size(); ++i)
        for (std::size_t k = 0; k < h.cols(); ++k) out(i, k) = h(p[i], k);
    return out;
}

} // namespace

TEST(Laplacian, TwoNodePath) {
    const auto lap = normalized_laplacian(Tensor::matrix(2, 2, {0, 1, 1, 0}));
    EXPECT_LE(max_abs_diff(lap.laplacian, Tensor::matrix(2, 2, {1, -1, -1, 1})), 1e-15);
    EXPECT_NEAR(lap.lambda_max, 2.0, 1e-9);
    EXPECT_LE(max_abs_diff(lap.rescaled, Tensor::matrix(2, 2, {0, -1, -1, 0})), 1e-9);
}

TEST(Laplacian, EmptyGraphIsIdentity) {
    const auto lap = normalized_laplacian(Tensor({4, 4}));
    EXPECT_EQ(lap.laplacian, Tensor::identity(4));
    EXPECT_NEAR(lap.lambda_max, 1.0, 1e-9);
}

TEST(Laplacian, RejectsAsymmetricAndNegative) {
    EXPECT_THROW(normalized_laplacian(Tensor::matrix(2, 2, {0, 1, 0.5, 0})), std::invalid_argument);
    EXPECT_THROW(normalized_laplacian(Tensor::matrix(2, 2, {0, -1, -1, 0})), std::invalid_argument);
}

TEST(Laplacian, SpectrumBounds) {
    Rng rng(40);
    for (std::size_t rep = 0; rep < 30; ++rep) {
        const auto lap = normalized_laplacian(random_graph(6 + rep % 5, 0.4, rng, rep % 2 == 1));
        EXPECT_TRUE(is_symmetric(lap.laplacian, 1e-12));
        const auto ev = symmetric_eigenvalues(lap.laplacian);
        EXPECT_GE(ev.front(), -1e-12);
        EXPECT_LE(ev.back(), 2.0 + 1e-12);
        EXPECT_NEAR(lap.lambda_max, ev.back(), 1e-7);
        const auto rev = symmetric_eigenvalues(lap.rescaled);
        EXPECT_GE(rev.front(), -1.0 - 1e-9);
        EXPECT_LE(rev.back(), 1.0 + 1e-9);
    }
}

TEST(PowerIteration, ConvergesOnKnownSpectrum) {
    const auto r = power_iteration(Tensor::matrix(3, 3, {3, 0, 0, 0, 1, 0, 0, 0, 2}));
    EXPECT_TRUE(r.converged);
    EXPECT_NEAR(r.eigenvalue, 3.0, 1e-9);
}

TEST(Cheb, KOneIsLinearMap) {
    Rng rng(41);
    const auto lap = normalized_laplacian(random_graph(5, 0.5, rng));
    const Tensor h = random_tensor({5, 3}, rng);
    const auto thetas = random_thetas(1, 3, 2, rng);
    EXPECT_LE(max_abs_diff(cheb_apply(lap, h, thetas), dense_matmul(h, thetas[0])), 1e-15);
    EXPECT_LE(max_abs_diff(spectral_filter_exact(lap, h, thetas), dense_matmul(h, thetas[0])), 1e-12);
}

TEST(Cheb, TwoNodeHandExample) {
    const auto lap = normalized_laplacian(Tensor::matrix(2, 2, {0, 1, 1, 0}));
    const Tensor out = cheb_apply(lap, Tensor::matrix(2, 1, {1, 1}), {Tensor::matrix(1, 1, {1}), Tensor::matrix(1, 1, {1})});
    EXPECT_NEAR(out(0, 0), 0.0, 1e-9);
    EXPECT_NEAR(out(1, 0), 0.0, 1e-9);
}

TEST(Cheb, Errors) {
    const auto lap = normalized_laplacian(Tensor::matrix(2, 2, {0, 1, 1, 0}));
    EXPECT_THROW(cheb_apply(lap, Tensor({2, 1}), {}), std::invalid_argument);
    EXPECT_THROW(cheb_apply(lap, Tensor({3, 1}), {Tensor({1, 1})}), std::invalid_argument);
    EXPECT_THROW(cheb_apply(lap, Tensor({2, 2}), {Tensor({1, 1})}), std::invalid_argument);
    const auto big = normalized_laplacian(Tensor({65, 65}));
    EXPECT_THROW(spectral_filter_exact(big, Tensor({65, 1}), {Tensor({1, 1})}), std::invalid_argument);
}

TEST(Cheb, MatchesEigendecompositionOnRandomGraphs) {
    Rng rng(42);
    for (std::size_t rep = 0; rep < 40; ++rep) {
        const std::size_t m = 2 + rep % 15, k = 1 + rep % 5;
        const auto lap = normalized_laplacian(random_graph(m, 0.35, rng, rep % 3 == 0));
        const Tensor h = random_tensor({m, 3}, rng);
        const auto thetas = random_thetas(k, 3, 2, rng);
        EXPECT_LE(max_abs_diff(cheb_apply(lap, h, thetas), spectral_filter_exact(lap, h, thetas)), 1e-8);
    }
}

TEST(Cheb, DiagonalRescaledLaplacianActsEntrywise) {
    // Empty graph: L = I, lambda_max = 1, L~ = I, so T_k(L~) = I and the output is H sum_k theta_k.
    const auto lap = normalized_laplacian(Tensor({3, 3}));
    Rng rng(43);
    const Tensor h = random_tensor({3, 2}, rng);
    const auto thetas = random_thetas(4, 2, 2, rng);
    Tensor theta_sum({2, 2});
    for (const auto& t : thetas)
        for (std::size_t i = 0; i < 4; ++i) theta_sum[i] += t[i];
    EXPECT_LE(max_abs_diff(spectral_filter_exact(lap, h, thetas), dense_matmul(h, theta_sum)), 1e-12);
    EXPECT_LE(max_abs_diff(cheb_apply(lap, h, thetas), dense_matmul(h, theta_sum)), 1e-12);
}

TEST(Cheb, LinearInH) {
    Rng rng(44);
    const auto lap = normalized_laplacian(random_graph(9, 0.4, rng));
    const auto thetas = random_thetas(4, 2, 3, rng);
    const Tensor h1 = random_tensor({9, 2}, rng), h2 = random_tensor({9, 2}, rng);
    Tensor mix(h1.shape());
    for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = 2.5 * h1[i] - 0.75 * h2[i];
    const Tensor o1 = cheb_apply(lap, h1, thetas), o2 = cheb_apply(lap, h2, thetas);
    Tensor want(o1.shape());
    for (std::size_t i = 0; i < want.size(); ++i) want[i] = 2.5 * o1[i] - 0.75 * o2[i];
    EXPECT_LE(max_abs_diff(cheb_apply(lap, mix, thetas), want), 1e-10);
}

TEST(Cheb, PermutationEquivariant) {
    Rng rng(45);
    const Tensor a = random_graph(7, 0.5, rng, true);
    const std::vector<std::size_t> p{3, 0, 6, 1, 5, 2, 4};
    const Tensor h = random_tensor({7, 2}, rng);
    const auto thetas = random_thetas(3, 2, 2, rng);
    const Tensor out = cheb_apply(normalized_laplacian(a), h, thetas);
    const Tensor out_p = cheb_apply(normalized_laplacian(permute_rows_cols(a, p)), permute_rows(h, p), thetas);
    EXPECT_LE(max_abs_diff(out_p, permute_rows(out, p)), 1e-12);
}

TEST(Cheb, GradientsMatchFiniteDifferences) {
    Rng rng(46);
    const auto lap = normalized_laplacian(random_graph(6, 0.5, rng));
    ad::ParamStore ps;
    ps.add("h", random_tensor({6, 3}, rng));
    for (int k = 0; k < 4; ++k) ps.add("theta" + std::to_string(k), random_tensor({3, 2}, rng));
    const auto r = check_all(ps, [&](ad::Tape& t) {
        std::vector<ad::Var> thetas;
        for (int k = 0; k < 4; ++k) thetas.push_back(t.param(ps.get("theta" + std::to_string(k))));
        return probe_sum(cheb_apply(t.constant(lap.rescaled), t.param(ps.get("h")), thetas));
    });
    EXPECT_TRUE(r.passed) << r.max_rel_error;
}
