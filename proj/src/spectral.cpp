#include "mhnet/spectral.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

namespace mhnet {

namespace {

Eigen::MatrixXd to_eigen(const Tensor& t) {
    Eigen::MatrixXd m(t.dim(0), t.dim(1));
    for (std::size_t i = 0; i < t.dim(0); ++i)
        for (std::size_t j = 0; j < t.dim(1); ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = t(i, j);
    return m;
}

Tensor from_eigen(const Eigen::MatrixXd& m) {
    Tensor t({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())});
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) t(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = m(i, j);
    return t;
}

} // namespace

PowerIterationResult power_iteration(const Tensor& m, double tol, std::size_t max_iter) {
    const std::size_t n = m.dim(0);
    std::vector<double> v(n), w(n);
    // Generic start vector: never orthogonal to a particular eigenvector in practice.
    double norm = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        v[i] = 1.0 + 0.5 * std::sin(1.0 + 1.7 * static_cast<double>(i));
        norm += v[i] * v[i];
    }
    norm = std::sqrt(norm);
    for (auto& x : v) x /= norm;

    PowerIterationResult res;
    for (std::size_t it = 1; it <= max_iter; ++it) {
        double lambda = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) s += m(i, j) * v[j];
            w[i] = s;
            lambda += v[i] * s;
        }
        double resid = 0.0, wn = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            resid += (w[i] - lambda * v[i]) * (w[i] - lambda * v[i]);
            wn += w[i] * w[i];
        }
        res.eigenvalue = lambda;
        res.iterations = it;
        if (std::sqrt(resid) <= tol) {
            res.converged = true;
            return res;
        }
        wn = std::sqrt(wn);
        if (!(wn > 0.0)) return res;
        for (std::size_t i = 0; i < n; ++i) v[i] = w[i] / wn;
    }
    return res;
}

GraphLaplacian normalized_laplacian(const Tensor& adjacency) {
    if (adjacency.rank() != 2 || adjacency.dim(0) != adjacency.dim(1)) {
        throw std::invalid_argument("normalized_laplacian: square adjacency required, got " +
                                    shape_string(adjacency.shape()));
    }
    if (!is_symmetric(adjacency, 1e-12)) throw std::invalid_argument("normalized_laplacian: adjacency is not symmetric");
    const std::size_t m = adjacency.dim(0);
    std::vector<double> dinv(m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        double deg = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            if (adjacency(i, j) < 0.0) throw std::invalid_argument("normalized_laplacian: negative edge weight");
            deg += adjacency(i, j);
        }
        dinv[i] = deg > 0.0 ? 1.0 / std::sqrt(deg) : 0.0;
    }
    GraphLaplacian lap;
    lap.laplacian = Tensor({m, m});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j)
            lap.laplacian(i, j) = (i == j ? 1.0 : 0.0) - dinv[i] * adjacency(i, j) * dinv[j];
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i + 1; j < m; ++j) lap.laplacian(j, i) = lap.laplacian(i, j);

    const auto pi = power_iteration(lap.laplacian);
    if (pi.converged && pi.eigenvalue > 0.0) {
        lap.lambda_max = pi.eigenvalue;
    } else {
        lap.lambda_max = 2.0;
        lap.lambda_fallback = true;
    }
    lap.rescaled = Tensor({m, m});
    const double s = 2.0 / lap.lambda_max;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) lap.rescaled(i, j) = s * lap.laplacian(i, j) - (i == j ? 1.0 : 0.0);
    return lap;
}

ad::Var cheb_apply(ad::Var rescaled, ad::Var h, std::span<const ad::Var> thetas) {
    if (thetas.empty()) throw std::invalid_argument("cheb_apply: Chebyshev order K must be at least 1");
    const Tensor& l = rescaled.value();
    const Tensor& hv = h.value();
    if (l.rank() != 2 || l.dim(0) != l.dim(1) || hv.rank() != 2 || hv.dim(0) != l.dim(0)) {
        throw std::invalid_argument("cheb_apply: shape mismatch " + shape_string(l.shape()) + " vs " +
                                    shape_string(hv.shape()));
    }
    ad::Var prev = h;
    ad::Var out = ad::matmul(h, thetas[0]);
    if (thetas.size() == 1) return out;
    ad::Var cur = ad::matmul(rescaled, h);
    out = ad::add(out, ad::matmul(cur, thetas[1]));
    for (std::size_t k = 2; k < thetas.size(); ++k) {
        ad::Var next = ad::sub(ad::scale(ad::matmul(rescaled, cur), 2.0), prev);
        out = ad::add(out, ad::matmul(next, thetas[k]));
        prev = cur;
        cur = next;
    }
    return out;
}

Tensor cheb_apply(const GraphLaplacian& lap, const Tensor& h, const std::vector<Tensor>& thetas) {
    ad::Tape tape(false);
    std::vector<ad::Var> th;
    for (const auto& t : thetas) th.push_back(tape.constant(t));
    return cheb_apply(tape.constant(lap.rescaled), tape.constant(h), th).value();
}

Tensor spectral_filter_exact(const GraphLaplacian& lap, const Tensor& h, const std::vector<Tensor>& thetas) {
    const std::size_t m = lap.rescaled.dim(0);
    if (m > 64) {
        throw std::invalid_argument("spectral_filter_exact: " + std::to_string(m) +
                                    " nodes exceeds the 64-node oracle limit; use cheb_apply");
    }
    if (thetas.empty()) throw std::invalid_argument("spectral_filter_exact: K must be at least 1");
    if (h.rank() != 2 || h.dim(0) != m) throw std::invalid_argument("spectral_filter_exact: H row count mismatch");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(to_eigen(lap.rescaled));
    const Eigen::VectorXd lam = es.eigenvalues();
    const Eigen::MatrixXd u = es.eigenvectors();
    const Eigen::MatrixXd hm = to_eigen(h);
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(thetas[0].dim(1)));
    const auto n = lam.size();
    Eigen::VectorXd tprev = Eigen::VectorXd::Ones(n), tcur = lam;
    for (std::size_t k = 0; k < thetas.size(); ++k) {
        Eigen::VectorXd tk;
        if (k == 0) {
            tk = tprev;
        } else if (k == 1) {
            tk = tcur;
        } else {
            tk = 2.0 * lam.cwiseProduct(tcur) - tprev;
            tprev = tcur;
            tcur = tk;
        }
        const Eigen::MatrixXd filt = u * tk.asDiagonal() * u.transpose();
        out += filt * hm * to_eigen(thetas[k]);
    }
    return from_eigen(out);
}

std::vector<double> symmetric_eigenvalues(const Tensor& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(to_eigen(m), Eigen::EigenvaluesOnly);
    const Eigen::VectorXd ev = es.eigenvalues();
    return std::vector<double>(ev.data(), ev.data() + ev.size());
}

} // namespace mhnet
