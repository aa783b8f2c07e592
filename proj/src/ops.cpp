#include "mhnet/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mhnet::ad {

namespace {

[[noreturn]] void shape_error(const char* op, const Shape& a, const Shape& b) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_string(a) + " vs " + shape_string(b));
}

[[noreturn]] void shape_error(const char* op, const Shape& a, const std::string& what) {
    throw std::invalid_argument(std::string(op) + ": " + what + ", got " + shape_string(a));
}

Tape& tape_of(Var v) {
    if (!v.tape) throw std::logic_error("op on unbound variable");
    return *v.tape;
}

// c[m x n] += a[m x k] * b[k x n]
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        double* crow = c + i * n;
        const double* arow = a + i * k;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = arow[p];
            if (av == 0.0) continue;
            const double* brow = b + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// c[m x k] += g[m x n] * b[k x n]^T
void gemm_nt(const double* g, const double* b, double* c, std::size_t m, std::size_t n, std::size_t k) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* grow = g + i * n;
        double* crow = c + i * k;
        for (std::size_t p = 0; p < k; ++p) {
            const double* brow = b + p * n;
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) s += grow[j] * brow[j];
            crow[p] += s;
        }
    }
}

// c[k x n] += a[m x k]^T * g[m x n]
void gemm_tn(const double* a, const double* g, double* c, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        const double* grow = g + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = arow[p];
            if (av == 0.0) continue;
            double* crow = c + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * grow[j];
        }
    }
}

} // namespace

Var matmul(Var a, Var b) {
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(0)) shape_error("matmul", av.shape(), bv.shape());
    const std::size_t m = av.dim(0), k = av.dim(1), n = bv.dim(1);
    Tensor out({m, n});
    gemm_nn(av.data(), bv.data(), out.data(), m, k, n);
    return tape_of(a).record(std::move(out), {a, b}, [m, k, n](const BackwardContext& ctx) {
        const Tensor& g = ctx.out_grad();
        if (Tensor* ga = ctx.in_grad(0)) gemm_nt(g.data(), ctx.in(1).data(), ga->data(), m, n, k);
        if (Tensor* gb = ctx.in_grad(1)) gemm_tn(ctx.in(0).data(), g.data(), gb->data(), m, k, n);
    }, "matmul");
}

Var transpose(Var a) {
    const Tensor& av = a.value();
    if (av.rank() != 2) shape_error("transpose", av.shape(), "rank-2 tensor required");
    Tensor out = dense_transpose(av);
    return tape_of(a).record(std::move(out), {a}, [](const BackwardContext& ctx) {
        Tensor* ga = ctx.in_grad(0);
        const Tensor& g = ctx.out_grad();
        for (std::size_t i = 0; i < g.dim(0); ++i)
            for (std::size_t j = 0; j < g.dim(1); ++j) (*ga)(j, i) += g(i, j);
    }, "transpose");
}

Var add(Var a, Var b) {
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (av.shape() == bv.shape()) {
        Tensor out = av;
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
        return tape_of(a).record(std::move(out), {a, b}, [](const BackwardContext& ctx) {
            const Tensor& g = ctx.out_grad();
            for (std::size_t k = 0; k < 2; ++k)
                if (Tensor* gi = ctx.in_grad(k))
                    for (std::size_t i = 0; i < g.size(); ++i) (*gi)[i] += g[i];
        }, "add");
    }
    if (av.rank() == 2 && bv.rank() == 1 && bv.dim(0) == av.dim(1)) {
        const std::size_t m = av.dim(0), n = av.dim(1);
        Tensor out = av;
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) out(i, j) += bv[j];
        return tape_of(a).record(std::move(out), {a, b}, [m, n](const BackwardContext& ctx) {
            const Tensor& g = ctx.out_grad();
            if (Tensor* ga = ctx.in_grad(0))
                for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i];
            if (Tensor* gb = ctx.in_grad(1))
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < n; ++j) (*gb)[j] += g(i, j);
        }, "add");
    }
    shape_error("add", av.shape(), bv.shape());
}

Var sub(Var a, Var b) { return add(a, scale(b, -1.0)); }

Var scale(Var a, double s) {
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= s;
    return tape_of(a).record(std::move(out), {a}, [s](const BackwardContext& ctx) {
        Tensor* ga = ctx.in_grad(0);
        const Tensor& g = ctx.out_grad();
        for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += s * g[i];
    }, "scale");
}

Var hadamard(Var a, Var b) {
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (av.shape() != bv.shape()) shape_error("hadamard", av.shape(), bv.shape());
    Tensor out = av;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
    return tape_of(a).record(std::move(out), {a, b}, [](const BackwardContext& ctx) {
        const Tensor& g = ctx.out_grad();
        if (Tensor* ga = ctx.in_grad(0))
            for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * ctx.in(1)[i];
        if (Tensor* gb = ctx.in_grad(1))
            for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] += g[i] * ctx.in(0)[i];
    }, "hadamard");
}

Var relu(Var a) {
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = out[i] > 0.0 ? out[i] : 0.0;
    return tape_of(a).record(std::move(out), {a}, [](const BackwardContext& ctx) {
        Tensor* ga = ctx.in_grad(0);
        const Tensor& g = ctx.out_grad();
        const Tensor& x = ctx.in(0);
        for (std::size_t i = 0; i < g.size(); ++i)
            if (x[i] > 0.0) (*ga)[i] += g[i];
    }, "relu");
}

Var softmax(Var a) {
    const Tensor& av = a.value();
    if (av.rank() > 2) shape_error("softmax", av.shape(), "rank 1 or 2 required");
    const std::size_t width = av.rank() == 1 ? av.dim(0) : av.dim(1);
    const std::size_t rows = av.size() / width;
    Tensor out = av;
    for (std::size_t r = 0; r < rows; ++r) {
        double* row = out.data() + r * width;
        const double mx = *std::max_element(row, row + width);
        double z = 0.0;
        for (std::size_t j = 0; j < width; ++j) {
            row[j] = std::exp(row[j] - mx);
            z += row[j];
        }
        for (std::size_t j = 0; j < width; ++j) row[j] /= z;
    }
    return tape_of(a).record(std::move(out), {a}, [rows, width](const BackwardContext& ctx) {
        Tensor* ga = ctx.in_grad(0);
        const Tensor& g = ctx.out_grad();
        const Tensor& y = ctx.out();
        for (std::size_t r = 0; r < rows; ++r) {
            const std::size_t o = r * width;
            double dot = 0.0;
            for (std::size_t j = 0; j < width; ++j) dot += g[o + j] * y[o + j];
            for (std::size_t j = 0; j < width; ++j) (*ga)[o + j] += y[o + j] * (g[o + j] - dot);
        }
    }, "softmax");
}

Var concat(const std::vector<Var>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat: no inputs");
    std::vector<double> data;
    std::vector<std::size_t> lengths;
    for (const auto& p : parts) {
        const Tensor& v = p.value();
        if (v.rank() != 1) shape_error("concat", v.shape(), "rank-1 inputs required");
        data.insert(data.end(), v.values().begin(), v.values().end());
        lengths.push_back(v.size());
    }
    Tensor out = Tensor::vector(std::move(data));
    return tape_of(parts.front()).record(std::move(out), parts, [lengths](const BackwardContext& ctx) {
        const Tensor& g = ctx.out_grad();
        std::size_t off = 0;
        for (std::size_t k = 0; k < lengths.size(); ++k) {
            if (Tensor* gk = ctx.in_grad(k))
                for (std::size_t i = 0; i < lengths[k]; ++i) (*gk)[i] += g[off + i];
            off += lengths[k];
        }
    }, "concat");
}

Var slice(Var a, std::size_t offset, std::size_t length) {
    const Tensor& av = a.value();
    if (av.rank() != 1 || length == 0 || offset + length > av.size()) {
        shape_error("slice", av.shape(),
                    "range [" + std::to_string(offset) + ", " + std::to_string(offset + length) + ") out of bounds");
    }
    std::vector<double> data(av.values().begin() + static_cast<std::ptrdiff_t>(offset),
                             av.values().begin() + static_cast<std::ptrdiff_t>(offset + length));
    return tape_of(a).record(Tensor::vector(std::move(data)), {a}, [offset, length](const BackwardContext& ctx) {
        Tensor* ga = ctx.in_grad(0);
        const Tensor& g = ctx.out_grad();
        for (std::size_t i = 0; i < length; ++i) (*ga)[offset + i] += g[i];
    }, "slice");
}

Var reshape(Var a, Shape shape) {
    const Tensor& av = a.value();
    if (shape_size(shape) != av.size()) shape_error("reshape", av.shape(), shape);
    return tape_of(a).record(av.reshaped(std::move(shape)), {a}, [](const BackwardContext& ctx) {
        Tensor* ga = ctx.in_grad(0);
        const Tensor& g = ctx.out_grad();
        for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i];
    }, "reshape");
}

Var sum(Var a) {
    double s = 0.0;
    for (double v : a.value().values()) s += v;
    return tape_of(a).record(Tensor::scalar(s), {a}, [](const BackwardContext& ctx) {
        Tensor* ga = ctx.in_grad(0);
        const double g = ctx.out_grad()[0];
        for (std::size_t i = 0; i < ga->size(); ++i) (*ga)[i] += g;
    }, "sum");
}

Var mean(Var a, std::size_t axis) {
    const Tensor& av = a.value();
    if (av.rank() != 2 || axis > 1) shape_error("mean", av.shape(), "rank-2 tensor and axis 0 or 1 required");
    const std::size_t m = av.dim(0), n = av.dim(1);
    Tensor out({axis == 0 ? n : m});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[axis == 0 ? j : i] += av(i, j);
    const double inv = 1.0 / static_cast<double>(axis == 0 ? m : n);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= inv;
    return tape_of(a).record(std::move(out), {a}, [m, n, axis, inv](const BackwardContext& ctx) {
        Tensor* ga = ctx.in_grad(0);
        const Tensor& g = ctx.out_grad();
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) (*ga)(i, j) += inv * g[axis == 0 ? j : i];
    }, "mean");
}

Var conv1d(Var x, Var kernel, Var bias, Conv1dSpec spec) {
    const Tensor& xv = x.value();
    const Tensor& kv = kernel.value();
    const Tensor& bv = bias.value();
    const bool flat = xv.rank() == 1;
    if (spec.stride == 0) throw std::invalid_argument("conv1d: stride must be positive");
    if (flat != (kv.rank() == 1) || (!flat && (xv.rank() != 2 || kv.rank() != 3))) {
        shape_error("conv1d", xv.shape(), kv.shape());
    }
    const std::size_t cin = flat ? 1 : xv.dim(0);
    const std::size_t len = flat ? xv.dim(0) : xv.dim(1);
    const std::size_t cout = flat ? 1 : kv.dim(0);
    const std::size_t kin = flat ? 1 : kv.dim(1);
    const std::size_t ks = flat ? kv.dim(0) : kv.dim(2);
    if (kin != cin) shape_error("conv1d", xv.shape(), kv.shape());
    if (bv.size() != cout) shape_error("conv1d", kv.shape(), bv.shape());
    if (ks > len) {
        throw std::invalid_argument("conv1d: kernel size " + std::to_string(ks) + " exceeds input length " +
                                    std::to_string(len));
    }
    const std::size_t stride = spec.stride;
    const std::size_t olen = (len - ks) / stride + 1;
    Tensor out(flat ? Shape{olen} : Shape{cout, olen});
    for (std::size_t o = 0; o < cout; ++o) {
        double* orow = out.data() + o * olen;
        for (std::size_t i = 0; i < olen; ++i) orow[i] = bv[o];
        for (std::size_t c = 0; c < cin; ++c) {
            const double* xrow = xv.data() + c * len;
            const double* w = kv.data() + (o * cin + c) * ks;
            for (std::size_t i = 0; i < olen; ++i) {
                const double* xs = xrow + i * stride;
                double s = 0.0;
                for (std::size_t j = 0; j < ks; ++j) s += w[j] * xs[j];
                orow[i] += s;
            }
        }
    }
    return tape_of(x).record(std::move(out), {x, kernel, bias},
        [cin, len, cout, ks, stride, olen](const BackwardContext& ctx) {
            const Tensor& g = ctx.out_grad();
            const Tensor& xv = ctx.in(0);
            const Tensor& kv = ctx.in(1);
            Tensor* gx = ctx.in_grad(0);
            Tensor* gk = ctx.in_grad(1);
            Tensor* gb = ctx.in_grad(2);
            for (std::size_t o = 0; o < cout; ++o) {
                const double* grow = g.data() + o * olen;
                if (gb)
                    for (std::size_t i = 0; i < olen; ++i) (*gb)[o] += grow[i];
                for (std::size_t c = 0; c < cin; ++c) {
                    const double* xrow = xv.data() + c * len;
                    const double* w = kv.data() + (o * cin + c) * ks;
                    for (std::size_t i = 0; i < olen; ++i) {
                        const double gi = grow[i];
                        if (gi == 0.0) continue;
                        const std::size_t base = i * stride;
                        if (gk) {
                            double* gw = gk->data() + (o * cin + c) * ks;
                            for (std::size_t j = 0; j < ks; ++j) gw[j] += gi * xrow[base + j];
                        }
                        if (gx) {
                            double* gxr = gx->data() + c * len;
                            for (std::size_t j = 0; j < ks; ++j) gxr[base + j] += gi * w[j];
                        }
                    }
                }
            }
        }, "conv1d");
}

Var triu_flatten(Var a, bool include_diagonal) {
    const Tensor& av = a.value();
    if (av.rank() != 2 || av.dim(0) != av.dim(1)) shape_error("triu_flatten", av.shape(), "square matrix required");
    const std::size_t n = av.dim(0);
    if (!include_diagonal && n < 2) shape_error("triu_flatten", av.shape(), "strict upper triangle needs n >= 2");
    const std::size_t shift = include_diagonal ? 0 : 1;
    std::vector<double> data;
    data.reserve(include_diagonal ? n * (n + 1) / 2 : n * (n - 1) / 2);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + shift; j < n; ++j) data.push_back(av(i, j));
    return tape_of(a).record(Tensor::vector(std::move(data)), {a}, [n, shift](const BackwardContext& ctx) {
        Tensor* ga = ctx.in_grad(0);
        const Tensor& g = ctx.out_grad();
        std::size_t k = 0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + shift; j < n; ++j) (*ga)(i, j) += g[k++];
    }, "triu_flatten");
}

Var outer(Var a, Var b) {
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (av.rank() != 1 || bv.rank() != 1) shape_error("outer", av.shape(), bv.shape());
    const std::size_t m = av.size(), n = bv.size();
    Tensor out({m, n});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out(i, j) = av[i] * bv[j];
    return tape_of(a).record(std::move(out), {a, b}, [m, n](const BackwardContext& ctx) {
        const Tensor& g = ctx.out_grad();
        const Tensor& av = ctx.in(0);
        const Tensor& bv = ctx.in(1);
        Tensor* ga = ctx.in_grad(0);
        Tensor* gb = ctx.in_grad(1);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                if (ga) (*ga)[i] += g(i, j) * bv[j];
                if (gb) (*gb)[j] += g(i, j) * av[i];
            }
    }, "outer");
}

Var block_norm(Var h, const std::vector<std::size_t>& offsets, Var gamma, Var beta, double eps) {
    const Tensor& hv = h.value();
    if (hv.rank() != 2) shape_error("block_norm", hv.shape(), "rank-2 input required");
    const std::size_t m = hv.dim(0), d = hv.dim(1);
    if (gamma.value().shape() != Shape{d}) shape_error("block_norm", hv.shape(), gamma.value().shape());
    if (beta.value().shape() != Shape{d}) shape_error("block_norm", hv.shape(), beta.value().shape());
    if (offsets.size() < 2 || offsets.front() != 0 || offsets.back() != m) {
        throw std::invalid_argument("block_norm: block offsets must start at 0 and end at " + std::to_string(m));
    }
    for (std::size_t b = 0; b + 1 < offsets.size(); ++b)
        if (offsets[b + 1] <= offsets[b]) throw std::invalid_argument("block_norm: empty or unordered block");

    const std::size_t nblocks = offsets.size() - 1;
    Tensor xhat({m, d});
    std::vector<double> inv_std(nblocks * d);
    const Tensor& gv = gamma.value();
    const Tensor& bv = beta.value();
    Tensor out({m, d});
    for (std::size_t b = 0; b < nblocks; ++b) {
        const std::size_t lo = offsets[b], hi = offsets[b + 1];
        const double cnt = static_cast<double>(hi - lo);
        for (std::size_t j = 0; j < d; ++j) {
            double mu = 0.0;
            for (std::size_t i = lo; i < hi; ++i) mu += hv(i, j);
            mu /= cnt;
            double var = 0.0;
            for (std::size_t i = lo; i < hi; ++i) var += (hv(i, j) - mu) * (hv(i, j) - mu);
            var /= cnt;
            const double is = 1.0 / std::sqrt(var + eps);
            inv_std[b * d + j] = is;
            for (std::size_t i = lo; i < hi; ++i) {
                xhat(i, j) = (hv(i, j) - mu) * is;
                out(i, j) = gv[j] * xhat(i, j) + bv[j];
            }
        }
    }
    return h.tape->record(std::move(out), {h, gamma, beta},
        [offsets, m, d, nblocks, xhat = std::move(xhat), inv_std = std::move(inv_std)](const BackwardContext& ctx) {
            const Tensor& g = ctx.out_grad();
            const Tensor& gv = ctx.in(1);
            Tensor* gh = ctx.in_grad(0);
            Tensor* gg = ctx.in_grad(1);
            Tensor* gbeta = ctx.in_grad(2);
            for (std::size_t b = 0; b < nblocks; ++b) {
                const std::size_t lo = offsets[b], hi = offsets[b + 1];
                const double cnt = static_cast<double>(hi - lo);
                for (std::size_t j = 0; j < d; ++j) {
                    double sum_g = 0.0, sum_gx = 0.0;
                    for (std::size_t i = lo; i < hi; ++i) {
                        sum_g += g(i, j);
                        sum_gx += g(i, j) * xhat(i, j);
                    }
                    if (gg) (*gg)[j] += sum_gx;
                    if (gbeta) (*gbeta)[j] += sum_g;
                    if (gh) {
                        const double k = gv[j] * inv_std[b * d + j] / cnt;
                        for (std::size_t i = lo; i < hi; ++i)
                            (*gh)(i, j) += k * (cnt * g(i, j) - sum_g - xhat(i, j) * sum_gx);
                    }
                }
            }
            (void)m;
        }, "block_norm");
}

Var dropout(Var a, double rate, bool train, Rng& rng) {
    if (!(rate >= 0.0 && rate < 1.0)) {
        throw std::invalid_argument("dropout: rate must lie in [0, 1), got " + std::to_string(rate));
    }
    if (!train || rate == 0.0) return a;
    const Tensor& av = a.value();
    Tensor mask(av.shape());
    std::bernoulli_distribution keep(1.0 - rate);
    const double scale_kept = 1.0 / (1.0 - rate);
    for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = keep(rng) ? scale_kept : 0.0;
    Tensor out = av;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
    return tape_of(a).record(std::move(out), {a}, [mask = std::move(mask)](const BackwardContext& ctx) {
        Tensor* ga = ctx.in_grad(0);
        const Tensor& g = ctx.out_grad();
        for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * mask[i];
    }, "dropout");
}

Var weighted_sum(const std::vector<Var>& items, Var weights) {
    if (items.empty()) throw std::invalid_argument("weighted_sum: no inputs");
    const Tensor& wv = weights.value();
    if (wv.rank() != 1 || wv.size() != items.size()) {
        shape_error("weighted_sum", wv.shape(), "one weight per item (" + std::to_string(items.size()) + ") required");
    }
    const Shape& shape = items.front().value().shape();
    Tensor out(shape);
    for (std::size_t l = 0; l < items.size(); ++l) {
        const Tensor& iv = items[l].value();
        if (iv.shape() != shape) shape_error("weighted_sum", shape, iv.shape());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += wv[l] * iv[i];
    }
    std::vector<Var> inputs = items;
    inputs.push_back(weights);
    const std::size_t count = items.size();
    return tape_of(weights).record(std::move(out), inputs, [count](const BackwardContext& ctx) {
        const Tensor& g = ctx.out_grad();
        const Tensor& wv = ctx.in(count);
        Tensor* gw = ctx.in_grad(count);
        for (std::size_t l = 0; l < count; ++l) {
            const Tensor& iv = ctx.in(l);
            if (Tensor* gi = ctx.in_grad(l))
                for (std::size_t i = 0; i < g.size(); ++i) (*gi)[i] += wv[l] * g[i];
            if (gw) {
                double s = 0.0;
                for (std::size_t i = 0; i < g.size(); ++i) s += g[i] * iv[i];
                (*gw)[l] += s;
            }
        }
    }, "weighted_sum");
}

Var cross_entropy(Var probs, const std::vector<int>& labels, const std::vector<double>& row_weights) {
    constexpr double kClamp = 1e-12;
    const Tensor& pv = probs.value();
    const bool single = pv.rank() == 1;
    if (!((single && pv.dim(0) == 2) || (pv.rank() == 2 && pv.dim(1) == 2))) {
        shape_error("cross_entropy", pv.shape(), "probabilities of shape [2] or [N x 2] required");
    }
    const std::size_t n = single ? 1 : pv.dim(0);
    if (labels.size() != n) {
        throw std::invalid_argument("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                                    std::to_string(n) + " rows");
    }
    for (int y : labels)
        if (y != 0 && y != 1) throw std::invalid_argument("cross_entropy: labels must be 0 or 1, got " + std::to_string(y));
    std::vector<double> w = row_weights.empty() ? std::vector<double>(n, 1.0) : row_weights;
    if (w.size() != n) throw std::invalid_argument("cross_entropy: row weight count mismatch");
    double wsum = 0.0;
    for (double v : w) wsum += v;
    if (!(wsum > 0.0)) throw std::invalid_argument("cross_entropy: row weights must have positive sum");

    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (w[i] == 0.0) continue;
        const double p1 = pv[i * 2 + 1];
        const double p0 = 1.0 - p1;
        const double term = labels[i] == 1 ? std::log(std::max(p1, kClamp)) : std::log(std::max(p0, kClamp));
        loss -= w[i] * term;
    }
    loss /= wsum;
    return tape_of(probs).record(Tensor::scalar(loss), {probs},
        [labels, w = std::move(w), wsum, n](const BackwardContext& ctx) {
            Tensor* gp = ctx.in_grad(0);
            const double g = ctx.out_grad()[0];
            const Tensor& pv = ctx.in(0);
            for (std::size_t i = 0; i < n; ++i) {
                if (w[i] == 0.0) continue;
                const double p1 = pv[i * 2 + 1];
                const double c = g * w[i] / wsum;
                // Only p1 enters the loss; 1 - p1 is formed from it directly.
                if (labels[i] == 1) {
                    if (p1 > kClamp) (*gp)[i * 2 + 1] -= c / p1;
                } else {
                    const double p0 = 1.0 - p1;
                    if (p0 > kClamp) (*gp)[i * 2 + 1] += c / p0;
                }
            }
        }, "cross_entropy");
}

Var cosine_affinity(Var u) {
    const Tensor& uv = u.value();
    if (uv.rank() != 2) shape_error("cosine_affinity", uv.shape(), "rank-2 input required");
    const std::size_t m = uv.dim(0), e = uv.dim(1);
    Tensor unit({m, e});
    std::vector<double> norms(m);
    for (std::size_t i = 0; i < m; ++i) {
        double s = 0.0;
        for (std::size_t k = 0; k < e; ++k) s += uv(i, k) * uv(i, k);
        norms[i] = std::sqrt(s);
        if (!(norms[i] > 0.0)) {
            throw std::invalid_argument("cosine_affinity: row " + std::to_string(i) + " is the zero vector");
        }
        for (std::size_t k = 0; k < e; ++k) unit(i, k) = uv(i, k) / norms[i];
    }
    Tensor out({m, m});
    for (std::size_t i = 0; i < m; ++i) {
        out(i, i) = 1.0;
        for (std::size_t j = i + 1; j < m; ++j) {
            double c = 0.0;
            for (std::size_t k = 0; k < e; ++k) c += unit(i, k) * unit(j, k);
            c = std::clamp(c, -1.0, 1.0);
            out(i, j) = out(j, i) = (c + 1.0) / 2.0;
        }
    }
    return tape_of(u).record(std::move(out), {u},
        [m, e, unit = std::move(unit), norms = std::move(norms)](const BackwardContext& ctx) {
            Tensor* gu = ctx.in_grad(0);
            if (!gu) return;
            const Tensor& g = ctx.out_grad();
            // d out(i,j) / d unit_i = unit_j / 2 for i != j.
            Tensor gunit({m, e});
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < m; ++j) {
                    if (i == j) continue;
                    const double c = 0.5 * (g(i, j) + g(j, i));
                    if (c == 0.0) continue;
                    for (std::size_t k = 0; k < e; ++k) gunit(i, k) += c * unit(j, k);
                }
            for (std::size_t i = 0; i < m; ++i) {
                double dot = 0.0;
                for (std::size_t k = 0; k < e; ++k) dot += gunit(i, k) * unit(i, k);
                for (std::size_t k = 0; k < e; ++k) (*gu)(i, k) += (gunit(i, k) - dot * unit(i, k)) / norms[i];
            }
        }, "cosine_affinity");
}

Var gcn_normalize(Var a) {
    const Tensor& av = a.value();
    if (av.rank() != 2 || av.dim(0) != av.dim(1)) shape_error("gcn_normalize", av.shape(), "square matrix required");
    const std::size_t m = av.dim(0);
    std::vector<double> s(m);
    for (std::size_t i = 0; i < m; ++i) {
        double deg = 1.0;
        for (std::size_t j = 0; j < m; ++j) deg += av(i, j);
        if (!(deg > 0.0)) throw std::invalid_argument("gcn_normalize: non-positive degree at node " + std::to_string(i));
        s[i] = 1.0 / std::sqrt(deg);
    }
    Tensor out({m, m});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) out(i, j) = s[i] * (av(i, j) + (i == j ? 1.0 : 0.0)) * s[j];
    return tape_of(a).record(std::move(out), {a}, [m, s = std::move(s)](const BackwardContext& ctx) {
        Tensor* ga = ctx.in_grad(0);
        const Tensor& g = ctx.out_grad();
        const Tensor& out = ctx.out();
        // out_ij = s_i ahat_ij s_j, s_i = deg_i^{-1/2}, deg_i = sum_j ahat_ij.
        // d out_kl / d deg_i = -1/2 out_kl (delta_ki + delta_li) / deg_i.
        std::vector<double> ddeg(m, 0.0);
        for (std::size_t k = 0; k < m; ++k)
            for (std::size_t l = 0; l < m; ++l) {
                const double t = -0.5 * g(k, l) * out(k, l);
                ddeg[k] += t * s[k] * s[k];
                ddeg[l] += t * s[l] * s[l];
            }
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < m; ++j) (*ga)(i, j) += g(i, j) * s[i] * s[j] + ddeg[i];
    }, "gcn_normalize");
}

} // namespace mhnet::ad
