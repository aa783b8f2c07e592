#pragma once

#include "mhnet/rng.hpp"
#include "mhnet/tensor.hpp"

#include <cstddef>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace mhnet::ad {

struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;
};

/// Owns every trainable tensor of a model under unique dotted names.
/// Iteration order is insertion order, which is also checkpoint order.
class ParamStore {
public:
    ParamStore() = default;
    ParamStore(const ParamStore& other);
    ParamStore& operator=(const ParamStore& other);
    ParamStore(ParamStore&&) noexcept = default;
    ParamStore& operator=(ParamStore&&) noexcept = default;

    Parameter& add(const std::string& name, Tensor init);
    Parameter& get(const std::string& name);
    const Parameter& get(const std::string& name) const;
    bool contains(const std::string& name) const { return index_.count(name) != 0; }

    std::size_t size() const { return params_.size(); }
    std::size_t scalar_count() const;
    Parameter& at(std::size_t i) { return *params_[i]; }
    const Parameter& at(std::size_t i) const { return *params_[i]; }

    void zero_grad();
    bool all_finite() const;

private:
    std::vector<std::unique_ptr<Parameter>> params_;
    std::map<std::string, std::size_t> index_;
};

class Tape;

/// Handle to a value recorded on a Tape.
struct Var {
    Tape* tape = nullptr;
    std::size_t id = 0;

    const Tensor& value() const;
    const Shape& shape() const { return value().shape(); }
    std::size_t size() const { return value().size(); }
};

/// Everything a node's backward rule may touch.
class BackwardContext {
public:
    BackwardContext(Tape& tape, std::size_t node) : tape_(tape), node_(node) {}
    const Tensor& out() const;
    const Tensor& out_grad() const;
    const Tensor& in(std::size_t k) const;
    /// Gradient buffer of input k, or nullptr if that input needs no gradient.
    Tensor* in_grad(std::size_t k) const;

private:
    Tape& tape_;
    std::size_t node_;
};

using BackwardFn = std::function<void(const BackwardContext&)>;

/// Records primitive applications in execution order (which is therefore a
/// topological order) and replays them in reverse for gradients. A tape
/// supports exactly one backward pass.
class Tape {
public:
    explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    bool grad_enabled() const { return grad_enabled_; }

    Var constant(Tensor value);
    /// Leaf bound to a Parameter; backward accumulates into p.grad.
    Var param(Parameter& p);

    Var record(Tensor value, std::vector<Var> inputs, BackwardFn backward, const char* op);

    /// Accumulates d(loss)/d(param) into every bound Parameter's grad.
    void backward(Var loss);

    std::size_t node_count() const { return nodes_.size(); }
    bool consumed() const { return consumed_; }

private:
    friend struct Var;
    friend class BackwardContext;

    struct Node {
        Tensor value;
        Tensor grad;
        std::vector<std::size_t> inputs;
        BackwardFn backward;
        Parameter* param = nullptr;
        bool needs_grad = false;
        const char* op = "";
    };

    Node& node(std::size_t id) { return nodes_[id]; }
    const Node& node(std::size_t id) const { return nodes_[id]; }

    std::deque<Node> nodes_;
    bool grad_enabled_;
    bool consumed_ = false;
};

// ---------------------------------------------------------------------------
// Primitives. Every op throws std::invalid_argument naming itself and the
// offending shapes on a shape mismatch.

Var matmul(Var a, Var b);
Var transpose(Var a);
/// Elementwise sum; b may also be a rank-1 [n] bias broadcast over the rows of a [m x n].
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var scale(Var a, double s);
Var hadamard(Var a, Var b);
Var relu(Var a);
/// Softmax over the last axis (whole vector for rank 1, each row for rank 2).
Var softmax(Var a);
/// Concatenates rank-1 tensors.
Var concat(const std::vector<Var>& parts);
/// Rank-1 slice [offset, offset + length).
Var slice(Var a, std::size_t offset, std::size_t length);
Var reshape(Var a, Shape shape);
Var sum(Var a);
/// Mean over axis 0 or 1 of a rank-2 tensor; result is rank 1.
Var mean(Var a, std::size_t axis);

struct Conv1dSpec {
    std::size_t stride = 1;
};
/// x [C_in x L] (or rank-1 [L] for one channel), kernel [C_out x C_in x n]
/// (or rank-1 [n]), bias [C_out] (or scalar). y[o][i] = sum_c sum_j w[o][c][j] x[c][i*stride+j] + b[o].
Var conv1d(Var x, Var kernel, Var bias, Conv1dSpec spec = {});

/// Entries (i, j) with j > i (or j >= i when include_diagonal) flattened row by row.
Var triu_flatten(Var a, bool include_diagonal);
/// a [m] , b [n] -> [m x n] with entry a_i * b_j.
Var outer(Var a, Var b);

/// Normalizes each column of h [m x d] over the rows of every block
/// [offsets[b], offsets[b+1]), then applies per-column gamma/beta.
Var block_norm(Var h, const std::vector<std::size_t>& offsets, Var gamma, Var beta, double eps = 1e-5);

/// Inverted dropout. Identity when !train.
Var dropout(Var a, double rate, bool train, Rng& rng);

/// Sum_l weights[l] * items[l]; weights is rank-1 of length items.size().
Var weighted_sum(const std::vector<Var>& items, Var weights);

/// Binary cross-entropy on the positive-class column of probs ([2] or [N x 2]).
/// Each log argument is clamped from below at 1e-12. Optional per-row weights
/// select a labeled subset; the result is the weighted mean.
Var cross_entropy(Var probs, const std::vector<int>& labels, const std::vector<double>& row_weights = {});

/// Row-wise cosine similarity mapped to [0,1]: (cos(u_i, u_j) + 1) / 2. All rows must be nonzero.
Var cosine_affinity(Var u);
/// D^{-1/2} (A + I) D^{-1/2} with D the row sums of A + I.
Var gcn_normalize(Var a);

} // namespace mhnet::ad
