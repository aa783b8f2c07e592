#include "mhnet/autodiff.hpp"

#include <stdexcept>

namespace mhnet::ad {

ParamStore::ParamStore(const ParamStore& other) : index_(other.index_) {
    params_.reserve(other.params_.size());
    for (const auto& p : other.params_) params_.push_back(std::make_unique<Parameter>(*p));
}

ParamStore& ParamStore::operator=(const ParamStore& other) {
    if (this != &other) {
        ParamStore copy(other);
        *this = std::move(copy);
    }
    return *this;
}

Parameter& ParamStore::add(const std::string& name, Tensor init) {
    if (index_.count(name)) throw std::invalid_argument("params: duplicate parameter name '" + name + "'");
    Tensor grad(init.shape());
    index_[name] = params_.size();
    params_.push_back(std::make_unique<Parameter>(Parameter{name, std::move(init), std::move(grad)}));
    return *params_.back();
}

Parameter& ParamStore::get(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("params: no parameter named '" + name + "'");
    return *params_[it->second];
}

const Parameter& ParamStore::get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("params: no parameter named '" + name + "'");
    return *params_[it->second];
}

std::size_t ParamStore::scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p->value.size();
    return n;
}

void ParamStore::zero_grad() {
    for (auto& p : params_) p->grad.fill(0.0);
}

bool ParamStore::all_finite() const {
    for (const auto& p : params_)
        if (!p->value.all_finite()) return false;
    return true;
}

const Tensor& Var::value() const {
    if (!tape) throw std::logic_error("var: unbound variable");
    return tape->node(id).value;
}

const Tensor& BackwardContext::out() const { return tape_.node(node_).value; }
const Tensor& BackwardContext::out_grad() const { return tape_.node(node_).grad; }
const Tensor& BackwardContext::in(std::size_t k) const {
    return tape_.node(tape_.node(node_).inputs.at(k)).value;
}

Tensor* BackwardContext::in_grad(std::size_t k) const {
    auto& in = tape_.node(tape_.node(node_).inputs.at(k));
    if (!in.needs_grad) return nullptr;
    if (in.grad.empty()) in.grad = Tensor(in.value.shape());
    return &in.grad;
}

Var Tape::constant(Tensor value) {
    if (consumed_) throw std::logic_error("tape: cannot record on a consumed tape");
    Node n;
    n.value = std::move(value);
    n.op = "constant";
    nodes_.push_back(std::move(n));
    return Var{this, nodes_.size() - 1};
}

Var Tape::param(Parameter& p) {
    if (consumed_) throw std::logic_error("tape: cannot record on a consumed tape");
    Node n;
    n.value = p.value;
    n.param = &p;
    n.needs_grad = grad_enabled_;
    n.op = "param";
    nodes_.push_back(std::move(n));
    return Var{this, nodes_.size() - 1};
}

Var Tape::record(Tensor value, std::vector<Var> inputs, BackwardFn backward, const char* op) {
    if (consumed_) throw std::logic_error("tape: cannot record on a consumed tape");
    Node n;
    n.value = std::move(value);
    n.op = op;
    n.inputs.reserve(inputs.size());
    for (const auto& v : inputs) {
        if (v.tape != this) throw std::logic_error(std::string("tape: ") + op + " mixes variables from different tapes");
        n.inputs.push_back(v.id);
        if (nodes_[v.id].needs_grad) n.needs_grad = true;
    }
    if (grad_enabled_ && n.needs_grad) {
        n.backward = std::move(backward);
    } else {
        n.needs_grad = false;
        n.inputs.clear();
    }
    nodes_.push_back(std::move(n));
    return Var{this, nodes_.size() - 1};
}

void Tape::backward(Var loss) {
    if (loss.tape != this) throw std::logic_error("tape: loss belongs to another tape");
    if (consumed_) throw std::logic_error("tape: backward already ran on this tape; re-run the forward pass");
    if (loss.value().size() != 1) {
        throw std::invalid_argument("tape: backward needs a scalar loss, got shape " + shape_string(loss.shape()));
    }
    consumed_ = true;
    if (!grad_enabled_) return;
    Node& root = nodes_[loss.id];
    if (!root.needs_grad) return;
    root.grad = Tensor(root.value.shape(), 1.0);

    for (std::size_t id = loss.id + 1; id-- > 0;) {
        Node& n = nodes_[id];
        if (!n.needs_grad || n.grad.empty()) continue;
        if (n.backward) n.backward(BackwardContext(*this, id));
        if (n.param) {
            auto& g = n.param->grad;
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
        }
        // Release intermediate gradients as soon as they are propagated.
        if (id != loss.id) n.grad = Tensor();
    }
}

} // namespace mhnet::ad
