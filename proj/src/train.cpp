#include "mhnet/train.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mhnet {

void TrainConfig::validate() const {
    if (!(lr > 0.0) || !std::isfinite(lr)) throw std::invalid_argument("train: learning rate must be positive");
    if (epochs < 1) throw std::invalid_argument("train: need at least one epoch");
    if (dropout >= 1.0) throw std::invalid_argument("train: dropout must lie in [0, 1)");
}

Preset preset(const std::string& name) {
    if (name == "abide1") return {"abide1", 0.3, 240, 19.03};
    if (name == "abide2") return {"abide2", 0.25, 200, 17.14};
    if (name == "adhd200") return {"adhd200", 0.3, 300, 10.23};
    if (name == "custom") return {"custom", 0.0, 100, 19.03};
    throw std::invalid_argument("unknown preset '" + name + "' (expected abide1|abide2|adhd200|custom)");
}

const std::vector<std::string>& preset_names() {
    static const std::vector<std::string> names{"abide1", "abide2", "adhd200", "custom"};
    return names;
}

void adam_step(ad::ParamStore& params, AdamState& state, const AdamOptions& o) {
    if (state.m.empty()) {
        for (std::size_t i = 0; i < params.size(); ++i) {
            state.m.emplace_back(params.at(i).value.shape());
            state.v.emplace_back(params.at(i).value.shape());
        }
    }
    if (state.m.size() != params.size()) throw std::invalid_argument("adam: state does not match the parameter set");
    ++state.t;
    const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(state.t));
    const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& p = params.at(i);
        if (p.grad.empty()) continue;
        auto& m = state.m[i];
        auto& v = state.v[i];
        for (std::size_t j = 0; j < p.value.size(); ++j) {
            const double g = p.grad[j];
            m[j] = o.beta1 * m[j] + (1.0 - o.beta1) * g;
            v[j] = o.beta2 * v[j] + (1.0 - o.beta2) * g * g;
            p.value[j] -= o.lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + o.eps);
        }
    }
}

FitResult fit(const std::vector<SubjectInputs>& inputs, const std::vector<int>& labels,
              const std::vector<std::size_t>& train_idx, ModelConfig model_config, const TrainConfig& config) {
    config.validate();
    if (inputs.size() != labels.size()) throw std::invalid_argument("fit: inputs and labels differ in length");
    if (train_idx.empty()) throw std::invalid_argument("fit: empty training set");
    for (auto i : train_idx)
        if (i >= inputs.size()) throw std::invalid_argument("fit: training index out of range");
    if (config.dropout >= 0.0) model_config.set_dropout(config.dropout);

    FitResult result{MhNet(model_config, dims_of(inputs[train_idx.front()]), config.seed), {}};
    MhNet& model = result.model;
    Rng shuffle_rng = make_stream(config.seed, "shuffle");
    Rng dropout_rng = make_stream(config.seed, "dropout");
    AdamState state;
    const AdamOptions adam{config.lr};
    const std::size_t batch = config.batch_size == 0 ? train_idx.size() : std::min(config.batch_size, train_idx.size());

    std::vector<std::size_t> order = train_idx;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += batch) {
            const std::size_t end = std::min(order.size(), start + batch);
            const double w = 1.0 / static_cast<double>(end - start);
            model.params().zero_grad();
            for (std::size_t s = start; s < end; ++s) {
                const std::size_t i = order[s];
                ad::Tape tape;
                ad::Var probs = model.probabilities(tape, inputs[i], true, dropout_rng);
                ad::Var loss = ad::cross_entropy(probs, {labels[i]});
                epoch_loss += loss.value().item();
                tape.backward(ad::scale(loss, w));
            }
            adam_step(model.params(), state, adam);
            if (!model.params().all_finite()) {
                throw std::runtime_error("fit: non-finite parameter after epoch " + std::to_string(epoch + 1));
            }
        }
        result.loss_trace.push_back(epoch_loss / static_cast<double>(order.size()));
    }
    return result;
}

std::vector<double> predict_scores(MhNet& model, const std::vector<SubjectInputs>& inputs,
                                   const std::vector<std::size_t>& idx) {
    std::vector<double> scores;
    scores.reserve(idx.size());
    for (auto i : idx) scores.push_back(model.score(inputs.at(i)));
    return scores;
}

} // namespace mhnet
