#pragma once

#include "mhnet/model.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace mhnet {

struct TrainConfig {
    double lr = 1e-4;
    std::size_t epochs = 100;
    /// Applied to every branch and the head; negative keeps the model config's rates.
    double dropout = -1.0;
    /// 0 means one full batch per epoch.
    std::size_t batch_size = 0;
    std::uint64_t seed = 0;
    std::string preset = "custom";

    void validate() const;
};

/// Per-dataset defaults: abide1, abide2, adhd200, custom.
struct Preset {
    std::string name;
    double dropout = 0.0;
    std::size_t epochs = 100;
    /// Retained-edge percentage for the level graphs.
    double retained_pct = 19.03;
};

Preset preset(const std::string& name);
const std::vector<std::string>& preset_names();

struct AdamOptions {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    std::vector<Tensor> m;
    std::vector<Tensor> v;
    /// Number of steps taken so far.
    std::size_t t = 0;
};

/// One bias-corrected Adam update of every parameter from its grad.
void adam_step(ad::ParamStore& params, AdamState& state, const AdamOptions& options);

struct FitResult {
    MhNet model;
    /// Mean training loss of each epoch.
    std::vector<double> loss_trace;
};

/// Trains a fresh model on inputs[train_idx]. Deterministic in config.seed.
FitResult fit(const std::vector<SubjectInputs>& inputs, const std::vector<int>& labels,
              const std::vector<std::size_t>& train_idx, ModelConfig model_config, const TrainConfig& config);

/// Eval-mode positive-class probability of each listed subject.
std::vector<double> predict_scores(MhNet& model, const std::vector<SubjectInputs>& inputs,
                                   const std::vector<std::size_t>& idx);

} // namespace mhnet
