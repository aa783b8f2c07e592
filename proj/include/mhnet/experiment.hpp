#pragma once

#include "mhnet/metrics.hpp"
#include "mhnet/model.hpp"
#include "mhnet/splits.hpp"
#include "mhnet/synth.hpp"
#include "mhnet/train.hpp"

#include <string>
#include <vector>

namespace mhnet {

/// Graphs and FC vectors of every subject, built once per cohort.
struct PreparedCohort {
    std::vector<std::string> ids;
    std::vector<SubjectInputs> inputs;
    std::vector<int> labels;
};

PreparedCohort prepare_inputs(const Cohort& cohort, const GraphOptions& graph);

struct ExperimentConfig {
    std::string run_id = "run";
    ModelConfig model;
    TrainConfig train;
    /// Mode and fractions; seeds come from train.seed.
    SplitPlan plan = SplitPlan::holdout(0.7, 0.1, 0);
    /// Holdout repeats, each with seed train.seed + r.
    std::size_t repeats = 10;
};

struct RunRecord {
    std::string run_id;
    std::uint64_t seed = 0;
    std::size_t fold = 0;
    Metrics metrics;
};

/// Trains on each fold's train split and scores its test split. The
/// validation split is held out and never used.
std::vector<RunRecord> run_experiment(const PreparedCohort& data, const ExperimentConfig& config);

/// Columns run_id, seed, fold, acc, sen, spec, auc, avg, followed by mean and
/// std rows per run_id. Undefined metrics are written as NA.
std::string metrics_csv(const std::vector<RunRecord>& records);

struct MetricSummary {
    std::string run_id;
    std::size_t runs = 0;
    double acc_mean = 0.0, acc_std = 0.0;
    double auc_mean = 0.0, auc_std = 0.0;
};
std::vector<MetricSummary> summarize(const std::vector<RunRecord>& records);

struct Variant {
    std::string name;
    ModelConfig model;
};

/// table4: the eight branch toggles; k-sweep: K = 1..5; depth-sweep: 1..4
/// blocks; encoders: gcn, cheb, res-cheb. All start from base.
std::vector<Variant> ablation_matrix(const std::string& name, const ModelConfig& base);
const std::vector<std::string>& ablation_matrix_names();

/// One holdout run per (variant, seed) with seeds base.train.seed + 0..seeds-1.
std::vector<RunRecord> run_ablation(const PreparedCohort& data, const std::vector<Variant>& variants,
                                    const ExperimentConfig& base, std::size_t seeds);

} // namespace mhnet
