#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace mhnet {

struct Fold {
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
    std::vector<std::size_t> test;
};

struct SplitPlan {
    enum class Mode { kfold, holdout };
    Mode mode = Mode::holdout;
    std::size_t k = 10;
    /// Holdout fractions; test is the remainder.
    double train_frac = 0.7;
    double val_frac = 0.1;
    std::uint64_t seed = 0;
    std::vector<Fold> folds;

    static SplitPlan kfold(std::size_t k, std::uint64_t seed);
    static SplitPlan holdout(double train, double val, std::uint64_t seed);
};

/// Stratified assignment: every class is shuffled on its own and dealt out,
/// so each split's class counts are within one of the proportional share.
SplitPlan make_splits(const std::vector<int>& labels, SplitPlan plan);

/// Indices are written as subject ids.
std::string split_plan_json(const SplitPlan& plan, const std::vector<std::string>& ids);
SplitPlan parse_split_plan(const std::string& text, const std::vector<std::string>& ids);

} // namespace mhnet
