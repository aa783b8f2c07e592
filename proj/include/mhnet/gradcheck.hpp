#pragma once

#include "mhnet/autodiff.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace mhnet::ad {

/// Builds the scalar objective on the given tape from the current values of
/// the parameters. Must be deterministic (no dropout, fixed RNG).
using Objective = std::function<Var(Tape&)>;

struct GradCheckOptions {
    double h = 1e-5;
    double tolerance = 1e-6;
    /// An entry is reported as a kink (and skipped) when the one-sided
    /// differences disagree by more than this, relative to max(1, |numeric|).
    /// The central-difference error of an undetected kink is at most half of it.
    double kink_threshold = 1e-3;
    /// 0 checks every scalar; otherwise that many non-kink entries are sampled.
    std::size_t samples = 0;
    std::uint64_t seed = 0;
};

struct GradCheckEntry {
    std::string param;
    std::size_t index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    double rel_error = 0.0;
    bool skipped = false;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;
    double max_rel_error = 0.0;
    std::size_t checked = 0;
    std::size_t skipped = 0;
    bool passed = false;
};

/// Compares tape gradients with central differences. Throws if re-evaluating
/// the objective at unchanged parameters gives a different value.
GradCheckReport finite_difference_check(ParamStore& params, const Objective& f, const GradCheckOptions& options);

} // namespace mhnet::ad
