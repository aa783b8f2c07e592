#include "mhnet/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace mhnet::ad {

namespace {

double evaluate(const Objective& f) {
    Tape tape(false);
    Var v = f(tape);
    return v.value().item();
}

} // namespace

GradCheckReport finite_difference_check(ParamStore& params, const Objective& f, const GradCheckOptions& options) {
    if (!(options.h > 0.0)) throw std::invalid_argument("gradcheck: step h must be positive");

    params.zero_grad();
    double f0 = 0.0;
    {
        Tape tape(true);
        Var loss = f(tape);
        f0 = loss.value().item();
        tape.backward(loss);
    }
    const double f0_again = evaluate(f);
    if (f0_again != f0) {
        throw std::runtime_error("gradcheck: objective is not deterministic (" + std::to_string(f0) + " vs " +
                                 std::to_string(f0_again) + ")");
    }

    std::vector<std::pair<std::size_t, std::size_t>> slots;
    for (std::size_t p = 0; p < params.size(); ++p)
        for (std::size_t i = 0; i < params.at(p).value.size(); ++i) slots.emplace_back(p, i);
    if (options.samples > 0) {
        Rng rng(options.seed);
        std::shuffle(slots.begin(), slots.end(), rng);
    }

    GradCheckReport report;
    const double h = options.h;
    for (const auto& [p, i] : slots) {
        if (options.samples > 0 && report.checked >= options.samples) break;
        Parameter& param = params.at(p);
        const double orig = param.value[i];
        param.value[i] = orig + h;
        const double fp = evaluate(f);
        param.value[i] = orig - h;
        const double fm = evaluate(f);
        param.value[i] = orig;

        GradCheckEntry e;
        e.param = param.name;
        e.index = i;
        e.analytic = param.grad[i];
        e.numeric = (fp - fm) / (2.0 * h);
        const double forward = (fp - f0) / h;
        const double backward = (f0 - fm) / h;
        const double scale = std::max(1.0, std::abs(e.numeric));
        if (std::abs(forward - backward) > options.kink_threshold * scale) {
            e.skipped = true;
            ++report.skipped;
        } else {
            e.rel_error = std::abs(e.analytic - e.numeric) / scale;
            report.max_rel_error = std::max(report.max_rel_error, e.rel_error);
            ++report.checked;
        }
        report.entries.push_back(e);
    }
    report.passed = report.checked > 0 && report.max_rel_error <= options.tolerance;
    return report;
}

} // namespace mhnet::ad
