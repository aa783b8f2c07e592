#include "mhnet/experiment.hpp"

#include "mhnet/io.hpp"

#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

namespace mhnet {

PreparedCohort prepare_inputs(const Cohort& cohort, const GraphOptions& graph) {
    cohort.validate();
    PreparedCohort out;
    out.ids = cohort.ids();
    out.labels = cohort.labels;
    out.inputs.reserve(cohort.series.size());
    for (const auto& ts : cohort.series) out.inputs.push_back(prepare_subject(ts, cohort.hierarchy, graph));
    return out;
}

namespace {

RunRecord evaluate_fold(const PreparedCohort& data, const ExperimentConfig& config, const Fold& fold,
                        std::uint64_t seed, std::size_t fold_index) {
    TrainConfig train = config.train;
    train.seed = seed;
    FitResult fitted = fit(data.inputs, data.labels, fold.train, config.model, train);
    const auto scores = predict_scores(fitted.model, data.inputs, fold.test);
    std::vector<int> labels;
    for (auto i : fold.test) labels.push_back(data.labels[i]);
    return {config.run_id, seed, fold_index, compute_metrics(scores, labels)};
}

std::string cell(const std::optional<double>& v) { return v ? io::format_double(*v) : "NA"; }

} // namespace

std::vector<RunRecord> run_experiment(const PreparedCohort& data, const ExperimentConfig& config) {
    std::vector<RunRecord> out;
    if (config.plan.mode == SplitPlan::Mode::kfold) {
        SplitPlan plan = config.plan;
        plan.seed = config.train.seed;
        plan = make_splits(data.labels, plan);
        for (std::size_t f = 0; f < plan.folds.size(); ++f)
            out.push_back(evaluate_fold(data, config, plan.folds[f], config.train.seed, f));
        return out;
    }
    if (config.repeats < 1) throw std::invalid_argument("experiment: need at least one repeat");
    for (std::size_t r = 0; r < config.repeats; ++r) {
        SplitPlan plan = config.plan;
        plan.seed = config.train.seed + r;
        plan = make_splits(data.labels, plan);
        out.push_back(evaluate_fold(data, config, plan.folds.front(), plan.seed, 0));
    }
    return out;
}

std::string metrics_csv(const std::vector<RunRecord>& records) {
    std::ostringstream os;
    os << "run_id,seed,fold,acc,sen,spec,auc,avg\n";
    std::vector<std::string> order;
    std::map<std::string, std::vector<const RunRecord*>> groups;
    for (const auto& r : records) {
        if (!groups.count(r.run_id)) order.push_back(r.run_id);
        groups[r.run_id].push_back(&r);
        os << r.run_id << ',' << r.seed << ',' << r.fold << ',' << io::format_double(r.metrics.acc) << ','
           << cell(r.metrics.sen) << ',' << cell(r.metrics.spec) << ',' << cell(r.metrics.auc) << ','
           << cell(r.metrics.avg) << '\n';
    }
    for (const auto& id : order) {
        const auto& g = groups[id];
        auto stat = [&](auto get) -> std::pair<std::optional<double>, std::optional<double>> {
            double s = 0.0, ss = 0.0;
            for (const auto* r : g) {
                const std::optional<double> v = get(*r);
                if (!v) return {std::nullopt, std::nullopt};
                s += *v;
            }
            const double n = static_cast<double>(g.size());
            const double mean = s / n;
            for (const auto* r : g) ss += (*get(*r) - mean) * (*get(*r) - mean);
            return {mean, std::sqrt(ss / n)};
        };
        const auto acc = stat([](const RunRecord& r) { return std::optional<double>(r.metrics.acc); });
        const auto sen = stat([](const RunRecord& r) { return r.metrics.sen; });
        const auto spec = stat([](const RunRecord& r) { return r.metrics.spec; });
        const auto auc = stat([](const RunRecord& r) { return r.metrics.auc; });
        const auto avg = stat([](const RunRecord& r) { return r.metrics.avg; });
        os << id << ",,mean," << cell(acc.first) << ',' << cell(sen.first) << ',' << cell(spec.first) << ','
           << cell(auc.first) << ',' << cell(avg.first) << '\n';
        os << id << ",,std," << cell(acc.second) << ',' << cell(sen.second) << ',' << cell(spec.second) << ','
           << cell(auc.second) << ',' << cell(avg.second) << '\n';
    }
    return os.str();
}

std::vector<MetricSummary> summarize(const std::vector<RunRecord>& records) {
    std::vector<MetricSummary> out;
    std::map<std::string, std::size_t> at;
    std::map<std::string, std::vector<double>> accs, aucs;
    for (const auto& r : records) {
        if (!at.count(r.run_id)) {
            at[r.run_id] = out.size();
            out.push_back({r.run_id});
        }
        accs[r.run_id].push_back(r.metrics.acc);
        aucs[r.run_id].push_back(r.metrics.auc.value_or(std::nan("")));
    }
    auto moments = [](const std::vector<double>& v, double& mean, double& sd) {
        mean = 0.0;
        for (double x : v) mean += x;
        mean /= static_cast<double>(v.size());
        double ss = 0.0;
        for (double x : v) ss += (x - mean) * (x - mean);
        sd = std::sqrt(ss / static_cast<double>(v.size()));
    };
    for (auto& s : out) {
        s.runs = accs[s.run_id].size();
        moments(accs[s.run_id], s.acc_mean, s.acc_std);
        moments(aucs[s.run_id], s.auc_mean, s.auc_std);
    }
    return out;
}

const std::vector<std::string>& ablation_matrix_names() {
    static const std::vector<std::string> names{"table4", "k-sweep", "depth-sweep", "encoders"};
    return names;
}

std::vector<Variant> ablation_matrix(const std::string& name, const ModelConfig& base) {
    std::vector<Variant> out;
    if (name == "table4") {
        for (const auto& t : BranchToggles::names()) {
            ModelConfig c = base;
            c.toggles = BranchToggles::parse(t);
            out.push_back({t, c});
        }
    } else if (name == "k-sweep") {
        for (std::size_t k = 1; k <= 5; ++k) {
            ModelConfig c = base;
            c.hgnn.K = k;
            out.push_back({"K=" + std::to_string(k), c});
        }
    } else if (name == "depth-sweep") {
        for (std::size_t b = 1; b <= 4; ++b) {
            ModelConfig c = base;
            c.hgnn.blocks = b;
            out.push_back({"blocks=" + std::to_string(b), c});
        }
    } else if (name == "encoders") {
        for (auto e : {Encoder::gcn, Encoder::cheb, Encoder::res_cheb}) {
            ModelConfig c = base;
            c.hgnn.encoder = e;
            out.push_back({to_string(e), c});
        }
    } else {
        throw std::invalid_argument("unknown ablation matrix '" + name + "' (expected table4|k-sweep|depth-sweep|encoders)");
    }
    return out;
}

std::vector<RunRecord> run_ablation(const PreparedCohort& data, const std::vector<Variant>& variants,
                                    const ExperimentConfig& base, std::size_t seeds) {
    if (seeds < 1) throw std::invalid_argument("ablation: need at least one seed");
    std::vector<RunRecord> out;
    for (const auto& v : variants) {
        ExperimentConfig c = base;
        c.run_id = v.name;
        c.model = v.model;
        c.repeats = seeds;
        auto rows = run_experiment(data, c);
        out.insert(out.end(), rows.begin(), rows.end());
    }
    return out;
}

} // namespace mhnet
