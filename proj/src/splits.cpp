#include "mhnet/splits.hpp"

#include "mhnet/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace mhnet {

SplitPlan SplitPlan::kfold(std::size_t k, std::uint64_t seed) {
    SplitPlan p;
    p.mode = Mode::kfold;
    p.k = k;
    p.seed = seed;
    return p;
}

SplitPlan SplitPlan::holdout(double train, double val, std::uint64_t seed) {
    SplitPlan p;
    p.mode = Mode::holdout;
    p.train_frac = train;
    p.val_frac = val;
    p.seed = seed;
    return p;
}

namespace {

std::map<int, std::vector<std::size_t>> by_class(const std::vector<int>& labels, std::uint64_t seed) {
    std::map<int, std::vector<std::size_t>> classes;
    for (std::size_t i = 0; i < labels.size(); ++i) classes[labels[i]].push_back(i);
    for (auto& [c, members] : classes) {
        Rng rng = make_stream(seed, "split/class" + std::to_string(c));
        std::shuffle(members.begin(), members.end(), rng);
    }
    return classes;
}

void sort_fold(Fold& f) {
    std::sort(f.train.begin(), f.train.end());
    std::sort(f.val.begin(), f.val.end());
    std::sort(f.test.begin(), f.test.end());
}

} // namespace

SplitPlan make_splits(const std::vector<int>& labels, SplitPlan plan) {
    plan.folds.clear();
    const auto classes = by_class(labels, plan.seed);
    if (classes.size() < 2) throw std::invalid_argument("splits: need at least two classes");

    if (plan.mode == SplitPlan::Mode::kfold) {
        if (plan.k < 2) throw std::invalid_argument("splits: kfold needs k >= 2");
        for (const auto& [c, members] : classes) {
            if (members.size() < plan.k) {
                throw std::invalid_argument("splits: class " + std::to_string(c) + " has " +
                                            std::to_string(members.size()) + " subjects, fewer than k = " +
                                            std::to_string(plan.k));
            }
        }
        std::vector<std::size_t> fold_of(labels.size());
        std::size_t cursor = 0;
        for (const auto& [c, members] : classes)
            for (auto i : members) fold_of[i] = cursor++ % plan.k;
        plan.folds.resize(plan.k);
        for (std::size_t i = 0; i < labels.size(); ++i)
            for (std::size_t f = 0; f < plan.k; ++f) (fold_of[i] == f ? plan.folds[f].test : plan.folds[f].train).push_back(i);
        for (auto& f : plan.folds) sort_fold(f);
        return plan;
    }

    if (!(plan.train_frac > 0.0) || !(plan.val_frac >= 0.0) || plan.train_frac + plan.val_frac >= 1.0) {
        throw std::invalid_argument("splits: holdout fractions must satisfy train > 0, val >= 0, train + val < 1");
    }
    Fold fold;
    for (const auto& [c, members] : classes) {
        const double n = static_cast<double>(members.size());
        const auto n_train = static_cast<std::size_t>(std::llround(plan.train_frac * n));
        const auto n_val = static_cast<std::size_t>(std::llround(plan.val_frac * n));
        if (n_train == 0 || n_train + n_val >= members.size()) {
            throw std::invalid_argument("splits: class " + std::to_string(c) + " with " +
                                        std::to_string(members.size()) + " subjects is too small for the holdout plan");
        }
        for (std::size_t j = 0; j < members.size(); ++j) {
            auto& dst = j < n_train ? fold.train : j < n_train + n_val ? fold.val : fold.test;
            dst.push_back(members[j]);
        }
    }
    sort_fold(fold);
    plan.folds.push_back(std::move(fold));
    return plan;
}

std::string split_plan_json(const SplitPlan& plan, const std::vector<std::string>& ids) {
    nlohmann::ordered_json j;
    j["mode"] = plan.mode == SplitPlan::Mode::kfold ? "kfold" : "holdout";
    j["k"] = plan.k;
    j["train_frac"] = plan.train_frac;
    j["val_frac"] = plan.val_frac;
    j["seed"] = plan.seed;
    j["folds"] = nlohmann::ordered_json::array();
    auto names = [&](const std::vector<std::size_t>& idx) {
        std::vector<std::string> out;
        for (auto i : idx) out.push_back(ids.at(i));
        return out;
    };
    for (const auto& f : plan.folds) {
        j["folds"].push_back({{"train", names(f.train)}, {"val", names(f.val)}, {"test", names(f.test)}});
    }
    return j.dump(2) + "\n";
}

SplitPlan parse_split_plan(const std::string& text, const std::vector<std::string>& ids) {
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < ids.size(); ++i) index[ids[i]] = i;
    try {
        const auto j = nlohmann::ordered_json::parse(text);
        SplitPlan plan;
        const auto mode = j.at("mode").get<std::string>();
        if (mode != "kfold" && mode != "holdout") throw std::invalid_argument("split plan: unknown mode '" + mode + "'");
        plan.mode = mode == "kfold" ? SplitPlan::Mode::kfold : SplitPlan::Mode::holdout;
        plan.k = j.value("k", std::size_t{10});
        plan.train_frac = j.value("train_frac", 0.7);
        plan.val_frac = j.value("val_frac", 0.1);
        plan.seed = j.value("seed", std::uint64_t{0});
        auto indices = [&](const nlohmann::ordered_json& list) {
            std::vector<std::size_t> out;
            for (const auto& e : list) {
                const auto id = e.get<std::string>();
                auto it = index.find(id);
                if (it == index.end()) throw std::invalid_argument("split plan: unknown subject '" + id + "'");
                out.push_back(it->second);
            }
            return out;
        };
        for (const auto& f : j.at("folds")) {
            plan.folds.push_back({indices(f.at("train")), indices(f.value("val", nlohmann::ordered_json::array())),
                                  indices(f.at("test"))});
        }
        return plan;
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("split plan: ") + e.what());
    }
}

} // namespace mhnet
