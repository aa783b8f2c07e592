#include "mhnet/synth.hpp"

#include "mhnet/io.hpp"
#include "mhnet/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace mhnet {

std::vector<std::string> Cohort::ids() const {
    std::vector<std::string> out;
    out.reserve(series.size());
    for (const auto& s : series) out.push_back(s.subject_id);
    return out;
}

void Cohort::validate() const {
    if (series.size() != labels.size()) throw std::invalid_argument("cohort: series and labels differ in length");
    if (!phenotypes.empty() && phenotypes.size() != series.size()) {
        throw std::invalid_argument("cohort: phenotype records do not cover every subject");
    }
    std::set<std::string> seen;
    for (const auto& s : series)
        if (!seen.insert(s.subject_id).second) throw std::invalid_argument("cohort: duplicate subject id '" + s.subject_id + "'");
    std::size_t counts[2] = {0, 0};
    for (int y : labels) {
        if (y != 0 && y != 1) throw std::invalid_argument("cohort: label " + std::to_string(y) + " is not 0 or 1");
        ++counts[y];
    }
    if (counts[0] < 2 || counts[1] < 2) throw std::invalid_argument("cohort: need at least two subjects per class");
}

AtlasHierarchy default_hierarchy() {
    const char* networks[] = {"VN", "SMN", "DAN", "VAN", "LN", "FPN", "DMN"};
    std::vector<std::string> lan;
    std::vector<std::pair<std::string, std::string>> man, wan;
    for (const char* n : networks) {
        for (int g = 1; g <= 2; ++g) {
            const std::string group = std::string(n) + "-" + std::to_string(g);
            wan.emplace_back(group, n);
            for (int r = 1; r <= 3; ++r) {
                const std::string roi = group + "-" + std::to_string(r);
                lan.push_back(roi);
                man.emplace_back(roi, group);
            }
        }
    }
    return AtlasHierarchy::build(lan, man, wan);
}

PlantedPairs default_planted(const AtlasHierarchy& h) {
    PlantedPairs p;
    if (h.networks.size() >= 2) p.networks.emplace_back(h.networks[0], h.networks[1]);
    const std::size_t w = h.networks.size() >= 3 ? 2 : 0;
    if (h.network_offsets[w + 1] - h.network_offsets[w] >= 2) {
        p.groups.emplace_back(h.groups[h.network_offsets[w]], h.groups[h.network_offsets[w] + 1]);
    }
    return p;
}

PlantedPairs parse_planted(const std::string& text, const AtlasHierarchy& h) {
    const auto j = nlohmann::ordered_json::parse(text);
    if (!j.contains("planted")) return default_planted(h);
    PlantedPairs p;
    auto read = [](const nlohmann::ordered_json& list, auto& out, const char* what) {
        for (const auto& e : list) {
            if (!e.is_array() || e.size() != 2) {
                throw std::invalid_argument(std::string("planted ") + what + ": expected [a, b], got " + e.dump());
            }
            out.emplace_back(e[0].get<std::string>(), e[1].get<std::string>());
        }
    };
    const auto& pl = j["planted"];
    if (pl.contains("networks")) read(pl["networks"], p.networks, "networks");
    if (pl.contains("groups")) read(pl["groups"], p.groups, "groups");
    return p;
}

namespace {

std::size_t index_of(const std::vector<std::string>& names, const std::string& name, const char* what) {
    auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw std::invalid_argument(std::string("synth: unknown ") + what + " '" + name + "'");
    return static_cast<std::size_t>(it - names.begin());
}

} // namespace

Cohort synth_generate(const SynthSpec& spec, const AtlasHierarchy& h, const PlantedPairs& planted) {
    if (!(spec.signal >= 0.0)) throw std::invalid_argument("synth: signal strength must be >= 0");
    if (!(spec.noise >= 0.0)) throw std::invalid_argument("synth: noise must be >= 0");
    if (spec.subjects < 4) throw std::invalid_argument("synth: need at least 4 subjects");
    if (spec.timepoints < 2) throw std::invalid_argument("synth: need at least 2 timepoints");
    std::vector<std::pair<std::size_t, std::size_t>> net_pairs, group_pairs;
    for (const auto& [a, b] : planted.networks)
        net_pairs.emplace_back(index_of(h.networks, a, "network"), index_of(h.networks, b, "network"));
    for (const auto& [a, b] : planted.groups)
        group_pairs.emplace_back(index_of(h.groups, a, "group"), index_of(h.groups, b, "group"));

    const std::size_t W = h.networks.size(), M = h.groups.size(), R = h.rois.size(), T = spec.timepoints;
    const double mix = 1.0 / std::sqrt(1.0 + spec.signal * spec.signal);
    const char* genders[] = {"F", "M"};
    const char* sites[] = {"S1", "S2", "S3"};

    Cohort cohort;
    cohort.hierarchy = h;
    for (std::size_t s = 0; s < spec.subjects; ++s) {
        Rng rng = make_stream(spec.seed, "subject/" + std::to_string(s));
        std::normal_distribution<double> normal(0.0, 1.0);
        const int label = static_cast<int>(s % 2);
        std::ostringstream id;
        id << "sub-" << std::string(s < 10 ? "00" : s < 100 ? "0" : "") << s;

        Tensor x({T, R});
        std::vector<double> f(W), g(M);
        for (std::size_t t = 0; t < T; ++t) {
            for (auto& v : f) v = normal(rng);
            for (auto& v : g) v = normal(rng);
            if (label == 1) {
                for (auto [p, q] : net_pairs) f[q] = (spec.signal * f[p] + f[q]) * mix;
                for (auto [p, q] : group_pairs) g[q] = (spec.signal * g[p] + g[q]) * mix;
            }
            for (std::size_t r = 0; r < R; ++r) {
                const std::size_t grp = h.roi_group[r];
                x(t, r) = f[h.group_network[grp]] + 0.5 * g[grp] + spec.noise * normal(rng);
            }
        }
        cohort.series.push_back({id.str(), std::move(x), h.rois});
        cohort.labels.push_back(label);

        std::uniform_int_distribution<int> pick_gender(0, 1), pick_site(0, 2);
        std::uniform_real_distribution<double> pick_age(8.0, 30.0);
        PhenotypeRecord rec;
        rec.subject_id = id.str();
        rec.gender = genders[pick_gender(rng)];
        rec.age = pick_age(rng);
        rec.site = sites[pick_site(rng)];
        cohort.phenotypes.push_back(rec);
    }
    cohort.validate();
    return cohort;
}

void write_cohort(const Cohort& cohort, const std::filesystem::path& dir, const PlantedPairs* planted) {
    cohort.validate();
    std::filesystem::create_directories(dir / "timeseries");
    auto hj = nlohmann::ordered_json::parse(io::hierarchy_json(cohort.hierarchy));
    if (planted) {
        nlohmann::ordered_json pj;
        pj["networks"] = nlohmann::ordered_json::array();
        pj["groups"] = nlohmann::ordered_json::array();
        for (const auto& [a, b] : planted->networks) pj["networks"].push_back({a, b});
        for (const auto& [a, b] : planted->groups) pj["groups"].push_back({a, b});
        hj["planted"] = pj;
    }
    io::write_text(dir / "hierarchy.json", hj.dump(2) + "\n");
    std::ostringstream labels;
    labels << "subject_id,label\n";
    for (std::size_t i = 0; i < cohort.series.size(); ++i) labels << cohort.series[i].subject_id << ',' << cohort.labels[i] << '\n';
    io::write_text(dir / "labels.csv", labels.str());
    if (!cohort.phenotypes.empty()) write_phenotypes_csv(cohort.phenotypes, dir / "phenotypes.csv");
    for (const auto& s : cohort.series) io::write_timeseries_csv(s, dir / "timeseries" / (s.subject_id + ".csv"));
}

Cohort read_cohort(const std::filesystem::path& dir, const AtlasHierarchy* hierarchy) {
    Cohort cohort;
    cohort.hierarchy = hierarchy ? *hierarchy : io::read_hierarchy(dir / "hierarchy.json");
    std::istringstream labels(io::read_text(dir / "labels.csv"));
    std::string line;
    std::getline(labels, line);
    if (line.rfind("subject_id,label", 0) != 0) {
        throw std::invalid_argument("cohort: labels.csv must start with the header 'subject_id,label'");
    }
    std::size_t lineno = 1;
    while (std::getline(labels, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) {
            throw std::invalid_argument("cohort: labels.csv line " + std::to_string(lineno) + " has no label");
        }
        const std::string id = line.substr(0, comma);
        const std::string lab = line.substr(comma + 1);
        if (lab != "0" && lab != "1") {
            throw std::invalid_argument("cohort: subject '" + id + "' has label '" + lab + "', expected 0 or 1");
        }
        cohort.series.push_back(io::read_timeseries_csv(dir / "timeseries" / (id + ".csv"), id));
        cohort.labels.push_back(lab == "1" ? 1 : 0);
    }
    if (std::filesystem::exists(dir / "phenotypes.csv")) {
        cohort.phenotypes = align_phenotypes(read_phenotypes_csv(dir / "phenotypes.csv"), cohort.ids());
    }
    cohort.validate();
    return cohort;
}

} // namespace mhnet
