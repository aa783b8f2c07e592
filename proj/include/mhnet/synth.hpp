#pragma once

#include "mhnet/connectivity.hpp"
#include "mhnet/population.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace mhnet {

struct Cohort {
    AtlasHierarchy hierarchy;
    std::vector<RoiTimeSeries> series;
    std::vector<int> labels;
    std::vector<PhenotypeRecord> phenotypes;

    std::vector<std::string> ids() const;
    /// Throws unless ids are unique, labels are binary and each class has two subjects.
    void validate() const;
};

/// Which block pairs class 1 couples, by network and group name.
struct PlantedPairs {
    std::vector<std::pair<std::string, std::string>> networks;
    std::vector<std::pair<std::string, std::string>> groups;
};

struct SynthSpec {
    std::size_t subjects = 200;
    double signal = 0.6;
    double noise = 0.5;
    std::size_t timepoints = 120;
    std::uint64_t seed = 0;
};

/// 7 networks x 2 groups x 3 ROIs.
AtlasHierarchy default_hierarchy();
/// First two networks, plus the first two groups of the third network.
PlantedPairs default_planted(const AtlasHierarchy& hierarchy);
/// The optional "planted": {"networks": [[a, b]...], "groups": [[a, b]...]} key of a hierarchy file.
PlantedPairs parse_planted(const std::string& hierarchy_json, const AtlasHierarchy& hierarchy);

/// ROI x = f_network + 0.5 g_group + noise * e with independent N(0,1) factors.
/// In class 1 each planted pair (P, Q) gets f_Q <- (s f_P + f_Q) / sqrt(1 + s^2).
Cohort synth_generate(const SynthSpec& spec, const AtlasHierarchy& hierarchy, const PlantedPairs& planted);

/// DIR/hierarchy.json, DIR/labels.csv, DIR/phenotypes.csv, DIR/timeseries/<id>.csv.
void write_cohort(const Cohort& cohort, const std::filesystem::path& dir, const PlantedPairs* planted = nullptr);
/// Uses DIR/hierarchy.json unless a hierarchy is given; phenotypes are optional.
Cohort read_cohort(const std::filesystem::path& dir, const AtlasHierarchy* hierarchy = nullptr);

} // namespace mhnet
