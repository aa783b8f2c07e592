#pragma once

#include "mhnet/connectivity.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace mhnet::io {

/// Header row of ROI names, then one row per timepoint.
RoiTimeSeries read_timeseries_csv(const std::filesystem::path& path, const std::string& subject_id = {});
void write_timeseries_csv(const RoiTimeSeries& ts, const std::filesystem::path& path);

/// {"lan": [roi...], "man": {roi: group}, "wan": {group: network}}; key order is significant.
AtlasHierarchy parse_hierarchy(const std::string& json_text);
AtlasHierarchy read_hierarchy(const std::filesystem::path& path);
std::string hierarchy_json(const AtlasHierarchy& hierarchy);

/// {"subject": id, "levels": [{"level", "gamma", "mode", "shape", "adjacency", "features_shape", "features"}...]}
std::string graph_set_json(const HierarchicalGraphSet& graphs, const std::string& subject_id);

void write_curve_csv(const std::vector<CurvePoint>& curve, const std::filesystem::path& path);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

/// Shortest text that parses back to exactly the same double.
std::string format_double(double v);

} // namespace mhnet::io
