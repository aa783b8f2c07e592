#include "mhnet/io.hpp"

#include <json.hpp>

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mhnet::io {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, ',')) {
        while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
        std::size_t b = 0;
        while (b < cell.size() && cell[b] == ' ') ++b;
        out.push_back(cell.substr(b));
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_number(const std::string& s, const std::string& where) {
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) throw std::invalid_argument(where + ": cannot parse number '" + s + "'");
    return v;
}

} // namespace

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) throw std::runtime_error("format_double failed");
    return std::string(buf, ptr);
}

RoiTimeSeries read_timeseries_csv(const std::filesystem::path& path, const std::string& subject_id) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument(path.string() + ": empty file");
    RoiTimeSeries ts;
    ts.subject_id = subject_id.empty() ? path.stem().string() : subject_id;
    ts.roi_names = split_csv_line(line);
    const std::size_t r = ts.roi_names.size();
    std::vector<double> data;
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        const auto cells = split_csv_line(line);
        const std::string where = path.string() + ":" + std::to_string(rows + 2);
        if (cells.size() != r) {
            throw std::invalid_argument(where + ": expected " + std::to_string(r) + " columns, got " +
                                        std::to_string(cells.size()));
        }
        for (const auto& c : cells) data.push_back(parse_number(c, where));
        ++rows;
    }
    if (rows == 0) throw std::invalid_argument(path.string() + ": no timepoints");
    ts.samples = Tensor::input({rows, r}, std::move(data));
    ts.validate();
    return ts;
}

void write_timeseries_csv(const RoiTimeSeries& ts, const std::filesystem::path& path) {
    std::ostringstream os;
    for (std::size_t j = 0; j < ts.roi_names.size(); ++j) os << (j ? "," : "") << ts.roi_names[j];
    os << '\n';
    for (std::size_t t = 0; t < ts.timepoints(); ++t) {
        for (std::size_t j = 0; j < ts.roi_count(); ++j) os << (j ? "," : "") << format_double(ts.samples(t, j));
        os << '\n';
    }
    write_text(path, os.str());
}

AtlasHierarchy parse_hierarchy(const std::string& json_text) {
    nlohmann::ordered_json j;
    try {
        j = nlohmann::ordered_json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("hierarchy: invalid JSON: ") + e.what());
    }
    for (const char* key : {"lan", "man", "wan"})
        if (!j.contains(key)) throw std::invalid_argument(std::string("hierarchy: missing key '") + key + "'");
    if (!j["lan"].is_array()) throw std::invalid_argument("hierarchy: 'lan' must be a list of ROI ids");
    if (!j["man"].is_object()) throw std::invalid_argument("hierarchy: 'man' must map ROI -> group");
    if (!j["wan"].is_object()) throw std::invalid_argument("hierarchy: 'wan' must map group -> network");
    std::vector<std::string> lan;
    for (const auto& e : j["lan"]) {
        if (!e.is_string()) throw std::invalid_argument("hierarchy: lan entry " + e.dump() + " is not a string");
        lan.push_back(e.get<std::string>());
    }
    std::vector<std::pair<std::string, std::string>> man, wan;
    for (const auto& [k, v] : j["man"].items()) {
        if (!v.is_string()) throw std::invalid_argument("hierarchy: man entry '" + k + "' must name a group");
        man.emplace_back(k, v.get<std::string>());
    }
    for (const auto& [k, v] : j["wan"].items()) {
        if (!v.is_string()) throw std::invalid_argument("hierarchy: wan entry '" + k + "' must name a network");
        wan.emplace_back(k, v.get<std::string>());
    }
    return AtlasHierarchy::build(lan, man, wan);
}

AtlasHierarchy read_hierarchy(const std::filesystem::path& path) { return parse_hierarchy(read_text(path)); }

std::string hierarchy_json(const AtlasHierarchy& h) {
    nlohmann::ordered_json j;
    j["lan"] = h.rois;
    nlohmann::ordered_json man = nlohmann::ordered_json::object();
    for (std::size_t r = 0; r < h.rois.size(); ++r) man[h.rois[r]] = h.groups[h.roi_group[r]];
    nlohmann::ordered_json wan = nlohmann::ordered_json::object();
    for (std::size_t g = 0; g < h.groups.size(); ++g) wan[h.groups[g]] = h.networks[h.group_network[g]];
    j["man"] = man;
    j["wan"] = wan;
    return j.dump(2) + "\n";
}

std::string graph_set_json(const HierarchicalGraphSet& graphs, const std::string& subject_id) {
    nlohmann::ordered_json j;
    j["subject"] = subject_id;
    j["levels"] = nlohmann::ordered_json::array();
    for (const LevelGraph* g : {&graphs.wan, &graphs.man, &graphs.lan}) {
        nlohmann::ordered_json lj;
        lj["level"] = to_string(g->level);
        lj["gamma"] = g->gamma;
        lj["mode"] = to_string(g->mode);
        lj["shape"] = g->adjacency.shape();
        lj["adjacency"] = g->adjacency.storage();
        lj["features_shape"] = g->features.shape();
        lj["features"] = g->features.storage();
        lj["block_offsets"] = g->block_offsets;
        j["levels"].push_back(std::move(lj));
    }
    return j.dump() + "\n";
}

void write_curve_csv(const std::vector<CurvePoint>& curve, const std::filesystem::path& path) {
    std::ostringstream os;
    os << "gamma,retained_fraction\n";
    for (const auto& p : curve) os << format_double(p.gamma) << ',' << format_double(p.retained_fraction) << '\n';
    write_text(path, os.str());
}

} // namespace mhnet::io
