#include "mhnet/connectivity.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>

namespace mhnet {

std::string to_string(Level level) {
    switch (level) {
    case Level::WAN: return "WAN";
    case Level::MAN: return "MAN";
    case Level::LAN: return "LAN";
    case Level::FC: return "FC";
    }
    return "?";
}

std::string to_string(AdjacencyMode mode) { return mode == AdjacencyMode::binary ? "binary" : "weighted"; }

AdjacencyMode parse_adjacency_mode(const std::string& s) {
    if (s == "binary") return AdjacencyMode::binary;
    if (s == "weighted") return AdjacencyMode::weighted;
    throw std::invalid_argument("unknown adjacency mode '" + s + "' (expected binary|weighted)");
}

void RoiTimeSeries::validate() const {
    if (samples.rank() != 2) throw std::invalid_argument("timeseries " + subject_id + ": samples must be [n x R]");
    const std::size_t n = samples.dim(0), r = samples.dim(1);
    if (n < 2) throw std::invalid_argument("timeseries " + subject_id + ": need at least 2 timepoints");
    if (r < 2) throw std::invalid_argument("timeseries " + subject_id + ": need at least 2 ROIs");
    if (roi_names.size() != r) {
        throw std::invalid_argument("timeseries " + subject_id + ": " + std::to_string(roi_names.size()) +
                                    " ROI names for " + std::to_string(r) + " columns");
    }
    for (std::size_t j = 0; j < r; ++j) {
        bool constant = true;
        for (std::size_t t = 1; t < n && constant; ++t) constant = samples(t, j) == samples(0, j);
        if (constant) {
            throw std::invalid_argument("timeseries " + subject_id + ": ROI '" + roi_names[j] + "' has zero variance");
        }
    }
}

AtlasHierarchy AtlasHierarchy::build(const std::vector<std::string>& lan,
                                     const std::vector<std::pair<std::string, std::string>>& man,
                                     const std::vector<std::pair<std::string, std::string>>& wan) {
    std::set<std::string> lan_set;
    for (const auto& r : lan)
        if (!lan_set.insert(r).second) throw std::invalid_argument("hierarchy: duplicate ROI '" + r + "' in lan");
    if (lan.size() < 2) throw std::invalid_argument("hierarchy: lan needs at least 2 ROIs");

    std::map<std::string, std::string> roi_to_group;
    for (const auto& [roi, group] : man) {
        if (!lan_set.count(roi)) throw std::invalid_argument("hierarchy: man entry '" + roi + "' is not a lan ROI");
        if (!roi_to_group.emplace(roi, group).second) {
            throw std::invalid_argument("hierarchy: ROI '" + roi + "' assigned to more than one man group");
        }
    }
    for (const auto& r : lan)
        if (!roi_to_group.count(r)) throw std::invalid_argument("hierarchy: ROI '" + r + "' has no man group");

    std::map<std::string, std::string> group_to_net;
    std::vector<std::string> net_order;
    std::vector<std::string> group_decl;
    for (const auto& [group, net] : wan) {
        if (!group_to_net.emplace(group, net).second) {
            throw std::invalid_argument("hierarchy: man group '" + group + "' assigned to more than one network");
        }
        group_decl.push_back(group);
        if (std::find(net_order.begin(), net_order.end(), net) == net_order.end()) net_order.push_back(net);
    }
    std::set<std::string> used_groups;
    for (const auto& [roi, group] : roi_to_group) {
        if (!group_to_net.count(group)) {
            throw std::invalid_argument("hierarchy: man group '" + group + "' (of ROI '" + roi + "') has no wan network");
        }
        used_groups.insert(group);
    }
    for (const auto& g : group_decl)
        if (!used_groups.count(g)) throw std::invalid_argument("hierarchy: man group '" + g + "' has no ROIs");

    AtlasHierarchy h;
    h.networks = net_order;
    h.network_offsets.push_back(0);
    for (std::size_t w = 0; w < net_order.size(); ++w) {
        for (const auto& g : group_decl) {
            if (group_to_net[g] != net_order[w]) continue;
            const std::size_t gi = h.groups.size();
            h.groups.push_back(g);
            h.group_network.push_back(w);
            if (h.group_offsets.empty()) h.group_offsets.push_back(0);
            for (const auto& r : lan) {
                if (roi_to_group[r] != g) continue;
                h.rois.push_back(r);
                h.roi_group.push_back(gi);
            }
            h.group_offsets.push_back(h.rois.size());
        }
        h.network_offsets.push_back(h.groups.size());
    }
    return h;
}

std::size_t AtlasHierarchy::node_count(Level level) const {
    switch (level) {
    case Level::WAN: return networks.size();
    case Level::MAN: return groups.size();
    case Level::LAN:
    case Level::FC: return rois.size();
    }
    return 0;
}

std::vector<std::size_t> AtlasHierarchy::block_offsets(Level level) const {
    switch (level) {
    case Level::WAN: return {0, networks.size()};
    case Level::MAN: return network_offsets;
    case Level::LAN: return group_offsets;
    case Level::FC: return {0, rois.size()};
    }
    return {};
}

std::vector<std::vector<std::size_t>> AtlasHierarchy::node_columns(Level level) const {
    std::vector<std::vector<std::size_t>> cols;
    switch (level) {
    case Level::WAN:
        for (std::size_t w = 0; w < networks.size(); ++w) {
            std::vector<std::size_t> c;
            for (std::size_t r = group_offsets[network_offsets[w]]; r < group_offsets[network_offsets[w + 1]]; ++r)
                c.push_back(r);
            cols.push_back(std::move(c));
        }
        break;
    case Level::MAN:
        for (std::size_t g = 0; g < groups.size(); ++g) {
            std::vector<std::size_t> c;
            for (std::size_t r = group_offsets[g]; r < group_offsets[g + 1]; ++r) c.push_back(r);
            cols.push_back(std::move(c));
        }
        break;
    case Level::LAN:
    case Level::FC:
        for (std::size_t r = 0; r < rois.size(); ++r) cols.push_back({r});
        break;
    }
    return cols;
}

RoiTimeSeries canonical_order(const RoiTimeSeries& ts, const AtlasHierarchy& hierarchy) {
    std::map<std::string, std::size_t> col_of;
    for (std::size_t j = 0; j < ts.roi_names.size(); ++j) col_of[ts.roi_names[j]] = j;
    const std::size_t n = ts.timepoints(), r = hierarchy.rois.size();
    Tensor out({n, r});
    for (std::size_t k = 0; k < r; ++k) {
        auto it = col_of.find(hierarchy.rois[k]);
        if (it == col_of.end()) {
            throw std::invalid_argument("timeseries " + ts.subject_id + ": missing hierarchy ROI '" +
                                        hierarchy.rois[k] + "'");
        }
        for (std::size_t t = 0; t < n; ++t) out(t, k) = ts.samples(t, it->second);
    }
    return RoiTimeSeries{ts.subject_id, std::move(out), hierarchy.rois};
}

namespace {

Tensor centered(const Tensor& x) {
    Tensor c = x;
    const std::size_t n = x.dim(0), r = x.dim(1);
    for (std::size_t j = 0; j < r; ++j) {
        double mu = 0.0;
        for (std::size_t t = 0; t < n; ++t) mu += x(t, j);
        mu /= static_cast<double>(n);
        for (std::size_t t = 0; t < n; ++t) c(t, j) -= mu;
    }
    return c;
}

// Frobenius-squared of X'Y for column sets of a shared sample matrix.
double cross_energy(const Tensor& x, const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
    const std::size_t n = x.dim(0);
    double s = 0.0;
    for (std::size_t i : a)
        for (std::size_t j : b) {
            double dot = 0.0;
            for (std::size_t t = 0; t < n; ++t) dot += x(t, i) * x(t, j);
            s += dot * dot;
        }
    return s;
}

double rv_from_energies(double cross_ab, double cross_ba, double self_a, double self_b) {
    if (!(self_a > 0.0) || !(self_b > 0.0)) throw std::invalid_argument("rv_coefficient: all-zero block");
    // Averaging both accumulation orders makes the value exactly symmetric.
    const double num = 0.5 * (cross_ab + cross_ba);
    return std::clamp(num / (std::sqrt(self_a) * std::sqrt(self_b)), 0.0, 1.0);
}

} // namespace

ConnectivityMatrix pearson_fc(const RoiTimeSeries& ts) {
    ts.validate();
    const Tensor c = centered(ts.samples);
    const std::size_t n = ts.timepoints(), r = ts.roi_count();
    std::vector<double> sd(r);
    for (std::size_t j = 0; j < r; ++j) {
        double s = 0.0;
        for (std::size_t t = 0; t < n; ++t) s += c(t, j) * c(t, j);
        sd[j] = std::sqrt(s);
        if (!(sd[j] > 0.0)) {
            throw std::invalid_argument("pearson_fc: ROI '" + ts.roi_names[j] + "' has zero variance");
        }
    }
    Tensor fc({r, r});
    for (std::size_t i = 0; i < r; ++i) {
        fc(i, i) = 1.0;
        for (std::size_t j = i + 1; j < r; ++j) {
            double s = 0.0;
            for (std::size_t t = 0; t < n; ++t) s += c(t, i) * c(t, j);
            fc(i, j) = fc(j, i) = std::clamp(s / (sd[i] * sd[j]), -1.0, 1.0);
        }
    }
    return ConnectivityMatrix{Level::FC, ConnectivityKind::pearson, std::move(fc)};
}

double rv_coefficient(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(0) != b.dim(0)) {
        throw std::invalid_argument("rv_coefficient: blocks need the same number of rows, got " +
                                    shape_string(a.shape()) + " and " + shape_string(b.shape()));
    }
    const std::size_t n = a.dim(0), p = a.dim(1), q = b.dim(1);
    auto gram_energy = [n](const Tensor& x, const Tensor& y) {
        double s = 0.0;
        for (std::size_t i = 0; i < x.dim(1); ++i)
            for (std::size_t j = 0; j < y.dim(1); ++j) {
                double dot = 0.0;
                for (std::size_t t = 0; t < n; ++t) dot += x(t, i) * y(t, j);
                s += dot * dot;
            }
        return s;
    };
    (void)p;
    (void)q;
    return rv_from_energies(gram_energy(a, b), gram_energy(b, a), gram_energy(a, a), gram_energy(b, b));
}

ConnectivityMatrix level_connectivity(const RoiTimeSeries& ts, const AtlasHierarchy& hierarchy, Level level) {
    if (level == Level::FC) throw std::invalid_argument("level_connectivity: level must be WAN, MAN or LAN");
    const RoiTimeSeries aligned = canonical_order(ts, hierarchy);
    aligned.validate();
    const Tensor x = centered(aligned.samples);
    const auto nodes = hierarchy.node_columns(level);
    const std::size_t m = nodes.size();
    std::vector<double> self(m);
    for (std::size_t i = 0; i < m; ++i) self[i] = cross_energy(x, nodes[i], nodes[i]);
    Tensor rv({m, m});
    for (std::size_t i = 0; i < m; ++i) {
        rv(i, i) = 1.0;
        for (std::size_t j = i + 1; j < m; ++j) {
            const double ab = cross_energy(x, nodes[i], nodes[j]);
            const double ba = cross_energy(x, nodes[j], nodes[i]);
            rv(i, j) = rv(j, i) = rv_from_energies(ab, ba, self[i], self[j]);
        }
    }
    return ConnectivityMatrix{level, ConnectivityKind::rv, std::move(rv)};
}

std::vector<double> gamma_grid(std::size_t points) {
    if (points < 2) throw std::invalid_argument("gamma_grid: need at least 2 points");
    std::vector<double> g(points);
    for (std::size_t i = 0; i < points; ++i) g[i] = static_cast<double>(i) / static_cast<double>(points - 1);
    return g;
}

std::vector<CurvePoint> retained_edge_curve(const ConnectivityMatrix& cm, const std::vector<double>& gammas) {
    if (gammas.empty()) throw std::invalid_argument("retained_edge_curve: empty gamma grid");
    for (std::size_t i = 0; i < gammas.size(); ++i) {
        if (gammas[i] < 0.0 || gammas[i] > 1.0) throw std::invalid_argument("retained_edge_curve: gamma outside [0,1]");
        if (i > 0 && !(gammas[i] > gammas[i - 1])) {
            throw std::invalid_argument("retained_edge_curve: grid must be strictly increasing");
        }
    }
    const std::size_t m = cm.size();
    if (m < 2) throw std::invalid_argument("retained_edge_curve: matrix needs at least 2 nodes");
    std::vector<double> off;
    off.reserve(m * (m - 1));
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j)
            if (i != j) off.push_back(cm.values(i, j));
    std::sort(off.begin(), off.end());
    const double total = static_cast<double>(off.size());
    std::vector<CurvePoint> curve;
    curve.reserve(gammas.size());
    for (double g : gammas) {
        const auto above = off.end() - std::upper_bound(off.begin(), off.end(), g);
        curve.push_back({g, static_cast<double>(above) / total});
    }
    return curve;
}

double select_cutoff(const std::vector<CurvePoint>& curve) {
    if (curve.size() < 5) throw std::invalid_argument("select_cutoff: curve needs at least 5 points");
    std::vector<double> curvature(curve.size(), 0.0);
    double best = 0.0;
    for (std::size_t i = 1; i + 1 < curve.size(); ++i) {
        const double hl = curve[i].gamma - curve[i - 1].gamma;
        const double hr = curve[i + 1].gamma - curve[i].gamma;
        const double slope_l = (curve[i].retained_fraction - curve[i - 1].retained_fraction) / hl;
        const double slope_r = (curve[i + 1].retained_fraction - curve[i].retained_fraction) / hr;
        curvature[i] = std::abs(2.0 * (slope_r - slope_l) / (hl + hr));
        best = std::max(best, curvature[i]);
    }
    if (!(best > 0.0)) throw std::invalid_argument("select_cutoff: no inflection (curve is linear or constant)");
    // Near-equal magnitudes count as ties; grid spacing carries rounding noise.
    for (std::size_t i = 1; i + 1 < curve.size(); ++i)
        if (curvature[i] >= best * (1.0 - 1e-9)) return curve[i].gamma;
    return curve[1].gamma;
}

double gamma_for_retained(const ConnectivityMatrix& cm, double percent) {
    if (!(percent >= 0.0 && percent <= 100.0)) throw std::invalid_argument("gamma_for_retained: percent outside [0,100]");
    const std::size_t m = cm.size();
    if (m < 2) return 1.0;
    std::vector<double> off;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j)
            if (i != j) off.push_back(cm.values(i, j));
    std::sort(off.begin(), off.end(), std::greater<>());
    const auto k = static_cast<std::size_t>(std::floor(percent / 100.0 * static_cast<double>(off.size()) + 1e-9));
    if (k >= off.size()) return 0.0;
    return std::clamp(off[k], 0.0, 1.0);
}

Tensor build_adjacency(const ConnectivityMatrix& cm, double gamma, AdjacencyMode mode) {
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("build_adjacency: gamma outside [0,1]");
    const std::size_t m = cm.size();
    Tensor a({m, m});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            if (i == j) {
                a(i, j) = 1.0;
            } else if (cm.values(i, j) > gamma) {
                a(i, j) = mode == AdjacencyMode::binary ? 1.0 : cm.values(i, j);
            }
        }
    // Symmetric by construction when the input is; mirror to make it exact.
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i + 1; j < m; ++j) a(j, i) = a(i, j);
    return a;
}

Tensor block_diagonal(const std::vector<Tensor>& blocks) {
    if (blocks.empty()) throw std::invalid_argument("block_diagonal: no blocks");
    std::size_t total = 0;
    for (const auto& b : blocks) {
        if (b.rank() != 2 || b.dim(0) != b.dim(1)) {
            throw std::invalid_argument("block_diagonal: block of shape " + shape_string(b.shape()) + " is not square");
        }
        total += b.dim(0);
    }
    Tensor out({total, total});
    std::size_t off = 0;
    for (const auto& b : blocks) {
        for (std::size_t i = 0; i < b.dim(0); ++i)
            for (std::size_t j = 0; j < b.dim(1); ++j) out(off + i, off + j) = b(i, j);
        off += b.dim(0);
    }
    return out;
}

Tensor node_features(const ConnectivityMatrix& cm) { return cm.values; }

Tensor block_mask(const Tensor& m, const std::vector<std::size_t>& offsets) {
    Tensor out(m.shape());
    for (std::size_t b = 0; b + 1 < offsets.size(); ++b)
        for (std::size_t i = offsets[b]; i < offsets[b + 1]; ++i)
            for (std::size_t j = offsets[b]; j < offsets[b + 1]; ++j) out(i, j) = m(i, j);
    return out;
}

const LevelGraph& HierarchicalGraphSet::at(Level level) const {
    switch (level) {
    case Level::WAN: return wan;
    case Level::MAN: return man;
    case Level::LAN: return lan;
    case Level::FC: break;
    }
    throw std::invalid_argument("graph set has no FC level");
}

double resolve_cutoff(const ConnectivityMatrix& cm, const GraphOptions& options) {
    switch (options.cutoff.kind) {
    case CutoffRule::Kind::gamma: return options.cutoff.value;
    case CutoffRule::Kind::retained_percent: return gamma_for_retained(cm, options.cutoff.value);
    case CutoffRule::Kind::inflection:
        return select_cutoff(retained_edge_curve(cm, gamma_grid(options.grid_points)));
    }
    return 0.0;
}

namespace {

ConnectivityMatrix sub_block(const ConnectivityMatrix& cm, std::size_t lo, std::size_t hi) {
    Tensor v({hi - lo, hi - lo});
    for (std::size_t i = lo; i < hi; ++i)
        for (std::size_t j = lo; j < hi; ++j) v(i - lo, j - lo) = cm.values(i, j);
    return ConnectivityMatrix{cm.level, cm.kind, std::move(v)};
}

} // namespace

LevelGraph build_level_graph(const ConnectivityMatrix& cm, const AtlasHierarchy& hierarchy,
                             const GraphOptions& options) {
    LevelGraph g;
    g.level = cm.level;
    g.mode = options.mode;
    g.block_offsets = hierarchy.block_offsets(cm.level);
    if (g.block_offsets.back() != cm.size()) throw std::invalid_argument("build_level_graph: hierarchy/matrix size mismatch");
    g.gamma = cm.size() >= 2 ? resolve_cutoff(cm, options) : 1.0;
    std::vector<Tensor> adj_blocks, feat_blocks;
    for (std::size_t b = 0; b + 1 < g.block_offsets.size(); ++b) {
        const auto block = sub_block(cm, g.block_offsets[b], g.block_offsets[b + 1]);
        adj_blocks.push_back(build_adjacency(block, g.gamma, options.mode));
        feat_blocks.push_back(node_features(block));
    }
    g.adjacency = block_diagonal(adj_blocks);
    g.features = block_diagonal(feat_blocks);
    return g;
}

HierarchicalGraphSet build_graph_set(const RoiTimeSeries& ts, const AtlasHierarchy& hierarchy,
                                     const GraphOptions& options) {
    HierarchicalGraphSet set;
    set.wan = build_level_graph(level_connectivity(ts, hierarchy, Level::WAN), hierarchy, options);
    set.man = build_level_graph(level_connectivity(ts, hierarchy, Level::MAN), hierarchy, options);
    set.lan = build_level_graph(level_connectivity(ts, hierarchy, Level::LAN), hierarchy, options);
    return set;
}

} // namespace mhnet
