#pragma once

#include "mhnet/tensor.hpp"

#include <string>
#include <utility>
#include <vector>

namespace mhnet {

enum class Level { WAN, MAN, LAN, FC };
enum class ConnectivityKind { rv, pearson };
enum class AdjacencyMode { binary, weighted };

std::string to_string(Level level);
std::string to_string(AdjacencyMode mode);
AdjacencyMode parse_adjacency_mode(const std::string& s);

/// samples is [timepoints x rois]; column j belongs to roi_names[j].
struct RoiTimeSeries {
    std::string subject_id;
    Tensor samples;
    std::vector<std::string> roi_names;

    std::size_t timepoints() const { return samples.dim(0); }
    std::size_t roi_count() const { return samples.dim(1); }
    /// Throws unless n >= 2, R >= 2, names match columns and no column is constant.
    void validate() const;
};

/// Three nested partitions: ROIs (LAN nodes) into MAN groups, MAN groups into
/// WAN networks. Stored in canonical order: networks in declaration order,
/// groups grouped by network, ROIs grouped by group, so that every level's
/// blocks are contiguous index ranges.
struct AtlasHierarchy {
    std::vector<std::string> rois;
    std::vector<std::string> groups;
    std::vector<std::string> networks;
    std::vector<std::size_t> roi_group;
    std::vector<std::size_t> group_network;
    /// ROIs of group g occupy [group_offsets[g], group_offsets[g+1]).
    std::vector<std::size_t> group_offsets;
    /// Groups of network w occupy [network_offsets[w], network_offsets[w+1]).
    std::vector<std::size_t> network_offsets;

    /// lan: ROI ids; man: (roi, group) pairs; wan: (group, network) pairs in
    /// declaration order. Validation errors name the offending entry.
    static AtlasHierarchy build(const std::vector<std::string>& lan,
                                const std::vector<std::pair<std::string, std::string>>& man,
                                const std::vector<std::pair<std::string, std::string>>& wan);

    std::size_t node_count(Level level) const;
    /// Block boundaries of the block-diagonal graph at a level (a single block for WAN).
    std::vector<std::size_t> block_offsets(Level level) const;
    /// Column sets (in canonical ROI index space) of the nodes at a level.
    std::vector<std::vector<std::size_t>> node_columns(Level level) const;
};

struct ConnectivityMatrix {
    Level level = Level::FC;
    ConnectivityKind kind = ConnectivityKind::pearson;
    Tensor values;

    std::size_t size() const { return values.dim(0); }
};

/// Returns ts with columns permuted to the hierarchy's canonical ROI order.
RoiTimeSeries canonical_order(const RoiTimeSeries& ts, const AtlasHierarchy& hierarchy);

ConnectivityMatrix pearson_fc(const RoiTimeSeries& ts);

/// Tr(AA'BB') / sqrt(Tr[(AA')^2] Tr[(BB')^2]) for A [n x p], B [n x q].
double rv_coefficient(const Tensor& a, const Tensor& b);

/// RV coefficient between the column blocks of every pair of nodes at a level.
/// Columns are mean-centred first. ts may be in any column order; ROIs are
/// matched by name.
ConnectivityMatrix level_connectivity(const RoiTimeSeries& ts, const AtlasHierarchy& hierarchy, Level level);

struct CurvePoint {
    double gamma;
    double retained_fraction;
};

std::vector<double> gamma_grid(std::size_t points = 101);

/// Fraction of off-diagonal entries with value > gamma, for each grid value.
std::vector<CurvePoint> retained_edge_curve(const ConnectivityMatrix& cm, const std::vector<double>& gammas);

/// Grid gamma with the largest |second difference| of the retained fraction;
/// ties go to the smaller gamma.
double select_cutoff(const std::vector<CurvePoint>& curve);

/// Cutoff that retains `percent` % of the off-diagonal entries (exact quantile).
double gamma_for_retained(const ConnectivityMatrix& cm, double percent);

Tensor build_adjacency(const ConnectivityMatrix& cm, double gamma, AdjacencyMode mode);
Tensor block_diagonal(const std::vector<Tensor>& blocks);
/// Row i is node i's connectivity profile.
Tensor node_features(const ConnectivityMatrix& cm);

/// Restricts a matrix to its diagonal blocks (entries outside are exactly 0).
Tensor block_mask(const Tensor& m, const std::vector<std::size_t>& offsets);

struct CutoffRule {
    enum class Kind { gamma, retained_percent, inflection };
    Kind kind = Kind::inflection;
    double value = 0.0;

    static CutoffRule fixed_gamma(double g) { return {Kind::gamma, g}; }
    static CutoffRule retained_percent(double p) { return {Kind::retained_percent, p}; }
    static CutoffRule inflection() { return {Kind::inflection, 0.0}; }
};

struct GraphOptions {
    CutoffRule cutoff = CutoffRule::retained_percent(19.03);
    AdjacencyMode mode = AdjacencyMode::binary;
    std::size_t grid_points = 101;
};

struct LevelGraph {
    Level level = Level::WAN;
    Tensor adjacency;
    Tensor features;
    double gamma = 0.0;
    AdjacencyMode mode = AdjacencyMode::binary;
    std::vector<std::size_t> block_offsets;
};

struct HierarchicalGraphSet {
    LevelGraph wan;
    LevelGraph man;
    LevelGraph lan;

    const LevelGraph& at(Level level) const;
};

/// Resolves the cutoff for one connectivity matrix under a rule.
double resolve_cutoff(const ConnectivityMatrix& cm, const GraphOptions& options);

LevelGraph build_level_graph(const ConnectivityMatrix& cm, const AtlasHierarchy& hierarchy,
                             const GraphOptions& options);
HierarchicalGraphSet build_graph_set(const RoiTimeSeries& ts, const AtlasHierarchy& hierarchy,
                                     const GraphOptions& options);

} // namespace mhnet
