#pragma once

#include "mhnet/autodiff.hpp"
#include "mhnet/connectivity.hpp"
#include "mhnet/hcnn.hpp"
#include "mhnet/hgnn.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace mhnet {

/// Which branches and high-order paths are active. Names follow the ablation
/// table: GNN-lan-only, GNN, CNN, HGNN, HCNN, HCNN+GNN, HGNN+CNN, HGNN+HCNN.
struct BranchToggles {
    bool graph = true;
    bool graph_all_levels = true;
    bool graph_high_order = true;
    bool cnn = true;
    bool cnn_high_order = true;

    static BranchToggles parse(const std::string& name);
    static const std::vector<std::string>& names();
    std::string name() const;
    void validate() const;
};

struct ModelConfig {
    HgnnConfig hgnn;
    HcnnConfig hcnn;
    std::vector<std::size_t> head_hidden{64};
    double head_dropout = 0.0;
    BranchToggles toggles;

    /// Uses one dropout rate for every branch and the head.
    void set_dropout(double rate);
};

/// Input sizes the parameters depend on.
struct ModelDims {
    std::size_t wan_nodes = 0;
    std::size_t man_nodes = 0;
    std::size_t lan_nodes = 0;
    std::size_t fc_rois = 0;

    std::size_t fc_length() const { return fc_rois * (fc_rois - 1) / 2; }
    bool operator==(const ModelDims&) const = default;
};

/// Everything the model consumes for one subject, precomputed once.
struct SubjectInputs {
    LevelInput wan;
    LevelInput man;
    LevelInput lan;
    /// Strict upper triangle of the Pearson FC matrix.
    Tensor fc_upper;
};

SubjectInputs prepare_subject(const RoiTimeSeries& ts, const AtlasHierarchy& hierarchy, const GraphOptions& options);
ModelDims dims_of(const SubjectInputs& in);

/// concat(graph features, FC features).
ad::Var fuse(ad::Var z_graph, ad::Var z_fc);
/// softmax(MLP(z)) -> [2].
ad::Var predict(ad::Tape& tape, ad::ParamStore& params, const std::string& prefix, std::size_t layers, ad::Var z,
                double dropout, bool train, Rng& rng);

class MhNet {
public:
    MhNet(ModelConfig config, ModelDims dims, std::uint64_t seed);
    /// Rebinds to existing parameters (e.g. from a checkpoint); names and shapes must match.
    MhNet(ModelConfig config, ModelDims dims, ad::ParamStore params);

    /// Fused high-order feature vector of one subject.
    ad::Var features(ad::Tape& tape, const SubjectInputs& in, bool train, Rng& rng);
    /// Two-class probabilities of one subject.
    ad::Var probabilities(ad::Tape& tape, const SubjectInputs& in, bool train, Rng& rng);
    /// Positive-class probability in eval mode.
    double score(const SubjectInputs& in);

    std::size_t feature_width() const;
    const ModelConfig& config() const { return config_; }
    const ModelDims& dims() const { return dims_; }
    ad::ParamStore& params() { return params_; }
    const ad::ParamStore& params() const { return params_; }

private:
    void build(std::uint64_t seed);
    void check_inputs(const SubjectInputs& in) const;

    ModelConfig config_;
    ModelDims dims_;
    ad::ParamStore params_;
};

} // namespace mhnet
