#include "mhnet/model.hpp"

#include "mhnet/nn.hpp"

#include <algorithm>
#include <stdexcept>

namespace mhnet {

namespace {

struct NamedToggles {
    const char* name;
    BranchToggles toggles;
};

const std::vector<NamedToggles>& toggle_table() {
    static const std::vector<NamedToggles> table = {
        {"GNN-lan-only", {true, false, false, false, false}},
        {"GNN", {true, true, false, false, false}},
        {"CNN", {false, true, false, true, false}},
        {"HGNN", {true, true, true, false, false}},
        {"HCNN", {false, true, false, true, true}},
        {"HCNN+GNN", {true, true, false, true, true}},
        {"HGNN+CNN", {true, true, true, true, false}},
        {"HGNN+HCNN", {true, true, true, true, true}},
    };
    return table;
}

bool same(const BranchToggles& a, const BranchToggles& b) {
    if (a.graph != b.graph || a.cnn != b.cnn) return false;
    if (a.graph && (a.graph_all_levels != b.graph_all_levels || a.graph_high_order != b.graph_high_order)) return false;
    if (a.cnn && a.cnn_high_order != b.cnn_high_order) return false;
    return true;
}

const char* kLevelPrefix[] = {"hgnn.wan", "hgnn.man", "hgnn.lan"};

} // namespace

BranchToggles BranchToggles::parse(const std::string& name) {
    for (const auto& e : toggle_table())
        if (name == e.name) return e.toggles;
    std::string all;
    for (const auto& e : toggle_table()) all += std::string(all.empty() ? "" : "|") + e.name;
    throw std::invalid_argument("unknown toggles '" + name + "' (expected " + all + ")");
}

const std::vector<std::string>& BranchToggles::names() {
    static const std::vector<std::string> n = [] {
        std::vector<std::string> out;
        for (const auto& e : toggle_table()) out.emplace_back(e.name);
        return out;
    }();
    return n;
}

std::string BranchToggles::name() const {
    for (const auto& e : toggle_table())
        if (same(*this, e.toggles)) return e.name;
    return "custom";
}

void BranchToggles::validate() const {
    if (!graph && !cnn) throw std::invalid_argument("toggles: at least one branch must be enabled");
}

void ModelConfig::set_dropout(double rate) {
    hgnn.dropout = rate;
    hcnn.dropout = rate;
    head_dropout = rate;
}

SubjectInputs prepare_subject(const RoiTimeSeries& ts, const AtlasHierarchy& hierarchy, const GraphOptions& options) {
    const RoiTimeSeries aligned = canonical_order(ts, hierarchy);
    const HierarchicalGraphSet graphs = build_graph_set(aligned, hierarchy, options);
    SubjectInputs in;
    in.wan = prepare_level(graphs.wan);
    in.man = prepare_level(graphs.man);
    in.lan = prepare_level(graphs.lan);
    in.fc_upper = dr_flatten(pearson_fc(aligned).values);
    return in;
}

ModelDims dims_of(const SubjectInputs& in) {
    ModelDims d;
    d.wan_nodes = in.wan.features.dim(0);
    d.man_nodes = in.man.features.dim(0);
    d.lan_nodes = in.lan.features.dim(0);
    // Invert k = N(N-1)/2.
    std::size_t n = 2;
    while (n * (n - 1) / 2 < in.fc_upper.size()) ++n;
    if (n * (n - 1) / 2 != in.fc_upper.size()) throw std::invalid_argument("dims_of: FC vector length is not N(N-1)/2");
    d.fc_rois = n;
    return d;
}

ad::Var fuse(ad::Var z_graph, ad::Var z_fc) {
    if (z_graph.value().rank() != 1 || z_fc.value().rank() != 1) {
        throw std::invalid_argument("fuse: both branch outputs must be vectors");
    }
    return ad::concat({z_graph, z_fc});
}

ad::Var predict(ad::Tape& tape, ad::ParamStore& params, const std::string& prefix, std::size_t layers, ad::Var z,
                double dropout, bool train, Rng& rng) {
    return ad::softmax(nn::mlp(tape, params, prefix, layers, z, dropout, train, rng));
}

MhNet::MhNet(ModelConfig config, ModelDims dims, std::uint64_t seed) : config_(std::move(config)), dims_(dims) {
    build(seed);
}

MhNet::MhNet(ModelConfig config, ModelDims dims, ad::ParamStore params) : config_(std::move(config)), dims_(dims) {
    build(0);
    if (params.size() != params_.size()) {
        throw std::invalid_argument("model: parameter count mismatch (" + std::to_string(params.size()) + " vs " +
                                    std::to_string(params_.size()) + ")");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& src = params.at(i);
        auto& dst = params_.get(src.name);
        if (dst.value.shape() != src.value.shape()) {
            throw std::invalid_argument("model: parameter '" + src.name + "' has shape " +
                                        shape_string(src.value.shape()) + ", expected " +
                                        shape_string(dst.value.shape()));
        }
        dst.value = src.value;
    }
}

void MhNet::build(std::uint64_t seed) {
    config_.toggles.validate();
    config_.hgnn.validate();
    if (config_.toggles.graph && config_.toggles.cnn && config_.hgnn.hidden != config_.hcnn.out_dim) {
        throw std::invalid_argument("model: graph hidden width and FC output width must match");
    }
    Rng rng = make_stream(seed, "init");
    const auto& t = config_.toggles;
    if (t.graph) {
        const std::size_t widths[] = {dims_.wan_nodes, dims_.man_nodes, dims_.lan_nodes};
        for (std::size_t l = 0; l < 3; ++l) {
            if (!t.graph_all_levels && l != 2) continue;
            add_level_encoder(params_, kLevelPrefix[l], widths[l], config_.hgnn, t.graph_high_order, rng);
        }
    }
    if (t.cnn) add_hcnn(params_, "hcnn", dims_.fc_length(), config_.hcnn, t.cnn_high_order, rng);
    std::vector<std::size_t> head{feature_width()};
    head.insert(head.end(), config_.head_hidden.begin(), config_.head_hidden.end());
    head.push_back(2);
    nn::add_mlp(params_, "head", head, rng);
}

std::size_t MhNet::feature_width() const {
    const auto& t = config_.toggles;
    std::size_t w = 0;
    if (t.graph) w += (t.graph_all_levels ? 3 : 1) * config_.hgnn.hidden * (t.graph_high_order ? 2 : 1);
    if (t.cnn) w += config_.hcnn.out_dim * (t.cnn_high_order ? 2 : 1);
    return w;
}

void MhNet::check_inputs(const SubjectInputs& in) const {
    const ModelDims got{in.wan.features.dim(0), in.man.features.dim(0), in.lan.features.dim(0), 0};
    if (got.wan_nodes != dims_.wan_nodes || got.man_nodes != dims_.man_nodes || got.lan_nodes != dims_.lan_nodes ||
        in.fc_upper.size() != dims_.fc_length()) {
        throw std::invalid_argument("model: subject inputs do not match the model's dimensions");
    }
}

ad::Var MhNet::features(ad::Tape& tape, const SubjectInputs& in, bool train, Rng& rng) {
    check_inputs(in);
    const auto& t = config_.toggles;
    std::vector<ad::Var> parts;
    if (t.graph) {
        const LevelInput* levels[] = {&in.wan, &in.man, &in.lan};
        std::vector<ad::Var> per_level;
        for (std::size_t l = 0; l < 3; ++l) {
            if (!t.graph_all_levels && l != 2) continue;
            const LevelVars vars = bind_level(tape, *levels[l]);
            ad::Var z = encode_level(tape, params_, kLevelPrefix[l], vars, config_.hgnn, train, rng);
            per_level.push_back(branch_high_order(tape, params_, kLevelPrefix[l], z, config_.hgnn, t.graph_high_order));
        }
        parts.push_back(per_level.size() == 3 ? multiview_fuse(per_level[0], per_level[1], per_level[2])
                                              : per_level.front());
    }
    if (t.cnn) {
        ad::Var x = tape.constant(in.fc_upper);
        ad::Var z_fc = hcnn_first_order(tape, params_, "hcnn", x, config_.hcnn, train, rng);
        parts.push_back(hop_concat(tape, params_, "hcnn", z_fc, config_.hcnn, t.cnn_high_order));
    }
    return parts.size() == 2 ? fuse(parts[0], parts[1]) : parts.front();
}

ad::Var MhNet::probabilities(ad::Tape& tape, const SubjectInputs& in, bool train, Rng& rng) {
    ad::Var z = features(tape, in, train, rng);
    return predict(tape, params_, "head", config_.head_hidden.size() + 1, z, config_.head_dropout, train, rng);
}

double MhNet::score(const SubjectInputs& in) {
    ad::Tape tape(false);
    Rng rng(0);
    return probabilities(tape, in, false, rng).value()[1];
}

} // namespace mhnet
