#include "mhnet/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace mhnet {

namespace {

constexpr char kMagic[] = "MHNETCKPT1\n";
constexpr std::size_t kMagicLen = sizeof(kMagic) - 1;
constexpr int kVersion = 1;

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

std::uint64_t get_u64(const std::string& in, std::size_t pos) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
    return v;
}

std::string cutoff_kind(CutoffRule::Kind k) {
    switch (k) {
    case CutoffRule::Kind::gamma: return "gamma";
    case CutoffRule::Kind::retained_percent: return "retained_percent";
    case CutoffRule::Kind::inflection: return "inflection";
    }
    return "?";
}

CutoffRule::Kind parse_cutoff_kind(const std::string& s) {
    if (s == "gamma") return CutoffRule::Kind::gamma;
    if (s == "retained_percent") return CutoffRule::Kind::retained_percent;
    if (s == "inflection") return CutoffRule::Kind::inflection;
    throw std::invalid_argument("checkpoint: unknown cutoff kind '" + s + "'");
}

} // namespace

nlohmann::ordered_json to_json(const ModelConfig& c) {
    nlohmann::ordered_json j;
    j["toggles"] = {{"graph", c.toggles.graph},
                    {"graph_all_levels", c.toggles.graph_all_levels},
                    {"graph_high_order", c.toggles.graph_high_order},
                    {"cnn", c.toggles.cnn},
                    {"cnn_high_order", c.toggles.cnn_high_order},
                    {"name", c.toggles.name()}};
    j["hgnn"] = {{"K", c.hgnn.K},
                 {"blocks", c.hgnn.blocks},
                 {"hidden", c.hgnn.hidden},
                 {"dropout", c.hgnn.dropout},
                 {"encoder", to_string(c.hgnn.encoder)},
                 {"ghop_hidden", c.hgnn.ghop_hidden},
                 {"normalize", c.hgnn.normalize},
                 {"activate", c.hgnn.activate}};
    nlohmann::ordered_json conv = nlohmann::ordered_json::array();
    for (const auto& l : c.hcnn.conv) conv.push_back({{"kernel", l.kernel}, {"stride", l.stride}, {"channels", l.channels}});
    j["hcnn"] = {{"conv", conv},
                 {"mlp_hidden", c.hcnn.mlp_hidden},
                 {"out_dim", c.hcnn.out_dim},
                 {"hop_hidden", c.hcnn.hop_hidden},
                 {"dropout", c.hcnn.dropout}};
    j["head_hidden"] = c.head_hidden;
    j["head_dropout"] = c.head_dropout;
    return j;
}

ModelConfig model_config_from_json(const nlohmann::ordered_json& j) {
    ModelConfig c;
    const auto& t = j.at("toggles");
    c.toggles.graph = t.at("graph").get<bool>();
    c.toggles.graph_all_levels = t.at("graph_all_levels").get<bool>();
    c.toggles.graph_high_order = t.at("graph_high_order").get<bool>();
    c.toggles.cnn = t.at("cnn").get<bool>();
    c.toggles.cnn_high_order = t.at("cnn_high_order").get<bool>();
    const auto& g = j.at("hgnn");
    c.hgnn.K = g.at("K").get<std::size_t>();
    c.hgnn.blocks = g.at("blocks").get<std::size_t>();
    c.hgnn.hidden = g.at("hidden").get<std::size_t>();
    c.hgnn.dropout = g.at("dropout").get<double>();
    c.hgnn.encoder = parse_encoder(g.at("encoder").get<std::string>());
    c.hgnn.ghop_hidden = g.at("ghop_hidden").get<std::vector<std::size_t>>();
    c.hgnn.normalize = g.at("normalize").get<bool>();
    c.hgnn.activate = g.at("activate").get<bool>();
    const auto& h = j.at("hcnn");
    c.hcnn.conv.clear();
    for (const auto& l : h.at("conv")) {
        c.hcnn.conv.push_back({l.at("kernel").get<std::size_t>(), l.at("stride").get<std::size_t>(),
                               l.at("channels").get<std::size_t>()});
    }
    c.hcnn.mlp_hidden = h.at("mlp_hidden").get<std::vector<std::size_t>>();
    c.hcnn.out_dim = h.at("out_dim").get<std::size_t>();
    c.hcnn.hop_hidden = h.at("hop_hidden").get<std::vector<std::size_t>>();
    c.hcnn.dropout = h.at("dropout").get<double>();
    c.head_hidden = j.at("head_hidden").get<std::vector<std::size_t>>();
    c.head_dropout = j.at("head_dropout").get<double>();
    return c;
}

nlohmann::ordered_json to_json(const GraphOptions& g) {
    return {{"cutoff", cutoff_kind(g.cutoff.kind)},
            {"cutoff_value", g.cutoff.value},
            {"mode", to_string(g.mode)},
            {"grid_points", g.grid_points}};
}

GraphOptions graph_options_from_json(const nlohmann::ordered_json& j) {
    GraphOptions g;
    g.cutoff.kind = parse_cutoff_kind(j.at("cutoff").get<std::string>());
    g.cutoff.value = j.at("cutoff_value").get<double>();
    g.mode = parse_adjacency_mode(j.at("mode").get<std::string>());
    g.grid_points = j.at("grid_points").get<std::size_t>();
    return g;
}

nlohmann::ordered_json to_json(const TrainConfig& t) {
    return {{"lr", t.lr},           {"epochs", t.epochs}, {"dropout", t.dropout},
            {"batch_size", t.batch_size}, {"seed", t.seed},     {"preset", t.preset}};
}

TrainConfig train_config_from_json(const nlohmann::ordered_json& j) {
    TrainConfig t;
    t.lr = j.at("lr").get<double>();
    t.epochs = j.at("epochs").get<std::size_t>();
    t.dropout = j.at("dropout").get<double>();
    t.batch_size = j.at("batch_size").get<std::size_t>();
    t.seed = j.at("seed").get<std::uint64_t>();
    t.preset = j.at("preset").get<std::string>();
    return t;
}

MhNet Checkpoint::make_model() const { return MhNet(model, dims, params); }

void save_checkpoint(const std::filesystem::path& path, const MhNet& model, const GraphOptions& graph,
                     const TrainConfig& train, const nlohmann::ordered_json& meta) {
    nlohmann::ordered_json header;
    header["format"] = "mhnet-checkpoint";
    header["version"] = kVersion;
    header["seed"] = train.seed;
    header["config"] = {{"model", to_json(model.config())}, {"graph", to_json(graph)}, {"train", to_json(train)}};
    const auto& d = model.dims();
    header["dims"] = {{"wan_nodes", d.wan_nodes}, {"man_nodes", d.man_nodes}, {"lan_nodes", d.lan_nodes},
                      {"fc_rois", d.fc_rois}};
    header["params"] = nlohmann::ordered_json::array();
    const auto& params = model.params();
    for (std::size_t i = 0; i < params.size(); ++i) {
        header["params"].push_back({{"name", params.at(i).name}, {"shape", params.at(i).value.shape()}});
    }
    header["meta"] = meta;
    const std::string text = header.dump();

    std::string out(kMagic, kMagicLen);
    put_u64(out, text.size());
    out += text;
    out.reserve(out.size() + 8 * params.scalar_count());
    for (std::size_t i = 0; i < params.size(); ++i)
        for (double v : params.at(i).value.values()) put_u64(out, std::bit_cast<std::uint64_t>(v));

    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("checkpoint: cannot open '" + path.string() + "' for writing");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw std::runtime_error("checkpoint: write failed for '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("checkpoint: cannot open '" + path.string() + "'");
    const std::string in((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    const std::string where = "checkpoint '" + path.string() + "': ";
    if (in.size() < kMagicLen + 8 || in.compare(0, kMagicLen, kMagic) != 0) {
        throw std::invalid_argument(where + "not an mhnet checkpoint");
    }
    const std::uint64_t header_len = get_u64(in, kMagicLen);
    const std::size_t payload_at = kMagicLen + 8 + header_len;
    if (header_len > in.size() || payload_at > in.size()) throw std::invalid_argument(where + "truncated header");

    nlohmann::ordered_json header;
    try {
        header = nlohmann::ordered_json::parse(in.substr(kMagicLen + 8, header_len));
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(where + "bad header: " + e.what());
    }
    if (header.value("format", "") != "mhnet-checkpoint" || header.value("version", 0) != kVersion) {
        throw std::invalid_argument(where + "unsupported format or version");
    }

    Checkpoint ck;
    try {
        ck.model = model_config_from_json(header.at("config").at("model"));
        ck.graph = graph_options_from_json(header.at("config").at("graph"));
        ck.train = train_config_from_json(header.at("config").at("train"));
        const auto& d = header.at("dims");
        ck.dims = {d.at("wan_nodes").get<std::size_t>(), d.at("man_nodes").get<std::size_t>(),
                   d.at("lan_nodes").get<std::size_t>(), d.at("fc_rois").get<std::size_t>()};
        ck.meta = header.value("meta", nlohmann::ordered_json::object());
        std::size_t pos = payload_at;
        for (const auto& p : header.at("params")) {
            Shape shape = p.at("shape").get<Shape>();
            const std::size_t n = shape_size(shape);
            if (pos + 8 * n > in.size()) throw std::invalid_argument(where + "truncated payload");
            std::vector<double> data(n);
            for (std::size_t k = 0; k < n; ++k, pos += 8) data[k] = std::bit_cast<double>(get_u64(in, pos));
            ck.params.add(p.at("name").get<std::string>(), Tensor(std::move(shape), std::move(data)));
        }
        if (pos != in.size()) throw std::invalid_argument(where + "trailing bytes after payload");
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(where + "bad header: " + e.what());
    }
    return ck;
}

} // namespace mhnet
