#pragma once

#include "mhnet/model.hpp"
#include "mhnet/train.hpp"

#include <json.hpp>

#include <filesystem>

namespace mhnet {

/// On disk: the line "MHNETCKPT1", a little-endian u64 header length, a JSON
/// header (format, version, seed, config, dims, params [{name, shape}], meta),
/// then every parameter as little-endian f64 in header order.
struct Checkpoint {
    ModelConfig model;
    ModelDims dims;
    GraphOptions graph;
    TrainConfig train;
    ad::ParamStore params;
    nlohmann::ordered_json meta = nlohmann::ordered_json::object();

    MhNet make_model() const;
};

void save_checkpoint(const std::filesystem::path& path, const MhNet& model, const GraphOptions& graph,
                     const TrainConfig& train, const nlohmann::ordered_json& meta = nlohmann::ordered_json::object());
Checkpoint load_checkpoint(const std::filesystem::path& path);

nlohmann::ordered_json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::ordered_json& j);
nlohmann::ordered_json to_json(const GraphOptions& g);
GraphOptions graph_options_from_json(const nlohmann::ordered_json& j);
nlohmann::ordered_json to_json(const TrainConfig& t);
TrainConfig train_config_from_json(const nlohmann::ordered_json& j);

} // namespace mhnet
