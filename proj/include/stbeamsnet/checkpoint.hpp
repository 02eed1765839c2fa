#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stbeamsnet/errors.hpp"
#include "stbeamsnet/mission_io.hpp"
#include "stbeamsnet/model.hpp"

// Checkpoint file: a flat JSON map from parameter name to shape + values,
// together with the model/train configuration, the normalization stats and a
// format-version field. Values are stored as doubles, which round-trips
// float32 parameters exactly.

namespace stbn::io {

inline json to_json(const st::Hyperparams& hp) {
  return json{{"kernel_size", hp.kernel_size}, {"stride", hp.stride},
              {"patch_size", hp.patch_size},   {"latent_dim", hp.latent_dim},
              {"heads", hp.heads},             {"ffe", hp.ffe},
              {"blocks", hp.blocks},           {"seeds", hp.seeds}};
}

inline st::Hyperparams hyperparams_from_json(const json& j) {
  st::Hyperparams hp;
  hp.kernel_size = j.value("kernel_size", hp.kernel_size);
  hp.stride = j.value("stride", hp.stride);
  hp.patch_size = j.value("patch_size", hp.patch_size);
  hp.latent_dim = j.value("latent_dim", hp.latent_dim);
  hp.heads = j.value("heads", hp.heads);
  hp.ffe = j.value("ffe", hp.ffe);
  hp.blocks = j.value("blocks", hp.blocks);
  hp.seeds = j.value("seeds", hp.seeds);
  return hp;
}

inline json to_json(const model::ModelConfig& c) {
  json j = to_json(c.hp);
  j["imu_channels"] = c.imu_channels;
  j["imu_window"] = c.imu_window;
  j["dvl_channels"] = c.dvl_channels;
  j["n_history"] = c.n_history;
  j["head_hidden"] = c.head_hidden;
  return j;
}

inline model::ModelConfig model_config_from_json(const json& j) {
  model::ModelConfig c;
  c.hp = hyperparams_from_json(j);
  c.imu_channels = j.value("imu_channels", c.imu_channels);
  c.imu_window = j.value("imu_window", c.imu_window);
  c.dvl_channels = j.value("dvl_channels", c.dvl_channels);
  c.n_history = j.value("n_history", c.n_history);
  c.head_hidden = j.value("head_hidden", c.head_hidden);
  return c;
}

inline json to_json(const model::TrainConfig& c) {
  return json{{"epochs", c.epochs},
              {"batch_size", c.batch_size},
              {"learning_rate", c.learning_rate},
              {"seed", c.seed},
              {"patience", c.patience},
              {"precision", c.precision},
              {"target_train_mse", c.target_train_mse}};
}

inline model::TrainConfig train_config_from_json(const json& j) {
  model::TrainConfig c;
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.seed = j.value("seed", c.seed);
  c.patience = j.value("patience", c.patience);
  c.precision = j.value("precision", c.precision);
  c.target_train_mse = j.value("target_train_mse", c.target_train_mse);
  return c;
}

inline json to_json(const model::Normalization& n) {
  return json{{"imu_mean", n.imu_mean},
              {"imu_std", n.imu_std},
              {"dvl_mean", n.dvl_mean},
              {"dvl_std", n.dvl_std}};
}

inline model::Normalization normalization_from_json(const json& j) {
  model::Normalization n;
  n.imu_mean = j.at("imu_mean").get<std::vector<double>>();
  n.imu_std = j.at("imu_std").get<std::vector<double>>();
  n.dvl_mean = j.at("dvl_mean").get<std::vector<double>>();
  n.dvl_std = j.at("dvl_std").get<std::vector<double>>();
  return n;
}

struct CheckpointMeta {
  model::TrainConfig train_config;
  model::Normalization normalization;
  std::size_t epochs_completed = 0;
  double best_val_mse = 0.0;
};

template <typename T>
void save_checkpoint(const fs::path& path, model::StBeamsNetParams<T>& params,
                     const CheckpointMeta& meta) {
  json parameters = json::array();
  model::for_each_parameter<T>(params, [&](const std::string& name, nn::Tensor<T>& t) {
    std::vector<double> values(t.data(), t.data() + t.numel());
    parameters.push_back(json{{"name", name}, {"shape", t.shape()}, {"values", values}});
  });
  json doc{{"format_version", 1},
           {"model", to_json(params.config)},
           {"train", to_json(meta.train_config)},
           {"normalization", to_json(meta.normalization)},
           {"epochs_completed", meta.epochs_completed},
           {"best_val_mse", meta.best_val_mse},
           {"parameters", parameters}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << doc.dump() << "\n";
}

template <typename T>
std::pair<model::StBeamsNetParams<T>, CheckpointMeta> load_checkpoint(const fs::path& path) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError(path.string() + ": " + e.what());
  }
  if (doc.value("format_version", 0) != 1) {
    throw CompatibilityError("unsupported checkpoint format version");
  }
  const model::ModelConfig config = model_config_from_json(doc.at("model"));
  CheckpointMeta meta;
  meta.train_config = train_config_from_json(doc.at("train"));
  meta.normalization = normalization_from_json(doc.at("normalization"));
  meta.epochs_completed = doc.value("epochs_completed", std::size_t{0});
  meta.best_val_mse = doc.value("best_val_mse", 0.0);

  model::StBeamsNetParams<T> params = model::init_params<T>(config, 0);
  std::map<std::string, nn::Tensor<T>*> by_name;
  model::for_each_parameter<T>(params, [&](const std::string& name, nn::Tensor<T>& t) {
    by_name[name] = &t;
  });
  std::size_t loaded = 0;
  for (const auto& entry : doc.at("parameters")) {
    const std::string name = entry.at("name").get<std::string>();
    auto it = by_name.find(name);
    if (it == by_name.end()) {
      throw CompatibilityError("checkpoint has unknown parameter " + name);
    }
    nn::Tensor<T>& t = *it->second;
    const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
    if (shape != t.shape()) {
      throw CompatibilityError("checkpoint parameter " + name + " has shape " +
                               nn::shape_str(shape) + ", model expects " +
                               nn::shape_str(t.shape()));
    }
    const auto values = entry.at("values").get<std::vector<double>>();
    if (values.size() != t.numel()) {
      throw CompatibilityError("checkpoint parameter " + name + " has wrong value count");
    }
    for (std::size_t i = 0; i < values.size(); ++i) t[i] = static_cast<T>(values[i]);
    ++loaded;
  }
  if (loaded != by_name.size()) {
    throw CompatibilityError("checkpoint is missing parameters: has " + std::to_string(loaded) +
                             " of " + std::to_string(by_name.size()));
  }
  return {std::move(params), std::move(meta)};
}

}  // namespace stbn::io
