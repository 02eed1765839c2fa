// stbeamsnet: batch front end for the DVL-outage velocity forecasting
// pipeline. Subcommands: simulate (synthetic missions + dataset manifest),
// train (network training to a checkpoint), evaluate (network vs
// moving-average baseline on the held-out mission), compare-only (recompute
// reports from an existing predictions.csv).
//
// Every run writes its effective merged configuration next to its outputs so
// artifacts are reproducible byte for byte. Exit code 0 means all requested
// artifacts were written and validated.

#include <CLI11.hpp>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <future>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "stbeamsnet/checkpoint.hpp"
#include "stbeamsnet/eval.hpp"
#include "stbeamsnet/log.hpp"
#include "stbeamsnet/mission_io.hpp"
#include "stbeamsnet/model.hpp"
#include "stbeamsnet/sensor_sim.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace stbn;

namespace {

// exit codes
constexpr int kOk = 0;
constexpr int kUnexpected = 1;
constexpr int kBadConfig = 2;
constexpr int kIoFailure = 3;
constexpr int kTrainingFailure = 4;
constexpr int kIncompatible = 5;

json load_config_file(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file " + path);
  try {
    return json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& doc) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << doc.dump(2) << "\n";
}

// ---- simulate ---------------------------------------------------------------

struct SimulateArgs {
  std::string config_path;
  std::string out_dir;
  std::size_t missions = 9;
  double duration_s = 600.0;
  std::uint64_t seed = 42;
};

int run_simulate(const SimulateArgs& args, const CLI::App& cmd) {
  const json file_cfg = load_config_file(args.config_path);
  sim::MissionConfig base;
  if (file_cfg.contains("mission")) {
    base = io::mission_config_from_json(file_cfg.at("mission"));
  }
  std::size_t missions = args.missions;
  double duration = args.duration_s;
  std::uint64_t seed = args.seed;
  std::size_t n_history = file_cfg.value("n_history", std::size_t{3});
  if (file_cfg.contains("missions") && cmd.count("--missions") == 0) {
    missions = file_cfg.at("missions").get<std::size_t>();
  }
  if (file_cfg.contains("duration_s") && cmd.count("--duration") == 0) {
    duration = file_cfg.at("duration_s").get<double>();
  }
  if (file_cfg.contains("seed") && cmd.count("--seed") == 0) {
    seed = file_cfg.at("seed").get<std::uint64_t>();
  }
  if (missions < 2) throw ConfigError("need at least 2 missions for a train/test split");
  base.duration_s = duration;

  const fs::path out(args.out_dir);
  fs::create_directories(out);

  // one held-out test mission chosen at random under the root seed
  Rng pick(derive_seed(seed, 0));
  const std::size_t test_index = pick.uniform_index(missions);

  // missions are independent given their derived seeds, so generate them in
  // parallel; files and manifest come out identical regardless of scheduling
  std::vector<std::future<void>> jobs;
  const std::size_t workers = std::max<std::size_t>(1, std::thread::hardware_concurrency());
  for (std::size_t w = 0; w < workers; ++w) {
    jobs.push_back(std::async(std::launch::async, [&, w]() {
      for (std::size_t m = w; m < missions; m += workers) {
        sim::MissionConfig cfg = base;
        cfg.seed = derive_seed(seed, m + 1);
        char name[32];
        std::snprintf(name, sizeof(name), "mission_%03zu", m);
        io::write_mission(out / name, sim::simulate_mission(cfg));
      }
    }));
  }
  for (auto& j : jobs) j.get();

  io::DatasetManifest manifest;
  manifest.root_seed = seed;
  manifest.n_history = n_history;
  for (std::size_t m = 0; m < missions; ++m) {
    char name[32];
    std::snprintf(name, sizeof(name), "mission_%03zu", m);
    io::ManifestEntry entry;
    entry.dir = name;
    entry.seed = derive_seed(seed, m + 1);
    entry.split = (m == test_index) ? "test" : "train";
    entry.content_hash = io::mission_content_hash(out / name);
    manifest.missions.push_back(entry);
    log::info(std::string("wrote ") + name + " (" + entry.split + ")");
  }
  io::write_manifest(out / "dataset.json", manifest);

  json effective{{"command", "simulate"},
                 {"missions", missions},
                 {"duration_s", duration},
                 {"seed", seed},
                 {"n_history", n_history},
                 {"test_mission", test_index},
                 {"mission", io::to_json(base)}};
  write_json(out / "simulate_config.json", effective);

  // validate: manifest parses and every mission loads
  const auto reread = io::read_manifest(out / "dataset.json");
  io::load_missions(out / "dataset.json", reread);
  std::printf("simulate: %zu missions under %s (test: mission_%03zu)\n", missions,
              args.out_dir.c_str(), test_index);
  return kOk;
}

// ---- train --------------------------------------------------------------------

struct TrainArgs {
  std::string config_path;
  std::string manifest_path;
  std::string out_checkpoint;
  std::string resume_checkpoint;
  std::size_t epochs = 100;
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  std::size_t patience = 15;
  std::uint64_t seed = 7;
  std::size_t head_hidden = 512;
};

void write_loss_history(const fs::path& path, const std::vector<model::EpochStats>& history) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "epoch,train_mse,val_mse\n";
  for (const auto& row : history) {
    out << row.epoch << "," << io::fmt9(row.train_mse) << "," << io::fmt9(row.val_mse) << "\n";
  }
}

template <typename T>
int train_with_precision(const TrainArgs& args, model::TrainConfig cfg,
                         model::ModelConfig model_cfg) {
  const auto manifest = io::read_manifest(args.manifest_path);
  model_cfg.n_history = manifest.n_history;
  const auto missions = io::load_missions(args.manifest_path, manifest);
  const auto splits = sim::build_dataset(missions, manifest.n_history, manifest.root_seed,
                                         static_cast<int>(manifest.test_mission_index()));
  log::info("dataset: " + std::to_string(splits.train.size()) + " train, " +
            std::to_string(splits.val.size()) + " val, " + std::to_string(splits.test.size()) +
            " test samples");

  model::StBeamsNetParams<T> params{};
  model::Normalization norm;
  std::size_t start_epoch = 0;
  if (!args.resume_checkpoint.empty()) {
    auto [loaded, meta] = io::load_checkpoint<T>(args.resume_checkpoint);
    params = std::move(loaded);
    norm = meta.normalization;
    start_epoch = meta.epochs_completed;
    log::info("resuming from epoch " + std::to_string(start_epoch));
  } else {
    params = model::init_params<T>(model_cfg, derive_seed(cfg.seed, 99));
    norm = model::compute_normalization(splits.train);
  }
  cfg.start_epoch = start_epoch;

  const auto result = model::train(params, norm, splits, cfg);

  io::CheckpointMeta meta;
  meta.train_config = cfg;
  meta.normalization = norm;
  meta.epochs_completed = result.history.empty() ? start_epoch : result.history.back().epoch;
  meta.best_val_mse = result.best_val_mse;

  const fs::path ckpt(args.out_checkpoint);
  if (ckpt.has_parent_path()) fs::create_directories(ckpt.parent_path());
  io::save_checkpoint(ckpt, params, meta);
  const fs::path hist_path =
      ckpt.parent_path() / (ckpt.stem().string() + "_loss_history.csv");
  write_loss_history(hist_path, result.history);

  json effective{{"command", "train"},
                 {"manifest", args.manifest_path},
                 {"train", io::to_json(cfg)},
                 {"model", io::to_json(model_cfg)},
                 {"resume", args.resume_checkpoint},
                 {"best_epoch", result.best_epoch},
                 {"best_val_mse", result.best_val_mse},
                 {"init_val_mse", result.init_val_mse}};
  write_json(ckpt.parent_path() / (ckpt.stem().string() + "_train_config.json"), effective);

  io::load_checkpoint<T>(ckpt);  // validate the artifact parses back
  std::printf("train: %zu epochs, best val MSE %.6g (epoch %zu) -> %s\n",
              result.history.size(), result.best_val_mse, result.best_epoch,
              args.out_checkpoint.c_str());
  return kOk;
}

int run_train(const TrainArgs& args, const CLI::App& cmd) {
  const json file_cfg = load_config_file(args.config_path);
  model::TrainConfig cfg;
  if (file_cfg.contains("train")) cfg = io::train_config_from_json(file_cfg.at("train"));
  if (cmd.count("--epochs") || !file_cfg.contains("train")) cfg.epochs = args.epochs;
  if (cmd.count("--lr")) cfg.learning_rate = args.learning_rate;
  if (cmd.count("--batch")) cfg.batch_size = args.batch_size;
  if (cmd.count("--patience")) cfg.patience = args.patience;
  if (cmd.count("--seed")) cfg.seed = args.seed;
  cfg.validate();

  model::ModelConfig model_cfg;
  if (file_cfg.contains("model")) model_cfg = io::model_config_from_json(file_cfg.at("model"));
  if (cmd.count("--head-hidden")) model_cfg.head_hidden = args.head_hidden;

  if (cfg.precision == "float64") {
    return train_with_precision<double>(args, cfg, model_cfg);
  }
  return train_with_precision<float>(args, cfg, model_cfg);
}

// ---- evaluate -------------------------------------------------------------------

struct EvaluateArgs {
  std::string manifest_path;
  std::string checkpoint_path;
  std::string out_dir;
  std::size_t density_bins = 0;  // 0 = Freedman-Diaconis
};

template <typename T>
std::pair<std::vector<eval::Prediction>, io::CheckpointMeta> network_predictions(
    const EvaluateArgs& args, const io::DatasetManifest& manifest,
    const sim::MissionRecord& mission, std::size_t test_index) {
  auto [params, meta] = io::load_checkpoint<T>(args.checkpoint_path);
  if (params.config.n_history != manifest.n_history) {
    throw CompatibilityError("checkpoint n_history " +
                             std::to_string(params.config.n_history) +
                             " does not match manifest n_history " +
                             std::to_string(manifest.n_history));
  }
  return {model::predict_outages(mission, params, meta.normalization,
                                 static_cast<int>(test_index)),
          meta};
}

int run_evaluate(const EvaluateArgs& args, const CLI::App&) {
  const auto manifest = io::read_manifest(args.manifest_path);
  const std::size_t test_index = manifest.test_mission_index();
  const fs::path base = fs::path(args.manifest_path).parent_path();
  const auto mission = io::read_mission(base / manifest.missions[test_index].dir);

  // the checkpoint knows which precision it was trained in
  const json ckpt_head = json::parse(io::read_file(args.checkpoint_path));
  const std::string precision =
      ckpt_head.contains("train") ? ckpt_head.at("train").value("precision", "float32")
                                  : "float32";
  auto [st_preds, meta] =
      precision == "float64"
          ? network_predictions<double>(args, manifest, mission, test_index)
          : network_predictions<float>(args, manifest, mission, test_index);
  const json model_echo = ckpt_head.at("model");
  const auto ma_preds = model::predict_outages_moving_average(mission, manifest.n_history,
                                                              static_cast<int>(test_index));
  if (st_preds.empty()) throw ConfigError("test mission contains no eligible outage epochs");

  const auto cmp = eval::compare_methods(st_preds, ma_preds);
  const auto density = eval::error_density({st_preds, ma_preds}, args.density_bins);

  const fs::path out(args.out_dir);
  fs::create_directories(out);
  json config_echo{{"command", "evaluate"},
                   {"manifest", args.manifest_path},
                   {"checkpoint", args.checkpoint_path},
                   {"test_mission", test_index},
                   {"n_history", manifest.n_history},
                   {"root_seed", manifest.root_seed},
                   {"train", io::to_json(meta.train_config)},
                   {"model", model_echo},
                   {"density", json{{"mean_error_mps", density.mean_error},
                                    {"error_variance", density.error_variance}}}};
  eval::write_metrics_json((out / "metrics.json").string(), cmp, config_echo);
  eval::write_predictions_csv((out / "predictions.csv").string(), st_preds, ma_preds);
  eval::write_error_density_csv((out / "error_density.csv").string(), density);
  write_json(out / "evaluate_config.json", config_echo);

  // validate all three artifacts against their schemas
  const json parsed = json::parse(io::read_file(out / "metrics.json"));
  for (const char* key : {"st_beamsnet", "moving_average", "rmse_improvement_pct"}) {
    if (!parsed.contains(key)) throw IoError("metrics.json missing field " + std::string(key));
  }
  for (const char* key : {"rmse_mps", "rmse_pct", "mae_mps", "mae_pct", "r2", "vaf",
                          "mean_truth_norm_mps", "sample_count"}) {
    if (!parsed.at("st_beamsnet").contains(key)) {
      throw IoError("metrics.json report missing field " + std::string(key));
    }
  }
  io::detail::read_csv(out / "predictions.csv", 11);
  io::detail::read_csv(out / "error_density.csv", 3);

  std::printf("evaluate: ST RMSE %.4f m/s (%.3f%%) vs MA RMSE %.4f m/s (%.3f%%), improvement %.2f%%\n",
              cmp.st.rmse, cmp.st.rmse_pct, cmp.ma.rmse, cmp.ma.rmse_pct,
              cmp.rmse_improvement_pct);
  return kOk;
}

// ---- compare-only ------------------------------------------------------------------

struct CompareArgs {
  std::string predictions_path;
  std::string out_dir;
  std::size_t density_bins = 0;
};

int run_compare_only(const CompareArgs& args, const CLI::App&) {
  std::vector<eval::Prediction> st_preds, ma_preds;
  for (const auto& row : io::detail::read_csv(args.predictions_path, 11)) {
    eval::Prediction s, m;
    s.t = m.t = row[0];
    s.mission_id = m.mission_id = static_cast<int>(row[1]);
    for (int c = 0; c < 3; ++c) {
      s.truth[c] = m.truth[c] = row[2 + c];
      s.predicted[c] = row[5 + c];
      m.predicted[c] = row[8 + c];
    }
    st_preds.push_back(s);
    ma_preds.push_back(m);
  }
  if (st_preds.empty()) throw ConfigError("predictions file has no rows");
  const auto cmp = eval::compare_methods(st_preds, ma_preds);
  const auto density = eval::error_density({st_preds, ma_preds}, args.density_bins);
  const fs::path out(args.out_dir);
  fs::create_directories(out);
  json config_echo{{"command", "compare-only"}, {"predictions", args.predictions_path}};
  eval::write_metrics_json((out / "metrics.json").string(), cmp, config_echo);
  eval::write_error_density_csv((out / "error_density.csv").string(), density);
  std::printf("compare-only: ST RMSE %.4f vs MA RMSE %.4f, improvement %.2f%%\n", cmp.st.rmse,
              cmp.ma.rmse, cmp.rmse_improvement_pct);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ST-BeamsNet workbench: simulate missions, train, evaluate"};
  app.require_subcommand(1);

  SimulateArgs sim_args;
  auto* sim_cmd = app.add_subcommand("simulate", "Generate synthetic missions and a manifest");
  sim_cmd->add_option("--config", sim_args.config_path, "JSON config file");
  sim_cmd->add_option("--out", sim_args.out_dir, "Output directory")->required();
  sim_cmd->add_option("--missions", sim_args.missions, "Number of missions (default 9)");
  sim_cmd->add_option("--duration", sim_args.duration_s, "Mission duration, seconds (default 600)");
  sim_cmd->add_option("--seed", sim_args.seed, "Root seed (default 42)");

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train the network on a dataset manifest");
  train_cmd->add_option("--config", train_args.config_path, "JSON config file");
  train_cmd->add_option("--manifest", train_args.manifest_path, "dataset.json path")->required();
  train_cmd->add_option("--out", train_args.out_checkpoint, "Checkpoint output path")->required();
  train_cmd->add_option("--resume", train_args.resume_checkpoint,
                        "Continue from an existing checkpoint");
  train_cmd->add_option("--epochs", train_args.epochs, "Training epochs (default 100)");
  train_cmd->add_option("--lr", train_args.learning_rate, "Learning rate (default 1e-3)");
  train_cmd->add_option("--batch", train_args.batch_size, "Batch size (default 32)");
  train_cmd->add_option("--patience", train_args.patience, "Early-stop patience (default 15)");
  train_cmd->add_option("--seed", train_args.seed, "Training seed (default 7)");
  train_cmd->add_option("--head-hidden", train_args.head_hidden,
                        "Fusion head hidden width (default 512)");

  EvaluateArgs eval_args;
  auto* eval_cmd =
      app.add_subcommand("evaluate", "Run the network and the baseline on the test mission");
  eval_cmd->add_option("--manifest", eval_args.manifest_path, "dataset.json path")->required();
  eval_cmd->add_option("--checkpoint", eval_args.checkpoint_path, "Trained checkpoint")->required();
  eval_cmd->add_option("--out", eval_args.out_dir, "Output directory")->required();
  eval_cmd->add_option("--bins", eval_args.density_bins,
                       "Error-density bins (default: Freedman-Diaconis)");

  CompareArgs cmp_args;
  auto* cmp_cmd =
      app.add_subcommand("compare-only", "Recompute reports from an existing predictions.csv");
  cmp_cmd->add_option("--predictions", cmp_args.predictions_path, "predictions.csv")->required();
  cmp_cmd->add_option("--out", cmp_args.out_dir, "Output directory")->required();
  cmp_cmd->add_option("--bins", cmp_args.density_bins, "Error-density bins");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim_cmd->parsed()) return run_simulate(sim_args, *sim_cmd);
    if (train_cmd->parsed()) return run_train(train_args, *train_cmd);
    if (eval_cmd->parsed()) return run_evaluate(eval_args, *eval_cmd);
    if (cmp_cmd->parsed()) return run_compare_only(cmp_args, *cmp_cmd);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kBadConfig;
  } catch (const CompatibilityError& e) {
    std::fprintf(stderr, "compatibility error: %s\n", e.what());
    return kIncompatible;
  } catch (const TrainingFailureError& e) {
    std::fprintf(stderr, "training failure: %s\n", e.what());
    return kTrainingFailure;
  } catch (const IoError& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return kIoFailure;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUnexpected;
  }
  return kUnexpected;
}
