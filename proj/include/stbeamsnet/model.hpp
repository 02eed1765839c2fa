#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "stbeamsnet/errors.hpp"
#include "stbeamsnet/eval.hpp"
#include "stbeamsnet/log.hpp"
#include "stbeamsnet/optim.hpp"
#include "stbeamsnet/sensor_sim.hpp"
#include "stbeamsnet/st_blocks.hpp"

// The two-branch forecasting network: an inertial branch over the last second
// of IMU data and a history branch over the n most recent DVL velocities,
// each patch-embedded, encoded and aggregated, then fused by two fully
// connected layers into the velocity forecast.

namespace stbn::model {

using nn::Tape;
using nn::Tensor;

struct ModelConfig {
  st::Hyperparams hp;
  std::size_t imu_channels = 6;
  std::size_t imu_window = 100;  // samples, one DVL period at 100 Hz
  std::size_t dvl_channels = 3;
  std::size_t n_history = 3;
  std::size_t head_hidden = 512;

  void validate() const {
    hp.validate();
    if (imu_channels == 0 || imu_window < hp.kernel_size || dvl_channels == 0 ||
        n_history < hp.kernel_size || head_hidden == 0) {
      throw ConfigError("model config: window lengths must cover the embedding kernel");
    }
  }

  std::size_t fused_width() const { return 2 * hp.seeds * hp.latent_dim; }
};

/// Per-channel standardization stats, computed on the training split only.
struct Normalization {
  std::vector<double> imu_mean, imu_std;  // 6 channels
  std::vector<double> dvl_mean, dvl_std;  // 3 channels
};

template <typename T>
struct BranchParams {
  st::PatchEmbedParams<T> embed;
  st::EncoderParams<T> enc;
  st::DecoderParams<T> dec;
};

template <typename T>
struct StBeamsNetParams {
  ModelConfig config;
  BranchParams<T> imu;
  BranchParams<T> dvl;
  Tensor<T> head_w1, head_b1, head_w2, head_b2;
};

/// Fresh parameters; the two branches are independent draws (no weight
/// sharing).
template <typename T>
StBeamsNetParams<T> init_params(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  StBeamsNetParams<T> p;
  p.config = config;
  p.imu = {st::make_patch_embed_params<T>(config.imu_channels, config.hp, rng),
           st::make_encoder_params<T>(config.hp, rng), st::make_decoder_params<T>(config.hp, rng)};
  p.dvl = {st::make_patch_embed_params<T>(config.dvl_channels, config.hp, rng),
           st::make_encoder_params<T>(config.hp, rng), st::make_decoder_params<T>(config.hp, rng)};
  const std::size_t fused = config.fused_width();
  p.head_w1 = st::uniform_init<T>({fused, config.head_hidden}, fused, config.head_hidden, rng);
  p.head_b1 = st::zeros_param<T>({config.head_hidden});
  p.head_w2 = st::uniform_init<T>({config.head_hidden, 3}, config.head_hidden, 3, rng);
  p.head_b2 = st::zeros_param<T>({3});
  return p;
}

template <typename T>
void for_each_parameter(StBeamsNetParams<T>& p, const st::ParamVisitor<T>& fn) {
  st::visit_params(p.imu.embed, "imu.embed", fn);
  st::visit_params(p.imu.enc, "imu.encoder", fn);
  st::visit_params(p.imu.dec, "imu.decoder", fn);
  st::visit_params(p.dvl.embed, "dvl.embed", fn);
  st::visit_params(p.dvl.enc, "dvl.encoder", fn);
  st::visit_params(p.dvl.dec, "dvl.decoder", fn);
  fn("head.w1", p.head_w1);
  fn("head.b1", p.head_b1);
  fn("head.w2", p.head_w2);
  fn("head.b2", p.head_b2);
}

template <typename T>
std::vector<Tensor<T>> collect_parameters(StBeamsNetParams<T>& p) {
  std::vector<Tensor<T>> out;
  for_each_parameter<T>(p, [&](const std::string&, Tensor<T>& t) { out.push_back(t); });
  return out;
}

/// One branch from tokens onward: encoder, decoder, row-major flatten of the
/// k x d aggregate (seed-vector index outermost) into a 1 x (k*d) row.
template <typename T>
Tensor<T> branch_from_tokens(const BranchParams<T>& branch, const Tensor<T>& tokens,
                             const st::Hyperparams& hp, Tape<T>& tape) {
  Tensor<T> z = st::encoder(tokens, branch.enc, hp.heads, tape);
  Tensor<T> agg = st::decoder(z, branch.dec, hp.heads, tape);
  return agg.reshaped({1, agg.dim(0) * agg.dim(1)});
}

/// Tokens of one branch from a time-major window (rows = time steps).
template <typename T>
Tensor<T> branch_tokens(const BranchParams<T>& branch, const Tensor<T>& window_tc,
                        const st::Hyperparams& hp, Tape<T>& tape) {
  return st::patch_embed(nn::transpose(window_tc, tape), branch.embed, hp, tape);
}

/// Full forward pass. imu_window is 100 x 6 (time-major), dvl_history is
/// n x 3 oldest first; both already standardized. Returns a 1 x 3 row.
template <typename T>
Tensor<T> model_forward(const StBeamsNetParams<T>& p, const Tensor<T>& imu_window,
                        const Tensor<T>& dvl_history, Tape<T>& tape) {
  const auto& cfg = p.config;
  if (imu_window.shape() != std::vector<std::size_t>{cfg.imu_window, cfg.imu_channels}) {
    throw ShapeError("imu branch expects " + std::to_string(cfg.imu_window) + "x" +
                     std::to_string(cfg.imu_channels) + " input, got " +
                     nn::shape_str(imu_window.shape()));
  }
  if (dvl_history.shape() != std::vector<std::size_t>{cfg.n_history, cfg.dvl_channels}) {
    throw ShapeError("dvl branch expects " + std::to_string(cfg.n_history) + "x" +
                     std::to_string(cfg.dvl_channels) + " input, got " +
                     nn::shape_str(dvl_history.shape()));
  }
  Tensor<T> imu_flat = branch_from_tokens(
      p.imu, branch_tokens(p.imu, imu_window, cfg.hp, tape), cfg.hp, tape);
  Tensor<T> dvl_flat = branch_from_tokens(
      p.dvl, branch_tokens(p.dvl, dvl_history, cfg.hp, tape), cfg.hp, tape);
  Tensor<T> fused = nn::concat_cols<T>({imu_flat, dvl_flat}, tape);
  Tensor<T> hidden = nn::relu(nn::affine(fused, p.head_w1, p.head_b1, tape), tape);
  return nn::affine(hidden, p.head_w2, p.head_b2, tape);
}

// ---- standardization ---------------------------------------------------------

inline Normalization compute_normalization(const std::vector<sim::TrainingSample>& train) {
  if (train.empty()) throw ConfigError("normalization needs a non-empty training split");
  Normalization norm;
  norm.imu_mean.assign(6, 0.0);
  norm.imu_std.assign(6, 0.0);
  norm.dvl_mean.assign(3, 0.0);
  norm.dvl_std.assign(3, 0.0);

  std::size_t imu_rows = 0, dvl_rows = 0;
  for (const auto& s : train) {
    for (std::size_t r = 0; r < s.imu_window.size() / 6; ++r, ++imu_rows) {
      for (int c = 0; c < 6; ++c) norm.imu_mean[c] += s.imu_window[r * 6 + c];
    }
    for (std::size_t r = 0; r < s.dvl_history.size() / 3; ++r, ++dvl_rows) {
      for (int c = 0; c < 3; ++c) norm.dvl_mean[c] += s.dvl_history[r * 3 + c];
    }
  }
  for (auto& v : norm.imu_mean) v /= static_cast<double>(imu_rows);
  for (auto& v : norm.dvl_mean) v /= static_cast<double>(dvl_rows);
  for (const auto& s : train) {
    for (std::size_t r = 0; r < s.imu_window.size() / 6; ++r) {
      for (int c = 0; c < 6; ++c) {
        const double d = s.imu_window[r * 6 + c] - norm.imu_mean[c];
        norm.imu_std[c] += d * d;
      }
    }
    for (std::size_t r = 0; r < s.dvl_history.size() / 3; ++r) {
      for (int c = 0; c < 3; ++c) {
        const double d = s.dvl_history[r * 3 + c] - norm.dvl_mean[c];
        norm.dvl_std[c] += d * d;
      }
    }
  }
  for (auto& v : norm.imu_std) v = std::max(std::sqrt(v / static_cast<double>(imu_rows)), 1e-8);
  for (auto& v : norm.dvl_std) v = std::max(std::sqrt(v / static_cast<double>(dvl_rows)), 1e-8);
  return norm;
}

/// Standardized (imu_window, dvl_history) tensors of one sample.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> standardize(const sim::TrainingSample& s,
                                            const Normalization& norm) {
  const std::size_t imu_rows = s.imu_window.size() / 6;
  Tensor<T> imu({imu_rows, 6});
  for (std::size_t r = 0; r < imu_rows; ++r) {
    for (int c = 0; c < 6; ++c) {
      imu.at(r, c) =
          static_cast<T>((s.imu_window[r * 6 + c] - norm.imu_mean[c]) / norm.imu_std[c]);
    }
  }
  const std::size_t dvl_rows = s.dvl_history.size() / 3;
  Tensor<T> dvl({dvl_rows, 3});
  for (std::size_t r = 0; r < dvl_rows; ++r) {
    for (int c = 0; c < 3; ++c) {
      dvl.at(r, c) =
          static_cast<T>((s.dvl_history[r * 3 + c] - norm.dvl_mean[c]) / norm.dvl_std[c]);
    }
  }
  return {imu, dvl};
}

// ---- training -----------------------------------------------------------------

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  std::uint64_t seed = 7;
  std::size_t patience = 15;       // epochs without validation improvement
  std::string precision = "float32";
  double target_train_mse = 0.0;   // > 0 stops early once training MSE drops below
  std::size_t start_epoch = 0;     // epoch numbering offset when resuming

  void validate() const {
    if (epochs == 0 || batch_size == 0 || !(learning_rate >= 0)) {
      throw ConfigError("train config: epochs and batch size must be positive, lr non-negative");
    }
    if (precision != "float32" && precision != "float64") {
      throw ConfigError("train config: precision must be float32 or float64");
    }
  }
};

struct EpochStats {
  std::size_t epoch = 0;
  double train_mse = 0.0;
  double val_mse = 0.0;
};

struct TrainResult {
  std::vector<EpochStats> history;
  std::size_t best_epoch = 0;  // 0 = the initialization
  double best_val_mse = 0.0;
  double init_val_mse = 0.0;
};

namespace detail {

template <typename T>
struct Standardized {
  std::vector<std::pair<Tensor<T>, Tensor<T>>> inputs;
  std::vector<Tensor<T>> targets;
};

template <typename T>
Standardized<T> standardize_all(const std::vector<sim::TrainingSample>& samples,
                                const Normalization& norm) {
  Standardized<T> out;
  out.inputs.reserve(samples.size());
  out.targets.reserve(samples.size());
  for (const auto& s : samples) {
    out.inputs.push_back(standardize<T>(s, norm));
    Tensor<T> tgt({1, 3});
    for (int c = 0; c < 3; ++c) tgt[c] = static_cast<T>(s.target[c]);
    out.targets.push_back(tgt);
  }
  return out;
}

template <typename T>
double mean_mse(const StBeamsNetParams<T>& params, const Standardized<T>& data) {
  double total = 0.0;
  for (std::size_t i = 0; i < data.inputs.size(); ++i) {
    Tape<T> tape(false);
    Tensor<T> out = model_forward(params, data.inputs[i].first, data.inputs[i].second, tape);
    total += static_cast<double>(nn::mse_loss(out, data.targets[i], tape)[0]);
  }
  return total / static_cast<double>(data.inputs.size());
}

template <typename T>
std::vector<std::vector<T>> snapshot(StBeamsNetParams<T>& params) {
  std::vector<std::vector<T>> shot;
  for_each_parameter<T>(params, [&](const std::string&, Tensor<T>& t) {
    shot.emplace_back(t.data(), t.data() + t.numel());
  });
  return shot;
}

template <typename T>
void restore(StBeamsNetParams<T>& params, const std::vector<std::vector<T>>& shot) {
  std::size_t i = 0;
  for_each_parameter<T>(params, [&](const std::string&, Tensor<T>& t) {
    std::copy(shot[i].begin(), shot[i].end(), t.data());
    ++i;
  });
}

}  // namespace detail

/// Minimizes the forecast MSE over the training split with gradient
/// accumulation per batch, tracking the best-validation parameters (kept on
/// return). Deterministic for a fixed config.
template <typename T>
TrainResult train(StBeamsNetParams<T>& params, const Normalization& norm,
                  const sim::DatasetSplits& ds, const TrainConfig& cfg) {
  cfg.validate();
  if (ds.train.empty() || ds.val.empty()) {
    throw ConfigError("training needs non-empty train and validation splits");
  }
  const auto train_data = detail::standardize_all<T>(ds.train, norm);
  const auto val_data = detail::standardize_all<T>(ds.val, norm);

  nn::AdamConfig<T> adam_cfg;
  adam_cfg.learning_rate = static_cast<T>(cfg.learning_rate);
  nn::Adam<T> opt(collect_parameters(params), adam_cfg);

  TrainResult result;
  result.init_val_mse = detail::mean_mse(params, val_data);
  result.best_val_mse = result.init_val_mse;
  result.best_epoch = cfg.start_epoch;
  auto best_shot = detail::snapshot(params);

  Rng shuffle_rng(derive_seed(cfg.seed, 17));
  std::vector<std::size_t> order(ds.train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  std::size_t since_best = 0;
  for (std::size_t e = 1; e <= cfg.epochs; ++e) {
    const std::size_t epoch = cfg.start_epoch + e;
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += cfg.batch_size) {
      const std::size_t bn = std::min(cfg.batch_size, order.size() - b0);
      opt.zero_grad();
      for (std::size_t k = 0; k < bn; ++k) {
        const std::size_t i = order[b0 + k];
        Tape<T> tape;
        Tensor<T> out = model_forward(params, train_data.inputs[i].first,
                                      train_data.inputs[i].second, tape);
        Tensor<T> loss = nn::mse_loss(out, train_data.targets[i], tape);
        Tensor<T> scaled = nn::scale(loss, T(1) / static_cast<T>(bn), tape);
        tape.backward(scaled);
        loss_sum += static_cast<double>(loss[0]);
      }
      opt.step();
    }
    const double train_mse = loss_sum / static_cast<double>(order.size());
    const double val_mse = detail::mean_mse(params, val_data);
    if (!std::isfinite(train_mse) || !std::isfinite(val_mse)) {
      throw TrainingFailureError("training diverged (non-finite loss) at epoch " +
                                 std::to_string(epoch));
    }
    result.history.push_back({epoch, train_mse, val_mse});
    log::info("epoch " + std::to_string(epoch) + ": train_mse=" + std::to_string(train_mse) +
              " val_mse=" + std::to_string(val_mse));
    if (val_mse < result.best_val_mse) {
      result.best_val_mse = val_mse;
      result.best_epoch = epoch;
      best_shot = detail::snapshot(params);
      since_best = 0;
    } else {
      ++since_best;
    }
    if (cfg.target_train_mse > 0.0 && train_mse < cfg.target_train_mse) break;
    if (since_best > cfg.patience) {
      log::info("early stop after epoch " + std::to_string(epoch));
      break;
    }
  }
  detail::restore(params, best_shot);
  return result;
}

// ---- inference ------------------------------------------------------------------

/// One forecast per eligible outage epoch of a mission, built strictly from
/// measured (valid) past DVL epochs and the preceding second of IMU data.
template <typename T>
std::vector<eval::Prediction> predict_outages(const sim::MissionRecord& mission,
                                              const StBeamsNetParams<T>& params,
                                              const Normalization& norm, int mission_id = 0) {
  std::vector<eval::Prediction> out;
  for (const auto& s : sim::extract_samples(mission, params.config.n_history, mission_id)) {
    const auto [imu, dvl] = standardize<T>(s, norm);
    Tape<T> tape(false);
    Tensor<T> pred = model_forward(params, imu, dvl, tape);
    eval::Prediction p;
    p.t = s.epoch_t;
    p.mission_id = mission_id;
    p.truth = s.target;
    p.predicted = {static_cast<double>(pred[0]), static_cast<double>(pred[1]),
                   static_cast<double>(pred[2])};
    out.push_back(p);
  }
  return out;
}

/// Baseline forecasts on the same epochs: the componentwise moving average of
/// the same n=3 most recent valid DVL velocities the network sees.
inline std::vector<eval::Prediction> predict_outages_moving_average(
    const sim::MissionRecord& mission, std::size_t n_history, int mission_id = 0) {
  std::vector<eval::Prediction> out;
  for (const auto& s : sim::extract_samples(mission, n_history, mission_id)) {
    std::vector<dvl::BodyVelocity> history;
    for (std::size_t r = 0; r < s.dvl_history.size() / 3; ++r) {
      history.push_back({s.dvl_history[r * 3], s.dvl_history[r * 3 + 1], s.dvl_history[r * 3 + 2]});
    }
    const dvl::BodyVelocity ma = eval::moving_average(history, std::min<std::size_t>(3, n_history));
    eval::Prediction p;
    p.t = s.epoch_t;
    p.mission_id = mission_id;
    p.truth = s.target;
    p.predicted = {ma.vx, ma.vy, ma.vz};
    out.push_back(p);
  }
  return out;
}

}  // namespace stbn::model
