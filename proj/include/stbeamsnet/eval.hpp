#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stbeamsnet/dvl_geometry.hpp"
#include "stbeamsnet/errors.hpp"

// Evaluation: the moving-average baseline, the four headline metrics computed
// on velocity norms, method comparison, and the error-density export.

namespace stbn::eval {

struct Prediction {
  double t = 0.0;
  int mission_id = -1;
  std::array<double, 3> truth{};
  std::array<double, 3> predicted{};

  double truth_norm() const {
    return std::sqrt(truth[0] * truth[0] + truth[1] * truth[1] + truth[2] * truth[2]);
  }
  double predicted_norm() const {
    return std::sqrt(predicted[0] * predicted[0] + predicted[1] * predicted[1] +
                     predicted[2] * predicted[2]);
  }
};

/// Componentwise mean of the last n velocities in the history (oldest first).
inline dvl::BodyVelocity moving_average(const std::vector<dvl::BodyVelocity>& history,
                                        std::size_t n = 3) {
  if (history.size() < n || n == 0) {
    throw InsufficientHistoryError("moving average needs " + std::to_string(n) +
                                   " past velocities, got " + std::to_string(history.size()));
  }
  dvl::BodyVelocity mean{0.0, 0.0, 0.0};
  for (std::size_t i = history.size() - n; i < history.size(); ++i) {
    mean.vx += history[i].vx;
    mean.vy += history[i].vy;
    mean.vz += history[i].vz;
  }
  mean.vx /= static_cast<double>(n);
  mean.vy /= static_cast<double>(n);
  mean.vz /= static_cast<double>(n);
  return mean;
}

struct MetricsReport {
  double rmse = 0.0;      // m/s, on velocity norms
  double rmse_pct = 0.0;  // relative to the mean truth norm
  double mae = 0.0;
  double mae_pct = 0.0;
  double r2 = 0.0;
  double vaf = 0.0;  // 0..100 scale
  double mean_truth_norm = 0.0;
  std::size_t sample_count = 0;
  // supplementary per-axis detail
  std::array<double, 3> rmse_axis{};
  std::array<double, 3> mae_axis{};
};

/// Headline metrics on velocity norms: x = |truth|, xhat = |prediction|.
/// Variances are population variances.
inline MetricsReport compute_metrics(const std::vector<Prediction>& preds) {
  if (preds.size() < 2) {
    throw ConfigError("metrics need at least 2 samples, got " + std::to_string(preds.size()));
  }
  const double n = static_cast<double>(preds.size());
  MetricsReport rep;
  rep.sample_count = preds.size();

  double sum_x = 0.0;
  for (const auto& p : preds) sum_x += p.truth_norm();
  const double mean_x = sum_x / n;
  rep.mean_truth_norm = mean_x;

  double sq_err = 0.0, abs_err = 0.0, sq_dev = 0.0, sum_e = 0.0;
  for (const auto& p : preds) {
    const double x = p.truth_norm();
    const double xhat = p.predicted_norm();
    const double e = x - xhat;
    sq_err += e * e;
    abs_err += std::abs(e);
    sq_dev += (x - mean_x) * (x - mean_x);
    sum_e += e;
  }
  if (sq_dev == 0.0) {
    throw MetricUndefinedError("R2/VAF undefined: truth norms have zero variance");
  }
  rep.rmse = std::sqrt(sq_err / n);
  rep.mae = abs_err / n;
  rep.r2 = 1.0 - sq_err / sq_dev;
  const double mean_e = sum_e / n;
  double var_e = 0.0;
  for (const auto& p : preds) {
    const double e = p.truth_norm() - p.predicted_norm();
    var_e += (e - mean_e) * (e - mean_e);
  }
  var_e /= n;
  rep.vaf = (1.0 - var_e / (sq_dev / n)) * 100.0;
  rep.rmse_pct = rep.rmse / mean_x * 100.0;
  rep.mae_pct = rep.mae / mean_x * 100.0;

  for (int c = 0; c < 3; ++c) {
    double se = 0.0, ae = 0.0;
    for (const auto& p : preds) {
      const double e = p.truth[c] - p.predicted[c];
      se += e * e;
      ae += std::abs(e);
    }
    rep.rmse_axis[c] = std::sqrt(se / n);
    rep.mae_axis[c] = ae / n;
  }
  return rep;
}

struct MethodComparison {
  MetricsReport st;  // ST-BeamsNet
  MetricsReport ma;  // moving average
  double rmse_improvement_pct = 0.0;
};

/// Side-by-side reports over identical epochs plus the relative RMSE
/// improvement of the network over the baseline.
inline MethodComparison compare_methods(const std::vector<Prediction>& st_preds,
                                        const std::vector<Prediction>& ma_preds) {
  if (st_preds.size() != ma_preds.size()) {
    throw AlignmentError("prediction lists differ in length: " + std::to_string(st_preds.size()) +
                         " vs " + std::to_string(ma_preds.size()));
  }
  for (std::size_t i = 0; i < st_preds.size(); ++i) {
    if (st_preds[i].t != ma_preds[i].t || st_preds[i].mission_id != ma_preds[i].mission_id) {
      throw AlignmentError("prediction lists diverge at index " + std::to_string(i));
    }
  }
  MethodComparison cmp;
  cmp.st = compute_metrics(st_preds);
  cmp.ma = compute_metrics(ma_preds);
  cmp.rmse_improvement_pct = (cmp.ma.rmse - cmp.st.rmse) / cmp.ma.rmse * 100.0;
  return cmp;
}

struct ErrorDensity {
  std::vector<double> bin_edges;                   // shared, size bins+1
  std::vector<std::vector<double>> probabilities;  // per method, sums to 1
  std::vector<double> mean_error;                  // per method
  std::vector<double> error_variance;              // per method, population
};

/// Histogram of signed norm errors (|prediction| - |truth|) per method over
/// shared bins. bin_count = 0 selects the Freedman-Diaconis rule.
inline ErrorDensity error_density(const std::vector<std::vector<Prediction>>& methods,
                                  std::size_t bin_count = 0) {
  if (methods.empty()) throw ConfigError("error density needs at least one method");
  std::vector<std::vector<double>> errors(methods.size());
  std::vector<double> combined;
  for (std::size_t m = 0; m < methods.size(); ++m) {
    if (methods[m].empty()) {
      throw ConfigError("error density needs at least one prediction per method");
    }
    for (const auto& p : methods[m]) {
      errors[m].push_back(p.predicted_norm() - p.truth_norm());
    }
    combined.insert(combined.end(), errors[m].begin(), errors[m].end());
  }
  std::sort(combined.begin(), combined.end());
  const double lo = combined.front(), hi = combined.back();

  std::size_t bins = bin_count;
  if (bins == 0) {
    const std::size_t n = combined.size();
    const double q1 = combined[static_cast<std::size_t>(0.25 * (n - 1))];
    const double q3 = combined[static_cast<std::size_t>(0.75 * (n - 1))];
    const double width = 2.0 * (q3 - q1) / std::cbrt(static_cast<double>(n));
    if (width > 0.0 && hi > lo) {
      bins = std::clamp<std::size_t>(
          static_cast<std::size_t>(std::ceil((hi - lo) / width)), 1, 200);
    } else {
      bins = 1;
    }
  }

  ErrorDensity density;
  double left = lo, right = hi;
  if (!(right > left)) {  // degenerate range, e.g. a single sample
    left -= 0.5;
    right += 0.5;
  }
  density.bin_edges.resize(bins + 1);
  for (std::size_t b = 0; b <= bins; ++b) {
    density.bin_edges[b] = left + (right - left) * static_cast<double>(b) / static_cast<double>(bins);
  }

  for (const auto& errs : errors) {
    std::vector<double> probs(bins, 0.0);
    for (double e : errs) {
      std::size_t b = static_cast<std::size_t>((e - left) / (right - left) * static_cast<double>(bins));
      b = std::min(b, bins - 1);
      probs[b] += 1.0;
    }
    for (double& p : probs) p /= static_cast<double>(errs.size());
    density.probabilities.push_back(std::move(probs));

    double mean = 0.0;
    for (double e : errs) mean += e;
    mean /= static_cast<double>(errs.size());
    double var = 0.0;
    for (double e : errs) var += (e - mean) * (e - mean);
    var /= static_cast<double>(errs.size());
    density.mean_error.push_back(mean);
    density.error_variance.push_back(var);
  }
  return density;
}

// ---- artifact export -------------------------------------------------------

namespace detail {

inline std::string fmt9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace detail

inline nlohmann::ordered_json metrics_to_json(const MetricsReport& rep) {
  return nlohmann::ordered_json{{"rmse_mps", rep.rmse},
                                {"rmse_pct", rep.rmse_pct},
                                {"mae_mps", rep.mae},
                                {"mae_pct", rep.mae_pct},
                                {"r2", rep.r2},
                                {"vaf", rep.vaf},
                                {"mean_truth_norm_mps", rep.mean_truth_norm},
                                {"sample_count", rep.sample_count},
                                {"rmse_axis_mps", rep.rmse_axis},
                                {"mae_axis_mps", rep.mae_axis}};
}

/// metrics.json: both reports, the improvement, and the run's config echo.
inline void write_metrics_json(const std::string& path, const MethodComparison& cmp,
                               const nlohmann::ordered_json& config_echo) {
  nlohmann::ordered_json doc{{"format_version", 1},
                             {"st_beamsnet", metrics_to_json(cmp.st)},
                             {"moving_average", metrics_to_json(cmp.ma)},
                             {"rmse_improvement_pct", cmp.rmse_improvement_pct},
                             {"config", config_echo}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << doc.dump(2) << "\n";
}

/// predictions.csv: per-epoch truth and both methods' predictions.
inline void write_predictions_csv(const std::string& path,
                                  const std::vector<Prediction>& st_preds,
                                  const std::vector<Prediction>& ma_preds) {
  if (st_preds.size() != ma_preds.size()) {
    throw AlignmentError("prediction lists differ in length");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << "t,mission,truth_vx,truth_vy,truth_vz,st_pred_vx,st_pred_vy,st_pred_vz,"
         "ma_pred_vx,ma_pred_vy,ma_pred_vz\n";
  for (std::size_t i = 0; i < st_preds.size(); ++i) {
    const auto& s = st_preds[i];
    const auto& m = ma_preds[i];
    out << detail::fmt9(s.t) << "," << s.mission_id;
    for (int c = 0; c < 3; ++c) out << "," << detail::fmt9(s.truth[c]);
    for (int c = 0; c < 3; ++c) out << "," << detail::fmt9(s.predicted[c]);
    for (int c = 0; c < 3; ++c) out << "," << detail::fmt9(m.predicted[c]);
    out << "\n";
  }
}

/// error_density.csv: shared bin centers with one probability column per
/// method (network first, baseline second).
inline void write_error_density_csv(const std::string& path, const ErrorDensity& density) {
  if (density.probabilities.size() != 2) {
    throw ConfigError("error density export expects exactly 2 methods");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << "bin_center,st_probability,ma_probability\n";
  const std::size_t bins = density.probabilities[0].size();
  for (std::size_t b = 0; b < bins; ++b) {
    const double center = 0.5 * (density.bin_edges[b] + density.bin_edges[b + 1]);
    out << detail::fmt9(center) << "," << detail::fmt9(density.probabilities[0][b]) << ","
        << detail::fmt9(density.probabilities[1][b]) << "\n";
  }
}

}  // namespace stbn::eval
