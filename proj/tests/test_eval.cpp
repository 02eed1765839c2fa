#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "stbeamsnet/eval.hpp"
#include "stbeamsnet/rng.hpp"

using namespace stbn;
using eval::Prediction;

namespace {

std::vector<Prediction> random_predictions(std::size_t n, Rng& rng, double noise = 0.1) {
  std::vector<Prediction> preds(n);
  for (std::size_t i = 0; i < n; ++i) {
    preds[i].t = static_cast<double>(4 * (i + 1));
    preds[i].mission_id = 0;
    for (int c = 0; c < 3; ++c) {
      preds[i].truth[c] = rng.uniform(-1.5, 1.5);
      preds[i].predicted[c] = preds[i].truth[c] + rng.uniform(-noise, noise);
    }
  }
  return preds;
}

// Brute-force recomputation of the four metrics from their definitions.
struct BruteForceMetrics {
  double rmse, mae, r2, vaf;
};

BruteForceMetrics brute_force(const std::vector<Prediction>& preds) {
  const std::size_t n = preds.size();
  std::vector<double> x(n), xhat(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = std::hypot(preds[i].truth[0], preds[i].truth[1], preds[i].truth[2]);
    xhat[i] = std::hypot(preds[i].predicted[0], preds[i].predicted[1], preds[i].predicted[2]);
  }
  BruteForceMetrics m{};
  double se = 0.0;
  for (std::size_t i = 0; i < n; ++i) se += (x[i] - xhat[i]) * (x[i] - xhat[i]);
  m.rmse = std::sqrt(se / n);
  double ae = 0.0;
  for (std::size_t i = 0; i < n; ++i) ae += std::abs(x[i] - xhat[i]);
  m.mae = ae / n;
  const double xbar = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double dev = 0.0;
  for (std::size_t i = 0; i < n; ++i) dev += (x[i] - xbar) * (x[i] - xbar);
  m.r2 = 1.0 - se / dev;
  std::vector<double> e(n);
  for (std::size_t i = 0; i < n; ++i) e[i] = x[i] - xhat[i];
  const double ebar = std::accumulate(e.begin(), e.end(), 0.0) / n;
  double var_e = 0.0;
  for (std::size_t i = 0; i < n; ++i) var_e += (e[i] - ebar) * (e[i] - ebar);
  m.vaf = (1.0 - (var_e / n) / (dev / n)) * 100.0;
  return m;
}

}  // namespace

TEST(MovingAverage, ConstantHistoryIsFixedPoint) {
  const dvl::BodyVelocity v{1.2, -0.3, 0.05};
  const auto ma = eval::moving_average({v, v, v});
  EXPECT_DOUBLE_EQ(ma.vx, v.vx);
  EXPECT_DOUBLE_EQ(ma.vy, v.vy);
  EXPECT_DOUBLE_EQ(ma.vz, v.vz);
}

TEST(MovingAverage, ComponentwiseArithmeticMean) {
  const auto ma = eval::moving_average({{1, 0, 0}, {2, 0, 0}, {3, 0, 0}});
  EXPECT_DOUBLE_EQ(ma.vx, 2.0);
}

TEST(MovingAverage, MatchesIndependentMean) {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<dvl::BodyVelocity> h(3);
    double sx = 0, sy = 0, sz = 0;
    for (auto& v : h) {
      v = {rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};
      sx += v.vx;
      sy += v.vy;
      sz += v.vz;
    }
    const auto ma = eval::moving_average(h);
    EXPECT_DOUBLE_EQ(ma.vx, sx / 3.0);
    EXPECT_DOUBLE_EQ(ma.vy, sy / 3.0);
    EXPECT_DOUBLE_EQ(ma.vz, sz / 3.0);
  }
}

TEST(MovingAverage, RejectsShortHistory) {
  EXPECT_THROW(eval::moving_average({{1, 0, 0}, {2, 0, 0}}), InsufficientHistoryError);
}

TEST(MovingAverage, IsLinear) {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<dvl::BodyVelocity> h1(3), h2(3), mix(3);
    const double a = rng.uniform(-3.0, 3.0);
    for (int i = 0; i < 3; ++i) {
      h1[i] = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
      h2[i] = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
      mix[i] = {a * h1[i].vx + h2[i].vx, a * h1[i].vy + h2[i].vy, a * h1[i].vz + h2[i].vz};
    }
    const auto m1 = eval::moving_average(h1);
    const auto m2 = eval::moving_average(h2);
    const auto mm = eval::moving_average(mix);
    EXPECT_NEAR(mm.vx, a * m1.vx + m2.vx, 1e-12);
    EXPECT_NEAR(mm.vy, a * m1.vy + m2.vy, 1e-12);
    EXPECT_NEAR(mm.vz, a * m1.vz + m2.vz, 1e-12);
  }
}

TEST(Metrics, PerfectPredictions) {
  Rng rng(5);
  auto preds = random_predictions(20, rng, 0.0);
  const auto rep = eval::compute_metrics(preds);
  EXPECT_DOUBLE_EQ(rep.rmse, 0.0);
  EXPECT_DOUBLE_EQ(rep.mae, 0.0);
  EXPECT_DOUBLE_EQ(rep.r2, 1.0);
  EXPECT_DOUBLE_EQ(rep.vaf, 100.0);
}

TEST(Metrics, ConstantOffsetGivesFullVaf) {
  // xhat = x + 0.1 on the norms: build predictions whose norm is truth norm + 0.1
  Rng rng(6);
  std::vector<Prediction> preds(10);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    preds[i].t = static_cast<double>(i);
    const double norm = rng.uniform(0.5, 2.0);
    preds[i].truth = {norm, 0.0, 0.0};
    preds[i].predicted = {norm + 0.1, 0.0, 0.0};
  }
  const auto rep = eval::compute_metrics(preds);
  EXPECT_NEAR(rep.rmse, 0.1, 1e-12);
  EXPECT_NEAR(rep.mae, 0.1, 1e-12);
  EXPECT_NEAR(rep.vaf, 100.0, 1e-9);
}

TEST(Metrics, PercentagesAreRelativeToMeanTruthNorm) {
  // the reference point: rmse 0.098 against a 1.14 m/s mean norm
  EXPECT_NEAR(0.098 / 1.14 * 100.0, 8.596491228070175, 1e-12);
  Rng rng(7);
  auto preds = random_predictions(50, rng);
  const auto rep = eval::compute_metrics(preds);
  EXPECT_NEAR(rep.rmse_pct, rep.rmse / rep.mean_truth_norm * 100.0, 1e-12);
  EXPECT_NEAR(rep.mae_pct, rep.mae / rep.mean_truth_norm * 100.0, 1e-12);
}

TEST(Metrics, MatchesBruteForceOnRandomSets) {
  Rng rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    auto preds = random_predictions(2 + rng.uniform_index(40), rng, 0.3);
    const auto rep = eval::compute_metrics(preds);
    const auto want = brute_force(preds);
    EXPECT_NEAR(rep.rmse, want.rmse, 1e-12);
    EXPECT_NEAR(rep.mae, want.mae, 1e-12);
    EXPECT_NEAR(rep.r2, want.r2, 1e-12);
    EXPECT_NEAR(rep.vaf, want.vaf, 1e-9);
    EXPECT_GE(rep.rmse, rep.mae);
    EXPECT_LE(rep.r2, 1.0);
  }
}

TEST(Metrics, InvariantToSampleOrder) {
  Rng rng(9);
  auto preds = random_predictions(30, rng);
  auto shuffled = preds;
  rng.shuffle(shuffled);
  const auto a = eval::compute_metrics(preds);
  const auto b = eval::compute_metrics(shuffled);
  EXPECT_NEAR(a.rmse, b.rmse, 1e-12);
  EXPECT_NEAR(a.mae, b.mae, 1e-12);
  EXPECT_NEAR(a.r2, b.r2, 1e-12);
  EXPECT_NEAR(a.vaf, b.vaf, 1e-9);
}

TEST(Metrics, ZeroAgainstConstantMeanPrediction) {
  // predicting the constant mean of the truth norms drives R2 to 0
  std::vector<Prediction> preds(4);
  const std::array<double, 4> norms{0.8, 1.0, 1.2, 1.4};
  const double mean = 1.1;
  for (std::size_t i = 0; i < 4; ++i) {
    preds[i].t = static_cast<double>(i);
    preds[i].truth = {norms[i], 0, 0};
    preds[i].predicted = {mean, 0, 0};
  }
  EXPECT_NEAR(eval::compute_metrics(preds).r2, 0.0, 1e-12);
}

TEST(Metrics, ErrorsOnDegenerateInput) {
  Rng rng(10);
  EXPECT_THROW(eval::compute_metrics({}), ConfigError);
  EXPECT_THROW(eval::compute_metrics(random_predictions(1, rng)), ConfigError);
  std::vector<Prediction> constant(3);
  for (std::size_t i = 0; i < 3; ++i) {
    constant[i].t = static_cast<double>(i);
    constant[i].truth = {1.0, 0, 0};
    constant[i].predicted = {1.1, 0, 0};
  }
  EXPECT_THROW(eval::compute_metrics(constant), MetricUndefinedError);
}

TEST(Compare, IdenticalListsShowNoImprovement) {
  Rng rng(11);
  auto preds = random_predictions(20, rng);
  const auto cmp = eval::compare_methods(preds, preds);
  EXPECT_DOUBLE_EQ(cmp.rmse_improvement_pct, 0.0);
}

TEST(Compare, ReferenceImprovementArithmetic) {
  // 0.098 vs 0.134 m/s -> 26.87 %
  EXPECT_NEAR((0.134 - 0.098) / 0.134 * 100.0, 26.865671641791046, 1e-9);
}

TEST(Compare, ImprovementMatchesRecomputation) {
  Rng rng(12);
  auto st = random_predictions(25, rng, 0.05);
  auto ma = st;
  for (auto& p : ma) {
    for (int c = 0; c < 3; ++c) p.predicted[c] += rng.uniform(-0.1, 0.1);
  }
  const auto cmp = eval::compare_methods(st, ma);
  const double expect = (cmp.ma.rmse - cmp.st.rmse) / cmp.ma.rmse * 100.0;
  EXPECT_NEAR(cmp.rmse_improvement_pct, expect, 1e-12);
}

TEST(Compare, RejectsMisalignedEpochs) {
  Rng rng(13);
  auto st = random_predictions(10, rng);
  auto ma = st;
  ma[3].t += 1.0;
  EXPECT_THROW(eval::compare_methods(st, ma), AlignmentError);
  ma = st;
  ma.pop_back();
  EXPECT_THROW(eval::compare_methods(st, ma), AlignmentError);
}

TEST(ErrorDensity, SingleSampleSingleBin) {
  Prediction p;
  p.truth = {1.0, 0, 0};
  p.predicted = {1.2, 0, 0};
  const auto d = eval::error_density({{p}, {p}});
  ASSERT_EQ(d.probabilities.size(), 2u);
  ASSERT_EQ(d.probabilities[0].size(), 1u);
  EXPECT_DOUBLE_EQ(d.probabilities[0][0], 1.0);
  EXPECT_DOUBLE_EQ(d.probabilities[1][0], 1.0);
}

TEST(ErrorDensity, SymmetricErrorsHaveZeroMean) {
  std::vector<Prediction> preds;
  for (double e : {0.25, -0.25, 0.1, -0.1}) {
    Prediction p;
    p.truth = {1.0, 0, 0};
    p.predicted = {1.0 + e, 0, 0};
    preds.push_back(p);
  }
  const auto d = eval::error_density({preds, preds});
  EXPECT_NEAR(d.mean_error[0], 0.0, 1e-12);
}

TEST(ErrorDensity, GaussianVarianceRecovered) {
  Rng rng(14);
  std::vector<Prediction> preds(100000);
  for (auto& p : preds) {
    p.truth = {1.0, 0, 0};
    p.predicted = {1.0 + rng.gaussian(0.0, 0.05), 0, 0};
  }
  const auto d = eval::error_density({preds, preds}, 64);
  EXPECT_LT(std::abs(d.error_variance[0] - 0.0025) / 0.0025, 0.05);
  double total = 0.0;
  for (double p : d.probabilities[0]) total += p;
  EXPECT_NEAR(total, 1.0, 1e-9);
}

TEST(ErrorDensity, ProbabilitiesSumToOnePerMethod) {
  Rng rng(15);
  auto a = random_predictions(137, rng, 0.2);
  auto b = random_predictions(59, rng, 0.4);
  const auto d = eval::error_density({a, b});
  for (const auto& probs : d.probabilities) {
    double total = 0.0;
    for (double p : probs) total += p;
    EXPECT_NEAR(total, 1.0, 1e-9);
  }
}
