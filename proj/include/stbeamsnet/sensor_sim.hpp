#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "stbeamsnet/dvl_geometry.hpp"
#include "stbeamsnet/errors.hpp"
#include "stbeamsnet/log.hpp"
#include "stbeamsnet/rng.hpp"

// Synthetic mission generation: smooth ground-truth trajectories, 100 Hz
// inertial and 1 Hz DVL streams with the beam-level corruption model, the
// periodic complete-outage schedule, and windowing into training samples.

namespace stbn::sim {

constexpr double kGravity = 9.80665;   // m/s^2, NED-like body frame with z down
constexpr double kImuRateHz = 100.0;
constexpr double kDvlPeriodS = 1.0;

/// DVL beam corruption triple plus the white-noise levels of the synthetic IMU.
struct ErrorModel {
  double scale_factor = 0.007;          // dimensionless
  double bias = 0.0001;                 // m/s per beam
  double noise_std = 0.042;             // m/s per beam
  double imu_accel_noise_std = 0.002;   // m/s^2
  double imu_gyro_noise_std = 0.0001;   // rad/s
  // When set, the corruption triple is applied to the LS-resolved velocity
  // vector instead of the individual beams.
  bool corrupt_resolved_velocity = false;

  void validate() const {
    if (scale_factor < 0 || bias < 0 || noise_std < 0 || imu_accel_noise_std < 0 ||
        imu_gyro_noise_std < 0) {
      throw ConfigError("error model: all magnitudes must be non-negative");
    }
  }
};

struct MissionConfig {
  double duration_s = 600.0;       // whole seconds
  std::uint64_t seed = 1;
  double mean_speed = 1.14;        // m/s, time-mean of the speed profile
  double maneuver_richness = 1.0;  // 0 freezes the trajectory to constant surge
  double theta = 20.0 * M_PI / 180.0;  // beam pitch, radians
  ErrorModel error_model;
  double outage_period_s = 4.0;

  void validate() const {
    if (!(duration_s >= 60.0)) {
      throw ConfigError("mission duration must be at least 60 s, got " +
                        std::to_string(duration_s));
    }
    if (std::abs(duration_s - std::round(duration_s)) > 1e-9) {
      throw ConfigError("mission duration must be a whole number of seconds");
    }
    if (!(mean_speed > 0)) throw ConfigError("mean speed must be positive");
    if (maneuver_richness < 0) throw ConfigError("maneuver richness must be non-negative");
    const double ratio = outage_period_s / kDvlPeriodS;
    if (!(outage_period_s > 0) || std::abs(ratio - std::round(ratio)) > 1e-9) {
      throw ConfigError("outage period must be a positive multiple of the 1 s DVL period");
    }
    dvl::BeamGeometry{theta}.validate();
    error_model.validate();
  }

  std::size_t dvl_epochs() const { return static_cast<std::size_t>(std::llround(duration_s)); }
  std::size_t imu_samples() const { return dvl_epochs() * 100; }
};

struct ImuSample {
  double t = 0.0;
  std::array<double, 3> specific_force{};  // m/s^2, body frame
  std::array<double, 3> angular_rate{};    // rad/s, body frame
};

struct DvlMeasurement {
  double t = 0.0;
  dvl::BodyVelocity velocity{};  // NaN components while invalid
  bool valid = true;
};

namespace detail {

struct Wave {
  double amp = 0.0, omega = 0.0, phase = 0.0;
  double value(double t) const { return amp * std::sin(omega * t + phase); }
};

inline double wave_sum(const std::vector<Wave>& waves, double t) {
  double v = 0.0;
  for (const auto& w : waves) v += w.value(t);
  return v;
}

}  // namespace detail

/// Closed-form ground-truth motion: body velocity is the mean surge speed
/// plus three low-frequency sinusoids per axis (periods 30-300 s), heading
/// wanders slowly, and roll/pitch stay within +-10 degrees. All coefficients
/// are drawn deterministically from the trajectory seed; the velocity profile
/// is rescaled so the time-mean speed over the mission equals mean_speed.
class TrajectoryModel {
 public:
  explicit TrajectoryModel(const MissionConfig& config) {
    config.validate();
    Rng rng(derive_seed(config.seed, 0));
    const double rich = config.maneuver_richness;
    const double att_scale = std::min(rich, 1.0);

    heading_base_ = rng.uniform(-M_PI, M_PI);
    for (int j = 0; j < 2; ++j) {
      heading_waves_.push_back(draw_wave(rng, 0.2 * rich, 0.6 * rich, 60.0, 300.0));
    }
    // periods sit at the fast end of the 30-300 s band so the velocity moves
    // noticeably within the moving-average staleness window
    const double ms = config.mean_speed;
    for (int j = 0; j < 3; ++j) {
      surge_waves_.push_back(draw_wave(rng, 0.12 * ms * rich, 0.24 * ms * rich, 30.0, 90.0));
      sway_waves_.push_back(draw_wave(rng, 0.04 * ms * rich, 0.10 * ms * rich, 30.0, 90.0));
      heave_waves_.push_back(draw_wave(rng, 0.01 * ms * rich, 0.05 * ms * rich, 30.0, 90.0));
    }
    // gentle roll/pitch: a cruising survey AUV stays close to level
    for (int j = 0; j < 2; ++j) {
      const double deg = M_PI / 180.0;
      roll_waves_.push_back(draw_wave(rng, 0.5 * deg * att_scale, 1.5 * deg * att_scale, 20.0, 120.0));
      pitch_waves_.push_back(draw_wave(rng, 0.5 * deg * att_scale, 1.5 * deg * att_scale, 20.0, 120.0));
    }

    mean_surge_ = ms;
    speed_scale_ = 1.0;
    if (rich > 0.0) {
      // pin the time-mean speed over the 100 Hz grid to mean_speed
      const std::size_t n = config.imu_samples();
      double mean = 0.0;
      for (std::size_t k = 1; k <= n; ++k) {
        mean += body_velocity(static_cast<double>(k) / kImuRateHz).norm();
      }
      mean /= static_cast<double>(n);
      speed_scale_ = ms / mean;
    }
  }

  dvl::BodyVelocity body_velocity(double t) const {
    return {speed_scale_ * (mean_surge_ + detail::wave_sum(surge_waves_, t)),
            speed_scale_ * detail::wave_sum(sway_waves_, t),
            speed_scale_ * detail::wave_sum(heave_waves_, t)};
  }

  /// Roll, pitch, yaw (ZYX convention, body to NED).
  std::array<double, 3> euler_rpy(double t) const {
    return {detail::wave_sum(roll_waves_, t), detail::wave_sum(pitch_waves_, t),
            heading_base_ + detail::wave_sum(heading_waves_, t)};
  }

  /// Rotation matrix body->NED, rows major.
  std::array<std::array<double, 3>, 3> rotation_body_to_ned(double t) const {
    const auto rpy = euler_rpy(t);
    const double cr = std::cos(rpy[0]), sr = std::sin(rpy[0]);
    const double cp = std::cos(rpy[1]), sp = std::sin(rpy[1]);
    const double cy = std::cos(rpy[2]), sy = std::sin(rpy[2]);
    return {{{cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr},
             {sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr},
             {-sp, cp * sr, cp * cr}}};
  }

  std::array<double, 3> ned_velocity(double t) const {
    const auto c = rotation_body_to_ned(t);
    const auto v = body_velocity(t);
    return {c[0][0] * v.vx + c[0][1] * v.vy + c[0][2] * v.vz,
            c[1][0] * v.vx + c[1][1] * v.vy + c[1][2] * v.vz,
            c[2][0] * v.vx + c[2][1] * v.vy + c[2][2] * v.vz};
  }

  /// Ideal specific force in the body frame: C^T (dv_n/dt - g_n). A resting,
  /// level vehicle reads [0, 0, -g].
  std::array<double, 3> specific_force(double t) const {
    const double h = 1e-4;
    const auto vp = ned_velocity(t + h);
    const auto vm = ned_velocity(t - h);
    const std::array<double, 3> accel_minus_g = {(vp[0] - vm[0]) / (2 * h),
                                                 (vp[1] - vm[1]) / (2 * h),
                                                 (vp[2] - vm[2]) / (2 * h) - kGravity};
    const auto c = rotation_body_to_ned(t);
    return {c[0][0] * accel_minus_g[0] + c[1][0] * accel_minus_g[1] + c[2][0] * accel_minus_g[2],
            c[0][1] * accel_minus_g[0] + c[1][1] * accel_minus_g[1] + c[2][1] * accel_minus_g[2],
            c[0][2] * accel_minus_g[0] + c[1][2] * accel_minus_g[1] + c[2][2] * accel_minus_g[2]};
  }

  /// Ideal body angular rate from the Euler-angle rates.
  std::array<double, 3> angular_rate(double t) const {
    const double h = 1e-4;
    const auto ep = euler_rpy(t + h);
    const auto em = euler_rpy(t - h);
    const double rd = (ep[0] - em[0]) / (2 * h);
    const double pd = (ep[1] - em[1]) / (2 * h);
    const double yd = (ep[2] - em[2]) / (2 * h);
    const auto rpy = euler_rpy(t);
    const double cr = std::cos(rpy[0]), sr = std::sin(rpy[0]);
    const double cp = std::cos(rpy[1]), sp = std::sin(rpy[1]);
    return {rd - yd * sp, pd * cr + yd * cp * sr, -pd * sr + yd * cp * cr};
  }

 private:
  static detail::Wave draw_wave(Rng& rng, double amp_lo, double amp_hi, double period_lo,
                                double period_hi) {
    detail::Wave w;
    w.amp = rng.uniform(amp_lo, amp_hi);
    w.omega = 2.0 * M_PI / rng.uniform(period_lo, period_hi);
    w.phase = rng.uniform(0.0, 2.0 * M_PI);
    return w;
  }

  double heading_base_ = 0.0;
  double mean_surge_ = 0.0;
  double speed_scale_ = 1.0;
  std::vector<detail::Wave> heading_waves_, surge_waves_, sway_waves_, heave_waves_;
  std::vector<detail::Wave> roll_waves_, pitch_waves_;
};

/// Ground-truth trajectory of one mission: the closed-form model plus the
/// mission extent. Sampled series are produced on demand.
struct Trajectory {
  MissionConfig config;
  TrajectoryModel model;

  explicit Trajectory(const MissionConfig& cfg) : config(cfg), model(cfg) {}

  /// Body velocity sampled at the 100 Hz grid t = k/100, k = 1..duration*100.
  std::vector<dvl::BodyVelocity> sampled_body_velocity() const {
    std::vector<dvl::BodyVelocity> out;
    out.reserve(config.imu_samples());
    for (std::size_t k = 1; k <= config.imu_samples(); ++k) {
      out.push_back(model.body_velocity(static_cast<double>(k) / kImuRateHz));
    }
    return out;
  }

  std::vector<std::array<double, 3>> sampled_euler() const {
    std::vector<std::array<double, 3>> out;
    out.reserve(config.imu_samples());
    for (std::size_t k = 1; k <= config.imu_samples(); ++k) {
      out.push_back(model.euler_rpy(static_cast<double>(k) / kImuRateHz));
    }
    return out;
  }
};

inline Trajectory generate_trajectory(const MissionConfig& config) { return Trajectory(config); }

/// 100 Hz inertial stream: ideal specific force and angular rate from the
/// trajectory plus white noise.
inline std::vector<ImuSample> synthesize_imu(const Trajectory& traj, const ErrorModel& err,
                                             std::uint64_t seed) {
  err.validate();
  Rng rng(seed);
  std::vector<ImuSample> out;
  const std::size_t n = traj.config.imu_samples();
  out.reserve(n);
  for (std::size_t k = 1; k <= n; ++k) {
    const double t = static_cast<double>(k) / kImuRateHz;
    ImuSample s;
    s.t = t;
    s.specific_force = traj.model.specific_force(t);
    s.angular_rate = traj.model.angular_rate(t);
    for (int i = 0; i < 3; ++i) s.specific_force[i] += rng.gaussian(0.0, err.imu_accel_noise_std);
    for (int i = 0; i < 3; ++i) s.angular_rate[i] += rng.gaussian(0.0, err.imu_gyro_noise_std);
    out.push_back(s);
  }
  return out;
}

/// 1 Hz DVL stream. Default path projects the true body velocity onto the
/// beams, corrupts each beam with scale, bias and white noise, then resolves
/// the velocity back through the least-squares filter.
inline std::vector<DvlMeasurement> synthesize_dvl(const Trajectory& traj,
                                                  const dvl::BeamGeometry& geometry,
                                                  const ErrorModel& err, std::uint64_t seed) {
  err.validate();
  const dvl::DirectionMatrix h = dvl::build_direction_matrix(geometry);
  Rng rng(seed);
  std::vector<DvlMeasurement> out;
  const std::size_t epochs = traj.config.dvl_epochs();
  out.reserve(epochs);
  for (std::size_t e = 1; e <= epochs; ++e) {
    const double t = static_cast<double>(e) * kDvlPeriodS;
    const dvl::BodyVelocity truth = traj.model.body_velocity(t);
    DvlMeasurement m;
    m.t = t;
    m.valid = true;
    if (err.corrupt_resolved_velocity) {
      m.velocity = {truth.vx * (1.0 + err.scale_factor) + err.bias + rng.gaussian(0.0, err.noise_std),
                    truth.vy * (1.0 + err.scale_factor) + err.bias + rng.gaussian(0.0, err.noise_std),
                    truth.vz * (1.0 + err.scale_factor) + err.bias + rng.gaussian(0.0, err.noise_std)};
    } else {
      dvl::BeamVelocities beams = dvl::body_to_beam(h, truth);
      for (double& b : beams.b) {
        b = b * (1.0 + err.scale_factor) + err.bias + rng.gaussian(0.0, err.noise_std);
      }
      m.velocity = dvl::ls_solve(h, beams);
    }
    out.push_back(m);
  }
  return out;
}

/// Marks every period-th epoch invalid, starting at t = period. Invalid
/// epochs lose their velocity (NaN components).
inline void apply_outage_schedule(std::vector<DvlMeasurement>& dvl, double period_s) {
  const double ratio = period_s / kDvlPeriodS;
  if (!(period_s > 0) || std::abs(ratio - std::round(ratio)) > 1e-9) {
    throw ConfigError("outage period must be a positive multiple of the 1 s DVL period");
  }
  const long long period = std::llround(ratio);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (auto& m : dvl) {
    const long long epoch = std::llround(m.t / kDvlPeriodS);
    if (epoch % period == 0) {
      m.valid = false;
      m.velocity = {nan, nan, nan};
    }
  }
}

/// Time-aligned streams of one simulated mission plus the 1 Hz ground truth.
struct MissionRecord {
  MissionConfig config;
  std::vector<ImuSample> imu;
  std::vector<DvlMeasurement> dvl;
  std::vector<dvl::BodyVelocity> truth;  // at the DVL epochs

  void check_alignment() const {
    if (imu.size() != dvl.size() * 100 || truth.size() != dvl.size()) {
      throw ConfigError("mission record streams are misaligned: " + std::to_string(imu.size()) +
                        " IMU, " + std::to_string(dvl.size()) + " DVL, " +
                        std::to_string(truth.size()) + " truth");
    }
  }
};

/// Full per-mission pipeline. Substreams 0/1/2 of the mission seed drive the
/// trajectory, IMU noise and DVL noise.
inline MissionRecord simulate_mission(const MissionConfig& config) {
  Trajectory traj = generate_trajectory(config);
  MissionRecord rec;
  rec.config = config;
  rec.imu = synthesize_imu(traj, config.error_model, derive_seed(config.seed, 1));
  rec.dvl = synthesize_dvl(traj, dvl::BeamGeometry{config.theta}, config.error_model,
                           derive_seed(config.seed, 2));
  apply_outage_schedule(rec.dvl, config.outage_period_s);
  rec.truth.reserve(rec.dvl.size());
  for (const auto& m : rec.dvl) rec.truth.push_back(traj.model.body_velocity(m.t));
  rec.check_alignment();
  return rec;
}

/// One supervised example: the second of inertial data preceding an outage
/// epoch, the n most recent valid DVL velocities (oldest first), and the
/// ground-truth velocity at the epoch as target.
struct TrainingSample {
  std::vector<double> imu_window;   // 100 x 6 row-major: fx fy fz wx wy wz
  std::vector<double> dvl_history;  // n_history x 3 row-major, oldest first
  std::array<double, 3> target{};
  double epoch_t = 0.0;
  int mission_index = -1;
};

/// Samples for every eligible outage epoch of one mission.
inline std::vector<TrainingSample> extract_samples(const MissionRecord& rec,
                                                   std::size_t n_history, int mission_index) {
  rec.check_alignment();
  std::vector<TrainingSample> out;
  for (std::size_t i = 0; i < rec.dvl.size(); ++i) {
    if (rec.dvl[i].valid) continue;
    // the n most recent valid epochs strictly before the outage
    std::vector<std::size_t> hist;
    for (std::size_t j = i; j-- > 0 && hist.size() < n_history;) {
      if (rec.dvl[j].valid) hist.push_back(j);
    }
    if (hist.size() < n_history) {
      log::debug("skipping outage at t=" + std::to_string(rec.dvl[i].t) +
                 ": insufficient valid history");
      continue;
    }
    TrainingSample s;
    s.epoch_t = rec.dvl[i].t;
    s.mission_index = mission_index;
    const long long epoch = std::llround(s.epoch_t / kDvlPeriodS);
    const std::size_t k0 = static_cast<std::size_t>(epoch - 1) * 100;
    s.imu_window.reserve(600);
    for (std::size_t r = 0; r < 100; ++r) {
      const ImuSample& sample = rec.imu[k0 + r];
      for (int c = 0; c < 3; ++c) s.imu_window.push_back(sample.specific_force[c]);
      for (int c = 0; c < 3; ++c) s.imu_window.push_back(sample.angular_rate[c]);
    }
    s.dvl_history.reserve(3 * n_history);
    for (auto it = hist.rbegin(); it != hist.rend(); ++it) {  // oldest first
      const auto& v = rec.dvl[*it].velocity;
      s.dvl_history.push_back(v.vx);
      s.dvl_history.push_back(v.vy);
      s.dvl_history.push_back(v.vz);
    }
    s.target = {rec.truth[i].vx, rec.truth[i].vy, rec.truth[i].vz};
    out.push_back(std::move(s));
  }
  if (out.empty()) {
    log::warn("mission " + std::to_string(mission_index) + " yields no training samples");
  }
  return out;
}

struct DatasetSplits {
  std::vector<TrainingSample> train, val, test;
  std::size_t test_mission = 0;
  std::size_t n_history = 3;
  std::uint64_t seed = 0;
};

/// Splits missions into one held-out test mission and a pooled 90/10
/// train/validation split of the remaining missions' samples. Pass
/// test_mission < 0 to pick the held-out mission at random under the seed.
inline DatasetSplits build_dataset(const std::vector<MissionRecord>& missions,
                                   std::size_t n_history, std::uint64_t seed,
                                   int test_mission = -1) {
  if (missions.size() < 2) {
    throw ConfigError("dataset needs at least 2 missions, got " +
                      std::to_string(missions.size()));
  }
  if (n_history == 0) throw ConfigError("n_history must be positive");
  DatasetSplits ds;
  ds.n_history = n_history;
  ds.seed = seed;
  if (test_mission < 0) {
    Rng pick(derive_seed(seed, 0));
    ds.test_mission = pick.uniform_index(missions.size());
  } else if (static_cast<std::size_t>(test_mission) < missions.size()) {
    ds.test_mission = static_cast<std::size_t>(test_mission);
  } else {
    throw ConfigError("test mission index out of range");
  }

  std::vector<TrainingSample> pool;
  for (std::size_t m = 0; m < missions.size(); ++m) {
    auto samples = extract_samples(missions[m], n_history, static_cast<int>(m));
    if (m == ds.test_mission) {
      ds.test = std::move(samples);
    } else {
      pool.insert(pool.end(), std::make_move_iterator(samples.begin()),
                  std::make_move_iterator(samples.end()));
    }
  }
  Rng shuffle_rng(derive_seed(seed, 1));
  shuffle_rng.shuffle(pool);
  const std::size_t n_val = pool.size() >= 2 ? std::max<std::size_t>(1, pool.size() / 10) : 0;
  ds.val.assign(pool.begin(), pool.begin() + n_val);
  ds.train.assign(pool.begin() + n_val, pool.end());
  return ds;
}

}  // namespace stbn::sim
