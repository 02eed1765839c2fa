#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <string>

#include "stbeamsnet/errors.hpp"

namespace stbn::dvl {

/// Janus '×' beam arrangement: four beams pitched by a common angle theta,
/// headings 90 degrees apart starting at 45 degrees.
struct BeamGeometry {
  double theta;  // beam pitch angle, radians
  static constexpr int kBeamCount = 4;

  /// Heading of beam i (1-based): (i-1)*pi/2 + pi/4.
  static double heading(int beam_index) {
    return (beam_index - 1) * (M_PI / 2.0) + M_PI / 4.0;
  }

  void validate() const {
    if (!std::isfinite(theta) || theta <= 0.0 || theta >= M_PI / 2.0) {
      throw DegenerateGeometryError(
          "beam pitch theta must lie strictly in (0, pi/2), got " + std::to_string(theta));
    }
  }
};

/// AUV velocity in the body frame, m/s.
struct BodyVelocity {
  double vx = 0.0;
  double vy = 0.0;
  double vz = 0.0;

  double norm() const { return std::sqrt(vx * vx + vy * vy + vz * vz); }
};

/// Velocity along each beam axis, m/s.
struct BeamVelocities {
  std::array<double, 4> b{};
};

/// 4x3 matrix of unit beam-direction row vectors; maps body velocity to beam
/// velocities.
struct DirectionMatrix {
  std::array<std::array<double, 3>, 4> rows{};

  Eigen::Matrix<double, 4, 3> as_eigen() const {
    Eigen::Matrix<double, 4, 3> h;
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 3; ++c) h(r, c) = rows[r][c];
    return h;
  }
};

/// Direction of beam i at pitch theta: [cos(psi_i) sin(theta), sin(psi_i) sin(theta), cos(theta)].
/// Accepts theta in [0, pi/2]; rank questions are the concern of ls_solve, not
/// of the direction formula itself.
inline std::array<double, 3> beam_direction(int beam_index, double theta) {
  if (beam_index < 1 || beam_index > BeamGeometry::kBeamCount) {
    throw std::invalid_argument("beam index must be in 1..4, got " + std::to_string(beam_index));
  }
  if (!std::isfinite(theta) || theta < 0.0 || theta > M_PI / 2.0) {
    throw std::invalid_argument("beam pitch must lie in [0, pi/2], got " + std::to_string(theta));
  }
  const double psi = BeamGeometry::heading(beam_index);
  return {std::cos(psi) * std::sin(theta), std::sin(psi) * std::sin(theta), std::cos(theta)};
}

inline DirectionMatrix build_direction_matrix(const BeamGeometry& geometry) {
  geometry.validate();
  DirectionMatrix h;
  for (int i = 1; i <= BeamGeometry::kBeamCount; ++i) {
    h.rows[i - 1] = beam_direction(i, geometry.theta);
  }
  return h;
}

/// Beam velocities from body velocity: H * v.
inline BeamVelocities body_to_beam(const DirectionMatrix& h, const BodyVelocity& v) {
  BeamVelocities out;
  for (int r = 0; r < 4; ++r) {
    out.b[r] = h.rows[r][0] * v.vx + h.rows[r][1] * v.vy + h.rows[r][2] * v.vz;
  }
  return out;
}

/// Least-squares body velocity from measured beam velocities:
/// (H^T H)^-1 H^T y, solved via the normal equations with a pivoted QR
/// fallback. Rejects geometries whose normal matrix has condition number
/// above 1e12 (theta too close to 0).
inline BodyVelocity ls_solve(const DirectionMatrix& h, const BeamVelocities& y) {
  const Eigen::Matrix<double, 4, 3> he = h.as_eigen();
  const Eigen::Matrix3d hth = he.transpose() * he;

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eigs(hth);
  const double lmin = eigs.eigenvalues().minCoeff();
  const double lmax = eigs.eigenvalues().maxCoeff();
  if (!(lmin > 0.0) || lmax / lmin > 1e12) {
    throw DegenerateGeometryError(
        "normal matrix H^T H is singular or ill-conditioned (theta too close to 0)");
  }

  const Eigen::Vector4d ye(y.b[0], y.b[1], y.b[2], y.b[3]);
  const Eigen::Vector3d rhs = he.transpose() * ye;
  Eigen::LDLT<Eigen::Matrix3d> ldlt(hth);
  Eigen::Vector3d v;
  if (ldlt.info() == Eigen::Success) {
    v = ldlt.solve(rhs);
  } else {
    v = he.colPivHouseholderQr().solve(ye);
  }
  return {v.x(), v.y(), v.z()};
}

}  // namespace stbn::dvl
