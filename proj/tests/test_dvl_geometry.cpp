#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <cmath>

#include "stbeamsnet/dvl_geometry.hpp"
#include "stbeamsnet/rng.hpp"

using namespace stbn;
using dvl::BeamGeometry;
using dvl::BeamVelocities;
using dvl::BodyVelocity;
using dvl::DirectionMatrix;

namespace {

constexpr double kDeg = M_PI / 180.0;

// Independent least-squares oracle: forms the normal equations with plain
// loops and solves the 3x3 system by Cramer's rule. No shared code with
// dvl::ls_solve.
std::array<double, 3> normal_equations_oracle(const DirectionMatrix& h,
                                              const BeamVelocities& y) {
  double a[3][3] = {};
  double rhs[3] = {};
  for (int r = 0; r < 4; ++r) {
    for (int i = 0; i < 3; ++i) {
      rhs[i] += h.rows[r][i] * y.b[r];
      for (int j = 0; j < 3; ++j) a[i][j] += h.rows[r][i] * h.rows[r][j];
    }
  }
  const double det = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) -
                     a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
                     a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
  auto det3 = [&](int col) {
    double m[3][3];
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) m[i][j] = (j == col) ? rhs[i] : a[i][j];
    return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
           m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
           m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
  };
  return {det3(0) / det, det3(1) / det, det3(2) / det};
}

DirectionMatrix matrix_at(double theta) { return dvl::build_direction_matrix({theta}); }

}  // namespace

TEST(BeamDirection, VerticalAtZeroPitch) {
  for (int i = 1; i <= 4; ++i) {
    const auto d = dvl::beam_direction(i, 0.0);
    EXPECT_NEAR(d[0], 0.0, 1e-15);
    EXPECT_NEAR(d[1], 0.0, 1e-15);
    EXPECT_NEAR(d[2], 1.0, 1e-15);
  }
}

TEST(BeamDirection, HorizontalBeamThree) {
  // psi_3 = 5*pi/4, sin(theta) = 1, cos(theta) = 0
  const auto d = dvl::beam_direction(3, M_PI / 2.0);
  EXPECT_NEAR(d[0], -std::sqrt(2.0) / 2.0, 1e-12);
  EXPECT_NEAR(d[1], -std::sqrt(2.0) / 2.0, 1e-12);
  EXPECT_NEAR(d[2], 0.0, 1e-12);
}

TEST(BeamDirection, BeamOneAtThirtyDegrees) {
  const auto d = dvl::beam_direction(1, M_PI / 6.0);
  EXPECT_NEAR(d[0], 0.353553, 1e-6);
  EXPECT_NEAR(d[1], 0.353553, 1e-6);
  EXPECT_NEAR(d[2], 0.866025, 1e-6);
}

TEST(BeamDirection, RejectsBadIndex) {
  EXPECT_THROW(dvl::beam_direction(0, 0.3), std::invalid_argument);
  EXPECT_THROW(dvl::beam_direction(5, 0.3), std::invalid_argument);
}

TEST(DirectionMatrix, SharedVerticalComponent) {
  const auto h = matrix_at(M_PI / 6.0);
  for (int r = 0; r < 4; ++r) EXPECT_NEAR(h.rows[r][2], 0.866025, 1e-6);
}

TEST(DirectionMatrix, HorizontalColumnsCancel) {
  const auto h = matrix_at(M_PI / 4.0);
  double sum0 = 0.0, sum1 = 0.0;
  for (int r = 0; r < 4; ++r) {
    sum0 += h.rows[r][0];
    sum1 += h.rows[r][1];
  }
  EXPECT_NEAR(sum0, 0.0, 1e-15);
  EXPECT_NEAR(sum1, 0.0, 1e-15);
}

TEST(DirectionMatrix, NormalMatrixIsDiagonal) {
  const double theta = 20.0 * kDeg;
  const auto h = matrix_at(theta);
  // brute-force H^T H
  double prod[3][3] = {};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int r = 0; r < 4; ++r) prod[i][j] += h.rows[r][i] * h.rows[r][j];
  const double s2 = std::sin(theta) * std::sin(theta);
  const double c2 = std::cos(theta) * std::cos(theta);
  EXPECT_NEAR(prod[0][0], 2.0 * s2, 1e-12);
  EXPECT_NEAR(prod[1][1], 2.0 * s2, 1e-12);
  EXPECT_NEAR(prod[2][2], 4.0 * c2, 1e-12);
  EXPECT_NEAR(prod[0][1], 0.0, 1e-12);
  EXPECT_NEAR(prod[0][2], 0.0, 1e-12);
  EXPECT_NEAR(prod[1][2], 0.0, 1e-12);
}

TEST(DirectionMatrix, RowsAreUnitVectors) {
  for (double theta : {1.0 * kDeg, 20.0 * kDeg, 45.0 * kDeg, 89.0 * kDeg}) {
    const auto h = matrix_at(theta);
    for (int r = 0; r < 4; ++r) {
      const double norm = std::sqrt(h.rows[r][0] * h.rows[r][0] + h.rows[r][1] * h.rows[r][1] +
                                    h.rows[r][2] * h.rows[r][2]);
      EXPECT_NEAR(norm, 1.0, 1e-12);
    }
  }
}

TEST(DirectionMatrix, RejectsDegeneratePitch) {
  EXPECT_THROW(matrix_at(0.0), DegenerateGeometryError);
  EXPECT_THROW(matrix_at(M_PI / 2.0), DegenerateGeometryError);
}

TEST(BodyToBeam, ZeroVelocity) {
  const auto beams = dvl::body_to_beam(matrix_at(20.0 * kDeg), {0.0, 0.0, 0.0});
  for (double b : beams.b) EXPECT_EQ(b, 0.0);
}

TEST(BodyToBeam, PureVerticalVelocity) {
  const auto beams = dvl::body_to_beam(matrix_at(M_PI / 6.0), {0.0, 0.0, 1.0});
  for (double b : beams.b) EXPECT_NEAR(b, 0.866025, 1e-6);
}

TEST(BodyToBeam, MatchesBruteForceProduct) {
  const auto h = matrix_at(20.0 * kDeg);
  const BodyVelocity v{1.0, -0.5, 0.2};
  const auto beams = dvl::body_to_beam(h, v);
  for (int r = 0; r < 4; ++r) {
    const double expected = h.rows[r][0] * v.vx + h.rows[r][1] * v.vy + h.rows[r][2] * v.vz;
    EXPECT_DOUBLE_EQ(beams.b[r], expected);
  }
}

TEST(LsSolve, NoiselessRoundTrip) {
  const auto h = matrix_at(20.0 * kDeg);
  const auto v = dvl::ls_solve(h, dvl::body_to_beam(h, {1.0, 0.0, 0.0}));
  EXPECT_NEAR(v.vx, 1.0, 1e-12);
  EXPECT_NEAR(v.vy, 0.0, 1e-12);
  EXPECT_NEAR(v.vz, 0.0, 1e-12);
}

TEST(LsSolve, RejectsNearZeroPitch) {
  DirectionMatrix h;
  for (int i = 1; i <= 4; ++i) h.rows[i - 1] = dvl::beam_direction(i, 1e-9);
  EXPECT_THROW(dvl::ls_solve(h, {1.0, 1.0, 1.0, 1.0}), DegenerateGeometryError);
}

TEST(LsSolve, MatchesNormalEquationsOracle) {
  Rng rng(17);
  const auto h = matrix_at(20.0 * kDeg);
  for (int trial = 0; trial < 100; ++trial) {
    BeamVelocities y;
    for (double& b : y.b) b = rng.uniform(-3.0, 3.0);
    const auto got = dvl::ls_solve(h, y);
    const auto want = normal_equations_oracle(h, y);
    EXPECT_NEAR(got.vx, want[0], 1e-12);
    EXPECT_NEAR(got.vy, want[1], 1e-12);
    EXPECT_NEAR(got.vz, want[2], 1e-12);
  }
}

TEST(LsSolve, RoundTripProperty) {
  Rng rng(99);
  for (int trial = 0; trial < 500; ++trial) {
    const double theta = rng.uniform(5.0 * kDeg, 85.0 * kDeg);
    const auto h = matrix_at(theta);
    const BodyVelocity v{rng.uniform(-10.0, 10.0), rng.uniform(-10.0, 10.0),
                         rng.uniform(-10.0, 10.0)};
    const auto back = dvl::ls_solve(h, dvl::body_to_beam(h, v));
    EXPECT_LT(std::abs(back.vx - v.vx), 1e-10);
    EXPECT_LT(std::abs(back.vy - v.vy), 1e-10);
    EXPECT_LT(std::abs(back.vz - v.vz), 1e-10);
  }
}

TEST(LsSolve, ResidualIsOrthogonalToColumns) {
  Rng rng(5);
  const auto h = matrix_at(30.0 * kDeg);
  for (int trial = 0; trial < 100; ++trial) {
    BeamVelocities y;
    for (double& b : y.b) b = rng.uniform(-5.0, 5.0);
    const auto v = dvl::ls_solve(h, y);
    double resid[4];
    for (int r = 0; r < 4; ++r) {
      resid[r] = y.b[r] - (h.rows[r][0] * v.vx + h.rows[r][1] * v.vy + h.rows[r][2] * v.vz);
    }
    for (int c = 0; c < 3; ++c) {
      double dot = 0.0;
      for (int r = 0; r < 4; ++r) dot += h.rows[r][c] * resid[r];
      EXPECT_NEAR(dot, 0.0, 1e-9);
    }
  }
}

TEST(LsSolve, InvariantToRowPermutation) {
  Rng rng(11);
  const auto h = matrix_at(25.0 * kDeg);
  std::array<int, 4> perm{2, 0, 3, 1};
  for (int trial = 0; trial < 50; ++trial) {
    BeamVelocities y;
    for (double& b : y.b) b = rng.uniform(-2.0, 2.0);
    DirectionMatrix hp;
    BeamVelocities yp;
    for (int r = 0; r < 4; ++r) {
      hp.rows[r] = h.rows[perm[r]];
      yp.b[r] = y.b[perm[r]];
    }
    const auto a = dvl::ls_solve(h, y);
    const auto b = dvl::ls_solve(hp, yp);
    EXPECT_NEAR(a.vx, b.vx, 1e-12);
    EXPECT_NEAR(a.vy, b.vy, 1e-12);
    EXPECT_NEAR(a.vz, b.vz, 1e-12);
  }
}
