#include "sando/bezier.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace sando;

namespace {

CubicPiece random_piece(std::mt19937& rng) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::uniform_real_distribution<double> ud(0.05, 1.5);
  auto v = [&] { return Vec3(u(rng), u(rng), u(rng)); };
  CubicPiece p;
  p.a = v();
  p.b = v();
  p.c = v();
  p.d = v();
  p.dt = ud(rng);
  return p;
}

// de Casteljau evaluation, independent of the power-basis form.
Vec3 de_casteljau(std::array<Vec3, 4> cp, double s) {
  for (int r = 3; r > 0; --r)
    for (int j = 0; j < r; ++j) cp[j] = (1 - s) * cp[j] + s * cp[j + 1];
  return cp[0];
}

}  // namespace

TEST(Bezier, ControlPointsOfPureCubic) {
  CubicPiece p;
  p.a = Vec3(1, 0, 0);
  p.dt = 1.0;
  const auto cp = position_control_points(p);
  EXPECT_EQ(cp[0], Vec3::Zero());
  EXPECT_EQ(cp[1], Vec3::Zero());
  EXPECT_EQ(cp[2], Vec3::Zero());
  EXPECT_EQ(cp[3], Vec3(1, 0, 0));
  const auto d = derivative_control_points(p);
  EXPECT_EQ(d.vel[0], Vec3::Zero());
  EXPECT_EQ(d.vel[1], Vec3::Zero());
  EXPECT_EQ(d.vel[2], Vec3(3, 0, 0));
  EXPECT_EQ(d.acc[0], Vec3::Zero());
  EXPECT_EQ(d.acc[1], Vec3(6, 0, 0));
  EXPECT_EQ(d.jerk, Vec3(6, 0, 0));
}

TEST(Bezier, ControlPointsOfLine) {
  CubicPiece p;
  p.c = Vec3(0, 2, 0);
  p.d = Vec3(1, 1, 1);
  p.dt = 0.5;
  const auto cp = position_control_points(p);
  for (int j = 0; j < 4; ++j) EXPECT_TRUE(cp[j].isApprox(Vec3(1, 1 + j / 3.0, 1), 1e-15));
  const auto d = derivative_control_points(p);
  for (const auto& v : d.vel) EXPECT_TRUE(v.isApprox(Vec3(0, 2, 0), 1e-14));
  for (const auto& a : d.acc) EXPECT_LT(a.norm(), 1e-12);
}

TEST(Bezier, DeCasteljauAgreesWithPowerBasis) {
  std::mt19937 rng(3);
  for (int i = 0; i < 200; ++i) {
    const auto p = random_piece(rng);
    const auto cp = position_control_points(p);
    for (double s : {0.0, 0.1, 0.37, 0.5, 0.9, 1.0}) {
      EXPECT_LT((de_casteljau(cp, s) - p.pos(s * p.dt)).norm(), 1e-10);
    }
  }
}

TEST(Bezier, ConvexHullContainment) {
  std::mt19937 rng(7);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<Vec3> dirs = {Vec3::UnitX(), Vec3::UnitY(), Vec3::UnitZ(), -Vec3::UnitX(), -Vec3::UnitY(), -Vec3::UnitZ()};
  for (int i = 0; i < 26; ++i) dirs.push_back(Vec3(n(rng), n(rng), n(rng)).normalized());
  double worst = -1e300;
  for (int piece = 0; piece < 1000; ++piece) {
    const auto p = random_piece(rng);
    const auto cp = position_control_points(p);
    const auto dcp = derivative_control_points(p);
    for (int k = 0; k < 200; ++k) {
      const double tau = p.dt * k / 199.0;
      for (const auto& u : dirs) {
        double hp = -1e300, hv = -1e300, ha = -1e300;
        for (const auto& c : cp) hp = std::max(hp, u.dot(c));
        for (const auto& c : dcp.vel) hv = std::max(hv, u.dot(c));
        for (const auto& c : dcp.acc) ha = std::max(ha, u.dot(c));
        worst = std::max({worst, u.dot(p.pos(tau)) - hp, u.dot(p.vel(tau)) - hv, u.dot(p.acc(tau)) - ha});
      }
      EXPECT_TRUE(p.jerk().isApprox(dcp.jerk, 1e-9));
    }
  }
  EXPECT_LE(worst, 1e-9);
}

TEST(Bezier, DerivativesMatchFiniteDifferences) {
  std::mt19937 rng(11);
  const double h = 1e-5;
  double worst = 0.0;
  for (int piece = 0; piece < 500; ++piece) {
    const auto p = random_piece(rng);
    for (int k = 1; k < 10; ++k) {
      const double tau = p.dt * k / 10.0;
      const Vec3 fv = (p.pos(tau + h) - p.pos(tau - h)) / (2 * h);
      const Vec3 fa = (p.vel(tau + h) - p.vel(tau - h)) / (2 * h);
      const Vec3 fj = (p.acc(tau + h) - p.acc(tau - h)) / (2 * h);
      worst = std::max({worst, (fv - p.vel(tau)).cwiseAbs().maxCoeff(), (fa - p.acc(tau)).cwiseAbs().maxCoeff(),
                        (fj - p.jerk()).cwiseAbs().maxCoeff()});
    }
  }
  EXPECT_LE(worst, 1e-6);
}

TEST(Composite, SamplingAndJunctions) {
  CompositeTrajectory traj;
  traj.t0 = 2.0;
  CubicPiece p0;
  p0.c = Vec3(1, 0, 0);
  p0.dt = 1.0;
  CubicPiece p1 = p0;
  p1.d = Vec3(1, 0, 0);
  p1.b = Vec3(0, 1, 0);  // acceleration jump at the junction
  traj.pieces = {p0, p1};
  EXPECT_DOUBLE_EQ(traj.duration(), 2.0);
  EXPECT_DOUBLE_EQ(traj.t_end(), 4.0);
  EXPECT_TRUE(traj.sample(3.0).acc.isApprox(Vec3(0, 2, 0)));  // later piece owns the junction
  EXPECT_TRUE(traj.sample(4.0).pos.isApprox(Vec3(2, 1, 0)));
  EXPECT_THROW(traj.sample(1.9), std::out_of_range);
  EXPECT_THROW(traj.sample(4.1), std::out_of_range);
  EXPECT_DOUBLE_EQ(traj.continuity_residual(), 2.0);
  EXPECT_THROW(CompositeTrajectory{}.sample(0.0), std::out_of_range);
}

TEST(Composite, ContinuousJunctionHasZeroResidual) {
  std::mt19937 rng(5);
  CompositeTrajectory traj;
  auto p = random_piece(rng);
  traj.pieces.push_back(p);
  for (int i = 0; i < 4; ++i) {
    CubicPiece q = random_piece(rng);
    q.d = p.pos(p.dt);
    q.c = p.vel(p.dt);
    q.b = 0.5 * p.acc(p.dt);
    traj.pieces.push_back(q);
    p = q;
  }
  EXPECT_LT(traj.continuity_residual(), 1e-9);
}

TEST(Limits, ControlPointBoundImpliesSampledBound) {
  std::mt19937 rng(13);
  for (int i = 0; i < 300; ++i) {
    CompositeTrajectory traj;
    traj.pieces = {random_piece(rng)};
    const auto rep = check_dynamic_limits(traj, 5.0, 20.0, 100.0, 1e-3, 0.0);
    EXPECT_LE(rep.sampled_ratio(0), rep.control_point_ratio(0) + 1e-12);
    EXPECT_LE(rep.sampled_ratio(1), rep.control_point_ratio(1) + 1e-12);
    EXPECT_NEAR(rep.sampled_ratio(2), rep.control_point_ratio(2), 1e-12);
    if (!rep.control_point_violation) {
      EXPECT_FALSE(rep.sampled_violation);
    }
  }
}

TEST(Limits, DetectsViolation) {
  CompositeTrajectory traj;
  CubicPiece p;
  p.c = Vec3(3, 0, 0);
  p.dt = 1.0;
  traj.pieces = {p};
  const auto rep = check_dynamic_limits(traj, 2.5, 20, 100);
  EXPECT_TRUE(rep.control_point_violation);
  EXPECT_TRUE(rep.sampled_violation);
  EXPECT_EQ(rep.samples, 1001u);
  EXPECT_EQ(rep.violating_samples, 1001u);
  EXPECT_DOUBLE_EQ(rep.control_point_ratio(0), 3.0 / 2.5);
  EXPECT_THROW(check_dynamic_limits(traj, 0.0, 1, 1), std::invalid_argument);
}
