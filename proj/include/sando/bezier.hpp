#pragma once

// Piecewise-cubic trajectories x(tau) = a tau^3 + b tau^2 + c tau + d, with the
// Bezier control points of position and its derivatives.

#include "sando/world_model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace sando {

struct CubicPiece {
  Vec3 a = Vec3::Zero();
  Vec3 b = Vec3::Zero();
  Vec3 c = Vec3::Zero();
  Vec3 d = Vec3::Zero();
  double dt = 1.0;

  Vec3 pos(double tau) const { return ((a * tau + b) * tau + c) * tau + d; }
  Vec3 vel(double tau) const { return (3.0 * a * tau + 2.0 * b) * tau + c; }
  Vec3 acc(double tau) const { return 6.0 * a * tau + 2.0 * b; }
  Vec3 jerk() const { return 6.0 * a; }
};

struct DerivativeControlPoints {
  std::array<Vec3, 3> vel;
  std::array<Vec3, 2> acc;
  Vec3 jerk;
};

inline std::array<Vec3, 4> position_control_points(const CubicPiece& p) {
  const double t = p.dt;
  return {p.d, (p.c * t + 3.0 * p.d) / 3.0, (p.b * t * t + 2.0 * p.c * t + 3.0 * p.d) / 3.0,
          p.a * t * t * t + p.b * t * t + p.c * t + p.d};
}

inline DerivativeControlPoints derivative_control_points(const CubicPiece& p) {
  const auto cp = position_control_points(p);
  DerivativeControlPoints out;
  for (int j = 0; j < 3; ++j) out.vel[j] = 3.0 * (cp[j + 1] - cp[j]) / p.dt;
  for (int j = 0; j < 2; ++j) out.acc[j] = 2.0 * (out.vel[j + 1] - out.vel[j]) / p.dt;
  out.jerk = (out.acc[1] - out.acc[0]) / p.dt;
  return out;
}

struct TrajectorySample {
  Vec3 pos = Vec3::Zero();
  Vec3 vel = Vec3::Zero();
  Vec3 acc = Vec3::Zero();
  Vec3 jerk = Vec3::Zero();
};

struct CompositeTrajectory {
  std::vector<CubicPiece> pieces;
  double t0 = 0.0;

  double duration() const {
    double T = 0.0;
    for (const auto& p : pieces) T += p.dt;
    return T;
  }
  double t_end() const { return t0 + duration(); }
  bool empty() const { return pieces.empty(); }

  /// Junction times belong to the later piece; t_end belongs to the last.
  TrajectorySample sample(double t) const {
    if (pieces.empty()) throw std::out_of_range("sample: empty trajectory");
    const double tol = 1e-12 * (1.0 + std::abs(t));
    if (t < t0 - tol || t > t_end() + tol) throw std::out_of_range("sample: t outside trajectory");
    double start = t0;
    std::size_t i = 0;
    for (; i + 1 < pieces.size(); ++i) {
      if (t < start + pieces[i].dt) break;
      start += pieces[i].dt;
    }
    const auto& p = pieces[i];
    const double tau = std::clamp(t - start, 0.0, p.dt);
    return {p.pos(tau), p.vel(tau), p.acc(tau), p.jerk()};
  }

  /// Largest pos/vel/acc jump over all junctions.
  double continuity_residual() const {
    double worst = 0.0;
    for (std::size_t i = 0; i + 1 < pieces.size(); ++i) {
      const auto& p = pieces[i];
      const auto& q = pieces[i + 1];
      worst = std::max(worst, (p.pos(p.dt) - q.pos(0.0)).cwiseAbs().maxCoeff());
      worst = std::max(worst, (p.vel(p.dt) - q.vel(0.0)).cwiseAbs().maxCoeff());
      worst = std::max(worst, (p.acc(p.dt) - q.acc(0.0)).cwiseAbs().maxCoeff());
    }
    return worst;
  }
};

inline TrajectorySample sample(const CompositeTrajectory& traj, double t) { return traj.sample(t); }

struct LimitReport {
  bool control_point_violation = false;
  bool sampled_violation = false;
  // Worst ratio |value| / limit seen by each check, per quantity.
  Vec3 control_point_ratio = Vec3::Zero();  // (vel, acc, jerk)
  Vec3 sampled_ratio = Vec3::Zero();
  std::size_t samples = 0;
  std::size_t violating_samples = 0;
};

/// Per-axis L-infinity check. The control-point verdict is the sufficient
/// condition the optimizer enforces; the sampled verdict evaluates the
/// trajectory every `sample_dt` seconds. `rel_tol` absorbs solver round-off.
inline LimitReport check_dynamic_limits(const CompositeTrajectory& traj, double v_max,
                                        double a_max, double j_max, double sample_dt = 1e-3,
                                        double rel_tol = 1e-6) {
  if (!(v_max > 0 && a_max > 0 && j_max > 0)) {
    throw std::invalid_argument("check_dynamic_limits: limits must be positive");
  }
  LimitReport rep;
  for (const auto& p : traj.pieces) {
    const auto dcp = derivative_control_points(p);
    for (const auto& v : dcp.vel) rep.control_point_ratio(0) = std::max(rep.control_point_ratio(0), v.cwiseAbs().maxCoeff() / v_max);
    for (const auto& a : dcp.acc) rep.control_point_ratio(1) = std::max(rep.control_point_ratio(1), a.cwiseAbs().maxCoeff() / a_max);
    rep.control_point_ratio(2) = std::max(rep.control_point_ratio(2), dcp.jerk.cwiseAbs().maxCoeff() / j_max);
  }
  rep.control_point_violation = (rep.control_point_ratio.array() > 1.0 + rel_tol).any();
  if (traj.empty()) return rep;
  const double T = traj.duration();
  const auto steps = static_cast<std::size_t>(std::floor(T / sample_dt));
  for (std::size_t k = 0; k <= steps; ++k) {
    const double t = traj.t0 + std::min(T, static_cast<double>(k) * sample_dt);
    const auto s = traj.sample(t);
    const Vec3 r(s.vel.cwiseAbs().maxCoeff() / v_max, s.acc.cwiseAbs().maxCoeff() / a_max,
                 s.jerk.cwiseAbs().maxCoeff() / j_max);
    rep.sampled_ratio = rep.sampled_ratio.cwiseMax(r);
    ++rep.samples;
    if ((r.array() > 1.0 + rel_tol).any()) ++rep.violating_samples;
  }
  rep.sampled_violation = rep.violating_samples > 0;
  return rep;
}

}  // namespace sando
