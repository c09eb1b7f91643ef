#pragma once

// Obstacle tracking: nearest-first association, a constant-acceleration
// Kalman filter whose Q and R adapt by exponential forgetting, and
// constant-velocity prediction for the heat map.

#include "sando/heatmap.hpp"
#include "sando/world_model.hpp"

#include <algorithm>
#include <stdexcept>
#include <tuple>
#include <vector>

namespace sando {

using Vec9 = Eigen::Matrix<double, 9, 1>;
using Mat9 = Eigen::Matrix<double, 9, 9>;
using Mat3 = Eigen::Matrix3d;

struct TrackerParams {
  double q0 = 0.1;   // default Q_0 = q0 I
  double r0 = 0.05;  // default R_0 = r0 I
  double alpha = 0.9;
  double gate = 1.0;
  double timeout = 1.0;
  double r_margin = 0.1;
  double p0_pos = 0.05;
  double p0_vel = 1.0;
  double p0_acc = 1.0;
};

struct Measurement {
  Vec3 centroid = Vec3::Zero();
  Vec3 half_extents = Vec3::Constant(0.1);
  double stamp = 0.0;
};

struct ObstacleTrack {
  int id = 0;
  Vec9 state = Vec9::Zero();  // p, v, a
  Mat9 cov = Mat9::Identity();
  Mat9 Q = Mat9::Identity();
  Mat3 R = Mat3::Identity();
  Vec3 half_extents = Vec3::Constant(0.1);
  double last_update = 0.0;
  // Quantities from the most recent update, kept for inspection.
  Vec3 innovation = Vec3::Zero();
  Vec3 residual = Vec3::Zero();
  Eigen::Matrix<double, 9, 3> gain = Eigen::Matrix<double, 9, 3>::Zero();

  Vec3 position() const { return state.head<3>(); }
  Vec3 velocity() const { return state.segment<3>(3); }
  Vec3 acceleration() const { return state.tail<3>(); }
  /// Constant-velocity extrapolation of the center to time t.
  Vec3 position_at(double t) const { return position() + velocity() * (t - last_update); }
};

inline Mat9 ca_transition(double dt) {
  Mat9 F = Mat9::Identity();
  F.block<3, 3>(0, 3) = dt * Mat3::Identity();
  F.block<3, 3>(0, 6) = 0.5 * dt * dt * Mat3::Identity();
  F.block<3, 3>(3, 6) = dt * Mat3::Identity();
  return F;
}

inline Eigen::Matrix<double, 3, 9> position_observation() {
  Eigen::Matrix<double, 3, 9> H = Eigen::Matrix<double, 3, 9>::Zero();
  H.block<3, 3>(0, 0) = Mat3::Identity();
  return H;
}

struct Association {
  std::vector<std::pair<std::size_t, std::size_t>> matches;  // (measurement, track)
  std::vector<std::size_t> unmatched_measurements;
  std::vector<std::size_t> unmatched_tracks;
};

/// Greedy globally-nearest-first pairing within `gate`. Equal distances are
/// resolved by lower track id, then lower measurement index.
inline Association associate(const std::vector<Measurement>& meas,
                             const std::vector<ObstacleTrack>& tracks, double gate) {
  if (!(gate > 0.0)) throw std::invalid_argument("associate: gate must be positive");
  std::vector<std::tuple<double, int, std::size_t, std::size_t>> pairs;
  for (std::size_t m = 0; m < meas.size(); ++m) {
    for (std::size_t k = 0; k < tracks.size(); ++k) {
      const double d = (meas[m].centroid - tracks[k].position()).norm();
      if (d <= gate) pairs.emplace_back(d, tracks[k].id, m, k);
    }
  }
  std::sort(pairs.begin(), pairs.end());
  std::vector<char> m_used(meas.size(), 0), t_used(tracks.size(), 0);
  Association out;
  for (const auto& [d, id, m, k] : pairs) {
    if (m_used[m] || t_used[k]) continue;
    m_used[m] = t_used[k] = 1;
    out.matches.emplace_back(m, k);
  }
  for (std::size_t m = 0; m < meas.size(); ++m)
    if (!m_used[m]) out.unmatched_measurements.push_back(m);
  for (std::size_t k = 0; k < tracks.size(); ++k)
    if (!t_used[k]) out.unmatched_tracks.push_back(k);
  return out;
}

inline Vec3 cubify(const Vec3& half_extents, double r_margin) {
  return Vec3::Constant(half_extents.maxCoeff() + r_margin);
}

/// Predict over z.stamp - last_update, update on the centroid, then adapt
/// R_i = a R + (1-a) eps eps' and Q_i = a Q + (1-a) K d d' K'.
inline ObstacleTrack aekf_step(const ObstacleTrack& track, const Measurement& z, double alpha) {
  if (z.stamp < track.last_update) throw std::invalid_argument("aekf_step: non-monotone stamp");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("aekf_step: alpha must be in (0,1)");
  ObstacleTrack out = track;
  const Mat9 F = ca_transition(z.stamp - track.last_update);
  const auto H = position_observation();
  const Vec9 x_pred = F * track.state;
  const Mat9 P_pred = F * track.cov * F.transpose() + track.Q;
  const Vec3 d = z.centroid - H * x_pred;
  const Mat3 S = H * P_pred * H.transpose() + track.R;
  const Eigen::Matrix<double, 9, 3> K = P_pred * H.transpose() * S.inverse();
  out.state = x_pred + K * d;
  const Mat9 IKH = Mat9::Identity() - K * H;
  Mat9 P = IKH * P_pred * IKH.transpose() + K * track.R * K.transpose();
  out.cov = 0.5 * (P + P.transpose());
  const Vec3 eps = z.centroid - H * out.state;
  out.R = alpha * track.R + (1.0 - alpha) * eps * eps.transpose();
  out.Q = alpha * track.Q + (1.0 - alpha) * K * d * d.transpose() * K.transpose();
  out.innovation = d;
  out.residual = eps;
  out.gain = K;
  out.last_update = z.stamp;
  return out;
}

inline ObstacleTrack initialize_track(const Measurement& z, const std::vector<ObstacleTrack>& existing,
                                      const TrackerParams& params, int id = 0) {
  ObstacleTrack t;
  t.id = id;
  t.state.head<3>() = z.centroid;
  if (existing.empty()) {
    t.Q = params.q0 * Mat9::Identity();
    t.R = params.r0 * Mat3::Identity();
  } else {
    t.Q.setZero();
    t.R.setZero();
    for (const auto& e : existing) {
      t.Q += e.Q;
      t.R += e.R;
    }
    t.Q /= static_cast<double>(existing.size());
    t.R /= static_cast<double>(existing.size());
  }
  t.cov.setZero();
  t.cov.diagonal() << Vec3::Constant(params.p0_pos), Vec3::Constant(params.p0_vel),
      Vec3::Constant(params.p0_acc);
  t.half_extents = cubify(z.half_extents, params.r_margin);
  t.last_update = z.stamp;
  return t;
}

/// Constant-velocity centers at `samples` uniform times over [0, horizon],
/// measured from the track's last update.
inline ObstaclePrediction predict(const ObstacleTrack& track, double horizon, int samples) {
  if (!(horizon > 0.0)) throw std::invalid_argument("predict: horizon must be positive");
  if (samples < 2) throw std::invalid_argument("predict: need at least 2 samples");
  ObstaclePrediction pr;
  pr.current_center = track.position();
  pr.half_extents = track.half_extents;
  for (int i = 0; i < samples; ++i) {
    const double t = horizon * static_cast<double>(i) / static_cast<double>(samples - 1);
    pr.sampled_centers.emplace_back(t, track.position() + track.velocity() * t);
  }
  return pr;
}

inline std::vector<ObstacleTrack> prune(const std::vector<ObstacleTrack>& tracks, double timeout,
                                        double now) {
  if (!(timeout > 0.0)) throw std::invalid_argument("prune: timeout must be positive");
  std::vector<ObstacleTrack> out;
  for (const auto& t : tracks) {
    if (now - t.last_update <= timeout) out.push_back(t);
  }
  return out;
}

/// Track set owned by the simulation loop.
class Tracker {
 public:
  explicit Tracker(TrackerParams params = {}) : params_(params) {}

  void update(const std::vector<Measurement>& meas, double now) {
    const auto assoc = associate(meas, tracks_, params_.gate);
    for (const auto& [m, k] : assoc.matches) {
      auto& t = tracks_[k];
      t = aekf_step(t, meas[m], params_.alpha);
      t.half_extents = cubify(meas[m].half_extents, params_.r_margin);
    }
    const auto existing = tracks_;
    for (std::size_t m : assoc.unmatched_measurements) {
      tracks_.push_back(initialize_track(meas[m], existing, params_, next_id_++));
    }
    tracks_ = prune(tracks_, params_.timeout, now);
  }

  const std::vector<ObstacleTrack>& tracks() const { return tracks_; }
  const TrackerParams& params() const { return params_; }

  /// Boxes centered at the estimated position at `now`.
  std::vector<Aabb> boxes_at(double now) const {
    std::vector<Aabb> out;
    for (const auto& t : tracks_) out.emplace_back(t.position_at(now), t.half_extents);
    return out;
  }

  std::vector<ObstaclePrediction> predictions(double now, double horizon, int samples) const {
    std::vector<ObstaclePrediction> out;
    for (const auto& t : tracks_) {
      ObstacleTrack moved = t;
      moved.state.head<3>() = t.position_at(now);
      out.push_back(predict(moved, horizon, samples));
    }
    return out;
  }

 private:
  TrackerParams params_;
  std::vector<ObstacleTrack> tracks_;
  int next_id_ = 0;
};

}  // namespace sando
