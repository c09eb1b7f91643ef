#pragma once

// Soft-cost fields for the global planner: a static halo around obstacle
// surfaces, a dynamic base+tube penalty around tracked obstacles and their
// predicted motion, combined by max aggregation and capped at H_max.

#include "sando/world_model.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

namespace sando {

struct HeatParams {
  double alpha_s = 5.0;
  double p_s = 2.0;
  double R_s = 0.3;  // 3 * r_drone with r_drone = 0.1
  double H_max = 50.0;
  double alpha_d0 = 1.0;
  double alpha_d1 = 2.0;
  double p_d = 2.0;
  double q_d = 2.0;
  double gamma_k = 0.5;  // tube growth rate, defaults to v_obs_max
  double tau_ratio = 0.5;
  int M_tube = 10;
  double T_h = 2.0;
  double r_margin = 0.1;
  double v_obs_max = 0.5;

  void validate() const {
    if (alpha_s < 0 || alpha_d0 < 0 || alpha_d1 < 0 || R_s < 0 || gamma_k < 0 ||
        r_margin < 0 || v_obs_max < 0) {
      throw std::invalid_argument("HeatParams: scales must be non-negative");
    }
    if (p_s < 1 || p_d < 1 || q_d < 1) throw std::invalid_argument("HeatParams: exponents must be >= 1");
    if (!(H_max > 0)) throw std::invalid_argument("HeatParams: H_max must be positive");
    if (M_tube < 2) throw std::invalid_argument("HeatParams: M_tube must be >= 2");
    if (!(tau_ratio > 0 && tau_ratio <= 1)) throw std::invalid_argument("HeatParams: tau_ratio in (0,1]");
    if (!(T_h > 0)) throw std::invalid_argument("HeatParams: T_h must be positive");
  }
};

struct ObstaclePrediction {
  Vec3 current_center = Vec3::Zero();
  Vec3 half_extents = Vec3::Constant(0.5);
  std::vector<std::pair<double, Vec3>> sampled_centers;  // (t, center), t0 = 0
};

/// Static heat over one grid snapshot. The boundary-voxel source set
/// (Occupied voxels with a 6-connected Free neighbor) is computed once; query
/// values are cached per voxel center only through `at_voxel`.
class StaticHeatMap {
 public:
  StaticHeatMap(const VoxelGrid& grid, const HeatParams& params)
      : grid_(&grid), params_(params), boundary_(grid.size(), 0) {
    for (const auto& idx : boundary_cells(grid, Cell::Occupied, Cell::Free)) {
      boundary_[grid.linear(idx)] = 1;
    }
    reach_ = voxels_for_radius(params.R_s, grid.resolution()) + 1;
  }

  const VoxelGrid& grid() const { return *grid_; }

  bool is_source(const Index3& idx) const { return boundary_[grid_->linear(idx)] != 0; }

  double operator()(const Vec3& q) const {
    if (!grid_->index_of(q)) throw std::out_of_range("static_heat: query out of bounds");
    return evaluate(q);
  }

  /// Cached evaluation at a voxel center.
  double at_voxel(const Index3& idx) {
    if (cache_.empty()) cache_.assign(grid_->size(), std::numeric_limits<float>::quiet_NaN());
    float& slot = cache_[grid_->linear(idx)];
    if (std::isnan(slot)) slot = static_cast<float>(evaluate(grid_->center(idx)));
    return slot;
  }

 private:
  double evaluate(const Vec3& q) const {
    if (params_.R_s <= 0.0 || params_.alpha_s == 0.0) return 0.0;
    const Index3 c = grid_->raw_index(q);
    double best = 0.0;
    for (int dx = -reach_; dx <= reach_; ++dx) {
      for (int dy = -reach_; dy <= reach_; ++dy) {
        for (int dz = -reach_; dz <= reach_; ++dz) {
          const Index3 idx = c + Index3(dx, dy, dz);
          if (!grid_->contains(idx) || !boundary_[grid_->linear(idx)]) continue;
          const double dist = (q - grid_->center(idx)).norm();
          if (dist > params_.R_s) continue;
          best = std::max(best, params_.alpha_s * std::pow(1.0 - dist / params_.R_s, params_.p_s));
        }
      }
    }
    return std::min(best, params_.H_max);
  }

  const VoxelGrid* grid_;
  HeatParams params_;
  std::vector<char> boundary_;
  std::vector<float> cache_;
  int reach_ = 1;
};

inline double static_heat(const VoxelGrid& grid, const HeatParams& params, const Vec3& q) {
  return StaticHeatMap(grid, params)(q);
}

/// Per-obstacle heat H_k = base + tube; returns max over obstacles.
inline double dynamic_heat(const std::vector<ObstaclePrediction>& preds,
                           const HeatParams& params, const Vec3& q) {
  double best = 0.0;
  const double tau = params.tau_ratio * params.T_h;
  for (const auto& pr : preds) {
    const double r0 = pr.half_extents.maxCoeff() + params.r_margin;
    const double rd = r0 + params.v_obs_max * params.T_h;
    double base = 0.0;
    const double dc = (q - pr.current_center).norm();
    if (dc <= rd) base = params.alpha_d0 * std::pow(1.0 - dc / rd, params.p_d);
    double tube = 0.0;
    for (const auto& [t, c] : pr.sampled_centers) {
      const double rkj = r0 + params.gamma_k * t;
      const double frac = std::max(0.0, 1.0 - (q - c).norm() / rkj);
      if (frac <= 0.0) continue;
      tube = std::max(tube, std::exp(-t / tau) * std::pow(frac, params.q_d));
    }
    best = std::max(best, base + params.alpha_d1 * tube);
  }
  return best;
}

inline double combined_heat(double static_value, double dynamic_value, double H_max) {
  return std::min(std::max(static_value, dynamic_value), H_max);
}

}  // namespace sando
