#pragma once

// Heat-weighted 26-connected A* over a voxel grid, arc-length downsampling of
// the resulting path, and safe subgoal selection near unknown space.

#include "sando/world_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <queue>
#include <stdexcept>
#include <vector>

namespace sando {

struct GlobalPath {
  std::vector<Vec3> waypoints;

  std::size_t segments() const { return waypoints.empty() ? 0 : waypoints.size() - 1; }

  double length() const {
    double L = 0.0;
    for (std::size_t i = 1; i < waypoints.size(); ++i) L += (waypoints[i] - waypoints[i - 1]).norm();
    return L;
  }
};

enum class GlobalPlanStatus { Ok, Partial, StartInvalid, Enclosed };

struct GlobalPlanResult {
  GlobalPlanStatus status = GlobalPlanStatus::StartInvalid;
  GlobalPath path;
  std::vector<Index3> voxels;
  double cost = 0.0;
  std::size_t expanded = 0;

  bool ok() const { return status == GlobalPlanStatus::Ok || status == GlobalPlanStatus::Partial; }
  bool partial() const { return status == GlobalPlanStatus::Partial; }
};

inline bool traversable(Cell c) { return c != Cell::Occupied; }

/// A* with edge cost d(q_i, q_j) + w_heat * H(q_j) and heuristic ||q - q_goal||.
/// Occupied voxels are blocked; Free and Unknown are traversable. If the goal
/// voxel cannot be reached (occupied, outside, or disconnected) the path ends at
/// the expanded voxel nearest to the goal and the result is flagged Partial.
/// `heat` maps a voxel index to a non-negative cost. `window`, if given, limits
/// the search to voxels whose centers lie inside it.
template <typename HeatFn>
GlobalPlanResult plan(const VoxelGrid& grid, HeatFn&& heat, const Vec3& start,
                      const Vec3& goal, double w_heat,
                      const std::optional<Aabb>& window = std::nullopt) {
  GlobalPlanResult out;
  const auto s_idx = grid.index_of(start);
  if (!s_idx || grid.at(*s_idx) == Cell::Occupied) {
    out.status = GlobalPlanStatus::StartInvalid;
    return out;
  }
  const double res = grid.resolution();
  const Vec3 goal_center = grid.index_of(goal) ? grid.center(*grid.index_of(goal)) : goal;
  const auto g_idx = grid.index_of(goal);
  const bool goal_usable = g_idx && traversable(grid.at(*g_idx)) &&
                           (!window || window->contains(grid.center(*g_idx), 1e-9));
  const std::size_t g_lin = goal_usable ? grid.linear(*g_idx) : std::numeric_limits<std::size_t>::max();

  const std::size_t n = grid.size();
  std::vector<double> g(n, std::numeric_limits<double>::infinity());
  std::vector<std::uint32_t> parent(n, std::numeric_limits<std::uint32_t>::max());
  std::vector<char> closed(n, 0);

  // Index-space search box: voxels whose centers lie inside the window.
  Index3 lo = Index3::Zero();
  Index3 hi = grid.dims() - Index3::Ones();
  if (window) {
    for (int a = 0; a < 3; ++a) {
      const double o = grid.origin()(a) + 0.5 * res;
      lo(a) = std::max(lo(a), static_cast<int>(std::ceil((window->min()(a) - o) / res - 1e-9)));
      hi(a) = std::min(hi(a), static_cast<int>(std::floor((window->max()(a) - o) / res + 1e-9)));
    }
  }

  struct Node {
    double f;
    double h;
    std::uint32_t li;
    bool operator>(const Node& o) const {
      if (f != o.f) return f > o.f;
      if (h != o.h) return h > o.h;
      return li > o.li;
    }
  };
  std::priority_queue<Node, std::vector<Node>, std::greater<>> open;
  auto heuristic = [&](const Index3& idx) { return (grid.center(idx) - goal_center).norm(); };

  struct Step {
    Index3 d;
    double cost;
  };
  std::vector<Step> steps;
  for (int dx = -1; dx <= 1; ++dx)
    for (int dy = -1; dy <= 1; ++dy)
      for (int dz = -1; dz <= 1; ++dz) {
        const int k = std::abs(dx) + std::abs(dy) + std::abs(dz);
        if (k == 0) continue;
        steps.push_back({Index3(dx, dy, dz), res * std::sqrt(static_cast<double>(k))});
      }

  const std::size_t s_lin = grid.linear(*s_idx);
  g[s_lin] = 0.0;
  open.push({heuristic(*s_idx), heuristic(*s_idx), static_cast<std::uint32_t>(s_lin)});

  std::size_t best_lin = s_lin;
  double best_dist = heuristic(*s_idx);
  const auto& cells = grid.cells();

  bool reached = false;
  while (!open.empty()) {
    const Node cur = open.top();
    open.pop();
    if (closed[cur.li]) continue;
    closed[cur.li] = 1;
    ++out.expanded;
    const Index3 ci = grid.unlinear(cur.li);
    if (cur.h < best_dist - 1e-12) {
      best_dist = cur.h;
      best_lin = cur.li;
    }
    if (cur.li == g_lin) {
      reached = true;
      break;
    }
    for (const auto& st : steps) {
      const Index3 nb = ci + st.d;
      if ((nb.array() < lo.array()).any() || (nb.array() > hi.array()).any()) continue;
      const std::size_t nl = grid.linear(nb);
      if (closed[nl] || !traversable(cells[nl])) continue;
      const double cand = g[cur.li] + st.cost + w_heat * heat(nb);
      if (cand < g[nl]) {
        g[nl] = cand;
        parent[nl] = cur.li;
        const double hh = heuristic(nb);
        open.push({cand + hh, hh, static_cast<std::uint32_t>(nl)});
      }
    }
  }

  const std::size_t end_lin = reached ? g_lin : best_lin;
  if (!reached && end_lin == s_lin && out.expanded <= 1 && start != goal) {
    out.status = GlobalPlanStatus::Enclosed;
    out.path.waypoints = {grid.center(*s_idx)};
    out.voxels = {*s_idx};
    return out;
  }
  std::vector<Index3> rev;
  for (std::size_t li = end_lin;; li = parent[li]) {
    rev.push_back(grid.unlinear(li));
    if (li == s_lin) break;
  }
  std::reverse(rev.begin(), rev.end());
  out.voxels = rev;
  for (const auto& v : rev) out.path.waypoints.push_back(grid.center(v));
  out.cost = g[end_lin];
  out.status = reached ? GlobalPlanStatus::Ok : GlobalPlanStatus::Partial;
  return out;
}

/// Keeps the endpoints plus the waypoints nearest to uniform arc-length
/// fractions, so the result has exactly min(target_segments, segments) segments.
inline GlobalPath downsample(const GlobalPath& path, int target_segments) {
  if (target_segments < 1) throw std::invalid_argument("downsample: target_segments < 1");
  if (path.waypoints.empty()) throw std::invalid_argument("downsample: empty path");
  const std::size_t segs = path.segments();
  const auto target = static_cast<std::size_t>(target_segments);
  if (segs <= target) return path;
  std::vector<double> s(path.waypoints.size(), 0.0);
  for (std::size_t i = 1; i < s.size(); ++i) {
    s[i] = s[i - 1] + (path.waypoints[i] - path.waypoints[i - 1]).norm();
  }
  const double L = s.back();
  std::vector<std::size_t> pick = {0};
  for (std::size_t k = 1; k < target; ++k) {
    const double want = L * static_cast<double>(k) / static_cast<double>(target);
    // Leave room for the remaining picks and the final endpoint.
    const std::size_t lo = pick.back() + 1;
    const std::size_t hi = s.size() - 1 - (target - k);
    std::size_t best = lo;
    for (std::size_t i = lo; i <= hi; ++i) {
      if (std::abs(s[i] - want) < std::abs(s[best] - want)) best = i;
    }
    pick.push_back(best);
  }
  pick.push_back(s.size() - 1);
  GlobalPath out;
  for (auto i : pick) out.waypoints.push_back(path.waypoints[i]);
  return out;
}

/// Membership in U ∪ (B_U ⊕ B∞(radius)) with the radius quantized up to voxels.
class InflatedUnknown {
 public:
  InflatedUnknown(const VoxelGrid& grid, double radius)
      : grid_(&grid), k_(voxels_for_radius(std::max(radius, 0.0), grid.resolution())) {
    std::vector<char> boundary(grid.size(), 0);
    bool any = false;
    for (const auto& idx : unknown_boundary(grid)) {
      boundary[grid.linear(idx)] = 1;
      any = true;
    }
    mask_.assign(grid.size(), 0);
    if (any) mask_ = dilate_mask(boundary, grid.dims(), k_);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      if (grid.cells()[i] == Cell::Unknown) mask_[i] = 1;
    }
  }

  bool contains(const Index3& idx) const { return grid_->contains(idx) && mask_[grid_->linear(idx)]; }
  bool contains(const Vec3& p) const {
    const auto idx = grid_->index_of(p);
    return idx && mask_[grid_->linear(*idx)];
  }
  const std::vector<char>& mask() const { return mask_; }

 private:
  const VoxelGrid* grid_;
  int k_;
  std::vector<char> mask_;
};

struct Subgoal {
  Vec3 point = Vec3::Zero();
  std::size_t index = 0;
  bool truncated = false;
  bool degenerate = false;
};

/// Walks back from the first waypoint inside the worst-case inflated unknown
/// region; returns the waypoint just before it. Falls back to the start
/// (flagged degenerate) when the start itself is inside.
inline Subgoal select_subgoal(const GlobalPath& path, const InflatedUnknown& inflated) {
  if (path.waypoints.empty()) throw std::invalid_argument("select_subgoal: empty path");
  Subgoal sg;
  for (std::size_t i = 0; i < path.waypoints.size(); ++i) {
    if (inflated.contains(path.waypoints[i])) {
      sg.truncated = true;
      if (i == 0) {
        sg.degenerate = true;
        sg.index = 0;
      } else {
        sg.index = i - 1;
      }
      sg.point = path.waypoints[sg.index];
      return sg;
    }
  }
  sg.index = path.waypoints.size() - 1;
  sg.point = path.waypoints.back();
  return sg;
}

inline Subgoal select_subgoal(const GlobalPath& path, const VoxelGrid& grid,
                              double worst_case_radius) {
  return select_subgoal(path, InflatedUnknown(grid, worst_case_radius));
}

}  // namespace sando
