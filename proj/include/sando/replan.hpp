#pragma once

// One replanning cycle: global path, subgoal, per-factor STSFC + MIQP, the
// adaptive time-allocation window, the hover fallback, and an executable
// check of the collision-freedom argument for a planned trajectory.

#include "sando/global_planner.hpp"
#include "sando/heatmap.hpp"
#include "sando/miqp.hpp"
#include "sando/stsfc.hpp"

#include <chrono>
#include <cmath>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <stop_token>
#include <string>
#include <thread>
#include <vector>

namespace sando {

/// Per-axis rest-to-rest lower bounds on the traversal time, spread over N
/// pieces: max over axes of max(d/v, sqrt(2d/a), cbrt(6d/j)) / N, floored at 1 ms.
inline double baseline_dt(const BoundaryState& init, const BoundaryState& fin,
                          const DynamicLimits& limits, int N) {
  if (!(limits.v_max > 0 && limits.a_max > 0 && limits.j_max > 0)) {
    throw std::invalid_argument("baseline_dt: limits must be positive");
  }
  if (N < 4) throw std::invalid_argument("baseline_dt: N must be >= 4");
  double T = 0.0;
  for (int ax = 0; ax < 3; ++ax) {
    const double d = std::abs(fin.pos(ax) - init.pos(ax));
    T = std::max({T, d / limits.v_max, std::sqrt(2.0 * d / limits.a_max),
                  std::cbrt(6.0 * d / limits.j_max)});
  }
  return std::max(T / static_cast<double>(N), 1e-3);
}

struct FactorWindow {
  double lo = 1.0;
  double step = 0.1;
  double kappa = 0.4;
  double f_max = 2.5;
  double initial_lo = 1.0;

  static FactorWindow make(double kappa, double step, double f_max, double initial_lo = 1.0) {
    if (!(step > 0.0) || kappa < 0.0) throw std::invalid_argument("FactorWindow: bad step/kappa");
    if (initial_lo < 1.0) throw std::invalid_argument("FactorWindow: factors must be >= 1");
    FactorWindow w;
    w.lo = w.initial_lo = initial_lo;
    w.step = step;
    w.kappa = kappa;
    w.f_max = f_max;
    return w;
  }

  int size() const { return static_cast<int>(std::floor(2.0 * kappa / step + 1e-9)) + 1; }
  double at(int i) const { return lo + step * static_cast<double>(i); }
  double hi() const { return at(size() - 1); }
  double median() const { return at((size() - 1) / 2); }
  std::vector<double> factors() const {
    std::vector<double> f;
    for (int i = 0; i < size(); ++i) f.push_back(at(i));
    return f;
  }
};

/// Success recenters the window on the winning factor (clamped to [1, f_max]);
/// failure shifts it up by one step and resets once it would pass f_max.
inline FactorWindow window_update(const FactorWindow& w, std::optional<double> success_factor) {
  FactorWindow out = w;
  const double span = w.step * static_cast<double>(w.size() - 1);
  if (success_factor) {
    out.lo = *success_factor - w.step * static_cast<double>((w.size() - 1) / 2);
    if (out.lo + span > w.f_max) out.lo = w.f_max - span;
    if (out.lo < 1.0) out.lo = 1.0;
    return out;
  }
  out.lo = w.lo + w.step;
  if (out.lo + span > w.f_max + 1e-9) out.lo = w.initial_lo;
  return out;
}

struct PlanConfig {
  int N = 5;
  int P = 3;
  DynamicLimits limits{2.0, 5.0, 30.0};
  CorridorParams corridor;
  HeatParams heat;
  double w_heat = 5.0;
  double horizon = 6.0;        // arc length of the global path handed to the corridor [m]
  double search_margin = 3.0;  // local A* window beyond the horizon [m]
  bool deterministic = true;
  int max_shrink = 4;
};

struct Snapshot {
  const VoxelGrid* grid = nullptr;
  std::uint64_t grid_version = 0;  // bump whenever the grid contents change
  std::vector<Aabb> tracks;        // estimated boxes at t0, margin included
  std::vector<ObstaclePrediction> predictions;
  BoundaryState state;
  Vec3 goal = Vec3::Zero();
  double t0 = 0.0;
};

enum class PlanFailure { None, GlobalPlan, Corridor, Optimization };

inline const char* to_string(PlanFailure f) {
  switch (f) {
    case PlanFailure::None: return "none";
    case PlanFailure::GlobalPlan: return "global_plan";
    case PlanFailure::Corridor: return "corridor";
    case PlanFailure::Optimization: return "optimization";
  }
  return "?";
}

struct FactorDiag {
  double factor = 0.0;
  double dt = 0.0;
  int cells_ok = 0;
  MiqpStatus status = MiqpStatus::Infeasible;
  bool attempted = false;
  double stsfc_ms = 0.0;
  double opt_ms = 0.0;
  std::size_t nodes = 0;
};

struct PlanTimings {
  double global_ms = 0.0;
  double stsfc_ms = 0.0;  // summed over attempted factors
  double opt_ms = 0.0;    // summed over attempted factors
  double replan_ms = 0.0;
  int solves = 0;
};

struct PlanOutcome {
  bool success = false;
  PlanFailure cause = PlanFailure::None;
  double factor = 0.0;
  double dt = 0.0;
  double dt0 = 0.0;
  MiqpSolution solution;
  std::shared_ptr<const Stsfc> corridor;
  GlobalPath seed_path;
  std::vector<Aabb> tracks;
  std::vector<FactorDiag> factors;
  PlanTimings timings;
};

namespace detail {

inline GlobalPath truncate_arc(const GlobalPath& path, double length) {
  GlobalPath out;
  if (path.waypoints.empty()) return out;
  out.waypoints.push_back(path.waypoints.front());
  double s = 0.0;
  for (std::size_t i = 1; i < path.waypoints.size(); ++i) {
    const Vec3& a = path.waypoints[i - 1];
    const Vec3& b = path.waypoints[i];
    const double seg = (b - a).norm();
    if (s + seg >= length) {
      const double t = seg > 0.0 ? (length - s) / seg : 0.0;
      const Vec3 p = a + t * (b - a);
      if ((p - out.waypoints.back()).norm() > 1e-9) out.waypoints.push_back(p);
      return out;
    }
    s += seg;
    out.waypoints.push_back(b);
  }
  return out;
}

inline bool chord_blocked(const VoxelGrid& blocked, const Vec3& a, const Vec3& b) {
  const double step = 0.25 * blocked.resolution();
  const int n = std::max(1, static_cast<int>(std::ceil((b - a).norm() / step)));
  for (int i = 0; i <= n; ++i) {
    const Vec3 p = a + (b - a) * (static_cast<double>(i) / n);
    const auto idx = blocked.index_of(p);
    if (idx && blocked.at(*idx) == Cell::Occupied) return true;
  }
  return false;
}

// Time to brake every axis from the current velocity/acceleration.
inline double braking_time(const BoundaryState& s, const DynamicLimits& lim) {
  double T = 0.0;
  for (int ax = 0; ax < 3; ++ax) {
    T = std::max(T, std::abs(s.vel(ax)) / lim.a_max + std::abs(s.acc(ax)) / lim.j_max);
  }
  return T;
}

}  // namespace detail

/// Replanner with caches that persist while the grid is unchanged.
class Planner {
 public:
  explicit Planner(PlanConfig cfg) : cfg_(std::move(cfg)) {}

  const PlanConfig& config() const { return cfg_; }

  PlanOutcome plan_once(const Snapshot& snap, const FactorWindow& window) {
    const auto t_start = std::chrono::steady_clock::now();
    if (!snap.grid) throw std::invalid_argument("plan_once: snapshot without grid");
    refresh_caches(snap);
    PlanOutcome out;
    out.tracks = snap.tracks;
    const VoxelGrid& grid = *snap.grid;

    // Planning grid: static obstacles grown by the agent radius plus the
    // current dynamic boxes, cleared around the start.
    VoxelGrid blocked = *inflated_static_;
    for (const auto& box : snap.tracks) {
      mark_box(blocked, minkowski_inflate(box, cfg_.corridor.r_drone));
    }
    clear_around_start(blocked, snap.state.pos, snap.tracks);

    const auto t_global = std::chrono::steady_clock::now();
    std::vector<float> heat_cache(grid.size(), std::numeric_limits<float>::quiet_NaN());
    auto heat = [&](const Index3& idx) -> double {
      float& slot = heat_cache[grid.linear(idx)];
      if (std::isnan(slot)) {
        const double hs = static_heat_->at_voxel(idx);
        const double hd = snap.predictions.empty()
                              ? 0.0
                              : dynamic_heat(snap.predictions, cfg_.heat, grid.center(idx));
        slot = static_cast<float>(combined_heat(hs, hd, cfg_.heat.H_max));
      }
      return slot;
    };
    const double reach = cfg_.horizon + cfg_.search_margin;
    Vec3 lo = snap.state.pos - Vec3::Constant(reach);
    Vec3 hi = snap.state.pos + Vec3::Constant(reach);
    lo.z() = grid.origin().z();
    hi.z() = grid.max_corner().z();
    const Aabb window_box = Aabb::from_corners(lo, hi);
    // A goal outside the search window is projected onto it so the search
    // stays directed instead of exhausting the window.
    const Aabb inner = Aabb(window_box.center,
                            (window_box.half_extents - Vec3::Constant(grid.resolution())).cwiseMax(0.0));
    const Vec3 local_goal = inner.clamp(snap.goal);
    const auto gp = plan(blocked, heat, snap.state.pos, local_goal, cfg_.w_heat, window_box);
    if (!gp.ok()) {
      out.cause = PlanFailure::GlobalPlan;
      out.timings.global_ms = detail::elapsed_ms(t_global);
      out.timings.replan_ms = detail::elapsed_ms(t_start);
      return out;
    }
    solve_along(snap, blocked, window, gp, local_goal, t_global, out);
    out.timings.replan_ms = detail::elapsed_ms(t_start);
    return out;
  }

 private:
  void solve_along(const Snapshot& snap, const VoxelGrid& blocked, const FactorWindow& window,
                   const GlobalPlanResult& gp, const Vec3& local_goal,
                   std::chrono::steady_clock::time_point t_global, PlanOutcome& out) {
    const VoxelGrid& grid = *snap.grid;
    GlobalPath full = gp.path;
    full.waypoints.front() = snap.state.pos;
    if (gp.status == GlobalPlanStatus::Ok && local_goal == snap.goal) {
      if (full.waypoints.size() == 1) full.waypoints.push_back(snap.goal);
      else full.waypoints.back() = snap.goal;
    }

    BoundaryState fin;
    GlobalPath seed;
    double horizon = cfg_.horizon;
    for (int attempt = 0; attempt <= cfg_.max_shrink; ++attempt, horizon *= 0.7) {
      GlobalPath cut = detail::truncate_arc(full, horizon);
      if (cfg_.corridor.unknown_inflation && grid.count(Cell::Unknown) > 0) {
        fin.pos = cut.waypoints.back();
        const double dt_pre = baseline_dt(snap.state, fin, cfg_.limits, cfg_.N);
        const double r_wc = cfg_.corridor.v_obs_max * cfg_.N * dt_pre * window.hi() +
                            cfg_.corridor.epsilon;
        const auto sg = select_subgoal(cut, inflated_unknown(grid, r_wc));
        cut.waypoints.resize(sg.index + 1);
      }
      if (cut.waypoints.size() < 2) cut.waypoints.push_back(cut.waypoints.front());
      seed = downsample(cut, cfg_.P);
      bool clear = true;
      for (std::size_t i = 0; i + 1 < seed.waypoints.size(); ++i) {
        if (detail::chord_blocked(blocked, seed.waypoints[i], seed.waypoints[i + 1])) {
          clear = false;
          break;
        }
      }
      // The end point must stay outside every box grown to the last layer,
      // or no cell of that layer can contain it.
      if (clear && !snap.tracks.empty()) {
        BoundaryState end;
        end.pos = seed.waypoints.back();
        const double dt_end = window.lo * std::max(baseline_dt(snap.state, end, cfg_.limits, cfg_.N),
                                                   detail::braking_time(snap.state, cfg_.limits) / cfg_.N);
        const double grow = reachable_radius(cfg_.N - 1, dt_end, cfg_.corridor) + cfg_.corridor.r_drone;
        for (const auto& box : snap.tracks) {
          if (minkowski_inflate(box, grow).contains(end.pos)) {
            clear = false;
            break;
          }
        }
      }
      if (clear) break;
    }
    out.timings.global_ms += detail::elapsed_ms(t_global);
    out.seed_path = seed;

    fin = BoundaryState{};
    fin.pos = seed.waypoints.back();
    const double dt0 = std::max(baseline_dt(snap.state, fin, cfg_.limits, cfg_.N),
                                detail::braking_time(snap.state, cfg_.limits) / cfg_.N);
    out.dt0 = dt0;

    const auto factors = window.factors();
    out.factors.resize(factors.size());
    for (std::size_t i = 0; i < factors.size(); ++i) {
      out.factors[i].factor = factors[i];
      out.factors[i].dt = factors[i] * dt0;
    }

    struct Winner {
      std::size_t index;
      MiqpSolution sol;
      std::shared_ptr<const Stsfc> sfc;
    };
    std::optional<Winner> winner;
    std::mutex mu;
    bool any_corridor = false;

    auto attempt = [&](std::size_t i, std::stop_token stop) {
      FactorDiag& diag = out.factors[i];
      if (stop.stop_requested()) return;
      diag.attempted = true;
      const auto t_sfc = std::chrono::steady_clock::now();
      auto sfc = std::make_shared<Stsfc>(
          generate(grid, snap.tracks, seed, cfg_.N, diag.dt, cfg_.corridor, snap.t0));
      diag.stsfc_ms = detail::elapsed_ms(t_sfc);
      diag.cells_ok = sfc->successful_cells();
      if (diag.cells_ok == 0) return;
      {
        std::lock_guard<std::mutex> lock(mu);
        any_corridor = true;
      }
      MiqpProblem pb;
      pb.N = cfg_.N;
      pb.dt = diag.dt;
      pb.init = snap.state;
      pb.fin = fin;
      pb.limits = cfg_.limits;
      pb.corridor = sfc.get();
      auto sol = solve_bnb(pb, stop);
      diag.status = sol.status;
      diag.opt_ms = sol.stats.wall_ms;
      diag.nodes = sol.stats.nodes;
      if (!sol.ok()) return;
      std::lock_guard<std::mutex> lock(mu);
      if (!winner || (cfg_.deterministic && i < winner->index)) {
        winner = Winner{i, std::move(sol), sfc};
      }
    };

    if (cfg_.deterministic) {
      for (std::size_t i = 0; i < factors.size() && !winner; ++i) attempt(i, std::stop_token{});
    } else {
      std::stop_source cancel;
      {
        std::vector<std::jthread> workers;
        for (std::size_t i = 0; i < factors.size(); ++i) {
          workers.emplace_back([&, i] {
            attempt(i, cancel.get_token());
            std::lock_guard<std::mutex> lock(mu);
            if (winner) cancel.request_stop();
          });
        }
      }
    }

    for (const auto& d : out.factors) {
      if (!d.attempted) continue;
      out.timings.stsfc_ms += d.stsfc_ms;
      out.timings.opt_ms += d.opt_ms;
      if (d.cells_ok > 0) ++out.timings.solves;
    }
    if (winner) {
      out.success = true;
      out.factor = factors[winner->index];
      out.dt = out.factors[winner->index].dt;
      out.solution = std::move(winner->sol);
      out.corridor = winner->sfc;
    } else {
      out.cause = any_corridor ? PlanFailure::Optimization : PlanFailure::Corridor;
    }
  }

  void refresh_caches(const Snapshot& snap) {
    if (cached_grid_ == snap.grid && cached_version_ == snap.grid_version && inflated_static_) return;
    cached_grid_ = snap.grid;
    cached_version_ = snap.grid_version;
    inflated_static_ = std::make_unique<VoxelGrid>(inflate_occupied(*snap.grid, cfg_.corridor.r_drone));
    static_heat_ = std::make_unique<StaticHeatMap>(*snap.grid, cfg_.heat);
    unknown_cache_.reset();
  }

  const InflatedUnknown& inflated_unknown(const VoxelGrid& grid, double radius) {
    const int k = voxels_for_radius(radius, grid.resolution());
    if (!unknown_cache_ || unknown_k_ != k) {
      unknown_cache_ = std::make_unique<InflatedUnknown>(grid, radius);
      unknown_k_ = k;
    }
    return *unknown_cache_;
  }

  // Marks every voxel that intersects the box.
  static void mark_box(VoxelGrid& g, const Aabb& box) {
    const Index3 a = g.raw_index(box.min()).cwiseMax(Index3::Zero());
    const Index3 b = g.raw_index(box.max()).cwiseMin(g.dims() - Index3::Ones());
    for (int x = a.x(); x <= b.x(); ++x)
      for (int y = a.y(); y <= b.y(); ++y)
        for (int z = a.z(); z <= b.z(); ++z) g.set(Index3(x, y, z), Cell::Occupied);
  }

  // The agent sits outside the padded obstacles but may fall inside the
  // voxel-quantized halo; free the nearby halo cells (not the obstacles
  // themselves) so A* can leave.
  void clear_around_start(VoxelGrid& blocked, const Vec3& start,
                          const std::vector<Aabb>& tracks) const {
    const auto s = blocked.index_of(start);
    if (!s) return;
    const int k = voxels_for_radius(cfg_.corridor.r_drone, blocked.resolution()) + 1;
    const double half = 0.5 * blocked.resolution();
    for (int dx = -k; dx <= k; ++dx)
      for (int dy = -k; dy <= k; ++dy)
        for (int dz = -k; dz <= k; ++dz) {
          const Index3 idx = *s + Index3(dx, dy, dz);
          if (!blocked.contains(idx) || cached_grid_->at(idx) == Cell::Occupied) continue;
          const Aabb cell(blocked.center(idx), Vec3::Constant(half));
          bool in_track = false;
          for (const auto& t : tracks) in_track = in_track || t.intersects(cell);
          if (!in_track) blocked.set(idx, cached_grid_->at(idx));
        }
  }

  PlanConfig cfg_;
  const VoxelGrid* cached_grid_ = nullptr;
  std::uint64_t cached_version_ = 0;
  std::unique_ptr<VoxelGrid> inflated_static_;
  std::unique_ptr<StaticHeatMap> static_heat_;
  std::unique_ptr<InflatedUnknown> unknown_cache_;
  int unknown_k_ = -1;
};

inline PlanOutcome plan_once(const Snapshot& snap, const PlanConfig& cfg, const FactorWindow& window) {
  Planner planner(cfg);
  return planner.plan_once(snap, window);
}

struct FallbackCommand {
  bool hover = false;
  Vec3 hover_point = Vec3::Zero();
};

/// Keep flying the previous trajectory while it has time left, else hover.
inline FallbackCommand fallback(const std::optional<CompositeTrajectory>& previous, double now,
                                const Vec3& current_position) {
  FallbackCommand cmd;
  if (previous && !previous->empty() && now < previous->t_end()) return cmd;
  cmd.hover = true;
  cmd.hover_point = current_position;
  return cmd;
}

// ---------------------------------------------------------------------------
// Safety verification

struct SafetyReport {
  std::size_t samples = 0;
  std::size_t motions = 0;
  std::size_t outside_assigned = 0;    // (i) agent sample outside its polytope
  std::size_t escaped_inflation = 0;   // (ii) obstacle box leaves its layer box
  std::size_t overlapping_cells = 0;   // (iii) polytope meets an inflated box
  std::size_t collisions = 0;          // agent point inside a true obstacle box
  bool safe() const {
    return outside_assigned == 0 && escaped_inflation == 0 && overlapping_cells == 0 &&
           collisions == 0;
  }
};

struct AdversaryOptions {
  int motions = 1000;
  double speed_scale = 1.0;  // > 1 breaks the velocity bound on purpose
  std::uint64_t seed = 1;
};

namespace detail {

// An obstacle motion with per-axis speed <= v_obs_max * speed_scale: either
// piecewise-constant random velocities or pursuit of the agent.
struct AdversaryMotion {
  Vec3 c0;
  bool pursuit = false;
  std::vector<std::pair<double, Vec3>> legs;  // (start time offset, velocity)
};

}  // namespace detail

/// Mirrors the three proof steps on a planned trajectory and then checks the
/// conclusion directly against sampled adversarial obstacle motions.
/// `tracks_at_t0` are the estimated boxes the corridor was built from.
inline SafetyReport verify_theorem1(const CompositeTrajectory& traj, const Stsfc& sfc,
                                    const std::vector<int>& assignment,
                                    const std::vector<Aabb>& tracks_at_t0, double v_obs_max,
                                    double epsilon, double sample_dt,
                                    const AdversaryOptions& adv = {}) {
  SafetyReport rep;
  if (traj.empty()) return rep;
  const double T = traj.duration();
  const auto steps = static_cast<std::size_t>(std::floor(T / sample_dt));
  std::vector<double> times;
  std::vector<Vec3> pts;
  std::vector<int> layer;
  for (std::size_t k = 0; k <= steps; ++k) {
    const double tau = std::min(T, static_cast<double>(k) * sample_dt);
    times.push_back(tau);
    pts.push_back(traj.sample(traj.t0 + tau).pos);
    layer.push_back(std::min(sfc.N - 1, static_cast<int>(std::floor(tau / sfc.dt + 1e-12))));
  }
  rep.samples = times.size();

  for (std::size_t k = 0; k < times.size(); ++k) {
    const int n = layer[k];
    const int p = assignment[static_cast<std::size_t>(n)];
    if (!sfc.at(n, p).contains(pts[k], 1e-8)) ++rep.outside_assigned;
  }
  for (int n = 0; n < sfc.N; ++n) {
    const int p = assignment[static_cast<std::size_t>(n)];
    const double r = sfc.layer_radii[static_cast<std::size_t>(n)];
    for (const auto& t : tracks_at_t0) {
      if (!polytope_disjoint_from_aabb(sfc.at(n, p), minkowski_inflate(t, r))) ++rep.overlapping_cells;
    }
  }

  std::mt19937_64 rng(adv.seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> leg_len(0.05, 0.5);
  const double vmax = v_obs_max * adv.speed_scale;
  for (const auto& track : tracks_at_t0) {
    for (int m = 0; m < adv.motions; ++m) {
      detail::AdversaryMotion mo;
      mo.c0 = track.center + epsilon * Vec3(unit(rng), unit(rng), unit(rng));
      mo.pursuit = (m % 4 == 0);
      if (!mo.pursuit) {
        for (double s = 0.0; s <= T; s += leg_len(rng)) {
          Vec3 v(unit(rng), unit(rng), unit(rng));
          // Half the legs run at the bound on every axis.
          if (m % 2 == 1) v = v.cwiseSign();
          mo.legs.emplace_back(s, vmax * v);
        }
      }
      ++rep.motions;
      Vec3 c = mo.c0;
      std::size_t leg = 0;
      for (std::size_t k = 0; k < times.size(); ++k) {
        if (k > 0) {
          const double h = times[k] - times[k - 1];
          Vec3 v;
          if (mo.pursuit) {
            v = vmax * (pts[k - 1] - c).cwiseSign();
          } else {
            while (leg + 1 < mo.legs.size() && mo.legs[leg + 1].first <= times[k - 1]) ++leg;
            v = mo.legs[leg].second;
          }
          c += h * v;
        }
        const Aabb truth(c, track.half_extents);
        const int n = layer[k];
        const Aabb allowed = minkowski_inflate(track, sfc.layer_radii[static_cast<std::size_t>(n)]);
        if (!allowed.contains_box(truth, 1e-9)) ++rep.escaped_inflation;
        if (truth.contains(pts[k])) ++rep.collisions;
      }
    }
  }
  return rep;
}

}  // namespace sando
