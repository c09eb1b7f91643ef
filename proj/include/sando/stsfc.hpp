#pragma once

// Spatiotemporal safe flight corridors: an N x P array of convex polytopes,
// one time layer per trajectory piece. Layer n keeps clear of every tracked
// obstacle box grown by the reachable radius r_n = v_obs_max (n+1) dt + eps
// and, optionally, of unknown space whose boundary is grown by the same radius.

#include "sando/global_planner.hpp"
#include "sando/qp.hpp"
#include "sando/world_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace sando {

enum class SfcMode { Stsfc, WorstCase };

struct CorridorParams {
  double v_obs_max = 0.5;
  double epsilon = 0.0;
  bool unknown_inflation = true;
  int max_halfspaces = 80;
  double ellipsoid_growth = 1.0;  // lateral semi-axis of the seed ellipsoid [m]
  double r_drone = 0.1;
  double local_margin = 1.5;  // corridor bounds around each segment [m]
  double separation = 1e-6;   // planes sit this far off the obstacle support
  SfcMode mode = SfcMode::Stsfc;
};

inline double reachable_radius(int n, double dt, const CorridorParams& params) {
  if (n < 0) throw std::invalid_argument("reachable_radius: negative layer");
  if (!(dt > 0.0)) throw std::invalid_argument("reachable_radius: dt must be positive");
  return params.v_obs_max * static_cast<double>(n + 1) * dt + params.epsilon;
}

/// Radius actually applied to layer n: per-layer for STSFC, full horizon for
/// the worst-case baseline.
inline double layer_radius(int n, int N, double dt, const CorridorParams& params) {
  return params.mode == SfcMode::WorstCase ? reachable_radius(N - 1, dt, params)
                                           : reachable_radius(n, dt, params);
}

inline std::vector<Aabb> inflate_layer_obstacles(const std::vector<Aabb>& tracks, int n,
                                                 double dt, const CorridorParams& params) {
  const double r = reachable_radius(n, dt, params);
  std::vector<Aabb> out;
  out.reserve(tracks.size());
  for (const auto& t : tracks) out.push_back(minkowski_inflate(t, r));
  return out;
}

/// U ∪ (B_U ⊕ B∞(r_n)), quantized up to whole voxels.
inline std::vector<Index3> inflate_layer_unknown(const VoxelGrid& grid, int n, double dt,
                                                 const CorridorParams& params) {
  const InflatedUnknown inflated(grid, reachable_radius(n, dt, params));
  std::vector<Index3> out;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (inflated.mask()[i]) out.push_back(grid.unlinear(i));
  }
  return out;
}

enum class DecompStatus { Ok, SeedInCollision, TooManyHalfspaces };

struct DecompResult {
  DecompStatus status = DecompStatus::Ok;
  std::optional<Polytope> polytope;
};

namespace detail {

// argmin over the box of (x - m)' W (x - m).
inline Vec3 ellipsoid_nearest_on_box(const Eigen::Matrix3d& W, const Vec3& m, const Aabb& box) {
  Eigen::MatrixXd A(6, 3);
  Eigen::VectorXd b(6);
  A.setZero();
  for (int i = 0; i < 3; ++i) {
    A(2 * i, i) = 1.0;
    b(2 * i) = box.max()(i);
    A(2 * i + 1, i) = -1.0;
    b(2 * i + 1) = -box.min()(i);
  }
  const Eigen::MatrixXd H = 2.0 * W;
  const Eigen::VectorXd f = -2.0 * W * m;
  const auto res = solve_qp(H, f, A, b);
  if (!res.ok()) return box.clamp(m);
  return box.clamp(res.x);
}

// Closest pair between segment [s, e] and a box; returns (segment point, box point).
inline std::pair<Vec3, Vec3> segment_box_closest(const Vec3& s, const Vec3& e, const Aabb& box) {
  auto phi = [&](double t) {
    const Vec3 p = s + t * (e - s);
    return (p - box.clamp(p)).squaredNorm();
  };
  double lo = 0.0, hi = 1.0;
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
  double f1 = phi(x1), f2 = phi(x2);
  for (int it = 0; it < 90; ++it) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - gr * (hi - lo);
      f1 = phi(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + gr * (hi - lo);
      f2 = phi(x2);
    }
  }
  double t = 0.5 * (lo + hi);
  if (phi(0.0) <= phi(t)) t = 0.0;
  if (phi(1.0) < phi(t)) t = 1.0;
  const Vec3 p = s + t * (e - s);
  return {p, box.clamp(p)};
}

}  // namespace detail

/// Ellipsoid-seeded convex decomposition around one path segment.
///
/// The seed ellipsoid is centered at the segment midpoint with semi-axis
/// |e - s| / 2 along the segment and `ellipsoid_growth` laterally. Obstacle
/// boxes are visited nearest-first in the ellipsoid metric; each box not yet
/// excluded contributes one plane whose normal is the ellipsoid gradient at the
/// box's metric-nearest point (or, if the box intrudes into the ellipsoid, the
/// segment-to-box separating direction). Every plane is placed at the box's
/// support value minus `separation`, so each obstacle is cut off by a single
/// plane and disjointness holds exactly. The midpoint is always kept.
inline DecompResult decompose_segment(const std::vector<Aabb>& obstacles, const Vec3& seg_start,
                                      const Vec3& seg_end, const Aabb& bounds,
                                      const CorridorParams& params) {
  DecompResult out;
  const Vec3 mid = 0.5 * (seg_start + seg_end);
  for (const auto& box : obstacles) {
    if (box.contains(mid)) {
      out.status = DecompStatus::SeedInCollision;
      return out;
    }
  }

  const Vec3 axis = seg_end - seg_start;
  const double len = axis.norm();
  Eigen::Matrix3d rot = Eigen::Matrix3d::Identity();
  if (len > 1e-9) {
    const Vec3 u = axis / len;
    Vec3 helper = std::abs(u.z()) < 0.9 ? Vec3::UnitZ() : Vec3::UnitX();
    const Vec3 v = u.cross(helper).normalized();
    rot.col(0) = u;
    rot.col(1) = v;
    rot.col(2) = u.cross(v);
  }
  const double semi_major = std::max(0.5 * len, 1e-3);
  const double semi_minor = std::max(params.ellipsoid_growth, 1e-3);
  const Eigen::Matrix3d W =
      rot * Eigen::Vector3d(1.0 / (semi_major * semi_major), 1.0 / (semi_minor * semi_minor),
                            1.0 / (semi_minor * semi_minor))
                .asDiagonal() *
      rot.transpose();
  auto metric = [&](const Vec3& x) { return (x - mid).dot(W * (x - mid)); };

  struct Entry {
    double key;
    std::size_t idx;
  };
  std::vector<Entry> order;
  order.reserve(obstacles.size());
  for (std::size_t i = 0; i < obstacles.size(); ++i) {
    if (!obstacles[i].intersects(bounds)) continue;
    order.push_back({metric(obstacles[i].clamp(mid)), i});
  }
  std::sort(order.begin(), order.end(), [](const Entry& a, const Entry& b) {
    return a.key != b.key ? a.key < b.key : a.idx < b.idx;
  });

  Polytope poly = Polytope::from_aabb(bounds);
  for (const auto& e : order) {
    const Aabb& box = obstacles[e.idx];
    if (poly.separates_box(box)) continue;
    if (static_cast<int>(poly.size()) >= params.max_halfspaces) {
      out.status = DecompStatus::TooManyHalfspaces;
      return out;
    }
    Vec3 normal;
    const Vec3 near = detail::ellipsoid_nearest_on_box(W, mid, box);
    if (metric(near) >= 1.0) {
      normal = W * (near - mid);
    } else {
      const auto [sp, bp] = detail::segment_box_closest(seg_start, seg_end, box);
      if ((bp - sp).norm() > 1e-9) {
        normal = bp - sp;
      } else {
        normal = box.clamp(mid) - mid;
      }
    }
    if (normal.norm() < 1e-12) normal = box.center - mid;
    normal.normalize();
    const double support = normal.dot(box.center) - normal.cwiseAbs().dot(box.half_extents);
    poly.add(normal, support - params.separation);
  }
  out.polytope = std::move(poly);
  return out;
}

struct CellDiagnostics {
  bool ok = false;
  DecompStatus status = DecompStatus::Ok;
  int halfspaces = 0;
};

struct Stsfc {
  int N = 0;
  int P = 0;
  double dt = 0.0;
  double t0 = 0.0;
  std::vector<std::vector<std::optional<Polytope>>> cells;  // [n][p]
  std::vector<std::vector<CellDiagnostics>> diagnostics;
  std::vector<double> layer_radii;
  // Tracked obstacle boxes grown by the layer radius (without the agent
  // radius), i.e. the sets the corridor of layer n must avoid.
  std::vector<std::vector<Aabb>> layer_obstacles;
  std::vector<Vec3> seeds;  // path waypoints, P + 1 entries

  bool has(int n, int p) const {
    return cells[static_cast<std::size_t>(n)][static_cast<std::size_t>(p)].has_value();
  }
  const Polytope& at(int n, int p) const {
    return *cells[static_cast<std::size_t>(n)][static_cast<std::size_t>(p)];
  }
  int successful_cells() const {
    int c = 0;
    for (const auto& row : cells)
      for (const auto& cell : row) c += cell.has_value();
    return c;
  }
};

namespace detail {

struct Window {
  Index3 lo;
  Index3 hi;  // inclusive
  Index3 dims() const { return hi - lo + Index3::Ones(); }
  std::size_t linear(const Index3& g) const {
    const Index3 l = g - lo;
    const Index3 d = dims();
    return (static_cast<std::size_t>(l.x()) * static_cast<std::size_t>(d.y()) +
            static_cast<std::size_t>(l.y())) *
               static_cast<std::size_t>(d.z()) +
           static_cast<std::size_t>(l.z());
  }
  bool contains(const Index3& g) const {
    return (g.array() >= lo.array()).all() && (g.array() <= hi.array()).all();
  }
};

// Surface voxels (6-connected) of an obstacle mask restricted to a window.
inline std::vector<Index3> mask_surface(const Window& w, const std::vector<char>& mask) {
  std::vector<Index3> out;
  const Index3 d = w.dims();
  for (int x = 0; x < d.x(); ++x)
    for (int y = 0; y < d.y(); ++y)
      for (int z = 0; z < d.z(); ++z) {
        const Index3 g = w.lo + Index3(x, y, z);
        if (!mask[w.linear(g)]) continue;
        bool surface = false;
        for (const auto& o : kFaceNeighbors) {
          const Index3 nb = g + Index3(o[0], o[1], o[2]);
          if (!w.contains(nb) || !mask[w.linear(nb)]) {
            surface = true;
            break;
          }
        }
        if (surface) out.push_back(g);
      }
  return out;
}

}  // namespace detail

/// Builds all N x P cells. Static obstacles are the surface voxels of
/// Occupied ∪ Unknown (plus the r_n-grown unknown boundary when enabled),
/// each padded to a cube of half-width resolution/2 + r_drone. Tracked
/// obstacles enter as their boxes grown by r_n + r_drone. A failed cell is
/// recorded in the diagnostics and left empty.
inline Stsfc generate(const VoxelGrid& grid, const std::vector<Aabb>& tracks,
                      const GlobalPath& path, int N, double dt, const CorridorParams& params,
                      double t0 = 0.0) {
  if (path.segments() < 1) throw std::invalid_argument("generate: path needs >= 1 segment");
  if (N < 1) throw std::invalid_argument("generate: N must be >= 1");
  if (!(dt > 0.0)) throw std::invalid_argument("generate: dt must be positive");
  Stsfc sfc;
  sfc.N = N;
  sfc.P = static_cast<int>(path.segments());
  sfc.dt = dt;
  sfc.t0 = t0;
  sfc.seeds = path.waypoints;
  sfc.cells.assign(static_cast<std::size_t>(N),
                   std::vector<std::optional<Polytope>>(static_cast<std::size_t>(sfc.P)));
  sfc.diagnostics.assign(static_cast<std::size_t>(N),
                         std::vector<CellDiagnostics>(static_cast<std::size_t>(sfc.P)));

  const double res = grid.resolution();
  const Vec3 world_lo = grid.origin();
  const Vec3 world_hi = grid.max_corner();

  std::vector<Aabb> seg_bounds;
  Vec3 all_lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 all_hi = -all_lo;
  for (int p = 0; p < sfc.P; ++p) {
    const Vec3& a = path.waypoints[static_cast<std::size_t>(p)];
    const Vec3& b = path.waypoints[static_cast<std::size_t>(p + 1)];
    Vec3 lo = a.cwiseMin(b) - Vec3::Constant(params.local_margin);
    Vec3 hi = a.cwiseMax(b) + Vec3::Constant(params.local_margin);
    lo = lo.cwiseMax(world_lo);
    hi = hi.cwiseMin(world_hi);
    hi = hi.cwiseMax(lo + Vec3::Constant(1e-6));
    seg_bounds.push_back(Aabb::from_corners(lo, hi));
    all_lo = all_lo.cwiseMin(lo);
    all_hi = all_hi.cwiseMax(hi);
  }

  double r_max = 0.0;
  for (int n = 0; n < N; ++n) {
    const double r = layer_radius(n, N, dt, params);
    sfc.layer_radii.push_back(r);
    r_max = std::max(r_max, r);
  }
  const int pad = 2 + (params.unknown_inflation ? voxels_for_radius(r_max, res) : 0) +
                  voxels_for_radius(params.r_drone, res);
  detail::Window win;
  win.lo = grid.raw_index(all_lo) - Index3::Constant(pad);
  win.hi = grid.raw_index(all_hi) + Index3::Constant(pad);
  win.lo = win.lo.cwiseMax(Index3::Zero());
  win.hi = win.hi.cwiseMin(grid.dims() - Index3::Ones());

  const Index3 wd = win.dims();
  const auto wsize = static_cast<std::size_t>(wd.prod());
  std::vector<char> base(wsize, 0), unknown_boundary_mask(wsize, 0);
  bool any_boundary = false;
  for (int x = win.lo.x(); x <= win.hi.x(); ++x)
    for (int y = win.lo.y(); y <= win.hi.y(); ++y)
      for (int z = win.lo.z(); z <= win.hi.z(); ++z) {
        const Index3 g(x, y, z);
        const Cell c = grid.at(g);
        const std::size_t wl = win.linear(g);
        if (c != Cell::Free) base[wl] = 1;
        if (c == Cell::Unknown && params.unknown_inflation) {
          for (const auto& o : kFaceNeighbors) {
            const Index3 nb = g + Index3(o[0], o[1], o[2]);
            if (grid.contains(nb) && grid.at(nb) == Cell::Free) {
              unknown_boundary_mask[wl] = 1;
              any_boundary = true;
              break;
            }
          }
        }
      }

  const double pad_half = 0.5 * res + params.r_drone;
  std::map<int, std::vector<Aabb>> static_by_k;
  auto static_boxes = [&](int k) -> const std::vector<Aabb>& {
    if (!any_boundary) k = 0;
    auto it = static_by_k.find(k);
    if (it != static_by_k.end()) return it->second;
    std::vector<char> mask = base;
    if (k > 0) {
      const auto grown = dilate_mask(unknown_boundary_mask, wd, k);
      for (std::size_t i = 0; i < wsize; ++i) mask[i] = mask[i] || grown[i];
    }
    std::vector<Aabb> boxes;
    for (const auto& g : detail::mask_surface(win, mask)) {
      boxes.emplace_back(grid.center(g), Vec3::Constant(pad_half));
    }
    return static_by_k.emplace(k, std::move(boxes)).first->second;
  };

  for (int n = 0; n < N; ++n) {
    const double r = sfc.layer_radii[static_cast<std::size_t>(n)];
    const int k = params.unknown_inflation ? voxels_for_radius(r, res) : 0;
    const auto& statics = static_boxes(k);
    std::vector<Aabb> layer_boxes;
    std::vector<Aabb> dyn;
    for (const auto& t : tracks) {
      layer_boxes.push_back(minkowski_inflate(t, r));
      dyn.push_back(minkowski_inflate(t, r + params.r_drone));
    }
    sfc.layer_obstacles.push_back(layer_boxes);
    for (int p = 0; p < sfc.P; ++p) {
      const Aabb& bnd = seg_bounds[static_cast<std::size_t>(p)];
      std::vector<Aabb> obs;
      for (const auto& b : statics)
        if (b.intersects(bnd)) obs.push_back(b);
      for (const auto& b : dyn)
        if (b.intersects(bnd)) obs.push_back(b);
      auto res_cell = decompose_segment(obs, path.waypoints[static_cast<std::size_t>(p)],
                                        path.waypoints[static_cast<std::size_t>(p + 1)], bnd,
                                        params);
      auto& diag = sfc.diagnostics[static_cast<std::size_t>(n)][static_cast<std::size_t>(p)];
      diag.status = res_cell.status;
      diag.ok = res_cell.polytope.has_value();
      diag.halfspaces = diag.ok ? static_cast<int>(res_cell.polytope->size()) : 0;
      sfc.cells[static_cast<std::size_t>(n)][static_cast<std::size_t>(p)] =
          std::move(res_cell.polytope);
    }
  }
  return sfc;
}

}  // namespace sando
