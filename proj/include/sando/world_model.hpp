#pragma once

// Voxel occupancy grid, axis-aligned boxes, halfspace polytopes and the
// inflation primitives shared by the planner, corridor generator and verifier.

#include <Eigen/Dense>

#include "sando/qp.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace sando {

using Vec3 = Eigen::Vector3d;
using Index3 = Eigen::Vector3i;

enum class Cell : std::uint8_t { Free = 0, Occupied = 1, Unknown = 2 };
enum class Occupancy { Free, Occupied, Unknown, OutOfBounds };

/// ceil(x / res) in whole voxels, robust to values like 0.3 / 0.1.
inline int voxels_for_radius(double radius, double resolution) {
  return static_cast<int>(std::ceil(radius / resolution - 1e-9));
}

/// Dense voxel grid. Linear layout is row-major over (x, y, z): z varies
/// fastest. A point p maps to voxel floor((p - origin) / resolution), so points
/// on a shared face belong to the higher-index voxel.
class VoxelGrid {
 public:
  VoxelGrid() = default;

  VoxelGrid(const Vec3& origin, double resolution, const Index3& dims,
            Cell fill = Cell::Free)
      : origin_(origin), resolution_(resolution), dims_(dims) {
    if (!(resolution > 0.0)) {
      throw std::invalid_argument("VoxelGrid: resolution must be positive");
    }
    if ((dims.array() < 1).any()) {
      throw std::invalid_argument("VoxelGrid: dims must be >= 1");
    }
    cells_.assign(static_cast<std::size_t>(dims.prod()), fill);
  }

  const Vec3& origin() const { return origin_; }
  double resolution() const { return resolution_; }
  const Index3& dims() const { return dims_; }
  std::size_t size() const { return cells_.size(); }
  const std::vector<Cell>& cells() const { return cells_; }
  std::vector<Cell>& cells() { return cells_; }

  bool contains(const Index3& idx) const {
    return (idx.array() >= 0).all() && (idx.array() < dims_.array()).all();
  }

  std::size_t linear(const Index3& idx) const {
    return (static_cast<std::size_t>(idx.x()) * static_cast<std::size_t>(dims_.y()) +
            static_cast<std::size_t>(idx.y())) *
               static_cast<std::size_t>(dims_.z()) +
           static_cast<std::size_t>(idx.z());
  }

  Index3 unlinear(std::size_t li) const {
    const auto nz = static_cast<std::size_t>(dims_.z());
    const auto ny = static_cast<std::size_t>(dims_.y());
    const int z = static_cast<int>(li % nz);
    const int y = static_cast<int>((li / nz) % ny);
    const int x = static_cast<int>(li / (nz * ny));
    return {x, y, z};
  }

  /// Voxel index of a world point, without bounds checking.
  Index3 raw_index(const Vec3& p) const {
    const Vec3 q = (p - origin_) / resolution_;
    return {static_cast<int>(std::floor(q.x())), static_cast<int>(std::floor(q.y())),
            static_cast<int>(std::floor(q.z()))};
  }

  std::optional<Index3> index_of(const Vec3& p) const {
    const Index3 idx = raw_index(p);
    if (!contains(idx)) return std::nullopt;
    return idx;
  }

  Vec3 center(const Index3& idx) const {
    return origin_ + (idx.cast<double>().array() + 0.5).matrix() * resolution_;
  }

  Cell at(const Index3& idx) const { return cells_[linear(idx)]; }
  void set(const Index3& idx, Cell c) { cells_[linear(idx)] = c; }

  Vec3 max_corner() const { return origin_ + dims_.cast<double>() * resolution_; }

  std::size_t count(Cell c) const {
    return static_cast<std::size_t>(std::count(cells_.begin(), cells_.end(), c));
  }

  bool operator==(const VoxelGrid& o) const {
    return origin_ == o.origin_ && resolution_ == o.resolution_ && dims_ == o.dims_ &&
           cells_ == o.cells_;
  }

 private:
  Vec3 origin_ = Vec3::Zero();
  double resolution_ = 1.0;
  Index3 dims_ = Index3::Ones();
  std::vector<Cell> cells_ = std::vector<Cell>(1, Cell::Free);
};

inline Occupancy classify(const VoxelGrid& grid, const Vec3& p) {
  const auto idx = grid.index_of(p);
  if (!idx) return Occupancy::OutOfBounds;
  switch (grid.at(*idx)) {
    case Cell::Free: return Occupancy::Free;
    case Cell::Occupied: return Occupancy::Occupied;
    case Cell::Unknown: return Occupancy::Unknown;
  }
  return Occupancy::OutOfBounds;
}

/// Separable L-infinity dilation of a boolean mask by k voxels.
inline std::vector<char> dilate_mask(const std::vector<char>& mask, const Index3& dims,
                                     int k) {
  if (k <= 0) return mask;
  std::vector<char> cur = mask;
  std::vector<char> next(mask.size());
  const std::array<std::size_t, 3> stride = {
      static_cast<std::size_t>(dims.y()) * static_cast<std::size_t>(dims.z()),
      static_cast<std::size_t>(dims.z()), 1};
  for (int axis = 0; axis < 3; ++axis) {
    const int len = dims(axis);
    const std::size_t st = stride[static_cast<std::size_t>(axis)];
    std::fill(next.begin(), next.end(), 0);
    for (std::size_t li = 0; li < cur.size(); ++li) {
      if (!cur[li]) continue;
      const int coord = static_cast<int>((li / st) % static_cast<std::size_t>(len));
      const int lo = std::max(0, coord - k);
      const int hi = std::min(len - 1, coord + k);
      const std::size_t base = li - static_cast<std::size_t>(coord) * st;
      for (int c = lo; c <= hi; ++c) next[base + static_cast<std::size_t>(c) * st] = 1;
    }
    std::swap(cur, next);
  }
  return cur;
}

/// Every voxel within L-infinity distance ceil(radius / resolution) voxels of an
/// Occupied voxel becomes Occupied. Unknown cells outside the halo keep their
/// state.
inline VoxelGrid inflate_occupied(const VoxelGrid& grid, double radius) {
  if (radius < 0.0) throw std::invalid_argument("inflate_occupied: negative radius");
  const int k = voxels_for_radius(radius, grid.resolution());
  if (k == 0) return grid;
  std::vector<char> mask(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) mask[i] = grid.cells()[i] == Cell::Occupied;
  const auto dil = dilate_mask(mask, grid.dims(), k);
  VoxelGrid out = grid;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (dil[i]) out.cells()[i] = Cell::Occupied;
  }
  return out;
}

inline constexpr std::array<std::array<int, 3>, 6> kFaceNeighbors = {
    {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}}};

/// Cells of type `of` with at least one 6-connected neighbor of type `next_to`.
inline std::vector<Index3> boundary_cells(const VoxelGrid& grid, Cell of, Cell next_to) {
  std::vector<Index3> out;
  for (std::size_t li = 0; li < grid.size(); ++li) {
    if (grid.cells()[li] != of) continue;
    const Index3 idx = grid.unlinear(li);
    for (const auto& o : kFaceNeighbors) {
      const Index3 nb = idx + Index3(o[0], o[1], o[2]);
      if (grid.contains(nb) && grid.at(nb) == next_to) {
        out.push_back(idx);
        break;
      }
    }
  }
  return out;
}

/// Unknown voxels having at least one 6-connected Free neighbor.
inline std::vector<Index3> unknown_boundary(const VoxelGrid& grid) {
  return boundary_cells(grid, Cell::Unknown, Cell::Free);
}

struct Aabb {
  Vec3 center = Vec3::Zero();
  Vec3 half_extents = Vec3::Constant(0.5);

  Aabb() = default;
  Aabb(const Vec3& c, const Vec3& h) : center(c), half_extents(h) {
    if ((h.array() <= 0.0).any()) {
      throw std::invalid_argument("Aabb: half extents must be positive");
    }
  }

  static Aabb from_corners(const Vec3& lo, const Vec3& hi) {
    return Aabb(0.5 * (lo + hi), 0.5 * (hi - lo));
  }

  Vec3 min() const { return center - half_extents; }
  Vec3 max() const { return center + half_extents; }

  bool contains(const Vec3& p, double tol = 0.0) const {
    return ((p - center).cwiseAbs().array() <= half_extents.array() + tol).all();
  }

  bool contains_box(const Aabb& o, double tol = 1e-12) const {
    return (o.min().array() >= min().array() - tol).all() &&
           (o.max().array() <= max().array() + tol).all();
  }

  bool intersects(const Aabb& o) const {
    return ((center - o.center).cwiseAbs().array() <=
            (half_extents + o.half_extents).array())
        .all();
  }

  Vec3 clamp(const Vec3& p) const { return p.cwiseMax(min()).cwiseMin(max()); }
};

inline Aabb minkowski_inflate(const Aabb& box, double r) {
  if (r < 0.0) throw std::invalid_argument("minkowski_inflate: negative radius");
  return Aabb(box.center, box.half_extents + Vec3::Constant(r));
}

struct Halfspace {
  Vec3 normal;
  double offset;
};

/// Convex polytope {x : normal_i . x <= offset_i for all i}.
class Polytope {
 public:
  static constexpr double kMembershipTol = 1e-9;

  Polytope() = default;
  explicit Polytope(std::vector<Halfspace> hs) {
    for (auto& h : hs) add(h.normal, h.offset);
  }

  static Polytope from_aabb(const Aabb& box) {
    Polytope p;
    for (int i = 0; i < 3; ++i) {
      Vec3 e = Vec3::Zero();
      e(i) = 1.0;
      p.add(e, box.max()(i));
      p.add(-e, -box.min()(i));
    }
    return p;
  }

  void add(const Vec3& normal, double offset) {
    if (!(normal.norm() > 0.0)) throw std::invalid_argument("Polytope: zero normal");
    halfspaces_.push_back({normal, offset});
  }

  const std::vector<Halfspace>& halfspaces() const { return halfspaces_; }
  std::size_t size() const { return halfspaces_.size(); }
  bool empty() const { return halfspaces_.empty(); }

  bool contains(const Vec3& p, double tol = kMembershipTol) const {
    for (const auto& h : halfspaces_) {
      if (h.normal.dot(p) > h.offset + tol) return false;
    }
    return true;
  }

  /// Largest violation normal.p - offset over all halfspaces (<= 0 inside).
  double max_violation(const Vec3& p) const {
    double worst = -std::numeric_limits<double>::infinity();
    for (const auto& h : halfspaces_) worst = std::max(worst, h.normal.dot(p) - h.offset);
    return worst;
  }

  /// True when some single halfspace already excludes the entire box.
  bool separates_box(const Aabb& box) const {
    for (const auto& h : halfspaces_) {
      const double lo = h.normal.dot(box.center) - h.normal.cwiseAbs().dot(box.half_extents);
      if (lo > h.offset) return true;
    }
    return false;
  }

  Eigen::MatrixXd matrix() const {
    Eigen::MatrixXd F(static_cast<Eigen::Index>(halfspaces_.size()), 3);
    for (std::size_t i = 0; i < halfspaces_.size(); ++i) {
      F.row(static_cast<Eigen::Index>(i)) = halfspaces_[i].normal.transpose();
    }
    return F;
  }

  Eigen::VectorXd offsets() const {
    Eigen::VectorXd g(static_cast<Eigen::Index>(halfspaces_.size()));
    for (std::size_t i = 0; i < halfspaces_.size(); ++i) {
      g(static_cast<Eigen::Index>(i)) = halfspaces_[i].offset;
    }
    return g;
  }

 private:
  std::vector<Halfspace> halfspaces_;
};

/// Exact emptiness test for poly ∩ box. A quick single-plane separation check
/// runs first; otherwise we project the box center onto poly ∩ box with the
/// dual active-set QP, and infeasibility of that QP means the sets are disjoint.
/// Sets that only touch (within the QP feasibility tolerance) count as
/// intersecting.
inline bool polytope_disjoint_from_aabb(const Polytope& poly, const Aabb& box) {
  if (poly.separates_box(box)) return true;
  const auto m = static_cast<Eigen::Index>(poly.size());
  Eigen::MatrixXd A(m + 6, 3);
  Eigen::VectorXd b(m + 6);
  A.topRows(m) = poly.matrix();
  b.head(m) = poly.offsets();
  A.bottomRows(6).setZero();
  for (int i = 0; i < 3; ++i) {
    A(m + 2 * i, i) = 1.0;
    b(m + 2 * i) = box.max()(i);
    A(m + 2 * i + 1, i) = -1.0;
    b(m + 2 * i + 1) = -box.min()(i);
  }
  const Eigen::MatrixXd H = Eigen::Matrix3d::Identity();
  const Eigen::VectorXd f = -box.center;
  const auto res = solve_qp(H, f, A, b);
  return res.status == QpStatus::Infeasible;
}

// ---------------------------------------------------------------------------
// Grid text serialization: 4 header lines followed by one character per cell
// in linear (row-major, z fastest) order, wrapped at dims.z per line.
//   origin <x> <y> <z>
//   resolution <r>
//   dims <nx> <ny> <nz>
//   encoding ascii .#?
// '.' = Free, '#' = Occupied, '?' = Unknown.

inline void write_grid(std::ostream& os, const VoxelGrid& grid) {
  os.precision(17);
  os << "origin " << grid.origin().x() << ' ' << grid.origin().y() << ' '
     << grid.origin().z() << '\n';
  os << "resolution " << grid.resolution() << '\n';
  os << "dims " << grid.dims().x() << ' ' << grid.dims().y() << ' ' << grid.dims().z()
     << '\n';
  os << "encoding ascii .#?\n";
  const auto nz = static_cast<std::size_t>(grid.dims().z());
  std::string line;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    constexpr char sym[] = {'.', '#', '?'};
    line.push_back(sym[static_cast<int>(grid.cells()[i])]);
    if (line.size() == nz) {
      os << line << '\n';
      line.clear();
    }
  }
}

inline VoxelGrid read_grid(std::istream& is) {
  std::string key;
  Vec3 origin;
  double res = 0.0;
  Index3 dims;
  std::string enc, symbols;
  if (!(is >> key >> origin.x() >> origin.y() >> origin.z()) || key != "origin" ||
      !(is >> key >> res) || key != "resolution" ||
      !(is >> key >> dims.x() >> dims.y() >> dims.z()) || key != "dims" ||
      !(is >> key >> enc >> symbols) || key != "encoding" || enc != "ascii") {
    throw std::runtime_error("read_grid: malformed header");
  }
  VoxelGrid grid(origin, res, dims);
  std::size_t i = 0;
  char c = 0;
  while (i < grid.size() && is.get(c)) {
    if (c == '\n' || c == '\r' || c == ' ') continue;
    switch (c) {
      case '.': grid.cells()[i++] = Cell::Free; break;
      case '#': grid.cells()[i++] = Cell::Occupied; break;
      case '?': grid.cells()[i++] = Cell::Unknown; break;
      default: throw std::runtime_error("read_grid: bad cell symbol");
    }
  }
  if (i != grid.size()) throw std::runtime_error("read_grid: truncated cell array");
  return grid;
}

}  // namespace sando
