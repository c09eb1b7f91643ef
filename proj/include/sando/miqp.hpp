#pragma once

// Piece-to-polytope MIQP over N cubic pieces of equal duration dt.
//
// Per axis the 4N coefficients [a_n b_n c_n d_n] obey 3N+3 equality rows
// (C2 continuity at N-1 junctions, initial and final pos/vel/acc). Variable
// elimination writes y = y_p + Z w with Z an orthonormal basis of null(E), so
// the QP runs over N-3 free variables per axis. The binary assignment is
// handled by best-first branch-and-bound over whole-piece assignments.

#include "sando/bezier.hpp"
#include "sando/qp.hpp"
#include "sando/stsfc.hpp"

#include <Eigen/QR>

#include <array>
#include <chrono>
#include <cstdint>
#include <optional>
#include <queue>
#include <stdexcept>
#include <stop_token>
#include <vector>

namespace sando {

struct BoundaryState {
  Vec3 pos = Vec3::Zero();
  Vec3 vel = Vec3::Zero();
  Vec3 acc = Vec3::Zero();
};

struct DynamicLimits {
  double v_max = 1.0;
  double a_max = 2.0;
  double j_max = 3.0;
};

struct AxisEqualities {
  Eigen::MatrixXd E;
  Eigen::VectorXd h;
};

/// Rows: 3(N-1) continuity rows (pos, vel, acc per junction), then initial
/// pos/vel/acc, then final pos/vel/acc. Identical E for all axes.
inline std::array<AxisEqualities, 3> build_equalities(int N, double dt, const BoundaryState& init,
                                                      const BoundaryState& fin) {
  if (N < 4) throw std::invalid_argument("build_equalities: N must be >= 4");
  if (!(dt > 0.0)) throw std::invalid_argument("build_equalities: dt must be positive");
  const int m = 3 * N + 3;
  const int nv = 4 * N;
  Eigen::MatrixXd E = Eigen::MatrixXd::Zero(m, nv);
  const double t = dt, t2 = dt * dt, t3 = dt * dt * dt;
  int r = 0;
  for (int n = 0; n + 1 < N; ++n) {
    const int o = 4 * n, q = 4 * (n + 1);
    E.row(r).segment(o, 4) << t3, t2, t, 1.0;
    E(r++, q + 3) = -1.0;
    E.row(r).segment(o, 4) << 3.0 * t2, 2.0 * t, 1.0, 0.0;
    E(r++, q + 2) = -1.0;
    E.row(r).segment(o, 4) << 6.0 * t, 2.0, 0.0, 0.0;
    E(r++, q + 1) = -2.0;
  }
  const int init_row = r;
  E(r++, 3) = 1.0;
  E(r++, 2) = 1.0;
  E(r++, 1) = 2.0;
  const int last = 4 * (N - 1);
  E.row(r++).segment(last, 4) << t3, t2, t, 1.0;
  E.row(r++).segment(last, 4) << 3.0 * t2, 2.0 * t, 1.0, 0.0;
  E.row(r++).segment(last, 4) << 6.0 * t, 2.0, 0.0, 0.0;

  std::array<AxisEqualities, 3> out;
  for (int ax = 0; ax < 3; ++ax) {
    Eigen::VectorXd h = Eigen::VectorXd::Zero(m);
    h(init_row) = init.pos(ax);
    h(init_row + 1) = init.vel(ax);
    h(init_row + 2) = init.acc(ax);
    h(init_row + 3) = fin.pos(ax);
    h(init_row + 4) = fin.vel(ax);
    h(init_row + 5) = fin.acc(ax);
    out[static_cast<std::size_t>(ax)] = {E, h};
  }
  return out;
}

struct AxisElimination {
  Eigen::VectorXd particular;  // minimum-norm solution of E y = h
  Eigen::MatrixXd basis;       // orthonormal columns spanning null(E)
};

inline AxisElimination eliminate(const Eigen::MatrixXd& E, const Eigen::VectorXd& h) {
  const auto m = E.rows();
  const auto nv = E.cols();
  if (m > nv) throw std::invalid_argument("eliminate: more rows than variables");
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(E.transpose());
  const Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(nv, nv);
  const Eigen::MatrixXd R = qr.matrixQR().topRows(m).triangularView<Eigen::Upper>();
  const double scale = R.diagonal().cwiseAbs().maxCoeff();
  if (R.diagonal().cwiseAbs().minCoeff() <= 1e-10 * std::max(scale, 1.0)) {
    throw std::invalid_argument("eliminate: equality matrix is rank deficient");
  }
  AxisElimination out;
  // E = R' Q1', so y = Q1 R^{-T} h is the minimum-norm solution.
  const Eigen::VectorXd z = R.transpose().triangularView<Eigen::Lower>().solve(h);
  out.particular = Q.leftCols(m) * z;
  out.basis = Q.rightCols(nv - m);
  return out;
}

struct EliminationMap {
  int N = 0;
  double dt = 0.0;
  std::array<AxisElimination, 3> axes;
};

inline EliminationMap build_elimination(int N, double dt, const BoundaryState& init,
                                        const BoundaryState& fin) {
  EliminationMap map;
  map.N = N;
  map.dt = dt;
  const auto eq = build_equalities(N, dt, init, fin);
  for (int ax = 0; ax < 3; ++ax) {
    const auto& e = eq[static_cast<std::size_t>(ax)];
    map.axes[static_cast<std::size_t>(ax)] = eliminate(e.E, e.h);
  }
  return map;
}

struct MiqpProblem {
  int N = 5;
  double dt = 0.5;
  BoundaryState init;
  BoundaryState fin;
  DynamicLimits limits;
  const Stsfc* corridor = nullptr;  // N layers; cells[n][p] is the polytope set for piece n
};

enum class MiqpStatus { Optimal, Infeasible, Cancelled, NumericalFailure };

struct SolverStats {
  std::size_t nodes = 0;
  std::size_t qps = 0;
  double wall_ms = 0.0;
};

struct MiqpSolution {
  MiqpStatus status = MiqpStatus::Infeasible;
  CompositeTrajectory trajectory;
  std::vector<int> assignment;
  double objective = std::numeric_limits<double>::infinity();
  SolverStats stats;

  bool ok() const { return status == MiqpStatus::Optimal; }
};

/// Sum over pieces of ||6 a_n||^2.
inline double jerk_cost(const CompositeTrajectory& traj) {
  double J = 0.0;
  for (const auto& p : traj.pieces) J += (6.0 * p.a).squaredNorm();
  return J;
}

namespace detail {

// Coefficient-space rows (over [a b c d]) of the Bezier control points.
inline std::array<Eigen::RowVector4d, 4> position_cp_rows(double dt) {
  const double t = dt, t2 = dt * dt, t3 = dt * dt * dt;
  return {Eigen::RowVector4d(0, 0, 0, 1), Eigen::RowVector4d(0, 0, t / 3.0, 1),
          Eigen::RowVector4d(0, t2 / 3.0, 2.0 * t / 3.0, 1), Eigen::RowVector4d(t3, t2, t, 1)};
}

// Dynamic-limit rows kept per piece. The first velocity and acceleration point
// of every piece equals the previous piece's last one (or the fixed initial
// state for piece 0), so only v1, v2, a1 and the jerk need explicit rows.
struct LimitRow {
  Eigen::RowVector4d row;
  int kind;  // 0 vel, 1 acc, 2 jerk
};
inline std::vector<LimitRow> limit_rows(double dt) {
  const double t = dt;
  return {{Eigen::RowVector4d(0, t, 1, 0), 0},
          {Eigen::RowVector4d(3 * t * t, 2 * t, 1, 0), 0},
          {Eigen::RowVector4d(6 * t, 2, 0, 0), 1},
          {Eigen::RowVector4d(6, 0, 0, 0), 2}};
}

inline void check_problem(const MiqpProblem& pb) {
  if (pb.N < 4) throw std::invalid_argument("miqp: N must be >= 4");
  if (!(pb.dt > 0.0)) throw std::invalid_argument("miqp: dt must be positive");
  if (!pb.corridor) throw std::invalid_argument("miqp: corridor missing");
  if (pb.corridor->N != pb.N) throw std::invalid_argument("miqp: corridor layer count != N");
}

inline std::vector<std::vector<int>> candidates(const MiqpProblem& pb) {
  std::vector<std::vector<int>> cand(static_cast<std::size_t>(pb.N));
  for (int n = 0; n < pb.N; ++n) {
    for (int p = 0; p < pb.corridor->P; ++p) {
      if (pb.corridor->has(n, p)) cand[static_cast<std::size_t>(n)].push_back(p);
    }
  }
  return cand;
}

// Everything the eliminated QP needs, with positions shifted so that the
// initial position is the origin (keeps the coefficient magnitudes small).
class EliminatedQp {
 public:
  explicit EliminatedQp(const MiqpProblem& pb) : pb_(pb), origin_(pb.init.pos) {
    BoundaryState init = pb.init, fin = pb.fin;
    init.pos -= origin_;
    fin.pos -= origin_;
    map_ = build_elimination(pb.N, pb.dt, init, fin);
    k_ = pb.N - 3;
    const auto& Z = map_.axes[0].basis;
    // Same E for every axis, so one nullspace basis serves all three.
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(pb.N, 4 * pb.N);
    for (int n = 0; n < pb.N; ++n) S(n, 4 * n) = 1.0;
    const Eigen::MatrixXd SZ = S * Z;
    H_ = Eigen::MatrixXd::Zero(3 * k_, 3 * k_);
    f_ = Eigen::VectorXd::Zero(3 * k_);
    for (int ax = 0; ax < 3; ++ax) {
      const Eigen::VectorXd Syp = S * map_.axes[static_cast<std::size_t>(ax)].particular;
      H_.block(ax * k_, ax * k_, k_, k_) = 72.0 * SZ.transpose() * SZ;
      f_.segment(ax * k_, k_) = 72.0 * SZ.transpose() * Syp;
    }
    cp_rows_ = position_cp_rows(pb.dt);

    const auto lrows = limit_rows(pb.dt);
    const double lim[3] = {pb.limits.v_max, pb.limits.a_max, pb.limits.j_max};
    const int nrows = pb.N * 3 * static_cast<int>(lrows.size()) * 2;
    A_dyn_ = Eigen::MatrixXd::Zero(nrows, 3 * k_);
    b_dyn_ = Eigen::VectorXd::Zero(nrows);
    int r = 0;
    for (int n = 0; n < pb.N; ++n) {
      for (const auto& lr : lrows) {
        const Eigen::RowVectorXd rz = lr.row * Z.middleRows(4 * n, 4);
        for (int ax = 0; ax < 3; ++ax) {
          const double base = lr.row.dot(map_.axes[static_cast<std::size_t>(ax)].particular.segment(4 * n, 4));
          const double L = lim[lr.kind];
          A_dyn_.row(r).segment(ax * k_, k_) = rz;
          b_dyn_(r++) = L - base;
          A_dyn_.row(r).segment(ax * k_, k_) = -rz;
          b_dyn_(r++) = L + base;
        }
      }
    }
  }

  int dim() const { return 3 * k_; }
  const Eigen::MatrixXd& H() const { return H_; }
  const Eigen::VectorXd& f() const { return f_; }

  // Rows forcing all four control points of piece n into `poly`.
  void append_polytope_rows(int n, const Polytope& poly, Eigen::MatrixXd& A,
                            Eigen::VectorXd& b) const {
    const auto& Z = map_.axes[0].basis;
    const Eigen::MatrixXd An = poly.matrix();
    const Eigen::VectorXd bn = poly.offsets();
    const int m = static_cast<int>(An.rows());
    const int start = static_cast<int>(A.rows());
    A.conservativeResize(start + 4 * m, 3 * k_);
    b.conservativeResize(start + 4 * m);
    int r = start;
    for (const auto& cp : cp_rows_) {
      const Eigen::RowVectorXd rz = cp * Z.middleRows(4 * n, 4);
      Eigen::Vector3d base;
      for (int ax = 0; ax < 3; ++ax) {
        base(ax) = cp.dot(map_.axes[static_cast<std::size_t>(ax)].particular.segment(4 * n, 4));
      }
      for (int i = 0; i < m; ++i) {
        for (int ax = 0; ax < 3; ++ax) A.row(r).segment(ax * k_, k_) = An(i, ax) * rz;
        b(r) = bn(i) - An.row(i).dot(origin_ + base);
        ++r;
      }
    }
  }

  QpResult solve(const std::vector<int>& assignment, std::size_t& qp_count) const {
    Eigen::MatrixXd A = A_dyn_;
    Eigen::VectorXd b = b_dyn_;
    for (int n = 0; n < pb_.N; ++n) {
      const int p = assignment[static_cast<std::size_t>(n)];
      if (p >= 0) append_polytope_rows(n, pb_.corridor->at(n, p), A, b);
    }
    ++qp_count;
    return solve_qp(H_, f_, A, b);
  }

  CompositeTrajectory trajectory(const Eigen::VectorXd& w) const {
    CompositeTrajectory traj;
    traj.t0 = pb_.corridor->t0;
    const auto& Z = map_.axes[0].basis;
    std::array<Eigen::VectorXd, 3> y;
    for (int ax = 0; ax < 3; ++ax) {
      y[static_cast<std::size_t>(ax)] =
          map_.axes[static_cast<std::size_t>(ax)].particular + Z * w.segment(ax * k_, k_);
    }
    for (int n = 0; n < pb_.N; ++n) {
      CubicPiece piece;
      piece.dt = pb_.dt;
      for (int ax = 0; ax < 3; ++ax) {
        const auto& ya = y[static_cast<std::size_t>(ax)];
        piece.a(ax) = ya(4 * n);
        piece.b(ax) = ya(4 * n + 1);
        piece.c(ax) = ya(4 * n + 2);
        piece.d(ax) = ya(4 * n + 3);
      }
      piece.d += origin_;
      traj.pieces.push_back(piece);
    }
    return traj;
  }

 private:
  const MiqpProblem& pb_;
  Vec3 origin_;
  EliminationMap map_;
  int k_ = 0;
  Eigen::MatrixXd H_;
  Eigen::VectorXd f_;
  std::array<Eigen::RowVector4d, 4> cp_rows_;
  Eigen::MatrixXd A_dyn_;
  Eigen::VectorXd b_dyn_;
};

// Lowest-index candidate polytope containing all control points of a piece.
inline int containing_candidate(const MiqpProblem& pb, const std::vector<int>& cand,
                                const CubicPiece& piece, int n) {
  const auto cps = position_control_points(piece);
  for (int p : cand) {
    const auto& poly = pb.corridor->at(n, p);
    bool all = true;
    for (const auto& c : cps) {
      if (poly.max_violation(c) > Polytope::kMembershipTol) {
        all = false;
        break;
      }
    }
    if (all) return p;
  }
  return -1;
}

inline double elapsed_ms(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace detail

namespace detail {

// Best-first search shared by the eliminated and full formulations. `Qp`
// provides solve(assignment, qp_count) and trajectory(x).
template <typename Qp>
MiqpSolution branch_and_bound(const MiqpProblem& pb, const Qp& qp,
                              const std::vector<std::vector<int>>& cand, std::stop_token stop,
                              std::chrono::steady_clock::time_point t_start) {
  MiqpSolution sol;
  struct Node {
    double bound;
    std::uint64_t seq;
    std::vector<int> assign;
    Eigen::VectorXd x;
  };
  struct Cmp {
    bool operator()(const Node& a, const Node& b) const {
      return a.bound != b.bound ? a.bound > b.bound : a.seq > b.seq;
    }
  };
  std::priority_queue<Node, std::vector<Node>, Cmp> open;
  std::uint64_t seq = 0;
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> best_assign;
  Eigen::VectorXd best_x;
  bool numerical = false;

  auto push = [&](std::vector<int> assign) {
    const auto r = qp.solve(assign, sol.stats.qps);
    if (r.status == QpStatus::NumericalFailure) numerical = true;
    if (!r.ok()) return;
    const double J = jerk_cost(qp.trajectory(r.x));
    if (J >= best) return;
    open.push({J, seq++, std::move(assign), r.x});
  };

  std::vector<int> root(static_cast<std::size_t>(pb.N), -1);
  for (std::size_t n = 0; n < root.size(); ++n) {
    if (cand[n].size() == 1) root[n] = cand[n][0];
  }
  push(root);

  while (!open.empty()) {
    if (stop.stop_requested()) {
      sol.status = MiqpStatus::Cancelled;
      sol.stats.wall_ms = elapsed_ms(t_start);
      return sol;
    }
    Node node = open.top();
    open.pop();
    if (node.bound >= best) continue;
    ++sol.stats.nodes;
    const auto traj = qp.trajectory(node.x);
    std::vector<int> full = node.assign;
    int branch = -1;
    for (int n = 0; n < pb.N; ++n) {
      auto& slot = full[static_cast<std::size_t>(n)];
      if (slot >= 0) continue;
      slot = containing_candidate(pb, cand[static_cast<std::size_t>(n)],
                                  traj.pieces[static_cast<std::size_t>(n)], n);
      if (slot < 0) {
        branch = n;
        break;
      }
    }
    if (branch < 0) {
      best = node.bound;
      best_assign = full;
      best_x = node.x;
      continue;
    }
    for (int p : cand[static_cast<std::size_t>(branch)]) {
      auto child = node.assign;
      child[static_cast<std::size_t>(branch)] = p;
      push(std::move(child));
    }
  }

  sol.stats.wall_ms = elapsed_ms(t_start);
  if (best_assign.empty()) {
    sol.status = numerical ? MiqpStatus::NumericalFailure : MiqpStatus::Infeasible;
    return sol;
  }
  sol.status = MiqpStatus::Optimal;
  sol.assignment = best_assign;
  sol.trajectory = qp.trajectory(best_x);
  sol.objective = jerk_cost(sol.trajectory);
  return sol;
}

inline bool has_empty_candidates(const std::vector<std::vector<int>>& cand) {
  for (const auto& c : cand) {
    if (c.empty()) return true;
  }
  return false;
}

}  // namespace detail

/// Best-first branch-and-bound over piece-to-polytope assignments. A node's
/// bound is the QP with only its assigned pieces constrained to polytopes.
/// When the relaxed optimum already lies in some candidate polytope for every
/// unassigned piece, it is optimal for the whole subtree and becomes an
/// incumbent; otherwise the first piece outside all its candidates is branched.
/// Pieces with a single candidate are fixed at the root.
inline MiqpSolution solve_bnb(const MiqpProblem& pb, std::stop_token stop = {}) {
  const auto t_start = std::chrono::steady_clock::now();
  detail::check_problem(pb);
  const auto cand = detail::candidates(pb);
  if (detail::has_empty_candidates(cand)) return {};
  const detail::EliminatedQp qp(pb);
  return detail::branch_and_bound(pb, qp, cand, stop, t_start);
}

/// Ground truth: one QP per single-polytope assignment (P^N at most).
inline MiqpSolution solve_enumerate(const MiqpProblem& pb) {
  const auto t_start = std::chrono::steady_clock::now();
  detail::check_problem(pb);
  MiqpSolution sol;
  const auto cand = detail::candidates(pb);
  if (detail::has_empty_candidates(cand)) return sol;
  const detail::EliminatedQp qp(pb);
  std::vector<std::size_t> digit(static_cast<std::size_t>(pb.N), 0);
  double best = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_w;
  std::vector<int> best_assign;
  for (bool done = false; !done;) {
    std::vector<int> assign(static_cast<std::size_t>(pb.N));
    for (std::size_t n = 0; n < assign.size(); ++n) assign[n] = cand[n][digit[n]];
    ++sol.stats.nodes;
    const auto r = qp.solve(assign, sol.stats.qps);
    if (r.ok()) {
      const double J = jerk_cost(qp.trajectory(r.x));
      if (J < best) {
        best = J;
        best_w = r.x;
        best_assign = assign;
      }
    }
    std::size_t i = digit.size();
    for (;;) {
      if (i == 0) {
        done = true;
        break;
      }
      --i;
      if (++digit[i] < cand[i].size()) break;
      digit[i] = 0;
    }
  }
  sol.stats.wall_ms = detail::elapsed_ms(t_start);
  if (best_assign.empty()) return sol;
  sol.status = MiqpStatus::Optimal;
  sol.assignment = best_assign;
  sol.trajectory = qp.trajectory(best_w);
  sol.objective = jerk_cost(sol.trajectory);
  return sol;
}

namespace detail {

// All 12N coefficients as variables, equality rows kept explicit. The jerk
// objective alone is only semidefinite, so rho ||E y - h||^2 is added: it is
// zero on the feasible set and makes the Hessian definite.
class FullQp {
 public:
  explicit FullQp(const MiqpProblem& pb) : pb_(pb), origin_(pb.init.pos) {
    BoundaryState init = pb.init, fin = pb.fin;
    init.pos -= origin_;
    fin.pos -= origin_;
    const auto eq = build_equalities(pb.N, pb.dt, init, fin);
    nv_ = 4 * pb.N;
    const int m = static_cast<int>(eq[0].E.rows());
    Aeq_ = Eigen::MatrixXd::Zero(3 * m, 3 * nv_);
    beq_ = Eigen::VectorXd::Zero(3 * m);
    H_ = Eigen::MatrixXd::Zero(3 * nv_, 3 * nv_);
    f_ = Eigen::VectorXd::Zero(3 * nv_);
    Eigen::MatrixXd Hj = Eigen::MatrixXd::Zero(nv_, nv_);
    for (int n = 0; n < pb.N; ++n) Hj(4 * n, 4 * n) = 72.0;
    const Eigen::MatrixXd EtE = eq[0].E.transpose() * eq[0].E;
    const double rho = Hj.trace() / EtE.trace();
    for (int ax = 0; ax < 3; ++ax) {
      const auto& e = eq[static_cast<std::size_t>(ax)];
      Aeq_.block(ax * m, ax * nv_, m, nv_) = e.E;
      beq_.segment(ax * m, m) = e.h;
      H_.block(ax * nv_, ax * nv_, nv_, nv_) = Hj + 2.0 * rho * EtE;
      f_.segment(ax * nv_, nv_) = -2.0 * rho * e.E.transpose() * e.h;
    }
    cp_rows_ = position_cp_rows(pb.dt);
    const auto lrows = limit_rows(pb.dt);
    const double lim[3] = {pb.limits.v_max, pb.limits.a_max, pb.limits.j_max};
    A_dyn_ = Eigen::MatrixXd::Zero(pb.N * 3 * static_cast<int>(lrows.size()) * 2, 3 * nv_);
    b_dyn_ = Eigen::VectorXd::Zero(A_dyn_.rows());
    int r = 0;
    for (int n = 0; n < pb.N; ++n) {
      for (const auto& lr : lrows) {
        for (int ax = 0; ax < 3; ++ax) {
          A_dyn_.row(r).segment(ax * nv_ + 4 * n, 4) = lr.row;
          b_dyn_(r++) = lim[lr.kind];
          A_dyn_.row(r).segment(ax * nv_ + 4 * n, 4) = -lr.row;
          b_dyn_(r++) = lim[lr.kind];
        }
      }
    }
  }

  QpResult solve(const std::vector<int>& assignment, std::size_t& qp_count) const {
    Eigen::MatrixXd A = A_dyn_;
    Eigen::VectorXd b = b_dyn_;
    for (int n = 0; n < pb_.N; ++n) {
      const int p = assignment[static_cast<std::size_t>(n)];
      if (p < 0) continue;
      const auto& poly = pb_.corridor->at(n, p);
      const Eigen::MatrixXd An = poly.matrix();
      const Eigen::VectorXd bn = poly.offsets();
      const int m = static_cast<int>(An.rows());
      const int start = static_cast<int>(A.rows());
      A.conservativeResize(start + 4 * m, Eigen::NoChange);
      b.conservativeResize(start + 4 * m);
      A.bottomRows(4 * m).setZero();
      int r = start;
      for (const auto& cp : cp_rows_) {
        for (int i = 0; i < m; ++i) {
          for (int ax = 0; ax < 3; ++ax) A.row(r).segment(ax * nv_ + 4 * n, 4) = An(i, ax) * cp;
          b(r) = bn(i) - An.row(i).dot(origin_);
          ++r;
        }
      }
    }
    ++qp_count;
    return solve_qp(H_, f_, Aeq_, beq_, A, b);
  }

  CompositeTrajectory trajectory(const Eigen::VectorXd& y) const {
    CompositeTrajectory traj;
    traj.t0 = pb_.corridor->t0;
    for (int n = 0; n < pb_.N; ++n) {
      CubicPiece piece;
      piece.dt = pb_.dt;
      for (int ax = 0; ax < 3; ++ax) {
        const int o = ax * nv_ + 4 * n;
        piece.a(ax) = y(o);
        piece.b(ax) = y(o + 1);
        piece.c(ax) = y(o + 2);
        piece.d(ax) = y(o + 3);
      }
      piece.d += origin_;
      traj.pieces.push_back(piece);
    }
    return traj;
  }

 private:
  const MiqpProblem& pb_;
  Vec3 origin_;
  int nv_ = 0;
  Eigen::MatrixXd Aeq_;
  Eigen::VectorXd beq_;
  Eigen::MatrixXd H_;
  Eigen::VectorXd f_;
  std::array<Eigen::RowVector4d, 4> cp_rows_;
  Eigen::MatrixXd A_dyn_;
  Eigen::VectorXd b_dyn_;
};

}  // namespace detail

/// Same branch-and-bound as solve_bnb, but each node QP carries all 4N
/// coefficients per axis and the 3N+3 equality rows per axis.
inline MiqpSolution solve_without_elimination(const MiqpProblem& pb, std::stop_token stop = {}) {
  const auto t_start = std::chrono::steady_clock::now();
  detail::check_problem(pb);
  const auto cand = detail::candidates(pb);
  if (detail::has_empty_candidates(cand)) return {};
  const detail::FullQp qp(pb);
  return detail::branch_and_bound(pb, qp, cand, stop, t_start);
}

}  // namespace sando
