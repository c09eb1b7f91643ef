#pragma once

// Dense strictly convex QP solver (Goldfarb-Idnani dual active set).
//
//   minimize    1/2 x' H x + f' x
//   subject to  Aeq x  = beq
//               A x   <= b
//
// H must be positive definite. Callers with a PSD objective and equality
// constraints should add a multiple of Aeq' Aeq to H first (see miqp.hpp),
// which leaves the minimizer over the feasible set unchanged.
//
// The dual method starts from the unconstrained minimizer and adds violated
// constraints one at a time, so infeasibility is detected directly (no phase 1)
// and the solver is cheap when few constraints end up active.

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

namespace sando {

enum class QpStatus { Optimal, Infeasible, NumericalFailure };

struct QpResult {
  QpStatus status = QpStatus::NumericalFailure;
  Eigen::VectorXd x;
  double objective = std::numeric_limits<double>::infinity();
  int iterations = 0;

  bool ok() const { return status == QpStatus::Optimal; }
};

struct QpOptions {
  // Slack below -feasibility_tol (on unit-normalized rows) counts as violated.
  double feasibility_tol = 1e-9;
  int max_iterations = 2000;
};

namespace detail {

// Givens-based update of (J, R) when a new constraint direction d = J' n is
// appended to the active set of size iq. Returns false if the new constraint is
// linearly dependent on the active ones.
inline bool gi_add_constraint(Eigen::MatrixXd& R, Eigen::MatrixXd& J,
                              Eigen::VectorXd& d, int& iq, double& r_norm) {
  const int n = static_cast<int>(d.size());
  for (int j = n - 1; j >= iq + 1; --j) {
    double cc = d(j - 1);
    double ss = d(j);
    double h = std::hypot(cc, ss);
    if (h == 0.0) continue;
    d(j) = 0.0;
    ss /= h;
    cc /= h;
    if (cc < 0.0) {
      cc = -cc;
      ss = -ss;
      d(j - 1) = -h;
    } else {
      d(j - 1) = h;
    }
    const double xny = ss / (1.0 + cc);
    for (int k = 0; k < n; ++k) {
      const double t1 = J(k, j - 1);
      const double t2 = J(k, j);
      J(k, j - 1) = t1 * cc + t2 * ss;
      J(k, j) = xny * (t1 + J(k, j - 1)) - t2;
    }
  }
  ++iq;
  for (int i = 0; i < iq; ++i) R(i, iq - 1) = d(i);
  if (std::abs(d(iq - 1)) <= std::numeric_limits<double>::epsilon() * r_norm) {
    return false;
  }
  r_norm = std::max(r_norm, std::abs(d(iq - 1)));
  return true;
}

inline void gi_delete_constraint(Eigen::MatrixXd& R, Eigen::MatrixXd& J,
                                 std::vector<int>& active, Eigen::VectorXd& u,
                                 int meq, int& iq, int l) {
  const int n = static_cast<int>(R.rows());
  int qq = -1;
  for (int i = meq; i < iq; ++i) {
    if (active[i] == l) {
      qq = i;
      break;
    }
  }
  if (qq < 0) return;
  for (int i = qq; i < iq - 1; ++i) {
    active[i] = active[i + 1];
    u(i) = u(i + 1);
    for (int j = 0; j < n; ++j) R(j, i) = R(j, i + 1);
  }
  active[iq - 1] = active[iq];
  u(iq - 1) = u(iq);
  active[iq] = 0;
  u(iq) = 0.0;
  for (int j = 0; j < iq; ++j) R(j, iq - 1) = 0.0;
  --iq;
  if (iq == 0) return;
  for (int j = qq; j < iq; ++j) {
    double cc = R(j, j);
    double ss = R(j + 1, j);
    double h = std::hypot(cc, ss);
    if (h == 0.0) continue;
    cc /= h;
    ss /= h;
    R(j + 1, j) = 0.0;
    if (cc < 0.0) {
      R(j, j) = -h;
      cc = -cc;
      ss = -ss;
    } else {
      R(j, j) = h;
    }
    const double xny = ss / (1.0 + cc);
    for (int k = j + 1; k < iq; ++k) {
      const double t1 = R(j, k);
      const double t2 = R(j + 1, k);
      R(j, k) = t1 * cc + t2 * ss;
      R(j + 1, k) = xny * (t1 + R(j, k)) - t2;
    }
    for (int k = 0; k < n; ++k) {
      const double t1 = J(k, j);
      const double t2 = J(k, j + 1);
      J(k, j) = t1 * cc + t2 * ss;
      J(k, j + 1) = xny * (J(k, j) + t1) - t2;
    }
  }
}

}  // namespace detail

/// Solves the QP described at the top of this header. Inequality rows are
/// rescaled to unit norm internally; rows with (numerically) zero norm are
/// treated as constant checks 0 <= b_i.
inline QpResult solve_qp(const Eigen::MatrixXd& H, const Eigen::VectorXd& f,
                         const Eigen::MatrixXd& Aeq, const Eigen::VectorXd& beq,
                         const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                         const QpOptions& opt = {}) {
  const int n = static_cast<int>(f.size());
  QpResult res;
  res.x = Eigen::VectorXd::Zero(n);
  const double inf = std::numeric_limits<double>::infinity();

  // Constraint normals in ">=" form: s_i(x) = c_i' x + c0_i >= 0.
  const int meq = static_cast<int>(Aeq.rows());
  std::vector<int> rows_kept;
  rows_kept.reserve(static_cast<std::size_t>(A.rows()));
  std::vector<double> row_scale;
  for (int i = 0; i < A.rows(); ++i) {
    const double nrm = A.row(i).norm();
    if (nrm < 1e-12) {
      if (b(i) < -opt.feasibility_tol) {
        res.status = QpStatus::Infeasible;
        return res;
      }
      continue;
    }
    rows_kept.push_back(i);
    row_scale.push_back(1.0 / nrm);
  }
  const int mi = static_cast<int>(rows_kept.size());
  Eigen::MatrixXd C(n, meq + mi);
  Eigen::VectorXd c0(meq + mi);
  for (int i = 0; i < meq; ++i) {
    C.col(i) = Aeq.row(i).transpose();
    c0(i) = -beq(i);
  }
  for (int k = 0; k < mi; ++k) {
    const int i = rows_kept[static_cast<std::size_t>(k)];
    const double s = row_scale[static_cast<std::size_t>(k)];
    C.col(meq + k) = -A.row(i).transpose() * s;
    c0(meq + k) = b(i) * s;
  }

  Eigen::LLT<Eigen::MatrixXd> llt(H);
  if (llt.info() != Eigen::Success) return res;
  // J = L^{-T}, so that J J' = H^{-1}.
  Eigen::MatrixXd J = llt.matrixU().solve(Eigen::MatrixXd::Identity(n, n));
  Eigen::MatrixXd R = Eigen::MatrixXd::Zero(n, n);
  double r_norm = 1.0;

  Eigen::VectorXd x = -llt.solve(f);
  const int mt = meq + mi;
  Eigen::VectorXd u = Eigen::VectorXd::Zero(mt + 1);
  Eigen::VectorXd r = Eigen::VectorXd::Zero(mt + 1);
  Eigen::VectorXd d(n), z(n), np(n);
  std::vector<int> active(static_cast<std::size_t>(mt + 1), 0);
  std::vector<char> in_active(static_cast<std::size_t>(mt), 0);
  int iq = 0;

  auto compute_step_dirs = [&](const Eigen::VectorXd& normal) {
    d = J.transpose() * normal;
    z = J.rightCols(n - iq) * d.tail(n - iq);
    if (iq > 0) {
      r.head(iq) = R.topLeftCorner(iq, iq)
                       .triangularView<Eigen::Upper>()
                       .solve(d.head(iq));
    }
  };

  // Equalities are added first and never dropped.
  for (int i = 0; i < meq; ++i) {
    np = C.col(i);
    compute_step_dirs(np);
    const double zn = z.dot(np);
    double t2 = 0.0;
    if (std::abs(zn) > std::numeric_limits<double>::epsilon()) {
      t2 = -(np.dot(x) + c0(i)) / zn;
    }
    x += t2 * z;
    u(iq) = t2;
    for (int k = 0; k < iq; ++k) u(k) -= t2 * r(k);
    active[static_cast<std::size_t>(iq)] = i;
    if (!detail::gi_add_constraint(R, J, d, iq, r_norm)) {
      // Dependent equality row: accept only if it is already satisfied.
      --iq;
      for (int k = 0; k < iq; ++k) R(k, iq) = 0.0;
      if (std::abs(np.dot(x) + c0(i)) > 1e-7 * (1.0 + std::abs(c0(i)))) {
        res.status = QpStatus::Infeasible;
        return res;
      }
    }
  }

  int iter = 0;
  for (;;) {
    if (++iter > opt.max_iterations) return res;
    // Step 1: most violated inequality.
    int p = -1;
    double s_min = -opt.feasibility_tol;
    for (int k = 0; k < mi; ++k) {
      const int ci = meq + k;
      if (in_active[static_cast<std::size_t>(ci)]) continue;
      const double s = C.col(ci).dot(x) + c0(ci);
      if (s < s_min) {
        s_min = s;
        p = ci;
      }
    }
    if (p < 0) break;

    np = C.col(p);
    u(iq) = 0.0;
    active[static_cast<std::size_t>(iq)] = p;
    double sp = s_min;

    for (;;) {
      if (++iter > opt.max_iterations) return res;
      compute_step_dirs(np);
      // Partial step length: first active inequality whose multiplier hits 0.
      double t1 = inf;
      int l = -1;
      for (int k = meq; k < iq; ++k) {
        if (r(k) > 0.0) {
          const double ratio = u(k) / r(k);
          if (ratio < t1) {
            t1 = ratio;
            l = active[static_cast<std::size_t>(k)];
          }
        }
      }
      const double zn = z.dot(np);
      const double t2 = (z.norm() > 1e-14) ? -sp / zn : inf;
      const double t = std::min(t1, t2);
      if (!(t < inf)) {
        res.status = QpStatus::Infeasible;
        res.iterations = iter;
        return res;
      }
      if (t2 >= inf) {
        // Dual-only step.
        for (int k = 0; k < iq; ++k) u(k) -= t * r(k);
        u(iq) += t;
        in_active[static_cast<std::size_t>(l)] = 0;
        detail::gi_delete_constraint(R, J, active, u, meq, iq, l);
        continue;
      }
      x += t * z;
      for (int k = 0; k < iq; ++k) u(k) -= t * r(k);
      u(iq) += t;
      if (t == t2) {
        if (!detail::gi_add_constraint(R, J, d, iq, r_norm)) {
          // Degenerate: drop back out; constraint is numerically satisfied.
          --iq;
          for (int k = 0; k < iq; ++k) R(k, iq) = 0.0;
          return res;
        }
        in_active[static_cast<std::size_t>(p)] = 1;
        break;
      }
      in_active[static_cast<std::size_t>(l)] = 0;
      detail::gi_delete_constraint(R, J, active, u, meq, iq, l);
      active[static_cast<std::size_t>(iq)] = p;
      sp = np.dot(x) + c0(p);
    }
  }

  res.status = QpStatus::Optimal;
  res.x = x;
  res.objective = 0.5 * x.dot(H * x) + f.dot(x);
  res.iterations = iter;
  return res;
}

/// Convenience overload without equality constraints.
inline QpResult solve_qp(const Eigen::MatrixXd& H, const Eigen::VectorXd& f,
                         const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                         const QpOptions& opt = {}) {
  const auto n = f.size();
  return solve_qp(H, f, Eigen::MatrixXd(0, n), Eigen::VectorXd(0), A, b, opt);
}

}  // namespace sando
