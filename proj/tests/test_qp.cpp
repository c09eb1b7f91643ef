#include "sando/qp.hpp"

#include <gtest/gtest.h>

#include <functional>
#include <random>

using namespace sando;

TEST(Qp, UnconstrainedMinimum) {
  const Eigen::MatrixXd H = Eigen::MatrixXd::Identity(2, 2);
  const Eigen::VectorXd f = -Eigen::Vector2d(1, 2);
  const auto r = solve_qp(H, f, Eigen::MatrixXd(0, 2), Eigen::VectorXd(0));
  ASSERT_TRUE(r.ok());
  EXPECT_NEAR(r.x(0), 1.0, 1e-12);
  EXPECT_NEAR(r.x(1), 2.0, 1e-12);
}

TEST(Qp, SingleActiveBound) {
  const Eigen::MatrixXd H = Eigen::MatrixXd::Identity(2, 2);
  const Eigen::VectorXd f = Eigen::VectorXd::Zero(2);
  Eigen::MatrixXd A(1, 2);
  A << 1, 0;
  Eigen::VectorXd b(1);
  b << -1;
  const auto r = solve_qp(H, f, A, b);
  ASSERT_TRUE(r.ok());
  EXPECT_NEAR(r.x(0), -1.0, 1e-12);
  EXPECT_NEAR(r.x(1), 0.0, 1e-12);
  EXPECT_NEAR(r.objective, 0.5, 1e-12);
}

TEST(Qp, InfeasibleBoxIsReported) {
  const Eigen::MatrixXd H = Eigen::MatrixXd::Identity(1, 1);
  Eigen::MatrixXd A(2, 1);
  A << 1, -1;
  Eigen::VectorXd b(2);
  b << -1, -1;  // x <= -1 and x >= 1
  EXPECT_EQ(solve_qp(H, Eigen::VectorXd::Zero(1), A, b).status, QpStatus::Infeasible);
}

TEST(Qp, EqualityConstrained) {
  const Eigen::MatrixXd H = Eigen::MatrixXd::Identity(3, 3);
  Eigen::MatrixXd Aeq(1, 3);
  Aeq << 1, 1, 1;
  Eigen::VectorXd beq(1);
  beq << 3;
  const auto r = solve_qp(H, Eigen::VectorXd::Zero(3), Aeq, beq, Eigen::MatrixXd(0, 3), Eigen::VectorXd(0));
  ASSERT_TRUE(r.ok());
  EXPECT_NEAR((r.x - Eigen::Vector3d::Ones()).norm(), 0.0, 1e-12);
}

TEST(Qp, ZeroRowIsAConstantCheck) {
  const Eigen::MatrixXd H = Eigen::MatrixXd::Identity(1, 1);
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(1, 1);
  Eigen::VectorXd b(1);
  b << -1.0;  // 0 <= -1
  EXPECT_EQ(solve_qp(H, Eigen::VectorXd::Zero(1), A, b).status, QpStatus::Infeasible);
  b << 1.0;
  EXPECT_TRUE(solve_qp(H, Eigen::VectorXd::Zero(1), A, b).ok());
}

namespace {

// Best KKT point over every active set of size <= n.
double enumerate_active_sets(const Eigen::MatrixXd& H, const Eigen::VectorXd& f, const Eigen::MatrixXd& A,
                             const Eigen::VectorXd& b) {
  const int n = static_cast<int>(f.size());
  const int m = static_cast<int>(b.size());
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> S;
  std::function<void(int)> rec = [&](int from) {
    const int k = static_cast<int>(S.size());
    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + k, n + k);
    Eigen::VectorXd rhs(n + k);
    K.topLeftCorner(n, n) = H;
    rhs.head(n) = -f;
    for (int i = 0; i < k; ++i) {
      K.block(n + i, 0, 1, n) = A.row(S[static_cast<std::size_t>(i)]);
      K.block(0, n + i, n, 1) = A.row(S[static_cast<std::size_t>(i)]).transpose();
      rhs(n + i) = b(S[static_cast<std::size_t>(i)]);
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(K);
    if (lu.isInvertible()) {
      const Eigen::VectorXd sol = lu.solve(rhs);
      const Eigen::VectorXd x = sol.head(n);
      const bool primal = ((A * x - b).array() <= 1e-9).all();
      const bool dual = k == 0 || (sol.tail(k).array() >= -1e-9).all();
      if (primal && dual) best = std::min(best, 0.5 * x.dot(H * x) + f.dot(x));
    }
    if (k == n) return;
    for (int i = from; i < m; ++i) {
      S.push_back(i);
      rec(i + 1);
      S.pop_back();
    }
  };
  rec(0);
  return best;
}

}  // namespace

TEST(Qp, MatchesActiveSetEnumeration) {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 2 + trial % 5;
    const int m = 1 + (trial * 7) % 20;
    Eigen::MatrixXd L = Eigen::MatrixXd::NullaryExpr(n, n, [&] { return u(rng); });
    const Eigen::MatrixXd H = L * L.transpose() + 0.1 * Eigen::MatrixXd::Identity(n, n);
    const Eigen::VectorXd f = Eigen::VectorXd::NullaryExpr(n, [&] { return 3.0 * u(rng); });
    const Eigen::MatrixXd A = Eigen::MatrixXd::NullaryExpr(m, n, [&] { return u(rng); });
    const Eigen::VectorXd x0 = Eigen::VectorXd::NullaryExpr(n, [&] { return u(rng); });
    const Eigen::VectorXd b = A * x0 + Eigen::VectorXd::NullaryExpr(m, [&] { return 0.5 * (u(rng) + 1.0); });
    const auto r = solve_qp(H, f, A, b);
    ASSERT_TRUE(r.ok()) << "trial " << trial;
    EXPECT_NEAR(r.objective, enumerate_active_sets(H, f, A, b), 1e-6) << "trial " << trial;
    EXPECT_LE((A * r.x - b).maxCoeff(), 1e-9);
  }
}
