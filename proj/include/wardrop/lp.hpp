#pragma once

#include <vector>

#include "common.hpp"

namespace wardrop::lp {

enum class Status { optimal, infeasible, unbounded };

struct Result {
  Status status = Status::infeasible;
  Eigen::VectorXd x;
  double value = 0.0;
  std::vector<int> basis;  // columns of the final basis (original variables only)
};

/// min c.x  s.t.  A x = b, x >= 0.
///
/// Two-phase dense tableau simplex with Bland's rule. After phase II the
/// basic solution is recomputed from a direct solve of the basis system, so
/// the returned value has the accuracy of one LU solve.
inline Result solve(const Eigen::VectorXd& c, const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                    double tol = 1e-11) {
  const Eigen::Index m = A.rows(), n = A.cols();
  if (c.size() != n || b.size() != m) throw InvalidArgument("LP dimension mismatch");
  const double scale = std::max({1.0, A.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff()});

  // Tableau: m constraint rows + objective row; n original + m artificial
  // columns + rhs.
  const Eigen::Index cols = n + m + 1;
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m + 1, cols);
  std::vector<Eigen::Index> basis(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i) {
    double sgn = b[i] < 0 ? -1.0 : 1.0;
    T.row(i).head(n) = sgn * A.row(i);
    T(i, n + i) = 1.0;
    T(i, cols - 1) = sgn * b[i];
    basis[static_cast<std::size_t>(i)] = n + i;
  }

  auto pivot = [&](Eigen::Index r, Eigen::Index col) {
    T.row(r) /= T(r, col);
    for (Eigen::Index i = 0; i <= m; ++i)
      if (i != r && T(i, col) != 0.0) T.row(i) -= T(i, col) * T.row(r);
    basis[static_cast<std::size_t>(r)] = col;
  };

  // Runs simplex on the objective currently in row m over columns [0, ncols).
  auto run = [&](Eigen::Index ncols) -> bool {
    for (int iter = 0; iter < 100000; ++iter) {
      Eigen::Index enter = -1;
      for (Eigen::Index j = 0; j < ncols; ++j)
        if (T(m, j) < -tol * scale) {
          enter = j;
          break;
        }
      if (enter < 0) return true;
      Eigen::Index leave = -1;
      double best = kInfinity;
      for (Eigen::Index i = 0; i < m; ++i) {
        if (T(i, enter) > tol) {
          double ratio = T(i, cols - 1) / T(i, enter);
          if (ratio < best - tol ||
              (std::abs(ratio - best) <= tol && leave >= 0 &&
               basis[static_cast<std::size_t>(i)] < basis[static_cast<std::size_t>(leave)])) {
            best = ratio;
            leave = i;
          }
        }
      }
      if (leave < 0) return false;
      pivot(leave, enter);
    }
    throw Error("simplex iteration limit");
  };

  // Phase I: minimize the sum of artificials.
  T.row(m).setZero();
  for (Eigen::Index i = 0; i < m; ++i) T.row(m) -= T.row(i);
  for (Eigen::Index i = 0; i < m; ++i) T(m, n + i) = 0.0;
  run(n + m);
  Result res;
  if (-T(m, cols - 1) > 1e-9 * scale) {
    res.status = Status::infeasible;
    return res;
  }
  // Drive remaining artificials out of the basis; drop redundant rows.
  std::vector<bool> redundant(static_cast<std::size_t>(m), false);
  for (Eigen::Index i = 0; i < m; ++i) {
    if (basis[static_cast<std::size_t>(i)] < n) continue;
    Eigen::Index col = -1;
    for (Eigen::Index j = 0; j < n; ++j)
      if (std::abs(T(i, j)) > tol * scale) {
        col = j;
        break;
      }
    if (col >= 0)
      pivot(i, col);
    else
      redundant[static_cast<std::size_t>(i)] = true;
  }

  // Phase II objective in reduced form.
  T.row(m).setZero();
  T.row(m).head(n) = c.transpose();
  for (Eigen::Index i = 0; i < m; ++i) {
    if (redundant[static_cast<std::size_t>(i)]) continue;
    Eigen::Index bj = basis[static_cast<std::size_t>(i)];
    if (T(m, bj) != 0.0) T.row(m) -= T(m, bj) * T.row(i);
  }
  for (Eigen::Index i = 0; i < m; ++i)
    if (redundant[static_cast<std::size_t>(i)]) T.row(i).setZero();
  if (!run(n)) {
    res.status = Status::unbounded;
    return res;
  }

  // Polish: direct solve on the optimal basis.
  std::vector<Eigen::Index> rows, bcols;
  for (Eigen::Index i = 0; i < m; ++i) {
    if (redundant[static_cast<std::size_t>(i)]) continue;
    rows.push_back(i);
    bcols.push_back(basis[static_cast<std::size_t>(i)]);
  }
  res.x = Eigen::VectorXd::Zero(n);
  if (!rows.empty()) {
    const auto k = static_cast<Eigen::Index>(rows.size());
    Eigen::MatrixXd B(k, k);
    Eigen::VectorXd rhs(k);
    for (Eigen::Index r = 0; r < k; ++r) {
      for (Eigen::Index j = 0; j < k; ++j) B(r, j) = A(rows[static_cast<std::size_t>(r)], bcols[static_cast<std::size_t>(j)]);
      rhs[r] = b[rows[static_cast<std::size_t>(r)]];
    }
    Eigen::VectorXd xb = B.fullPivLu().solve(rhs);
    for (Eigen::Index j = 0; j < k; ++j) {
      res.x[bcols[static_cast<std::size_t>(j)]] = std::max(0.0, xb[j]);
      res.basis.push_back(static_cast<int>(bcols[static_cast<std::size_t>(j)]));
    }
  }
  res.value = c.dot(res.x);
  res.status = Status::optimal;
  return res;
}

}  // namespace wardrop::lp
