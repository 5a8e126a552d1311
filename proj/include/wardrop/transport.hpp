#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "common.hpp"

namespace wardrop {

/// Optimal solution of a balanced transportation problem.
struct TransportSolution {
  Eigen::MatrixXd flow;  // rows: supplies, cols: demands
  double value = 0.0;
  Eigen::VectorXd u, v;  // duals with u_i + v_j <= c_ij, equality on the basis
  int pivots = 0;
};

namespace detail {

// Basic cells of a transportation tableau form a spanning tree on the
// bipartite graph rows + columns. Node ids: row i -> i, column j -> m + j.
class TransportTree {
 public:
  TransportTree(int m, int n) : m_(m), n_(n), adj_(static_cast<std::size_t>(m + n)) {}

  void add(int i, int j) {
    adj_[static_cast<std::size_t>(i)].push_back(m_ + j);
    adj_[static_cast<std::size_t>(m_ + j)].push_back(i);
  }
  void remove(int i, int j) {
    auto drop = [](std::vector<int>& v, int x) { v.erase(std::find(v.begin(), v.end(), x)); };
    drop(adj_[static_cast<std::size_t>(i)], m_ + j);
    drop(adj_[static_cast<std::size_t>(m_ + j)], i);
  }

  // Tree path from row i to column j as a node list.
  std::vector<int> path(int i, int j) const {
    const int target = m_ + j;
    std::vector<int> parent(static_cast<std::size_t>(m_ + n_), -2);
    std::vector<int> stack{i};
    parent[static_cast<std::size_t>(i)] = -1;
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      if (u == target) break;
      for (int w : adj_[static_cast<std::size_t>(u)])
        if (parent[static_cast<std::size_t>(w)] == -2) {
          parent[static_cast<std::size_t>(w)] = u;
          stack.push_back(w);
        }
    }
    if (parent[static_cast<std::size_t>(target)] == -2) throw Error("transportation basis is not a spanning tree");
    std::vector<int> out;
    for (int u = target; u != -1; u = parent[static_cast<std::size_t>(u)]) out.push_back(u);
    std::reverse(out.begin(), out.end());
    return out;
  }

  // Potentials with u_0 = 0 and u_i + v_j = c_ij on tree cells.
  void potentials(const Eigen::MatrixXd& c, Eigen::VectorXd& u, Eigen::VectorXd& v) const {
    u.setZero(m_);
    v.setZero(n_);
    std::vector<char> done(static_cast<std::size_t>(m_ + n_), 0);
    std::vector<int> stack{0};
    done[0] = 1;
    while (!stack.empty()) {
      int a = stack.back();
      stack.pop_back();
      for (int b : adj_[static_cast<std::size_t>(a)]) {
        if (done[static_cast<std::size_t>(b)]) continue;
        done[static_cast<std::size_t>(b)] = 1;
        if (a < m_)
          v[b - m_] = c(a, b - m_) - u[a];
        else
          u[b] = c(b, a - m_) - v[a - m_];
        stack.push_back(b);
      }
    }
  }

 private:
  int m_, n_;
  std::vector<std::vector<int>> adj_;
};

}  // namespace detail

/// Transportation simplex (u-v method) started from the northwest corner
/// rule. Entering cell: most negative reduced cost, ties to the lowest
/// row-major index; leaving cell: smallest flow on the cycle, ties to the
/// lowest index. After a run of degenerate pivots the entering rule switches
/// to Bland's first-negative rule, which cannot cycle.
///
/// Infinite costs mark forbidden cells; an InfeasibleError is thrown when the
/// marginals cannot be matched without them.
inline TransportSolution solve_transport(const Eigen::MatrixXd& cost, const Eigen::VectorXd& supply,
                                         const Eigen::VectorXd& demand) {
  const int m = static_cast<int>(cost.rows());
  const int n = static_cast<int>(cost.cols());
  if (supply.size() != m || demand.size() != n) throw InvalidArgument("transport marginals do not match costs");
  if (m == 0 || n == 0) throw InvalidArgument("empty transportation problem");
  if ((supply.array() < 0).any() || (demand.array() < 0).any())
    throw InvalidArgument("transport marginals must be nonnegative");
  const double total = supply.sum();
  if (std::abs(total - demand.sum()) > 1e-12 * std::max(1.0, total))
    throw InvalidArgument("transport marginals are not balanced");

  double cmax = 0.0;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      if (std::isnan(cost(i, j)) || cost(i, j) < 0) throw InvalidArgument("transport costs must be nonnegative");
      if (std::isfinite(cost(i, j))) cmax = std::max(cmax, cost(i, j));
    }
  const double big = (1.0 + cmax) * 1e6;
  Eigen::MatrixXd c = cost.unaryExpr([big](double x) { return std::isfinite(x) ? x : big; });

  // Northwest corner start; degenerate zeros keep m + n - 1 basic cells.
  TransportSolution sol;
  sol.flow.setZero(m, n);
  std::vector<std::vector<char>> basic(static_cast<std::size_t>(m), std::vector<char>(static_cast<std::size_t>(n), 0));
  detail::TransportTree tree(m, n);
  {
    Eigen::VectorXd a = supply, b = demand;
    int i = 0, j = 0;
    while (i < m && j < n) {
      const double x = std::min(a[i], b[j]);
      sol.flow(i, j) = x;
      basic[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = 1;
      tree.add(i, j);
      a[i] -= x;
      b[j] -= x;
      if (i == m - 1 && j == n - 1) break;
      if ((a[i] <= b[j] && i < m - 1) || j == n - 1)
        ++i;
      else
        ++j;
    }
  }

  const double tol = 1e-12 * std::max(1.0, c.cwiseAbs().maxCoeff());
  int degenerate_run = 0;
  const int cap = 50 * (m + n) * (m + n) + 1000;
  for (;; ++sol.pivots) {
    if (sol.pivots > cap) throw Error("transportation simplex did not terminate");
    tree.potentials(c, sol.u, sol.v);
    const bool bland = degenerate_run > m + n;
    int ei = -1, ej = -1;
    double best = -tol;
    for (int i = 0; i < m && !(bland && ei >= 0); ++i)
      for (int j = 0; j < n; ++j) {
        if (basic[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]) continue;
        const double r = c(i, j) - sol.u[i] - sol.v[j];
        if (r < best) {
          best = bland ? -tol : r;
          ei = i;
          ej = j;
          if (bland) break;
        }
      }
    if (ei < 0) break;

    // Cycle: entering cell, then alternating tree cells from column ej back to row ei.
    auto nodes = tree.path(ei, ej);  // row ei, col, row, ..., col ej
    std::vector<std::pair<int, int>> cells;
    for (std::size_t k = 0; k + 1 < nodes.size(); ++k) {
      const int a = nodes[k], b = nodes[k + 1];
      cells.emplace_back(a < m ? a : b, a < m ? b - m : a - m);
    }
    // Cells on the path alternate starting with a "minus" cell at row ei.
    int li = -1, lj = -1;
    double theta = kInfinity;
    for (std::size_t k = 0; k < cells.size(); k += 2) {
      const auto [i, j] = cells[k];
      const double x = sol.flow(i, j);
      if (x < theta || (x == theta && i * n + j < li * n + lj)) {
        theta = x;
        li = i;
        lj = j;
      }
    }
    degenerate_run = theta > 0 ? 0 : degenerate_run + 1;
    sol.flow(ei, ej) += theta;
    for (std::size_t k = 0; k < cells.size(); ++k) {
      const auto [i, j] = cells[k];
      sol.flow(i, j) += (k % 2 == 0 ? -theta : theta);
    }
    sol.flow(li, lj) = 0.0;
    basic[static_cast<std::size_t>(ei)][static_cast<std::size_t>(ej)] = 1;
    basic[static_cast<std::size_t>(li)][static_cast<std::size_t>(lj)] = 0;
    tree.add(ei, ej);
    tree.remove(li, lj);
  }

  sol.value = 0.0;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      if (sol.flow(i, j) < 0) sol.flow(i, j) = 0.0;
      if (sol.flow(i, j) > 0) {
        if (!std::isfinite(cost(i, j))) throw InfeasibleError("marginals cannot be matched along finite costs");
        sol.value += sol.flow(i, j) * cost(i, j);
      }
    }
  return sol;
}

}  // namespace wardrop
