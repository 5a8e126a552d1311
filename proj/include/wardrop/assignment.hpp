#pragma once

#include <map>
#include <numeric>
#include <utility>
#include <vector>

#include <Eigen/SparseCholesky>

#include "congestion.hpp"
#include "network.hpp"
#include "shortest_path.hpp"

namespace wardrop {

using OdPair = std::pair<int, int>;

/// Origin-destination masses gamma(x, y) >= 0 on network nodes.
class TransportPlan {
 public:
  TransportPlan() = default;

  /// Adds mass to (x, y); repeated entries accumulate.
  void add(int x, int y, double mass) {
    if (!(mass >= 0)) throw InvalidArgument("transport masses must be nonnegative");
    entries_[{x, y}] += mass;
  }
  double at(int x, int y) const {
    auto it = entries_.find({x, y});
    return it == entries_.end() ? 0.0 : it->second;
  }
  const std::map<OdPair, double>& entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }
  double total() const {
    double s = 0.0;
    for (const auto& [od, m] : entries_) s += m;
    return s;
  }
  TransportPlan scaled(double c) const {
    TransportPlan p;
    for (const auto& [od, m] : entries_) p.add(od.first, od.second, c * m);
    return p;
  }
  void validate(const Network& net) const {
    for (const auto& [od, m] : entries_)
      if (od.first < 0 || od.first >= net.num_nodes() || od.second < 0 || od.second >= net.num_nodes())
        throw InvalidArgument("transport plan refers to a missing node");
  }

 private:
  std::map<OdPair, double> entries_;
};

struct PathFlow {
  int source = 0;
  int sink = 0;
  std::vector<int> nodes;
  std::vector<int> arcs;
  double flow = 0.0;
};

struct FlowState {
  std::vector<double> arc_masses;
  std::vector<PathFlow> paths;

  /// (x, y) -> indices into `paths`.
  std::map<OdPair, std::vector<int>> od_index() const {
    std::map<OdPair, std::vector<int>> idx;
    for (int i = 0; i < static_cast<int>(paths.size()); ++i)
      idx[{paths[static_cast<std::size_t>(i)].source, paths[static_cast<std::size_t>(i)].sink}].push_back(i);
    return idx;
  }
};

/// Arc masses induced by path flows.
inline std::vector<double> masses_from_paths(int num_arcs, const std::vector<PathFlow>& paths) {
  std::vector<double> m(static_cast<std::size_t>(num_arcs), 0.0);
  for (const auto& p : paths)
    for (int a : p.arcs) m[static_cast<std::size_t>(a)] += p.flow;
  return m;
}

inline std::vector<double> arc_times(const CongestionModel& model, const Network& net,
                                     const std::vector<double>& masses) {
  if (static_cast<int>(masses.size()) != net.num_arcs()) throw InvalidArgument("one mass per arc required");
  std::vector<double> t(masses.size());
  for (int a = 0; a < net.num_arcs(); ++a)
    t[static_cast<std::size_t>(a)] = arc_time(model, net, a, masses[static_cast<std::size_t>(a)]);
  return t;
}

/// Beckmann objective sum over arcs of G^eps(m).
inline double beckmann_objective(const CongestionModel& model, const Network& net,
                                 const std::vector<double>& masses) {
  double s = 0.0;
  for (int a = 0; a < net.num_arcs(); ++a) s += arc_cost(model, net, a, masses[static_cast<std::size_t>(a)]);
  return s;
}

inline double path_time(const std::vector<double>& times, const std::vector<int>& arcs) {
  double s = 0.0;
  for (int a : arcs) s += times[static_cast<std::size_t>(a)];
  return s;
}

/// Shortest times T(x, y) for every pair of the plan (one reverse search per sink).
inline std::map<OdPair, double> od_shortest_times(const Network& net, const std::vector<double>& times,
                                                  const TransportPlan& plan) {
  std::map<OdPair, double> out;
  std::map<int, std::vector<int>> by_sink;
  for (const auto& [od, m] : plan.entries()) by_sink[od.second].push_back(od.first);
  for (const auto& [y, sources] : by_sink) {
    auto tree = shortest_path_to(net, times, y);
    for (int x : sources) out[{x, y}] = tree.dist[static_cast<std::size_t>(x)];
  }
  return out;
}

/// Loads every positive OD mass on its lexicographically smallest shortest path.
inline FlowState all_or_nothing(const Network& net, const TransportPlan& plan, const std::vector<double>& times) {
  plan.validate(net);
  FlowState f;
  std::map<int, std::vector<int>> by_sink;
  for (const auto& [od, m] : plan.entries())
    if (m > 0) by_sink[od.second].push_back(od.first);
  std::map<OdPair, PathFlow> loaded;
  for (const auto& [y, sources] : by_sink) {
    auto tree = shortest_path_to(net, times, y);
    for (int x : sources) {
      PathFlow p;
      p.source = x;
      p.sink = y;
      p.arcs = lexicographic_path(net, times, tree, x);
      p.nodes = path_nodes(net, x, p.arcs);
      p.flow = plan.at(x, y);
      loaded.emplace(OdPair{x, y}, std::move(p));
    }
  }
  for (auto& [od, p] : loaded) f.paths.push_back(std::move(p));
  f.arc_masses = masses_from_paths(net.num_arcs(), f.paths);
  return f;
}

struct BeckmannOptions {
  int max_iters = 5000;
  double rel_gap_tol = 1e-6;
};

struct BeckmannResult {
  FlowState flow;
  int iterations = 0;
  double rel_gap = 0.0;
  std::vector<double> objective_history;
  std::vector<double> gap_history;
};

class IterationLimitError : public Error {
 public:
  explicit IterationLimitError(BeckmannResult best)
      : Error("iteration limit reached with relative gap " + std::to_string(best.rel_gap)),
        best_(std::move(best)) {}
  const BeckmannResult& best() const { return best_; }

 private:
  BeckmannResult best_;
};

namespace detail {

// Convex single-commodity flow
//   min sum_a G_a(mb_a + x_a)  s.t.  out(v) - in(v) = supply(v), x >= 0
// for a fixed background mass mb, solved by Newton's method on node
// potentials T (arrival times). Given T an arc carries
// x_a = t_a^{-1}(T_head - T_tail) - mb_a when positive, so the optimality
// conditions are the node balances. The concave dual is maximized with a
// backtracking line search; each step solves a weighted graph Laplacian.
struct CommodityFlow {
  std::vector<double> x;
  std::vector<double> T;
  double residual = 0.0;  // max node imbalance
  int newton_steps = 0;
};

class PotentialSolver {
 public:
  PotentialSolver(const Network& net, const CongestionModel& model) : net_(net), model_(model) {}

  CommodityFlow solve(const std::vector<double>& mb, const std::vector<double>& supply, int ground,
                      std::vector<double> T, double tol, int max_steps = 100) {
    const int n = net_.num_nodes();
    const auto A = static_cast<std::size_t>(net_.num_arcs());
    prepare(ground);
    std::vector<double> t0(A), g0(A);
    idle_.assign(A, 0.0);
    double scale = 0.0;
    for (double v : supply) scale += std::abs(v);
    for (std::size_t a = 0; a < A; ++a) {
      t0[a] = arc_time(model_, net_, static_cast<int>(a), mb[a]);
      g0[a] = arc_cost(model_, net_, static_cast<int>(a), mb[a]);
      const double d = arc_time_derivative(model_, net_, static_cast<int>(a), std::max(mb[a], 1e-3 * scale));
      idle_[a] = std::isfinite(d) && d > 0 ? 1.0 / d : 0.0;
    }
    CommodityFlow out;
    out.x.assign(A, 0.0);
    std::vector<double> w(A, 0.0), r(static_cast<std::size_t>(n), 0.0);

    // Flows, Laplacian weights and node imbalances at T; returns the dual value.
    auto evaluate = [&](const std::vector<double>& Tv, std::vector<double>& x, bool weights) {
      double q = 0.0;
      std::fill(r.begin(), r.end(), 0.0);
      for (std::size_t a = 0; a < A; ++a) {
        const auto& arc = net_.arc(static_cast<int>(a));
        const double s = Tv[static_cast<std::size_t>(arc.head)] - Tv[static_cast<std::size_t>(arc.tail)];
        double xa = 0.0, wa = 0.0;
        if (weights) wa = idle_[a] * mu_ * lam_;
        if (s > t0[a]) {
          const double y = arc_mass_for_time(model_, net_, static_cast<int>(a), s);
          xa = std::max(0.0, y - mb[a]);
          if (weights && xa > 0) {
            const double d = arc_time_derivative(model_, net_, static_cast<int>(a), y);
            wa = std::isfinite(d) ? (d > 0 ? 1.0 / d : 1e300) : idle_[a];
          }
          q -= arc_conjugate(model_, net_, static_cast<int>(a), s) - s * mb[a] + g0[a];
        }
        x[a] = xa;
        if (weights) w[a] = wa;
        r[static_cast<std::size_t>(arc.tail)] += xa;
        r[static_cast<std::size_t>(arc.head)] -= xa;
      }
      double res = 0.0;
      for (int v = 0; v < n; ++v) {
        r[static_cast<std::size_t>(v)] -= supply[static_cast<std::size_t>(v)];
        q -= Tv[static_cast<std::size_t>(v)] * supply[static_cast<std::size_t>(v)];
        if (v != ground) res = std::max(res, std::abs(r[static_cast<std::size_t>(v)]));
      }
      return std::make_pair(q, res);
    };

    mu_ = 1.0;
    lam_ = 1.0;
    auto [q, res] = evaluate(T, out.x, false);
    mu_ = std::min(1.0, res / scale);
    std::tie(q, res) = evaluate(T, out.x, true);
    std::vector<double> trial(T.size()), xt(A);
    Eigen::VectorXd rhs(n - 1), dT;
    for (int step = 0; step < max_steps && res > tol; ++step) {
      // Weighted Laplacian with the ground node removed.
      double wmax = 0.0;
      for (double v : w) wmax = std::max(wmax, std::min(v, 1e300));
      const double reg = wmax > 0 ? 1e-12 * wmax : 1.0;
      std::vector<Eigen::Triplet<double>> trip;
      trip.reserve(4 * A + static_cast<std::size_t>(n));
      for (std::size_t a = 0; a < A; ++a) {
        const int i = idx_[static_cast<std::size_t>(net_.arc(static_cast<int>(a)).tail)];
        const int j = idx_[static_cast<std::size_t>(net_.arc(static_cast<int>(a)).head)];
        const double wa = std::min(w[a], 1e12 * std::max(wmax, 1.0));
        if (i >= 0) trip.emplace_back(i, i, wa);
        if (j >= 0) trip.emplace_back(j, j, wa);
        if (i >= 0 && j >= 0) {
          trip.emplace_back(i, j, -wa);
          trip.emplace_back(j, i, -wa);
        }
      }
      for (int i = 0; i < n - 1; ++i) trip.emplace_back(i, i, reg);
      Eigen::SparseMatrix<double> L(n - 1, n - 1);
      L.setFromTriplets(trip.begin(), trip.end());
      if (!analyzed_) {
        ldlt_.analyzePattern(L);
        analyzed_ = true;
      }
      ldlt_.factorize(L);
      if (ldlt_.info() != Eigen::Success) throw Error("potential system factorization failed");
      for (int v = 0; v < n; ++v)
        if (idx_[static_cast<std::size_t>(v)] >= 0) rhs[idx_[static_cast<std::size_t>(v)]] = r[static_cast<std::size_t>(v)];
      dT = ldlt_.solve(rhs);
      const double slope = rhs.dot(dT);

      double alpha = 1.0;
      bool accepted = false;
      for (int ls = 0; ls < 60; ++ls, alpha *= 0.5) {
        for (int v = 0; v < n; ++v) {
          const int i = idx_[static_cast<std::size_t>(v)];
          trial[static_cast<std::size_t>(v)] = T[static_cast<std::size_t>(v)] + (i >= 0 ? alpha * dT[i] : 0.0);
        }
        auto [qt, rt] = evaluate(trial, xt, false);
        if (qt >= q + 1e-4 * alpha * slope || (rt < 0.5 * res && qt >= q - 1e-13 * std::abs(q))) {
          accepted = true;
          break;
        }
      }
      if (!accepted) break;
      const double prev = res;
      T.swap(trial);
      mu_ = std::min(1.0, res / scale);
      std::tie(q, res) = evaluate(T, out.x, false);
      mu_ = std::min(1.0, res / scale);
      // Full steps that barely reduce the residual mean the idle arcs are too
      // stiff to reach their kinks; backtracking means they are too soft.
      if (alpha == 1.0 && res > 0.5 * prev)
        lam_ = std::max(lam_ * 0.1, 1e-12);
      else if (alpha < 0.25)
        lam_ = std::min(lam_ * 10.0, 1.0);
      std::tie(q, res) = evaluate(T, out.x, true);
      out.newton_steps = step + 1;
    }
    out.T = std::move(T);
    out.residual = res;
    return out;
  }

 private:
  void prepare(int ground) {
    if (ground == ground_) return;
    ground_ = ground;
    analyzed_ = false;
    idx_.assign(static_cast<std::size_t>(net_.num_nodes()), -1);
    int k = 0;
    for (int v = 0; v < net_.num_nodes(); ++v)
      if (v != ground) idx_[static_cast<std::size_t>(v)] = k++;
  }

  const Network& net_;
  const CongestionModel& model_;
  int ground_ = -1;
  bool analyzed_ = false;
  std::vector<int> idx_;
  std::vector<double> idle_;
  double mu_ = 1.0;
  double lam_ = 1.0;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt_;
};

// Origin-based acyclic subnetwork carrying one origin's flow.
struct Bush {
  int origin;
  std::vector<std::pair<int, double>> dests;
  double demand = 0.0;
  std::vector<double> x;
  std::vector<char> in;
  bool newton = false;    // solved exactly on node potentials while that converges
  int misses = 0;         // consecutive exact solves that did not converge
  std::vector<double> T;  // potentials of the last exact solve
};

class BushSolver {
 public:
  BushSolver(const Network& net, const CongestionModel& model)
      : net_(net), model_(model), A_(static_cast<std::size_t>(net.num_arcs())), N_(static_cast<std::size_t>(net.num_nodes())) {
    m_.assign(A_, 0.0);
    t_.assign(A_, 0.0);
    dt_.assign(A_, 0.0);
    for (std::size_t a = 0; a < A_; ++a) update(a);
    for (auto* v : {&U_, &L_}) v->resize(N_);
    for (auto* v : {&pu_, &pl_, &pos_, &deg_}) v->resize(N_);
  }

  std::vector<double>& masses() { return m_; }
  const std::vector<double>& times() const { return t_; }

  void refresh(const std::vector<Bush>& bushes) {
    std::fill(m_.begin(), m_.end(), 0.0);
    for (const auto& b : bushes)
      for (std::size_t a = 0; a < A_; ++a) m_[a] += b.x[a];
    for (std::size_t a = 0; a < A_; ++a) update(a);
  }

  void load(Bush& b) {
    auto tree = shortest_path(net_, t_, b.origin);
    b.x.assign(A_, 0.0);
    b.in.assign(A_, 0);
    for (std::size_t v = 0; v < N_; ++v)
      if (tree.pred_arc[v] >= 0) b.in[static_cast<std::size_t>(tree.pred_arc[v])] = 1;
    for (const auto& [y, g] : b.dests) {
      if (!(tree.dist[static_cast<std::size_t>(y)] < kInfinity)) throw UnreachableError(b.origin, y);
      for (int a : tree_path(net_, tree, y)) shift_arc(b, static_cast<std::size_t>(a), g);
    }
  }

  // Replaces the origin's flow by `x` (an acyclic flow from the origin) and
  // rebuilds the bush from its support, extended to every reachable node by
  // breadth-first search so that no cycle can form.
  void adopt(Bush& b, const std::vector<double>& x) {
    for (std::size_t a = 0; a < A_; ++a)
      if (x[a] != b.x[a]) shift_arc(b, a, x[a] - b.x[a]);
    for (std::size_t a = 0; a < A_; ++a) b.in[a] = b.x[a] > 0.0;
    topo(b);
    std::vector<char> seen(N_, 0);
    for (int v : order_) seen[static_cast<std::size_t>(v)] = 1;
    std::vector<int> queue(order_.begin(), order_.end());
    for (std::size_t k = 0; k < queue.size(); ++k)
      for (int a : net_.out_arcs(queue[k])) {
        const auto h = static_cast<std::size_t>(net_.arc(a).head);
        if (seen[h]) continue;
        seen[h] = 1;
        b.in[static_cast<std::size_t>(a)] = 1;
        queue.push_back(static_cast<int>(h));
      }
  }

  // Exact line search along the change of the exactly solved origins over the
  // last sweep. Block sweeps on strongly coupled origins zigzag along a
  // nearly fixed direction; continuing along it removes most of that error.
  void extrapolate(std::vector<Bush>& bushes, const std::vector<std::vector<double>>& before) {
    std::vector<double> D(A_, 0.0);
    double cap = 1e3;
    bool any = false;
    for (std::size_t k = 0; k < bushes.size(); ++k) {
      const auto& b = bushes[k];
      if (!b.newton || before[k].size() != A_) continue;
      any = true;
      for (std::size_t a = 0; a < A_; ++a) {
        const double d = b.x[a] - before[k][a];
        D[a] += d;
        if (d < 0) cap = std::min(cap, -b.x[a] / d);
      }
    }
    if (!any || !(cap > 0)) return;
    auto slope = [&](double al) {
      double s = 0.0;
      for (std::size_t a = 0; a < A_; ++a)
        if (D[a] != 0.0) s += time(a, m_[a] + al * D[a]) * D[a];
      return s;
    };
    if (!(slope(0.0) < 0)) return;
    double lo = 0.0, hi = cap, al = cap;
    if (slope(cap) < 0) {
      al = cap;
    } else {
      for (int it = 0; it < 60; ++it) {
        al = 0.5 * (lo + hi);
        (slope(al) < 0 ? lo : hi) = al;
      }
      al = lo;
    }
    for (std::size_t k = 0; k < bushes.size(); ++k) {
      auto& b = bushes[k];
      if (!b.newton || before[k].size() != A_) continue;
      std::vector<double> x(A_);
      for (std::size_t a = 0; a < A_; ++a) x[a] = std::max(0.0, b.x[a] + al * (b.x[a] - before[k][a]));
      adopt(b, x);
    }
  }

  // Shortest times from the origin under the current times; unreachable
  // nodes get the largest finite label.
  std::vector<double> potentials(int origin) const {
    auto T = shortest_path(net_, t_, origin).dist;
    double top = 0.0;
    for (double v : T)
      if (v < kInfinity) top = std::max(top, v);
    for (double& v : T)
      if (!(v < kInfinity)) v = top;
    return T;
  }

  // One bush update followed by up to `passes` equilibration sweeps.
  // Flows below `crumb_` are rounding leftovers of earlier shifts and are
  // dropped with their arcs. New arcs must strictly raise the longest-path
  // label L, which keeps the bush acyclic since L never decreases along it.
  void improve(Bush& b, int passes, double rel_tol) {
    topo(b);
    labels(b, false);
    crumb_ = 1e-12 * b.demand;
    for (std::size_t a = 0; a < A_; ++a)
      if (b.in[a] && b.x[a] <= crumb_ && pu_[static_cast<std::size_t>(net_.arc(static_cast<int>(a)).head)] != static_cast<int>(a)) {
        if (b.x[a] != 0.0) shift_arc(b, a, -b.x[a]);
        b.in[a] = 0;
      }
    topo(b);
    labels(b, false);
    for (std::size_t a = 0; a < A_; ++a) {
      if (b.in[a]) continue;
      const auto& arc = net_.arc(static_cast<int>(a));
      const auto i = static_cast<std::size_t>(arc.tail), j = static_cast<std::size_t>(arc.head);
      if (pos_[i] < 0 || pos_[j] < 0) continue;
      const double tol = 1e-13 * U_[j];
      if (L_[i] + t_[a] < L_[j] - tol || (L_[i] < L_[j] && U_[i] + t_[a] < U_[j] - tol)) b.in[a] = 1;
    }
    for (int p = 0; p < passes; ++p) {
      topo(b);
      labels(b, true);
      double worst = 0.0;
      for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
        const auto j = static_cast<std::size_t>(*it);
        if (static_cast<int>(j) == b.origin) continue;
        const double gap = L_[j] - U_[j];
        worst = std::max(worst, gap / std::max(U_[j], 1e-300));
        if (!(gap > rel_tol * U_[j])) continue;
        if (pu_[j] == pl_[j]) continue;
        equalize(b, static_cast<int>(j));
      }
      if (worst <= rel_tol) break;
    }
  }

 private:
  double time(std::size_t a, double m) const { return arc_time(model_, net_, static_cast<int>(a), std::max(m, 0.0)); }
  double dtime(std::size_t a, double m) const {
    return arc_time_derivative(model_, net_, static_cast<int>(a), std::max(m, 0.0));
  }

  void update(std::size_t a) {
    t_[a] = time(a, m_[a]);
    dt_[a] = dtime(a, m_[a]);
  }
  void shift_arc(Bush& b, std::size_t a, double d) {
    b.x[a] += d;
    m_[a] += d;
    update(a);
  }

  void topo(const Bush& b) {
    std::fill(deg_.begin(), deg_.end(), 0);
    for (std::size_t a = 0; a < A_; ++a)
      if (b.in[a]) ++deg_[static_cast<std::size_t>(net_.arc(static_cast<int>(a)).head)];
    order_.clear();
    std::fill(pos_.begin(), pos_.end(), -1);
    order_.push_back(b.origin);
    for (std::size_t k = 0; k < order_.size(); ++k) {
      const int u = order_[k];
      pos_[static_cast<std::size_t>(u)] = static_cast<int>(k);
      for (int a : net_.out_arcs(u))
        if (b.in[static_cast<std::size_t>(a)] && --deg_[static_cast<std::size_t>(net_.arc(a).head)] == 0)
          order_.push_back(net_.arc(a).head);
    }
  }

  // U: shortest times within the bush; L: longest, over used arcs only when `used`.
  void labels(const Bush& b, bool used) {
    for (int v : order_) {
      const auto j = static_cast<std::size_t>(v);
      if (v == b.origin) {
        U_[j] = L_[j] = 0.0;
        pu_[j] = pl_[j] = -1;
        continue;
      }
      double u = kInfinity, l = -kInfinity;
      int au = -1, al = -1;
      for (int a : net_.in_arcs(v)) {
        const auto as = static_cast<std::size_t>(a);
        if (!b.in[as]) continue;
        const auto i = static_cast<std::size_t>(net_.arc(a).tail);
        if (pos_[i] < 0) continue;
        if (U_[i] + t_[as] < u) { u = U_[i] + t_[as]; au = a; }
        if ((!used || b.x[as] > crumb_) && L_[i] + t_[as] > l) { l = L_[i] + t_[as]; al = a; }
      }
      U_[j] = u;
      pu_[j] = au;
      if (al < 0) { l = u; al = au; }
      L_[j] = l;
      pl_[j] = al;
    }
  }

  void equalize(Bush& b, int j) {
    seg_min_.clear();
    seg_max_.clear();
    int p = j, q = j;
    seg_min_.push_back(pu_[static_cast<std::size_t>(p)]);
    p = net_.arc(pu_[static_cast<std::size_t>(p)]).tail;
    seg_max_.push_back(pl_[static_cast<std::size_t>(q)]);
    q = net_.arc(pl_[static_cast<std::size_t>(q)]).tail;
    while (p != q) {
      if (pos_[static_cast<std::size_t>(p)] > pos_[static_cast<std::size_t>(q)]) {
        seg_min_.push_back(pu_[static_cast<std::size_t>(p)]);
        p = net_.arc(pu_[static_cast<std::size_t>(p)]).tail;
      } else {
        seg_max_.push_back(pl_[static_cast<std::size_t>(q)]);
        q = net_.arc(pl_[static_cast<std::size_t>(q)]).tail;
      }
    }
    double cap = kInfinity;
    for (int a : seg_max_) cap = std::min(cap, b.x[static_cast<std::size_t>(a)]);
    if (!(cap > crumb_)) return;
    // One Newton step on the time difference of the two segments; the exact
    // 1-d root is only needed when a derivative blows up at zero mass.
    double c = 0.0, dc = 0.0, scale = 0.0;
    for (int a : seg_max_) {
      c += t_[static_cast<std::size_t>(a)];
      dc += dt_[static_cast<std::size_t>(a)];
    }
    scale = c;
    for (int a : seg_min_) {
      c -= t_[static_cast<std::size_t>(a)];
      dc += dt_[static_cast<std::size_t>(a)];
      scale += t_[static_cast<std::size_t>(a)];
    }
    if (!(c > 0)) return;
    double d;
    if (std::isfinite(dc) && dc > 0) {
      d = std::min(cap, c / dc);
    } else {
      auto phi = [&](double v) {
        double f = 0.0;
        for (int a : seg_max_) f += time(static_cast<std::size_t>(a), m_[static_cast<std::size_t>(a)] - v);
        for (int a : seg_min_) f -= time(static_cast<std::size_t>(a), m_[static_cast<std::size_t>(a)] + v);
        return f;
      };
      if (phi(cap) >= 0) {
        d = cap;
      } else {
        double lo = 0.0, hi = cap;
        d = 0.5 * cap;
        for (int it = 0; it < 200 && hi - lo > 1e-15 * cap; ++it) {
          d = 0.5 * (lo + hi);
          const double f = phi(d);
          if (std::abs(f) <= 1e-14 * scale) break;
          (f > 0 ? lo : hi) = d;
        }
      }
    }
    for (int a : seg_max_) {
      const auto as = static_cast<std::size_t>(a);
      if (d >= cap && b.x[as] == cap) {
        m_[as] -= b.x[as];
        b.x[as] = 0.0;
        update(as);
      } else {
        shift_arc(b, as, -d);
        if (b.x[as] < 0) b.x[as] = 0.0;
      }
    }
    for (int a : seg_min_) shift_arc(b, static_cast<std::size_t>(a), d);
  }

  const Network& net_;
  const CongestionModel& model_;
  std::size_t A_, N_;
  double crumb_ = 0.0;
  std::vector<double> m_, t_, dt_, U_, L_;
  std::vector<int> pu_, pl_, pos_, deg_, order_, seg_min_, seg_max_;
};

// Splits a single-commodity flow into paths. Each sink traces back along the
// in-arc with the largest remaining flow (ties: smallest arc id) until it
// meets a node with remaining supply. Rounding leftovers go to the shortest
// path from the source with the most remaining supply.
inline std::vector<PathFlow> decompose_flow(const Network& net, const std::vector<double>& x,
                                            std::map<int, double> supply,
                                            const std::vector<std::pair<int, double>>& demands,
                                            const std::vector<double>& times) {
  std::vector<double> res = x;
  double total = 0.0;
  for (const auto& [y, g] : demands) total += g;
  const double thr = 1e-13 * total;
  std::vector<PathFlow> out;
  auto emit = [&](int src, int y, std::vector<int> arcs, double f) {
    PathFlow p;
    p.source = src;
    p.sink = y;
    p.nodes = path_nodes(net, src, arcs);
    p.arcs = std::move(arcs);
    p.flow = f;
    out.push_back(std::move(p));
  };
  for (const auto& [y, g] : demands) {
    double r = g;
    while (r > thr) {
      std::vector<int> arcs;
      double bott = r;
      int v = y;
      bool stuck = false;
      while (true) {
        auto sit = supply.find(v);
        if (sit != supply.end() && sit->second > thr) {
          bott = std::min(bott, sit->second);
          break;
        }
        int best = -1;
        for (int a : net.in_arcs(v))
          if (res[static_cast<std::size_t>(a)] > thr && (best < 0 || res[static_cast<std::size_t>(a)] > res[static_cast<std::size_t>(best)]))
            best = a;
        if (best < 0 || arcs.size() > static_cast<std::size_t>(net.num_nodes())) {
          stuck = true;
          break;
        }
        arcs.push_back(best);
        bott = std::min(bott, res[static_cast<std::size_t>(best)]);
        v = net.arc(best).tail;
      }
      if (stuck) break;
      std::reverse(arcs.begin(), arcs.end());
      for (int a : arcs) res[static_cast<std::size_t>(a)] -= bott;
      supply[v] -= bott;
      r -= bott;
      emit(v, y, std::move(arcs), bott);
    }
    if (r > 0) {
      // Leftover: attach to the shortest path from the richest source.
      int src = supply.begin()->first;
      for (const auto& [s, f] : supply)
        if (f > supply[src]) src = s;
      auto tree = shortest_path_to(net, times, y);
      auto arcs = lexicographic_path(net, times, tree, src);
      supply[src] -= r;
      emit(src, y, std::move(arcs), r);
    }
  }
  // Merge repeated routes so every (OD, route) appears once.
  std::map<std::pair<OdPair, std::vector<int>>, std::size_t> seen;
  std::vector<PathFlow> merged;
  for (auto& p : out) {
    auto key = std::make_pair(OdPair{p.source, p.sink}, p.arcs);
    auto it = seen.find(key);
    if (it != seen.end()) {
      merged[it->second].flow += p.flow;
    } else {
      seen.emplace(std::move(key), merged.size());
      merged.push_back(std::move(p));
    }
  }
  return merged;
}

/// Arc times must be positive at zero flow so that shortest paths are simple.
inline void require_free_flow(const Network& net, const CongestionModel& model) {
  for (int a = 0; a < net.num_arcs(); ++a) {
    const auto& arc = net.arc(a);
    if (!(model.free_flow(net.node(arc.tail), arc.cls) > 0))
      throw InvalidArgument("assignment needs positive free-flow times (delta > 0)");
  }
}

}  // namespace detail

/// Minimizes the Beckmann objective with an origin-based bush algorithm
/// (Dial's Algorithm B). Every origin keeps its flow on an acyclic
/// subnetwork and repeatedly moves mass from its longest used route to its
/// shortest route between the same pair of nodes. Flows stay feasible
/// throughout, so the relative gap (sum m t - sum gamma T) / sum gamma T,
/// evaluated with global shortest paths after every sweep, is exact. Path
/// flows are recovered by decomposing the origin flows.
inline BeckmannResult solve_beckmann(const Network& net, const CongestionModel& model, const TransportPlan& plan,
                                     const BeckmannOptions& opts = {}) {
  plan.validate(net);
  if (model.num_classes() < net.family().size()) throw InvalidArgument("model has fewer classes than the network");
  detail::require_free_flow(net, model);
  const auto A = static_cast<std::size_t>(net.num_arcs());
  std::vector<detail::Bush> bushes;
  std::vector<PathFlow> self_paths;  // origin == sink
  {
    std::map<int, std::vector<std::pair<int, double>>> by_origin;
    for (const auto& [od, mass] : plan.entries()) {
      if (!(mass > 0)) continue;
      if (od.first == od.second) {
        self_paths.push_back(PathFlow{od.first, od.second, {od.first}, {}, mass});
        continue;
      }
      by_origin[od.first].emplace_back(od.second, mass);
    }
    for (auto& [o, dests] : by_origin) {
      detail::Bush b{o, std::move(dests), 0.0, {}, {}};
      for (const auto& [y, g] : b.dests) b.demand += g;
      bushes.push_back(std::move(b));
    }
  }

  detail::BushSolver solver(net, model);
  BeckmannResult res;
  auto finish = [&]() {
    FlowState f;
    for (const auto& b : bushes) {
      auto paths = detail::decompose_flow(net, b.x, {{b.origin, b.demand}}, b.dests, solver.times());
      for (auto& p : paths) f.paths.push_back(std::move(p));
    }
    for (const auto& p : self_paths) f.paths.push_back(p);
    f.arc_masses = masses_from_paths(net.num_arcs(), f.paths);
    return f;
  };
  if (bushes.empty()) {
    res.flow = finish();
    res.objective_history.push_back(0.0);
    res.gap_history.push_back(0.0);
    return res;
  }

  // Mass shifts between routes act locally, which is slow when one origin's
  // flow spreads over a large part of the network. Origins carrying a large
  // share of the demand are therefore re-solved exactly against the others
  // (Newton on node potentials) for as long as those solves converge.
  double total = 0.0;
  for (const auto& b : bushes) total += b.demand;
  for (auto& b : bushes) {
    solver.load(b);
    b.newton = b.demand >= 0.05 * total;
  }
  detail::PotentialSolver exact(net, model);
  std::vector<double> mb(A), supply(static_cast<std::size_t>(net.num_nodes()), 0.0);
  double inner = 1e-3;  // node-level relative spread below which no mass moves
  std::vector<std::vector<double>> before(bushes.size());
  for (int it = 0;; ++it) {
    for (std::size_t k = 0; k < bushes.size(); ++k)
      if (bushes[k].newton) before[k] = bushes[k].x;
    for (auto& b : bushes) {
      if (b.newton) {
        const auto& m = solver.masses();
        for (std::size_t a = 0; a < A; ++a) mb[a] = std::max(0.0, m[a] - b.x[a]);
        std::fill(supply.begin(), supply.end(), 0.0);
        supply[static_cast<std::size_t>(b.origin)] = b.demand;
        for (const auto& [y, g] : b.dests) supply[static_cast<std::size_t>(y)] -= g;
        if (b.T.empty()) b.T = solver.potentials(b.origin);
        const double tol = std::max(1e-12 * b.demand, 1e-13 * total);
        auto sol = exact.solve(mb, supply, b.origin, std::move(b.T), tol);
        const bool ok = sol.residual <= tol;
        b.T = std::move(sol.T);
        if (ok) {
          b.misses = 0;
          solver.adopt(b, sol.x);
          continue;
        }
        if (++b.misses >= 3) b.newton = false;
      }
      solver.improve(b, 3, inner);
    }
    solver.extrapolate(bushes, before);
    solver.refresh(bushes);
    const auto& m = solver.masses();
    const auto& t = solver.times();
    double mt = 0.0, gT = 0.0;
    for (std::size_t a = 0; a < A; ++a) mt += m[a] * t[a];
    for (const auto& b : bushes) {
      auto tree = shortest_path(net, t, b.origin);
      for (const auto& [y, g] : b.dests) gT += g * tree.dist[static_cast<std::size_t>(y)];
    }
    const double gap = gT > 0 ? std::max(0.0, mt - gT) / gT : 0.0;
    inner = std::max(std::min(inner, 0.1 * gap), 1e-14);
    res.objective_history.push_back(beckmann_objective(model, net, m));
    res.gap_history.push_back(gap);
    res.iterations = it + 1;
    res.rel_gap = gap;
    if (gap <= opts.rel_gap_tol) break;
    if (it + 1 >= opts.max_iters) {
      res.flow = finish();
      throw IterationLimitError(std::move(res));
    }
  }
  res.flow = finish();
  return res;
}

struct CertReport {
  bool pass = true;
  double worst_violation = 0.0;  // max over used paths of tau/T - 1
  std::map<OdPair, double> spread;  // max - min used-path time per OD
  double conservation_error = 0.0;  // worst relative error of OD totals
  double consistency_error = 0.0;   // worst relative error of arc masses
  bool loop_free = true;
};

/// Checks the equilibrium condition: every used path is a shortest path up to
/// relative tolerance `tol`.
inline CertReport wardrop_certify(const Network& net, const CongestionModel& model, const FlowState& flow,
                                  const TransportPlan& plan, double tol) {
  CertReport r;
  auto t = arc_times(model, net, flow.arc_masses);
  auto T = od_shortest_times(net, t, plan);
  std::map<OdPair, double> carried;
  std::map<OdPair, std::pair<double, double>> range;
  for (const auto& p : flow.paths) {
    OdPair od{p.source, p.sink};
    carried[od] += p.flow;
    std::vector<char> seen(static_cast<std::size_t>(net.num_nodes()), 0);
    for (int v : p.nodes) {
      if (seen[static_cast<std::size_t>(v)]) r.loop_free = false;
      seen[static_cast<std::size_t>(v)] = 1;
    }
    if (!(p.flow > 0)) continue;
    auto it = T.find(od);
    if (it == T.end()) {
      r.pass = false;
      continue;
    }
    const double tau = path_time(t, p.arcs);
    const double viol = it->second > 0 ? tau / it->second - 1 : tau;
    r.worst_violation = std::max(r.worst_violation, viol);
    auto [rit, fresh] = range.try_emplace(od, tau, tau);
    if (!fresh) {
      rit->second.first = std::min(rit->second.first, tau);
      rit->second.second = std::max(rit->second.second, tau);
    }
  }
  for (const auto& [od, mm] : range) r.spread[od] = mm.second - mm.first;
  for (const auto& [od, g] : plan.entries()) {
    const double c = carried.count(od) ? carried[od] : 0.0;
    r.conservation_error = std::max(r.conservation_error, std::abs(c - g) / std::max(g, 1e-300));
  }
  for (const auto& [od, c] : carried)
    if (plan.entries().count(od) == 0 && c != 0) r.conservation_error = kInfinity;
  auto m = masses_from_paths(net.num_arcs(), flow.paths);
  for (std::size_t a = 0; a < m.size(); ++a) {
    const double ref = std::max({std::abs(m[a]), std::abs(flow.arc_masses[a]), 1e-300});
    r.consistency_error = std::max(r.consistency_error, std::abs(m[a] - flow.arc_masses[a]) / ref);
  }
  if (r.worst_violation > tol || r.conservation_error > 1e-12 || r.consistency_error > 1e-12 || !r.loop_free)
    r.pass = false;
  return r;
}

}  // namespace wardrop
