#pragma once

#include <map>
#include <vector>

#include "assignment.hpp"
#include "congestion.hpp"
#include "dual.hpp"
#include "network.hpp"
#include "shortest_path.hpp"
#include "transport.hpp"

namespace wardrop {

/// Supply f- and demand f+ as sparse node -> mass maps.
struct MarginalPair {
  std::map<int, double> f_minus;
  std::map<int, double> f_plus;

  double total() const {
    double s = 0.0;
    for (const auto& [v, m] : f_minus) s += m;
    return s;
  }
  MarginalPair scaled(double c) const {
    MarginalPair out;
    for (const auto& [v, m] : f_minus) out.f_minus[v] = c * m;
    for (const auto& [v, m] : f_plus) out.f_plus[v] = c * m;
    return out;
  }
  void validate(const Network& net) const {
    double a = 0.0, b = 0.0;
    for (const auto* side : {&f_minus, &f_plus})
      for (const auto& [v, m] : *side) {
        if (v < 0 || v >= net.num_nodes()) throw InvalidArgument("marginal refers to a missing node");
        if (!(m >= 0)) throw InvalidArgument("marginal masses must be nonnegative");
      }
    for (const auto& [v, m] : f_minus) a += m;
    for (const auto& [v, m] : f_plus) b += m;
    if (std::abs(a - b) > 1e-12 * std::max(1.0, a)) throw InvalidArgument("marginals are not balanced");
  }
};

struct OtResult {
  TransportPlan plan;
  double value = 0.0;
};

/// Cheapest coupling of the marginals for the shortest-time costs T_t(x, y).
inline OtResult ot_subproblem(const Network& net, const std::vector<double>& times, const MarginalPair& f) {
  f.validate(net);
  std::vector<int> src, snk;
  for (const auto& [v, m] : f.f_minus)
    if (m > 0) src.push_back(v);
  for (const auto& [v, m] : f.f_plus)
    if (m > 0) snk.push_back(v);
  OtResult out;
  if (src.empty() || snk.empty()) return out;
  const auto ns = static_cast<Eigen::Index>(src.size());
  const auto nt = static_cast<Eigen::Index>(snk.size());
  Eigen::MatrixXd C(ns, nt);
  Eigen::VectorXd a(ns), b(nt);
  for (Eigen::Index i = 0; i < ns; ++i) {
    auto tree = shortest_path(net, times, src[static_cast<std::size_t>(i)]);
    for (Eigen::Index j = 0; j < nt; ++j) C(i, j) = tree.dist[static_cast<std::size_t>(snk[static_cast<std::size_t>(j)])];
    a[i] = f.f_minus.at(src[static_cast<std::size_t>(i)]);
  }
  for (Eigen::Index j = 0; j < nt; ++j) {
    b[j] = f.f_plus.at(snk[static_cast<std::size_t>(j)]);
    if (!C.col(j).array().isFinite().any())
      throw InfeasibleError("sink " + std::to_string(snk[static_cast<std::size_t>(j)]) + " is unreachable from every source");
  }
  b *= a.sum() / b.sum();
  auto sol = solve_transport(C, a, b);
  for (Eigen::Index i = 0; i < ns; ++i)
    for (Eigen::Index j = 0; j < nt; ++j)
      if (sol.flow(i, j) > 0) out.plan.add(src[static_cast<std::size_t>(i)], snk[static_cast<std::size_t>(j)], sol.flow(i, j));
  out.value = sol.value;
  return out;
}

struct LongTermOptions {
  double rel_gap_tol = 1e-6;
};

struct LongTermResult {
  FlowState flow;
  TransportPlan plan;
  double rel_gap = 0.0;   // (sum m t - OT) / OT at the returned times
  double ot_value = 0.0;  // OT value for the returned times
  double objective = 0.0;
};

/// Long-term equilibrium: minimizes the Beckmann objective over all flows
/// carrying f- to f+ with a free coupling. Without a prescribed plan the
/// problem is a single-commodity convex flow, solved exactly by Newton on
/// node potentials; the plan is read off the path decomposition.
inline LongTermResult solve_longterm(const Network& net, const CongestionModel& model, const MarginalPair& f,
                                     const LongTermOptions& opts = {}) {
  f.validate(net);
  if (model.num_classes() < net.family().size()) throw InvalidArgument("model has fewer classes than the network");
  detail::require_free_flow(net, model);
  const auto A = static_cast<std::size_t>(net.num_arcs());
  LongTermResult res;
  const double total = f.total();
  if (!(total > 0)) {
    res.flow.arc_masses.assign(A, 0.0);
    return res;
  }
  std::vector<double> zero(A, 0.0), supply(static_cast<std::size_t>(net.num_nodes()), 0.0);
  std::map<int, double> sources;
  std::vector<std::pair<int, double>> sinks;
  for (const auto& [v, m] : f.f_minus) {
    supply[static_cast<std::size_t>(v)] += m;
    if (m > 0) sources[v] = m;
  }
  for (const auto& [v, m] : f.f_plus) {
    supply[static_cast<std::size_t>(v)] -= m;
    if (m > 0) sinks.emplace_back(v, m);
  }
  auto t0 = arc_times(model, net, zero);
  ot_subproblem(net, t0, f);  // throws when the marginals cannot be coupled
  const int ground = sources.begin()->first;
  auto T = shortest_path(net, t0, ground).dist;
  double top = 0.0;
  for (double v : T)
    if (v < kInfinity) top = std::max(top, v);
  for (double& v : T)
    if (!(v < kInfinity)) v = top;

  detail::PotentialSolver solver(net, model);
  auto sol = solver.solve(zero, supply, ground, std::move(T), 1e-12 * total);

  auto t = arc_times(model, net, sol.x);
  res.flow.paths = detail::decompose_flow(net, sol.x, sources, sinks, t);
  res.flow.arc_masses = masses_from_paths(net.num_arcs(), res.flow.paths);
  for (const auto& p : res.flow.paths) res.plan.add(p.source, p.sink, p.flow);
  t = arc_times(model, net, res.flow.arc_masses);
  auto ot = ot_subproblem(net, t, f);
  double mt = 0.0;
  for (std::size_t a = 0; a < A; ++a) mt += res.flow.arc_masses[a] * t[a];
  res.ot_value = ot.value;
  res.rel_gap = ot.value > 0 ? std::max(0.0, mt - ot.value) / ot.value : 0.0;
  res.objective = beckmann_objective(model, net, res.flow.arc_masses);
  if (res.rel_gap > opts.rel_gap_tol)
    throw Error("long-term solve stalled at relative gap " + std::to_string(res.rel_gap));
  return res;
}

/// Relative excess of the plan's cost over the optimal coupling cost, both
/// under the equilibrium times of `flow`.
inline double ot_certificate(const Network& net, const CongestionModel& model, const FlowState& flow,
                             const TransportPlan& plan, const MarginalPair& f) {
  auto t = arc_times(model, net, flow.arc_masses);
  auto ot = ot_subproblem(net, t, f);
  auto T = od_shortest_times(net, t, plan);
  double cost = 0.0;
  for (const auto& [od, g] : plan.entries()) cost += g * T.at(od);
  return std::abs(cost - ot.value) / std::max(std::abs(ot.value), 1e-30);
}

/// I0(xi) - OT value under the weights |e|^{d/2} xi.
inline DualValue dual_longterm_value(const Network& net, const CongestionModel& model, const MarginalPair& f,
                                     const MetricState& metric) {
  DualValue v;
  v.I0 = dual_I0(net, model, metric);
  v.I1 = ot_subproblem(net, metric_weights(net, metric), f).value;
  v.value = v.I0 - v.I1;
  return v;
}

/// sum_k (b_k(x)/p) (z . v_k(x) - delta_k c_k(x))_+^p with b_k = (a_k c_k)^{-1/(q-1)}.
inline double G_star(const DirectionFamily& family, const PowerLawModel& model, const Vec& x, const Vec& z) {
  const double q = model.exponent_q();
  const double p = model.exponent_p();
  double s = 0.0;
  for (int k = 0; k < family.size(); ++k) {
    const double c = family.coefficient(x, k);
    const double b = std::pow(model.weight(x, k) * c, -1.0 / (q - 1));
    s += b / p * pow_pos(z.dot(family.direction(x, k)) - model.delta(k) * c, p);
  }
  return s;
}

}  // namespace wardrop
