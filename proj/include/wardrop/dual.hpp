#pragma once

#include <vector>

#include "assignment.hpp"
#include "congestion.hpp"
#include "network.hpp"
#include "shortest_path.hpp"

namespace wardrop {

/// Rescaled arc times xi(x, e) with their discrete L^p norm.
struct MetricState {
  std::vector<double> xi;
  double epsilon = 0.0;
  double p = 2.0;
  double norm = 0.0;  // (sum |e|^d xi^p)^{1/p}
};

inline double metric_norm(const Network& net, const std::vector<double>& xi, double p) {
  double s = 0.0;
  for (int a = 0; a < net.num_arcs(); ++a)
    s += std::pow(net.arc(a).length, net.dim()) * std::pow(xi[static_cast<std::size_t>(a)], p);
  return std::pow(s, 1.0 / p);
}

inline MetricState make_metric(const Network& net, std::vector<double> xi, double p) {
  if (static_cast<int>(xi.size()) != net.num_arcs()) throw InvalidArgument("one metric value per arc required");
  for (double v : xi)
    if (!(v >= 0)) throw InvalidArgument("metric values must be nonnegative");
  MetricState s;
  s.norm = metric_norm(net, xi, p);
  s.xi = std::move(xi);
  s.epsilon = net.epsilon();
  s.p = p;
  return s;
}

inline MetricState xi_from_flow(const Network& net, const CongestionModel& model, const FlowState& flow) {
  std::vector<double> xi(static_cast<std::size_t>(net.num_arcs()));
  for (int a = 0; a < net.num_arcs(); ++a)
    xi[static_cast<std::size_t>(a)] = rescale(model, net, a, flow.arc_masses[static_cast<std::size_t>(a)]).xi;
  return make_metric(net, std::move(xi), model.exponent_p());
}

/// Raw arc weights |e|^{d/2} xi.
inline std::vector<double> metric_weights(const Network& net, const MetricState& metric) {
  std::vector<double> w(static_cast<std::size_t>(net.num_arcs()));
  for (int a = 0; a < net.num_arcs(); ++a) w[static_cast<std::size_t>(a)] = net.arc_scale(a) * metric.xi[static_cast<std::size_t>(a)];
  return w;
}

inline double dual_I0(const Network& net, const CongestionModel& model, const MetricState& metric) {
  double s = 0.0;
  for (int a = 0; a < net.num_arcs(); ++a) {
    const auto& arc = net.arc(a);
    s += std::pow(arc.length, net.dim()) * model.H(net.node(arc.tail), arc.cls, metric.xi[static_cast<std::size_t>(a)]);
  }
  return s;
}

struct DualValue {
  double value = 0.0;
  double I0 = 0.0;
  double I1 = 0.0;
};

inline DualValue J_eps(const Network& net, const CongestionModel& model, const TransportPlan& plan,
                       const MetricState& metric) {
  plan.validate(net);
  DualValue v;
  v.I0 = dual_I0(net, model, metric);
  auto T = od_shortest_times(net, metric_weights(net, metric), plan);
  for (const auto& [od, g] : plan.entries()) {
    if (g == 0) continue;
    const double t = T.at(od);
    if (!(t < kInfinity)) throw UnreachableError(od.first, od.second);
    v.I1 += g * t;
  }
  v.value = v.I0 - v.I1;
  return v;
}

struct DualityGap {
  double abs = 0.0;
  double rel = 0.0;
  double primal = 0.0;
  double J = 0.0;
  double I0 = 0.0;
  double I1 = 0.0;
};

/// J^eps(xi(m)) + sum G^eps(m); nonnegative for feasible flows, zero at the optimum.
inline DualityGap duality_gap(const Network& net, const CongestionModel& model, const TransportPlan& plan,
                              const FlowState& flow) {
  DualityGap g;
  auto dv = J_eps(net, model, plan, xi_from_flow(net, model, flow));
  g.primal = beckmann_objective(model, net, flow.arc_masses);
  g.J = dv.value;
  g.I0 = dv.I0;
  g.I1 = dv.I1;
  g.abs = g.J + g.primal;
  g.rel = g.abs / std::max(std::abs(g.primal), 1e-30);
  return g;
}

}  // namespace wardrop
