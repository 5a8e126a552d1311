#pragma once

#include <chrono>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "assignment.hpp"
#include "continuum.hpp"
#include "dual.hpp"
#include "gencurves.hpp"
#include "io.hpp"
#include "network.hpp"

namespace wardrop {

/// Radial cos^2 bump of unit mass: C cos^2(pi |x - c| / (2 r)) for |x - c| < r.
struct Bump {
  Vec center;
  double radius = 0.1;

  double operator()(const Vec& x) const {
    const double rho = (x - center).norm();
    if (rho >= radius) return 0.0;
    const double c = std::cos(std::numbers::pi * rho / (2 * radius));
    return normalization() * c * c;
  }
  double normalization() const {
    const int d = static_cast<int>(center.size());
    const double sphere = 2 * std::pow(std::numbers::pi, 0.5 * d) / boost::math::tgamma(0.5 * d);
    auto f = [&](double u) {
      const double c = std::cos(std::numbers::pi * u / 2);
      return std::pow(u, d - 1) * c * c;
    };
    const double radial = boost::math::quadrature::gauss<double, 30>::integrate(f, 0.0, 1.0);
    return 1.0 / (sphere * radial * std::pow(radius, d));
  }
};

/// Transport plan spec: either Dirac atoms (snapped to the nearest node) or
/// the smooth density mass * bump_source(x) * bump_sink(y).
struct PlanSpec {
  enum class Kind { dirac, density };
  Kind kind = Kind::dirac;
  std::vector<GammaAtom> atoms;
  double mass = 1.0;
  Bump source, sink;
};

struct ExperimentConfig {
  FamilyTag family = FamilyTag::cartesian;
  std::string domain_spec = "box:0,0,1,1";
  std::vector<double> epsilons;
  io::json model;
  PlanSpec plan;
  double rel_gap = 1e-6;
  int max_iters = 5000;
  double certify_tol = 1e-3;
  double duality_tol = 1e-4;
  double quad_h = 1.0 / 64;
  std::string csv_path;
  std::string json_path;

  void validate() const {
    if (epsilons.empty()) throw InvalidArgument("need at least one epsilon");
    for (std::size_t i = 0; i < epsilons.size(); ++i) {
      if (!(epsilons[i] > 0)) throw InvalidArgument("epsilons must be positive");
      if (i > 0 && !(epsilons[i] < epsilons[i - 1])) throw InvalidArgument("epsilons must be strictly decreasing");
    }
  }
};

inline ExperimentConfig config_from_json(const io::json& j) {
  ExperimentConfig c;
  try {
    c.family = family_tag_from_string(j.value("family", std::string("cartesian")));
    c.domain_spec = j.value("domain", c.domain_spec);
    c.epsilons = j.at("epsilons").get<std::vector<double>>();
    c.model = j.at("model");
    const auto& p = j.at("plan");
    const auto kind = p.at("kind").get<std::string>();
    if (kind == "dirac") {
      c.plan.kind = PlanSpec::Kind::dirac;
      c.plan.atoms = io::gamma_from_json(p);
    } else if (kind == "density") {
      c.plan.kind = PlanSpec::Kind::density;
      c.plan.mass = p.value("mass", 1.0);
      c.plan.source = {io::to_vec(p.at("source").at("center")), p.at("source").at("radius").get<double>()};
      c.plan.sink = {io::to_vec(p.at("sink").at("center")), p.at("sink").at("radius").get<double>()};
    } else {
      throw ParseError("plan kind must be 'dirac' or 'density'");
    }
    if (j.contains("tolerances")) {
      const auto& t = j.at("tolerances");
      c.rel_gap = t.value("rel_gap", c.rel_gap);
      c.max_iters = t.value("max_iters", c.max_iters);
      c.certify_tol = t.value("certify", c.certify_tol);
      c.duality_tol = t.value("duality", c.duality_tol);
    }
    c.quad_h = j.value("quad_h", c.quad_h);
    if (j.contains("output")) {
      c.csv_path = j.at("output").value("csv", std::string());
      c.json_path = j.at("output").value("json", std::string());
    }
  } catch (const io::json::exception& e) {
    throw ParseError(std::string("study config: ") + e.what());
  }
  c.validate();
  return c;
}

/// Volume of the lattice cell owned by one node.
inline double node_cell_volume(const Network& net) {
  const double e = net.epsilon();
  switch (net.tag()) {
    case FamilyTag::cartesian: return std::pow(e, net.dim());
    case FamilyTag::triangular: return std::sqrt(3.0) / 2 * e * e;
    case FamilyTag::hexagonal: return 3 * std::sqrt(3.0) / 4 * e * e;
    case FamilyTag::custom: break;
  }
  throw InvalidArgument("no cell volume for custom networks");
}

/// Node-level plan. Dirac atoms carry mass * eps^{1-d/2}; a density gives
/// each node pair density(x, y) * |cell|^2 * eps^{1-d/2}.
inline TransportPlan discretize_plan(const Network& net, const PlanSpec& spec) {
  TransportPlan plan;
  const double scale = std::pow(net.epsilon(), 1 - 0.5 * net.dim());
  if (spec.kind == PlanSpec::Kind::dirac) {
    for (const auto& a : spec.atoms)
      if (a.mass > 0) plan.add(net.nearest_node(a.x), net.nearest_node(a.y), a.mass * scale);
    return plan;
  }
  const double vol = node_cell_volume(net);
  std::vector<std::pair<int, double>> src, snk;
  for (int v = 0; v < net.num_nodes(); ++v) {
    const double a = spec.source(net.node(v));
    const double b = spec.sink(net.node(v));
    if (a > 0) src.emplace_back(v, a);
    if (b > 0) snk.emplace_back(v, b);
  }
  for (const auto& [x, a] : src)
    for (const auto& [y, b] : snk) plan.add(x, y, spec.mass * a * b * vol * vol * scale);
  return plan;
}

/// Test functions phi(x, v) for the weak-convergence columns.
inline std::vector<std::pair<std::string, TestFunction>> weak_test_battery() {
  return {
      {"one", [](const Vec&, const Vec&) { return 1.0; }},
      {"x1", [](const Vec& x, const Vec&) { return x[0]; }},
      {"v1", [](const Vec&, const Vec& v) { return v[0]; }},
      {"bump_v2", [](const Vec& x, const Vec& v) {
         return std::sin(std::numbers::pi * x[0]) * std::sin(std::numbers::pi * x[1]) * (1 + v[1]);
       }},
  };
}

// ---------------------------------------------------------------------------
// Gamma study: min J^eps across a decreasing epsilon list.
// ---------------------------------------------------------------------------

struct SolvedRow {
  Network net;
  TransportPlan plan;
  FlowState flow;
  int iterations = 0;
  double rel_gap = 0.0;
  double seconds = 0.0;
};

struct GammaRow {
  double epsilon = 0.0;
  int nodes = 0, arcs = 0, od_pairs = 0;
  double min_J = 0.0;         // -sum G^eps(m*)
  double dual_J = 0.0;        // J^eps(xi(m*))
  double duality_rel = 0.0;   // |J + sum G| / sum G
  double rel_gap = 0.0;
  int iterations = 0;
  double xi_norm = 0.0;       // ||xi^eps||_{eps,p}
  double worst_violation = 0.0;
  bool certified = false;
  std::optional<double> delta;  // |min J^eps - min J^{previous eps}|
  std::optional<double> order;  // log2(previous delta / delta)
  std::vector<double> weak;     // S_eps(phi) per test function
  std::string status = "ok";
  double seconds = 0.0;         // wall time, kept out of the written tables
};

struct ConvergenceTable {
  std::vector<std::string> tests;
  std::vector<GammaRow> rows;
};

inline SolvedRow solve_row(const ExperimentConfig& cfg, const Domain& domain, const CongestionModel& model, double eps) {
  auto t0 = std::chrono::steady_clock::now();
  SolvedRow r{build_network(cfg.family, domain, eps), {}, {}, 0, 0.0, 0.0};
  r.plan = discretize_plan(r.net, cfg.plan);
  BeckmannOptions opts;
  opts.rel_gap_tol = cfg.rel_gap;
  opts.max_iters = cfg.max_iters;
  auto res = solve_beckmann(r.net, model, r.plan, opts);
  r.flow = std::move(res.flow);
  r.iterations = res.iterations;
  r.rel_gap = res.rel_gap;
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

inline ConvergenceTable run_gamma_study(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto domain = Domain::parse(cfg.domain_spec);
  const int classes = build_network(cfg.family, domain, cfg.epsilons.front()).family().size();
  const auto model = io::model_from_json(cfg.model, classes);
  ConvergenceTable table;
  const auto battery = weak_test_battery();
  for (const auto& [name, fn] : battery) table.tests.push_back(name);

  std::optional<double> prev_J, prev_delta;
  for (double eps : cfg.epsilons) {
    GammaRow row;
    row.epsilon = eps;
    try {
      auto s = solve_row(cfg, domain, model, eps);
      row.nodes = s.net.num_nodes();
      row.arcs = s.net.num_arcs();
      row.od_pairs = static_cast<int>(s.plan.entries().size());
      row.iterations = s.iterations;
      row.rel_gap = s.rel_gap;
      row.seconds = s.seconds;
      const double primal = beckmann_objective(model, s.net, s.flow.arc_masses);
      row.min_J = -primal;
      auto metric = xi_from_flow(s.net, model, s.flow);
      row.xi_norm = metric.norm;
      if (!s.plan.empty()) {
        auto gap = duality_gap(s.net, model, s.plan, s.flow);
        row.dual_J = gap.J;
        row.duality_rel = std::abs(gap.rel);
      }
      auto cert = wardrop_certify(s.net, model, s.flow, s.plan, cfg.certify_tol);
      row.worst_violation = cert.worst_violation;
      row.certified = cert.pass;
      for (const auto& [name, phi] : battery) {
        double v = 0.0;
        for (int a = 0; a < s.net.num_arcs(); ++a) {
          const auto& arc = s.net.arc(a);
          v += std::pow(arc.length, s.net.dim()) * phi(s.net.node(arc.tail), arc.e / arc.length) *
               metric.xi[static_cast<std::size_t>(a)];
        }
        row.weak.push_back(v);
      }
      if (!cert.pass)
        row.status = "uncertified";
      else if (row.duality_rel > cfg.duality_tol)
        row.status = "duality_gap";
      if (prev_J) {
        row.delta = std::abs(row.min_J - *prev_J);
        if (prev_delta && *row.delta > 0) row.order = std::log2(*prev_delta / *row.delta);
      }
      prev_J = row.min_J;
      prev_delta = row.delta;
    } catch (const Error& e) {
      row.status = std::string("error: ") + e.what();
      prev_J.reset();
      prev_delta.reset();
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

// ---------------------------------------------------------------------------
// Measure study: pairings of m^Q with fixed metric fields.
// ---------------------------------------------------------------------------

struct MeasureRow {
  double epsilon = 0.0;
  int atoms = 0;
  std::vector<double> pairings;          // int xi dm^Q per test field
  std::vector<std::optional<double>> pairing_delta;
  double bookkeeping_error = 0.0;        // xi = 1 pairing vs eps^{d/2-1} sum |e| m
  double plan_error = 0.0;               // endpoint push-forward vs normalized plan
  double binned_objective = 0.0;         // Beckmann functional of binned m^Q
  double discrete_objective = 0.0;       // sum G^eps(m)
  bool certified = false;
  double duality_rel = 0.0;
  std::string status = "ok";
  double seconds = 0.0;
};

struct MeasureTable {
  std::vector<std::string> fields;
  std::vector<MeasureRow> rows;
};

inline std::vector<std::pair<std::string, XiField>> measure_test_fields(int classes) {
  std::vector<Polynomial> lin, aniso;
  for (int k = 0; k < classes; ++k) {
    lin.push_back(Polynomial({Monomial{1.0, {}}, Monomial{1.0, {1}}}));
    aniso.push_back(Polynomial::constant(1.0 + static_cast<double>(k) / classes));
  }
  return {{"one", XiField::uniform(classes, 1.0)},
          {"one_plus_x1", XiField::polynomial(std::move(lin))},
          {"by_class", XiField::polynomial(std::move(aniso))}};
}

inline MeasureTable run_measure_study(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto domain = Domain::parse(cfg.domain_spec);
  const int classes = build_network(cfg.family, domain, cfg.epsilons.front()).family().size();
  const auto model = io::model_from_json(cfg.model, classes);
  const auto fields = measure_test_fields(classes);
  const auto quad = make_quadrature(domain, cfg.quad_h);
  MeasureTable table;
  for (const auto& [name, f] : fields) table.fields.push_back(name);
  std::vector<double> prev;
  for (double eps : cfg.epsilons) {
    MeasureRow row;
    row.epsilon = eps;
    try {
      auto s = solve_row(cfg, domain, model, eps);
      row.seconds = s.seconds;
      const auto& family = s.net.family();
      auto q = build_Q_eps(s.net, s.flow);
      row.atoms = static_cast<int>(q.atoms.size());
      for (const auto& [name, xi] : fields) row.pairings.push_back(m_Q(family, q, xi));
      double arc_sum = 0.0;
      for (int a = 0; a < s.net.num_arcs(); ++a) arc_sum += s.net.arc(a).length * s.flow.arc_masses[static_cast<std::size_t>(a)];
      arc_sum *= std::pow(eps, 0.5 * s.net.dim() - 1);
      row.bookkeeping_error = std::abs(row.pairings.front() - arc_sum) / std::max(std::abs(arc_sum), 1e-300);
      row.plan_error = q.atoms.empty() ? 0.0 : plan_consistency_error(q, s.plan);
      row.binned_objective = binned_beckmann(family, model, quad, m_Q_density(family, q, quad));
      row.discrete_objective = beckmann_objective(model, s.net, s.flow.arc_masses);
      auto cert = wardrop_certify(s.net, model, s.flow, s.plan, cfg.certify_tol);
      row.certified = cert.pass;
      if (!s.plan.empty()) row.duality_rel = std::abs(duality_gap(s.net, model, s.plan, s.flow).rel);
      if (!cert.pass)
        row.status = "uncertified";
      else if (row.duality_rel > cfg.duality_tol)
        row.status = "duality_gap";
      for (std::size_t i = 0; i < row.pairings.size(); ++i)
        row.pairing_delta.push_back(prev.empty() ? std::nullopt : std::optional<double>(std::abs(row.pairings[i] - prev[i])));
      prev = row.pairings;
    } catch (const Error& e) {
      row.status = std::string("error: ") + e.what();
      prev.clear();
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

// ---------------------------------------------------------------------------
// Output. Wall times are left out so that identical configs give identical files.
// ---------------------------------------------------------------------------

namespace detail {
inline std::string opt(const std::optional<double>& v) { return v ? io::fmt(*v) : std::string(); }
inline io::json opt_json(const std::optional<double>& v) { return v ? io::json(*v) : io::json(nullptr); }
}  // namespace detail

inline std::string gamma_table_csv(const ConvergenceTable& t) {
  std::string out = "epsilon,nodes,arcs,od_pairs,min_J,dual_J,duality_rel,rel_gap,iterations,xi_norm,"
                    "worst_violation,certified,delta,order";
  for (const auto& n : t.tests) out += ",weak_" + n;
  out += ",status\n";
  for (const auto& r : t.rows) {
    out += io::fmt(r.epsilon) + "," + std::to_string(r.nodes) + "," + std::to_string(r.arcs) + "," +
           std::to_string(r.od_pairs) + "," + io::fmt(r.min_J) + "," + io::fmt(r.dual_J) + "," +
           io::fmt(r.duality_rel) + "," + io::fmt(r.rel_gap) + "," + std::to_string(r.iterations) + "," +
           io::fmt(r.xi_norm) + "," + io::fmt(r.worst_violation) + "," + (r.certified ? "1" : "0") + "," +
           detail::opt(r.delta) + "," + detail::opt(r.order);
    for (std::size_t i = 0; i < t.tests.size(); ++i) out += "," + (i < r.weak.size() ? io::fmt(r.weak[i]) : std::string());
    out += "," + r.status + "\n";
  }
  return out;
}

inline io::json gamma_table_json(const ConvergenceTable& t) {
  io::json rows = io::json::array();
  bool decreasing = true;
  std::optional<double> last;
  for (const auto& r : t.rows) {
    rows.push_back({{"epsilon", r.epsilon},
                    {"min_J", r.min_J},
                    {"duality_rel", r.duality_rel},
                    {"certified", r.certified},
                    {"delta", detail::opt_json(r.delta)},
                    {"order", detail::opt_json(r.order)},
                    {"status", r.status}});
    if (r.delta) {
      if (last && !(*r.delta < *last)) decreasing = false;
      last = r.delta;
    }
  }
  return {{"study", "gamma"}, {"tests", t.tests}, {"rows", std::move(rows)}, {"deltas_decreasing", decreasing}};
}

inline std::string measure_table_csv(const MeasureTable& t) {
  std::string out = "epsilon,atoms";
  for (const auto& f : t.fields) out += ",pair_" + f + ",delta_" + f;
  out += ",bookkeeping_error,plan_error,binned_objective,discrete_objective,duality_rel,certified,status\n";
  for (const auto& r : t.rows) {
    out += io::fmt(r.epsilon) + "," + std::to_string(r.atoms);
    for (std::size_t i = 0; i < t.fields.size(); ++i) {
      out += "," + (i < r.pairings.size() ? io::fmt(r.pairings[i]) : std::string());
      out += "," + (i < r.pairing_delta.size() ? detail::opt(r.pairing_delta[i]) : std::string());
    }
    out += "," + io::fmt(r.bookkeeping_error) + "," + io::fmt(r.plan_error) + "," + io::fmt(r.binned_objective) + "," +
           io::fmt(r.discrete_objective) + "," + io::fmt(r.duality_rel) + "," + (r.certified ? "1" : "0") + "," +
           r.status + "\n";
  }
  return out;
}

inline io::json measure_table_json(const MeasureTable& t) {
  io::json rows = io::json::array();
  for (const auto& r : t.rows)
    rows.push_back({{"epsilon", r.epsilon},
                    {"pairings", r.pairings},
                    {"bookkeeping_error", r.bookkeeping_error},
                    {"plan_error", r.plan_error},
                    {"status", r.status}});
  return {{"study", "measure"}, {"fields", t.fields}, {"rows", std::move(rows)}};
}

}  // namespace wardrop
