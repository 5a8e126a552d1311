#pragma once

#include <array>
#include <cctype>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "assignment.hpp"
#include "congestion.hpp"
#include "continuum.hpp"
#include "gencurves.hpp"
#include "longterm.hpp"
#include "network.hpp"

namespace wardrop::io {

using json = nlohmann::json;

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << text;
}

inline json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(what + ": " + e.what());
  }
}

/// Shortest round-trip decimal form.
inline std::string fmt(double v) {
  std::ostringstream ss;
  ss << std::setprecision(17) << v;
  return ss.str();
}

inline Vec to_vec(const json& j) {
  std::vector<double> v = j.get<std::vector<double>>();
  return Eigen::Map<Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline json from_vec(const Vec& v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

// ---------------------------------------------------------------------------
// Networks: {epsilon, d, nodes, arcs:[[tail, head, class]], directions:{N, family_tag}}
// ---------------------------------------------------------------------------

inline json network_to_json(const Network& net) {
  json j;
  j["epsilon"] = net.epsilon();
  j["d"] = net.dim();
  json nodes = json::array();
  for (const auto& x : net.nodes()) nodes.push_back(from_vec(x));
  j["nodes"] = std::move(nodes);
  json arcs = json::array();
  for (const auto& a : net.arcs()) arcs.push_back({a.tail, a.head, a.cls});
  j["arcs"] = std::move(arcs);
  const auto& f = net.family();
  json dirs{{"N", f.size()}, {"family_tag", to_string(net.tag())}};
  if (net.tag() == FamilyTag::custom && f.is_constant()) {
    json vecs = json::array(), coefs = json::array();
    for (int k = 0; k < f.size(); ++k) {
      vecs.push_back(from_vec(f.constant_direction(k)));
      coefs.push_back(f.coefficient(f.constant_direction(k), k));
    }
    dirs["vectors"] = std::move(vecs);
    dirs["coefficients"] = std::move(coefs);
  }
  j["directions"] = std::move(dirs);
  return j;
}

inline DirectionFamily family_from_json(const json& dirs, int d) {
  const auto tag = family_tag_from_string(dirs.at("family_tag").get<std::string>());
  switch (tag) {
    case FamilyTag::cartesian: return DirectionFamily::cartesian(d);
    case FamilyTag::triangular: return DirectionFamily::triangular();
    case FamilyTag::hexagonal: return DirectionFamily::hexagonal();
    case FamilyTag::custom: break;
  }
  if (!dirs.contains("vectors")) throw ParseError("custom networks need direction vectors");
  std::vector<Vec> v;
  for (const auto& x : dirs.at("vectors")) v.push_back(to_vec(x));
  std::vector<double> c = dirs.contains("coefficients") ? dirs.at("coefficients").get<std::vector<double>>()
                                                         : std::vector<double>(v.size(), 1.0);
  return DirectionFamily::constant(std::move(v), std::move(c));
}

inline Network network_from_json(const json& j) {
  try {
    const int d = j.at("d").get<int>();
    std::vector<Vec> nodes;
    for (const auto& x : j.at("nodes")) nodes.push_back(to_vec(x));
    std::vector<std::array<int, 3>> arcs;
    for (const auto& a : j.at("arcs")) arcs.push_back({a.at(0).get<int>(), a.at(1).get<int>(), a.at(2).get<int>()});
    auto family = family_from_json(j.at("directions"), d);
    const auto tag = family.tag();
    return Network::from_arc_list(j.at("epsilon").get<double>(), std::move(nodes), arcs, std::move(family), tag);
  } catch (const json::exception& e) {
    throw ParseError(std::string("network file: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Congestion models: {q, classes:[{a | a_coeffs:[{c, powers}], delta}]}.
// A single class entry applies to every direction.
// ---------------------------------------------------------------------------

inline Polynomial polynomial_from_json(const json& j) {
  if (j.is_number()) return Polynomial::constant(j.get<double>());
  std::vector<Monomial> terms;
  for (const auto& t : j) {
    Monomial m;
    m.coef = t.at("c").get<double>();
    if (t.contains("powers")) m.powers = t.at("powers").get<std::vector<int>>();
    terms.push_back(std::move(m));
  }
  return Polynomial(std::move(terms));
}

inline PowerLawModel model_from_json(const json& j, int classes) {
  try {
    const double q = j.at("q").get<double>();
    std::vector<PowerLawModel::ClassParams> params;
    for (const auto& c : j.at("classes")) {
      PowerLawModel::ClassParams p;
      p.a = c.contains("a_coeffs") ? polynomial_from_json(c.at("a_coeffs")) : polynomial_from_json(c.at("a"));
      p.delta = c.at("delta").get<double>();
      params.push_back(std::move(p));
    }
    if (params.size() == 1 && classes > 1) params.assign(static_cast<std::size_t>(classes), params.front());
    if (static_cast<int>(params.size()) < classes) throw ParseError("model has fewer classes than the network");
    return PowerLawModel(q, std::move(params));
  } catch (const json::exception& e) {
    throw ParseError(std::string("model file: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// CSV helpers. Lines that are empty, start with '#', or fail to parse as
// numbers in the first field are treated as headers and skipped.
// ---------------------------------------------------------------------------

inline std::vector<std::vector<std::string>> read_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string c;
    while (std::getline(ls, c, ',')) {
      auto b = c.find_first_not_of(" \t");
      auto e = c.find_last_not_of(" \t");
      cells.push_back(b == std::string::npos ? "" : c.substr(b, e - b + 1));
    }
    const auto& f = cells.front();
    if (f.empty() || !(std::isdigit(static_cast<unsigned char>(f[0])) || f[0] == '-' || f[0] == '+')) continue;
    rows.push_back(std::move(cells));
  }
  return rows;
}

inline double to_double(const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw ParseError("bad number '" + s + "'");
  }
  if (used != s.size()) throw ParseError("bad number '" + s + "'");
  return v;
}

inline int to_int(const std::string& s) {
  std::size_t used = 0;
  int v = 0;
  try {
    v = std::stoi(s, &used);
  } catch (const std::exception&) {
    throw ParseError("bad integer '" + s + "'");
  }
  if (used != s.size()) throw ParseError("bad integer '" + s + "'");
  return v;
}

/// Rows `x_id,y_id,mass`.
inline TransportPlan plan_from_csv(const std::string& text) {
  TransportPlan p;
  for (const auto& r : read_csv(text)) {
    if (r.size() != 3) throw ParseError("plan rows need x_id,y_id,mass");
    p.add(to_int(r[0]), to_int(r[1]), to_double(r[2]));
  }
  return p;
}

inline std::string plan_to_csv(const TransportPlan& p) {
  std::string out = "x_id,y_id,mass\n";
  for (const auto& [od, m] : p.entries()) out += std::to_string(od.first) + "," + std::to_string(od.second) + "," + fmt(m) + "\n";
  return out;
}

/// Rows `node_id,mass,side` with side in {minus, plus}.
inline MarginalPair marginals_from_csv(const std::string& text) {
  MarginalPair f;
  for (const auto& r : read_csv(text)) {
    if (r.size() != 3) throw ParseError("marginal rows need node_id,mass,side");
    const int v = to_int(r[0]);
    const double m = to_double(r[1]);
    if (r[2] == "minus")
      f.f_minus[v] += m;
    else if (r[2] == "plus")
      f.f_plus[v] += m;
    else
      throw ParseError("marginal side must be 'minus' or 'plus', got '" + r[2] + "'");
  }
  return f;
}

// ---------------------------------------------------------------------------
// Flows: {arc_masses:[...], paths:[{nodes:[...], flow}]}.
// ---------------------------------------------------------------------------

inline json flow_to_json(const FlowState& f) {
  json paths = json::array();
  for (const auto& p : f.paths) paths.push_back({{"nodes", p.nodes}, {"flow", p.flow}});
  return {{"arc_masses", f.arc_masses}, {"paths", std::move(paths)}};
}

inline FlowState flow_from_json(const Network& net, const json& j) {
  try {
    FlowState f;
    f.arc_masses = j.at("arc_masses").get<std::vector<double>>();
    if (static_cast<int>(f.arc_masses.size()) != net.num_arcs()) throw ParseError("flow has the wrong number of arcs");
    for (const auto& pj : j.at("paths")) {
      PathFlow p;
      p.nodes = pj.at("nodes").get<std::vector<int>>();
      if (p.nodes.empty()) throw ParseError("flow path without nodes");
      p.flow = pj.at("flow").get<double>();
      p.source = p.nodes.front();
      p.sink = p.nodes.back();
      p.arcs = lift_path(net, p.nodes).arcs;
      f.paths.push_back(std::move(p));
    }
    return f;
  } catch (const json::exception& e) {
    throw ParseError(std::string("flow file: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Metric fields: {"constant":[...]}, {"classes":[poly, ...]} or
// {"grid":{origin, spacing, shape, values}}; optional "regularity":"lp".
// ---------------------------------------------------------------------------

inline XiField xi_from_json(const json& j, int classes) {
  try {
    if (j.contains("constant")) {
      auto v = j.at("constant").get<std::vector<double>>();
      if (v.size() == 1 && classes > 1) v.assign(static_cast<std::size_t>(classes), v.front());
      return XiField::constant(std::move(v));
    }
    if (j.contains("classes")) {
      std::vector<Polynomial> ps;
      for (const auto& c : j.at("classes")) ps.push_back(polynomial_from_json(c));
      if (ps.size() == 1 && classes > 1) ps.assign(static_cast<std::size_t>(classes), ps.front());
      return XiField::polynomial(std::move(ps));
    }
    if (j.contains("grid")) {
      const auto& g = j.at("grid");
      auto reg = j.value("regularity", std::string("continuous")) == "lp" ? XiField::Regularity::lp_only
                                                                         : XiField::Regularity::continuous;
      return XiField::grid(to_vec(g.at("origin")), g.at("spacing").get<double>(), g.at("shape").get<std::vector<int>>(),
                           g.at("values").get<std::vector<std::vector<double>>>(), reg);
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("field file: ") + e.what());
  }
  throw ParseError("field file needs 'constant', 'classes' or 'grid'");
}

/// {"atoms":[{"x":[...], "y":[...], "mass":m}]}.
inline std::vector<GammaAtom> gamma_from_json(const json& j) {
  std::vector<GammaAtom> out;
  try {
    for (const auto& a : j.at("atoms")) out.push_back({to_vec(a.at("x")), to_vec(a.at("y")), a.at("mass").get<double>()});
  } catch (const json::exception& e) {
    throw ParseError(std::string("gamma file: ") + e.what());
  }
  for (const auto& a : out)
    if (!(a.mass >= 0)) throw ParseError("gamma masses must be nonnegative");
  return out;
}

/// {atoms:[{nodes, rho_knots:[[t0, t1, rho_1, ..., rho_N], ...], weight}]}.
inline json measure_to_json(const GeneralizedCurveMeasure& q) {
  json atoms = json::array();
  for (const auto& a : q.atoms) {
    json knots = json::array();
    for (int i = 0; i < a.curve.pieces(); ++i) {
      std::vector<double> row{a.curve.knots[static_cast<std::size_t>(i)], a.curve.knots[static_cast<std::size_t>(i) + 1]};
      const auto& r = a.curve.rho[static_cast<std::size_t>(i)];
      row.insert(row.end(), r.data(), r.data() + r.size());
      knots.push_back(std::move(row));
    }
    atoms.push_back({{"nodes", a.curve.nodes}, {"rho_knots", std::move(knots)}, {"weight", a.weight}});
  }
  return {{"atoms", std::move(atoms)}};
}

}  // namespace wardrop::io
