// Command-line front end. Every command writes deterministic output; timing
// goes to stderr only.

#include <chrono>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "wardrop/wardrop.hpp"

namespace {

using wardrop::io::json;

json load_json(const std::string& path) { return wardrop::io::parse_json(wardrop::io::read_file(path), path); }

wardrop::Network load_network(const std::string& path) { return wardrop::io::network_from_json(load_json(path)); }

wardrop::PowerLawModel load_model(const std::string& path, int classes) {
  return wardrop::io::model_from_json(load_json(path), classes);
}

void emit(const json& j, const std::string& out) {
  const std::string text = j.dump(2) + "\n";
  if (out.empty())
    std::cout << text;
  else
    wardrop::io::write_file(out, text);
}

class Stopwatch {
 public:
  explicit Stopwatch(std::string what) : what_(std::move(what)), t0_(std::chrono::steady_clock::now()) {}
  ~Stopwatch() {
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
    std::cerr << what_ << ": " << s << " s\n";
  }

 private:
  std::string what_;
  std::chrono::steady_clock::time_point t0_;
};

wardrop::DirectionFamily family_for(wardrop::FamilyTag tag, int dim) {
  switch (tag) {
    case wardrop::FamilyTag::cartesian: return wardrop::DirectionFamily::cartesian(dim);
    case wardrop::FamilyTag::triangular: return wardrop::DirectionFamily::triangular();
    case wardrop::FamilyTag::hexagonal: return wardrop::DirectionFamily::hexagonal();
    case wardrop::FamilyTag::custom: break;
  }
  throw wardrop::InvalidArgument("no built-in family for 'custom'");
}

constexpr const char* kStudyHelp =
    "Runs an epsilon-refinement study.\n"
    "A density plan mass * b_s(x) * b_t(y) (cos^2 bumps of unit mass) is\n"
    "sampled to node pairs as gamma(x, y) = mass * b_s(x) b_t(y) |V|^2 eps^(1 - d/2),\n"
    "|V| the cell volume of one node, so that eps^(d/2 - 1) sum gamma -> mass.";

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wardrop equilibria on periodic networks and their continuum limits"};
  app.require_subcommand(1);

  std::string family = "cartesian", domain = "box:0,0,1,1", out;
  double epsilon = 0.0;
  auto* netgen = app.add_subcommand("netgen", "Generate a lattice network");
  netgen->add_option("--family", family, "cartesian | triangular | hexagonal")->required();
  netgen->add_option("--epsilon", epsilon, "Lattice spacing")->required();
  netgen->add_option("--domain", domain, "box:lo..,hi.. | ball:c..,r | polygon:x,y,... | blob:...")->required();
  netgen->add_option("--out", out, "Network JSON file")->required();

  std::string net_path, model_path, plan_path, flow_path;
  double tol = 1e-6;
  int max_iters = 5000;
  auto* solve = app.add_subcommand("solve", "Solve the short-term equilibrium for a transport plan");
  solve->add_option("--net", net_path)->required();
  solve->add_option("--model", model_path, "{q, classes:[{a | a_coeffs, delta}]}")->required();
  solve->add_option("--plan", plan_path, "CSV x_id,y_id,mass")->required();
  solve->add_option("--tol", tol, "Relative gap tolerance");
  solve->add_option("--max-iters", max_iters);
  solve->add_option("--out", out, "Flow JSON file")->required();

  auto* dualcheck = app.add_subcommand("dualcheck", "Evaluate the dual at xi(m) for a flow");
  dualcheck->add_option("--net", net_path)->required();
  dualcheck->add_option("--model", model_path)->required();
  dualcheck->add_option("--plan", plan_path)->required();
  dualcheck->add_option("--flow", flow_path)->required();

  std::string xi_path, gamma_path;
  double h = 1.0 / 32, quad_h = 1.0 / 64;
  auto* climit = app.add_subcommand("climit", "Evaluate the continuum dual functional");
  climit->set_help_flag("--help", "Print this help message and exit");  // frees -h for --h
  climit->add_option("--family", family)->required();
  climit->add_option("--xi", xi_path, "{constant | classes | grid}")->required();
  climit->add_option("--gamma", gamma_path, "{atoms:[{x, y, mass}]}")->required();
  climit->add_option("--h", h, "Geodesic grid spacing")->required();
  climit->add_option("--model", model_path, "Congestion model (default q = 2, a = 1, delta = 0)");
  climit->add_option("--domain", domain);
  climit->add_option("--quad-h", quad_h, "Cell size of the theta quadrature");

  std::string marginals_path;
  auto* solve_lt = app.add_subcommand("solve-lt", "Solve the long-term equilibrium for marginals");
  solve_lt->add_option("--net", net_path)->required();
  solve_lt->add_option("--model", model_path)->required();
  solve_lt->add_option("--marginals", marginals_path, "CSV node_id,mass,side")->required();
  solve_lt->add_option("--tol", tol);
  solve_lt->add_option("--out", out, "Result JSON file (default stdout)");

  std::string config_path, csv_path, json_path;
  bool measure = false;
  auto* study = app.add_subcommand("study", kStudyHelp);
  study->add_option("--config", config_path)->required();
  study->add_option("--csv", csv_path, "Overrides output.csv");
  study->add_option("--json", json_path, "Overrides output.json");
  study->add_flag("--measure", measure, "Path-measure study instead of the minimum-value study");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*netgen) {
      auto net = wardrop::build_network(wardrop::family_tag_from_string(family), wardrop::Domain::parse(domain), epsilon);
      emit(wardrop::io::network_to_json(net), out);
    } else if (*solve) {
      Stopwatch sw("solve");
      auto net = load_network(net_path);
      auto model = load_model(model_path, net.family().size());
      auto plan = wardrop::io::plan_from_csv(wardrop::io::read_file(plan_path));
      wardrop::BeckmannOptions opts;
      opts.rel_gap_tol = tol;
      opts.max_iters = max_iters;
      auto res = wardrop::solve_beckmann(net, model, plan, opts);
      emit(wardrop::io::flow_to_json(res.flow), out);
      emit({{"iterations", res.iterations},
            {"rel_gap", res.rel_gap},
            {"objective", wardrop::beckmann_objective(model, net, res.flow.arc_masses)}},
           "");
    } else if (*dualcheck) {
      auto net = load_network(net_path);
      auto model = load_model(model_path, net.family().size());
      auto plan = wardrop::io::plan_from_csv(wardrop::io::read_file(plan_path));
      auto flow = wardrop::io::flow_from_json(net, load_json(flow_path));
      auto g = wardrop::duality_gap(net, model, plan, flow);
      emit({{"I0", g.I0}, {"I1", g.I1}, {"J", g.J}, {"primal", g.primal}, {"gap_abs", g.abs}, {"gap_rel", g.rel}}, "");
    } else if (*climit) {
      auto dom = wardrop::Domain::parse(domain);
      auto fam = family_for(wardrop::family_tag_from_string(family), dom.dim());
      json mj = model_path.empty() ? json{{"q", 2.0}, {"classes", {{{"a", 1.0}, {"delta", 0.0}}}}} : load_json(model_path);
      auto model = wardrop::io::model_from_json(mj, fam.size());
      auto xi = wardrop::io::xi_from_json(load_json(xi_path), fam.size());
      auto gamma = wardrop::io::gamma_from_json(load_json(gamma_path));
      auto v = wardrop::J_limit(fam, model, xi, gamma, dom, h, quad_h);
      emit({{"I0", v.I0}, {"I1", v.I1}, {"J", v.value}}, "");
    } else if (*solve_lt) {
      Stopwatch sw("solve-lt");
      auto net = load_network(net_path);
      auto model = load_model(model_path, net.family().size());
      auto f = wardrop::io::marginals_from_csv(wardrop::io::read_file(marginals_path));
      wardrop::LongTermOptions opts;
      opts.rel_gap_tol = tol;
      auto res = wardrop::solve_longterm(net, model, f, opts);
      json plan = json::array();
      for (const auto& [od, m] : res.plan.entries()) plan.push_back({od.first, od.second, m});
      emit({{"flow", wardrop::io::flow_to_json(res.flow)},
            {"plan", std::move(plan)},
            {"rel_gap", res.rel_gap},
            {"ot_value", res.ot_value},
            {"objective", res.objective}},
           out);
    } else if (*study) {
      Stopwatch sw("study");
      auto cfg = wardrop::config_from_json(load_json(config_path));
      if (!csv_path.empty()) cfg.csv_path = csv_path;
      if (!json_path.empty()) cfg.json_path = json_path;
      if (cfg.json_path.empty() && !cfg.csv_path.empty())
        cfg.json_path = std::filesystem::path(cfg.csv_path).replace_extension(".json").string();
      std::string csv;
      json summary;
      if (measure) {
        auto t = wardrop::run_measure_study(cfg);
        csv = wardrop::measure_table_csv(t);
        summary = wardrop::measure_table_json(t);
      } else {
        auto t = wardrop::run_gamma_study(cfg);
        csv = wardrop::gamma_table_csv(t);
        summary = wardrop::gamma_table_json(t);
      }
      if (cfg.csv_path.empty())
        std::cout << csv;
      else
        wardrop::io::write_file(cfg.csv_path, csv);
      if (!cfg.json_path.empty()) emit(summary, cfg.json_path);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
