#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "wardrop/wardrop.hpp"

using namespace wardrop;
using fixture::grid;
using fixture::grid_node;
using fixture::v2;

namespace {

std::vector<double> random_times(int n, unsigned seed, double lo = 0.1, double hi = 2.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> t(static_cast<std::size_t>(n));
  for (auto& x : t) x = u(rng);
  return t;
}

void expect_feasible(const Network& net, const FlowState& f, const TransportPlan& plan) {
  std::map<OdPair, double> carried;
  for (const auto& p : f.paths) {
    EXPECT_GE(p.flow, 0.0);
    carried[{p.source, p.sink}] += p.flow;
    std::set<int> seen(p.nodes.begin(), p.nodes.end());
    EXPECT_EQ(seen.size(), p.nodes.size()) << "path has a loop";
    EXPECT_EQ(path_nodes(net, p.source, p.arcs), p.nodes);
  }
  for (const auto& [od, g] : plan.entries())
    if (g > 0) EXPECT_NEAR(carried[od], g, 1e-12 * g);
  auto m = masses_from_paths(net.num_arcs(), f.paths);
  for (std::size_t a = 0; a < m.size(); ++a) EXPECT_NEAR(m[a], f.arc_masses[a], 1e-12 * std::max(1.0, m[a]));
}

}  // namespace

TEST(ShortestPath, ZeroTimes) {
  auto net = grid(4);
  auto t = shortest_path(net, std::vector<double>(static_cast<std::size_t>(net.num_arcs()), 0.0), 5);
  for (double d : t.dist) EXPECT_EQ(d, 0.0);
}

TEST(ShortestPath, ThreeNodeLine) {
  auto fam = DirectionFamily::cartesian(2);
  auto net = Network::from_arc_list(1.0, {v2(0, 0), v2(1, 0), v2(2, 0)}, {{0, 1, 0}, {1, 2, 0}}, fam);
  auto t = shortest_path(net, {1.0, 2.0}, 0);
  EXPECT_EQ(t.dist[2], 3.0);
  EXPECT_EQ(tree_path(net, t, 2), (std::vector<int>{0, 1}));
  // Nothing reaches node 0 from node 2.
  EXPECT_EQ(shortest_path(net, {1.0, 2.0}, 2).dist[0], kInfinity);
}

TEST(ShortestPath, MatchesBellmanFord) {
  auto net = grid(4);
  for (unsigned seed = 1; seed <= 20; ++seed) {
    auto w = random_times(net.num_arcs(), seed);
    for (int s : {0, 5, 15}) {
      auto d = shortest_path(net, w, s).dist;
      auto bf = oracle::bellman_ford(net, w, s);
      for (int v = 0; v < net.num_nodes(); ++v) EXPECT_EQ(d[static_cast<std::size_t>(v)], bf[static_cast<std::size_t>(v)]);
    }
  }
}

TEST(ShortestPath, TreePathRealizesLabel) {
  auto net = build_triangular(Domain::parse("disk:0,0,1"), 0.2);
  auto w = random_times(net.num_arcs(), 7);
  auto t = shortest_path(net, w, 0);
  for (int v = 0; v < net.num_nodes(); ++v) EXPECT_NEAR(path_time(w, tree_path(net, t, v)), t.dist[static_cast<std::size_t>(v)], 1e-12);
  auto r = shortest_path_to(net, w, 3);
  auto bf = oracle::bellman_ford(net, w, 9);
  EXPECT_NEAR(r.dist[9], bf[3], 1e-12);
}

TEST(ShortestPath, RejectsNegativeWeights) {
  auto net = grid(3);
  std::vector<double> w(static_cast<std::size_t>(net.num_arcs()), 1.0);
  w[0] = -1.0;
  EXPECT_THROW(shortest_path(net, w, net.arc(0).tail), InvalidArgument);
}

TEST(AllOrNothing, UniquePathCarriesEverything) {
  auto net = grid(3);
  std::vector<double> w(static_cast<std::size_t>(net.num_arcs()), 5.0);
  // Cheap route along the bottom row then up the right column.
  const std::vector<std::pair<int, int>> route{{0, 0}, {1, 0}, {2, 0}, {2, 1}, {2, 2}};
  for (std::size_t i = 0; i + 1 < route.size(); ++i) {
    int a = net.find_arc(grid_node(net, 3, route[i].first, route[i].second), grid_node(net, 3, route[i + 1].first, route[i + 1].second));
    w[static_cast<std::size_t>(a)] = 1.0;
  }
  TransportPlan plan;
  plan.add(grid_node(net, 3, 0, 0), grid_node(net, 3, 2, 2), 1.5);
  auto f = all_or_nothing(net, plan, w);
  ASSERT_EQ(f.paths.size(), 1u);
  EXPECT_EQ(f.paths[0].arcs.size(), 4u);
  EXPECT_DOUBLE_EQ(path_time(w, f.paths[0].arcs), 4.0);
  EXPECT_DOUBLE_EQ(f.paths[0].flow, 1.5);
}

TEST(AllOrNothing, TieBreaksOnSmallestNodeSequence) {
  auto net = grid(3);
  std::vector<double> w(static_cast<std::size_t>(net.num_arcs()), 1.0);
  const int s = grid_node(net, 3, 0, 0), t = grid_node(net, 3, 2, 2);
  TransportPlan plan;
  plan.add(s, t, 1.0);
  auto f = all_or_nothing(net, plan, w);
  // Oracle: the smallest node sequence among all shortest simple paths.
  std::vector<std::vector<int>> best;
  for (const auto& p : oracle::simple_paths(net, s, t))
    if (p.size() == 4) best.push_back(path_nodes(net, s, p));
  std::sort(best.begin(), best.end());
  EXPECT_EQ(f.paths[0].nodes, best.front());
  // Repeatable.
  EXPECT_EQ(all_or_nothing(net, plan, w).paths[0].nodes, f.paths[0].nodes);
}

TEST(AllOrNothing, ConservesMassAndRejectsUnreachable) {
  auto net = grid(4);
  auto w = random_times(net.num_arcs(), 3);
  TransportPlan plan;
  plan.add(0, 15, 1.0);
  plan.add(3, 12, 0.25);
  plan.add(7, 8, 2.0);
  auto f = all_or_nothing(net, plan, w);
  double total = 0.0;
  for (const auto& p : f.paths) total += p.flow;
  EXPECT_DOUBLE_EQ(total, plan.total());
  expect_feasible(net, f, plan);

  auto fam = DirectionFamily::cartesian(2);
  auto oneway = Network::from_arc_list(1.0, {v2(0, 0), v2(1, 0)}, {{0, 1, 0}}, fam);
  TransportPlan back;
  back.add(1, 0, 1.0);
  EXPECT_THROW(all_or_nothing(oneway, back, {1.0}), UnreachableError);
}

TEST(SolveBeckmann, PigouMatchesRootFinding) {
  auto net = fixture::pigou_network();
  auto model = fixture::pigou_model();
  auto res = solve_beckmann(net, model, fixture::pigou_plan());
  const double m1 = oracle::pigou_m1(2.0, 1e-9);
  EXPECT_NEAR(res.flow.arc_masses[0], m1, 1e-6);
  EXPECT_NEAR(res.flow.arc_masses[1], 2.0 - m1, 1e-6);
  auto cert = wardrop_certify(net, model, res.flow, fixture::pigou_plan(), 1e-3);
  EXPECT_TRUE(cert.pass);
}

TEST(SolveBeckmann, ZeroDemand) {
  auto net = grid(3);
  auto model = PowerLawModel::uniform(2, 4, 1, 1);
  TransportPlan plan;
  plan.add(0, 8, 0.0);
  auto res = solve_beckmann(net, model, plan);
  for (double m : res.flow.arc_masses) EXPECT_EQ(m, 0.0);
  EXPECT_EQ(beckmann_objective(model, net, res.flow.arc_masses), 0.0);
  EXPECT_TRUE(wardrop_certify(net, model, res.flow, plan, 1e-3).pass);
}

TEST(SolveBeckmann, SquareSplitsEvenly) {
  auto net = grid(2);
  auto model = PowerLawModel::uniform(2, 4, 1, 1);
  TransportPlan plan;
  plan.add(0, 3, 1.0);
  auto res = solve_beckmann(net, model, plan, {5000, 1e-10});
  std::vector<std::pair<std::vector<std::vector<int>>, double>> ods{{oracle::simple_paths(net, 0, 3), 1.0}};
  auto opt = oracle::path_space_minimum(net, {2, 1, 1}, ods);
  for (int a = 0; a < net.num_arcs(); ++a) EXPECT_NEAR(res.flow.arc_masses[static_cast<std::size_t>(a)], opt.masses[static_cast<std::size_t>(a)], 1e-8);
  EXPECT_NEAR(res.flow.arc_masses[static_cast<std::size_t>(net.find_arc(0, 1))], 0.5, 1e-8);
  EXPECT_NEAR(res.flow.arc_masses[static_cast<std::size_t>(net.find_arc(0, 2))], 0.5, 1e-8);
}

TEST(SolveBeckmann, RandomInstancesAreCertifiedAndMonotone) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 12; ++trial) {
    const int n = 3 + trial % 4;
    auto net = trial % 3 == 2 ? build_triangular(Domain::parse("disk:0,0,1"), 0.5) : grid(n);
    const double q = trial % 2 ? 1.5 : 2.0;
    auto model = PowerLawModel::uniform(q, net.family().size(), 0.5 + 0.1 * trial, 0.3 + 0.05 * trial);
    TransportPlan plan;
    std::uniform_int_distribution<int> node(0, net.num_nodes() - 1);
    std::uniform_real_distribution<double> mass(0.1, 2.0);
    for (int k = 0; k < 1 + trial % 3; ++k) plan.add(node(rng), node(rng), mass(rng));
    auto res = solve_beckmann(net, model, plan);
    EXPECT_LE(res.rel_gap, 1e-6);
    expect_feasible(net, res.flow, plan);
    auto cert = wardrop_certify(net, model, res.flow, plan, 1e-3);
    EXPECT_TRUE(cert.pass) << "trial " << trial << " violation " << cert.worst_violation;
    for (std::size_t i = 1; i < res.objective_history.size(); ++i)
      EXPECT_LE(res.objective_history[i], res.objective_history[i - 1] * (1 + 1e-12));
  }
}

TEST(SolveBeckmann, MatchesPathSpaceOptimum) {
  auto net = grid(3);
  auto model = PowerLawModel::uniform(1.5, 4, 2.0, 0.5);
  TransportPlan plan;
  plan.add(0, 8, 1.0);
  plan.add(6, 2, 0.7);
  auto res = solve_beckmann(net, model, plan, {5000, 1e-10});
  std::vector<std::pair<std::vector<std::vector<int>>, double>> ods;
  for (const auto& [od, g] : plan.entries()) ods.push_back({oracle::simple_paths(net, od.first, od.second), g});
  auto opt = oracle::path_space_minimum(net, {1.5, 2.0, 0.5}, ods);
  const double obj = beckmann_objective(model, net, res.flow.arc_masses);
  EXPECT_NEAR(obj, opt.objective, 1e-9 * opt.objective);
  for (int a = 0; a < net.num_arcs(); ++a) EXPECT_NEAR(res.flow.arc_masses[static_cast<std::size_t>(a)], opt.masses[static_cast<std::size_t>(a)], 1e-4);
}

TEST(SolveBeckmann, SelfPairsStayPut) {
  auto net = grid(3);
  auto model = PowerLawModel::uniform(2, 4, 1, 1);
  TransportPlan plan;
  plan.add(4, 4, 1.0);
  plan.add(0, 8, 1.0);
  auto res = solve_beckmann(net, model, plan);
  expect_feasible(net, res.flow, plan);
  EXPECT_TRUE(wardrop_certify(net, model, res.flow, plan, 1e-3).pass);
}

TEST(SolveBeckmann, IterationLimitCarriesBestIterate) {
  auto net = grid(12);
  auto model = PowerLawModel::uniform(2, 4, 5, 0.1);
  TransportPlan plan;
  plan.add(0, net.num_nodes() - 1, 3.0);
  plan.add(11, 132, 3.0);
  try {
    solve_beckmann(net, model, plan, {1, 1e-14});
    FAIL() << "expected an iteration-limit error";
  } catch (const IterationLimitError& e) {
    EXPECT_EQ(e.best().iterations, 1);
    EXPECT_GT(e.best().rel_gap, 1e-14);
    expect_feasible(net, e.best().flow, plan);
  }
}

TEST(SolveBeckmann, ErrorsOnBadInput) {
  auto fam = DirectionFamily::cartesian(2);
  auto oneway = Network::from_arc_list(1.0, {v2(0, 0), v2(1, 0)}, {{0, 1, 0}}, fam);
  TransportPlan back;
  back.add(1, 0, 1.0);
  auto model = PowerLawModel::uniform(2, 4, 1, 1);
  EXPECT_THROW(solve_beckmann(oneway, model, back), UnreachableError);
  TransportPlan missing;
  missing.add(0, 7, 1.0);
  EXPECT_THROW(solve_beckmann(oneway, model, missing), InvalidArgument);
  // Zero free-flow time would allow zero-cost loops.
  TransportPlan fwd;
  fwd.add(0, 1, 1.0);
  EXPECT_THROW(solve_beckmann(oneway, PowerLawModel::uniform(2, 4, 1, 0), fwd), InvalidArgument);
}

TEST(WardropCertify, AllOrNothingOnPigouFails) {
  auto net = fixture::pigou_network();
  auto model = fixture::pigou_model();
  auto plan = fixture::pigou_plan();
  auto f = all_or_nothing(net, plan, arc_times(model, net, {0.0, 0.0}));
  auto r = wardrop_certify(net, model, f, plan, 1e-3);
  EXPECT_FALSE(r.pass);
  EXPECT_GT(r.worst_violation, 0.4);
}

TEST(WardropCertify, ZeroDemandPassesVacuously) {
  auto net = fixture::pigou_network();
  FlowState f;
  f.arc_masses = {0.0, 0.0};
  TransportPlan plan;
  EXPECT_TRUE(wardrop_certify(net, fixture::pigou_model(), f, plan, 1e-3).pass);
}

TEST(WardropCertify, DetectsBookkeepingErrors) {
  auto net = fixture::pigou_network();
  auto model = fixture::pigou_model();
  auto plan = fixture::pigou_plan();
  auto res = solve_beckmann(net, model, plan);
  auto bad = res.flow;
  bad.arc_masses[0] += 0.1;
  EXPECT_FALSE(wardrop_certify(net, model, bad, plan, 1e-3).pass);
  auto lost = res.flow;
  lost.paths[0].flow *= 0.5;
  lost.arc_masses = masses_from_paths(net.num_arcs(), lost.paths);
  EXPECT_FALSE(wardrop_certify(net, model, lost, plan, 1e-3).pass);
}

TEST(TransportPlan, Basics) {
  TransportPlan p;
  p.add(0, 1, 1.0);
  p.add(0, 1, 0.5);
  EXPECT_DOUBLE_EQ(p.at(0, 1), 1.5);
  EXPECT_DOUBLE_EQ(p.scaled(2).total(), 3.0);
  EXPECT_THROW(p.add(1, 2, -1.0), InvalidArgument);
}
