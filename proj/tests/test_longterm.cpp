#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "wardrop/wardrop.hpp"

using namespace wardrop;
using fixture::grid;
using fixture::grid_node;

namespace {

MarginalPair marginals(std::map<int, double> minus, std::map<int, double> plus) {
  MarginalPair f;
  f.f_minus = std::move(minus);
  f.f_plus = std::move(plus);
  return f;
}

}  // namespace

TEST(Transport, TwoByTwoMatchesVertexEnumeration) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.1, 3);
  for (int i = 0; i < 200; ++i) {
    Eigen::Matrix2d C;
    C << u(rng), u(rng), u(rng), u(rng);
    const double a1 = u(rng), a2 = u(rng), b1 = u(rng) * (a1 + a2) / 3.1;
    const double b2 = a1 + a2 - b1;
    auto sol = solve_transport(C, Eigen::Vector2d(a1, a2), Eigen::Vector2d(b1, b2));
    EXPECT_NEAR(sol.value, oracle::ot_2x2(C, a1, a2, b1, b2), 1e-12 * std::max(1.0, sol.value));
    EXPECT_NEAR(sol.flow.sum(), a1 + a2, 1e-12);
    EXPECT_TRUE((sol.flow.array() >= -1e-15).all());
    // Dual feasibility and strong duality.
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 2; ++c) EXPECT_LE(sol.u[r] + sol.v[c], C(r, c) + 1e-12);
    EXPECT_NEAR(sol.u[0] * a1 + sol.u[1] * a2 + sol.v[0] * b1 + sol.v[1] * b2, sol.value, 1e-10);
  }
}

TEST(Transport, BeatsRandomFeasiblePlans) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.1, 3);
  Eigen::MatrixXd C(4, 5);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 5; ++j) C(i, j) = u(rng);
  Eigen::VectorXd a(4), b(5);
  for (int i = 0; i < 4; ++i) a[i] = u(rng);
  for (int j = 0; j < 5; ++j) b[j] = u(rng);
  b *= a.sum() / b.sum();
  auto sol = solve_transport(C, a, b);
  for (int trial = 0; trial < 100; ++trial) {
    // Random feasible plan by the north-west rule on shuffled rows and columns.
    std::vector<int> rows{0, 1, 2, 3}, cols{0, 1, 2, 3, 4};
    std::shuffle(rows.begin(), rows.end(), rng);
    std::shuffle(cols.begin(), cols.end(), rng);
    Eigen::VectorXd ra = a, rb = b;
    double cost = 0.0;
    std::size_t i = 0, j = 0;
    while (i < rows.size() && j < cols.size()) {
      const double m = std::min(ra[rows[i]], rb[cols[j]]);
      cost += m * C(rows[i], cols[j]);
      ra[rows[i]] -= m;
      rb[cols[j]] -= m;
      if (ra[rows[i]] <= 1e-14) ++i;
      else ++j;
    }
    EXPECT_LE(sol.value, cost + 1e-12);
  }
}

TEST(OtSubproblem, SingleDiracAndZeroMass) {
  auto net = grid(4);
  std::vector<double> t(static_cast<std::size_t>(net.num_arcs()), 1.0);
  auto r = ot_subproblem(net, t, marginals({{0, 2.0}}, {{15, 2.0}}));
  EXPECT_NEAR(r.value, 2.0 * 6, 1e-12);
  EXPECT_DOUBLE_EQ(r.plan.at(0, 15), 2.0);
  auto z = ot_subproblem(net, t, marginals({{0, 0.0}}, {{15, 0.0}}));
  EXPECT_EQ(z.value, 0.0);
  EXPECT_EQ(z.plan.total(), 0.0);
  EXPECT_THROW(ot_subproblem(net, t, marginals({{0, 1.0}}, {{15, 2.0}})), InvalidArgument);
}

TEST(OtSubproblem, TwoByTwoOnNetwork) {
  auto net = grid(5);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.2, 2);
  std::vector<double> t(static_cast<std::size_t>(net.num_arcs()));
  for (auto& v : t) v = u(rng);
  const int s1 = 0, s2 = 4, k1 = 20, k2 = 24;
  auto f = marginals({{s1, 0.7}, {s2, 0.5}}, {{k1, 0.4}, {k2, 0.8}});
  Eigen::Matrix2d C;
  auto b1 = oracle::bellman_ford(net, t, s1), b2 = oracle::bellman_ford(net, t, s2);
  C << b1[k1], b1[k2], b2[k1], b2[k2];
  EXPECT_NEAR(ot_subproblem(net, t, f).value, oracle::ot_2x2(C, 0.7, 0.5, 0.4, 0.8), 1e-12);
}

TEST(OtSubproblem, UnreachableSinkIsInfeasible) {
  auto fam = DirectionFamily::cartesian(2);
  auto net = Network::from_arc_list(1.0, {fixture::v2(0, 0), fixture::v2(1, 0)}, {{0, 1, 0}}, fam);
  EXPECT_THROW(ot_subproblem(net, {1.0}, marginals({{1, 1.0}}, {{0, 1.0}})), InfeasibleError);
  EXPECT_THROW(solve_longterm(net, PowerLawModel::uniform(2, 4, 1, 1), marginals({{1, 1.0}}, {{0, 1.0}})), InfeasibleError);
}

TEST(LongTerm, DiracMarginalsReduceToShortTerm) {
  auto net = grid(6);
  auto model = PowerLawModel::uniform(1.5, 4, 1, 0.5);
  const int s = grid_node(net, 6, 1, 1), t = grid_node(net, 6, 4, 3);
  auto lt = solve_longterm(net, model, marginals({{s, 1.3}}, {{t, 1.3}}));
  TransportPlan plan;
  plan.add(s, t, 1.3);
  auto st = solve_beckmann(net, model, plan, {5000, 1e-10});
  for (int a = 0; a < net.num_arcs(); ++a)
    EXPECT_NEAR(lt.flow.arc_masses[static_cast<std::size_t>(a)], st.flow.arc_masses[static_cast<std::size_t>(a)], 1e-6);
  EXPECT_NEAR(lt.plan.at(s, t), 1.3, 1e-12);
  EXPECT_LE(lt.rel_gap, 1e-6);
}

TEST(LongTerm, SymmetricInstanceSplitsEvenly) {
  // Two sinks mirrored across the source's column.
  auto net = grid(5);
  auto model = PowerLawModel::uniform(2, 4, 1, 1);
  const int s = grid_node(net, 5, 2, 0), k1 = grid_node(net, 5, 0, 4), k2 = grid_node(net, 5, 4, 4);
  auto lt = solve_longterm(net, model, marginals({{s, 1.0}}, {{k1, 0.5}, {k2, 0.5}}));
  EXPECT_NEAR(lt.plan.at(s, k1), 0.5, 1e-9);
  EXPECT_NEAR(lt.plan.at(s, k2), 0.5, 1e-9);
}

TEST(LongTerm, FreeFlowDominatedPlanIsOptimalTransport) {
  // Nearly free-flow costs: the chosen coupling is the OT plan of free-flow times.
  auto net = grid(5);
  auto model = PowerLawModel::uniform(2, 4, 1e-9, 1);
  const int s1 = grid_node(net, 5, 0, 0), s2 = grid_node(net, 5, 4, 0);
  const int k1 = grid_node(net, 5, 0, 4), k2 = grid_node(net, 5, 4, 4);
  auto f = marginals({{s1, 1.0}, {s2, 1.0}}, {{k1, 1.0}, {k2, 1.0}});
  auto lt = solve_longterm(net, model, f);
  EXPECT_NEAR(lt.plan.at(s1, k1), 1.0, 1e-6);
  EXPECT_NEAR(lt.plan.at(s2, k2), 1.0, 1e-6);
}

TEST(LongTerm, DominatesEveryFixedPlan) {
  auto net = grid(5);
  auto model = PowerLawModel::uniform(1.5, 4, 1, 0.3);
  const int s1 = 0, s2 = 4, k1 = 22, k2 = 24;
  auto f = marginals({{s1, 0.6}, {s2, 0.9}}, {{k1, 0.8}, {k2, 0.7}});
  auto lt = solve_longterm(net, model, f);
  for (double x : {0.1, 0.3, 0.5, 0.6}) {
    TransportPlan plan;
    plan.add(s1, k1, x);
    plan.add(s1, k2, 0.6 - x);
    plan.add(s2, k1, 0.8 - x);
    plan.add(s2, k2, 0.7 - (0.6 - x));
    auto st = solve_beckmann(net, model, plan, {5000, 1e-10});
    EXPECT_LE(lt.objective, beckmann_objective(model, net, st.flow.arc_masses) + 1e-9);
  }
}

TEST(LongTerm, OtCertificateAndStrongDuality) {
  auto net = build_triangular(Domain::parse("disk:0,0,1"), 0.2);
  auto model = PowerLawModel::uniform(2, 6, 1, 0.5);
  auto f = marginals({{0, 1.0}, {5, 0.5}}, {{net.num_nodes() - 1, 0.75}, {net.num_nodes() / 2, 0.75}});
  auto lt = solve_longterm(net, model, f);
  EXPECT_LE(ot_certificate(net, model, lt.flow, lt.plan, f), 1e-6);
  auto dv = dual_longterm_value(net, model, f, xi_from_flow(net, model, lt.flow));
  EXPECT_NEAR(-dv.value, lt.objective, 1e-4 * lt.objective);
}

TEST(LongTermDual, DiracMatchesShortTermDual) {
  auto net = grid(4);
  auto model = PowerLawModel::uniform(2, 4, 1, 1);
  std::vector<double> xi(static_cast<std::size_t>(net.num_arcs()));
  for (std::size_t a = 0; a < xi.size(); ++a) xi[a] = 1 + 0.2 * static_cast<double>(a % 5);
  auto metric = make_metric(net, xi, 2);
  TransportPlan plan;
  plan.add(0, 15, 2.0);
  auto a = dual_longterm_value(net, model, marginals({{0, 2.0}}, {{15, 2.0}}), metric);
  auto b = J_eps(net, model, plan, metric);
  EXPECT_NEAR(a.value, b.value, 1e-12);
  auto c = dual_longterm_value(net, model, marginals({{0, 6.0}}, {{15, 6.0}}), metric);
  EXPECT_NEAR(c.I1, 3 * a.I1, 1e-12);
}

TEST(GStar, Sanity) {
  auto fam = DirectionFamily::cartesian(2);
  auto model = PowerLawModel::uniform(2, 4, 1, 0.5);
  EXPECT_EQ(G_star(fam, model, Vec::Zero(2), Vec::Zero(2)), 0.0);
  // Only +x is active for z = (2, 0): (2 - 0.5)^2 / 2.
  EXPECT_NEAR(G_star(fam, model, Vec::Zero(2), fixture::v2(2, 0)), 1.5 * 1.5 / 2, 1e-14);
  auto homog = PowerLawModel::uniform(3, 4, 1, 0);
  const Vec z = fixture::v2(0.7, -1.2);
  EXPECT_NEAR(G_star(fam, homog, Vec::Zero(2), 2 * z), std::pow(2, 1.5) * G_star(fam, homog, Vec::Zero(2), z), 1e-12);
}
