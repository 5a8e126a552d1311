#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "wardrop/wardrop.hpp"

using namespace wardrop;
using fixture::grid;
using fixture::grid_node;
using fixture::v2;

namespace {

GeneralizedCurve two_piece(double first_len, double second_len) {
  // sigma moves along +x for t in [0, 1/2] and +y for t in [1/2, 1].
  GeneralizedCurve c;
  c.points = {v2(0, 0), v2(first_len, 0), v2(first_len, second_len)};
  c.knots = {0.0, 0.5, 1.0};
  Vec r1 = Vec::Zero(4), r2 = Vec::Zero(4);
  r1[0] = 2 * first_len;
  r2[1] = 2 * second_len;
  c.rho = {r1, r2};
  return c;
}

Vec vec_of(std::initializer_list<double> xs) {
  Vec v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

}  // namespace

TEST(Lift, SingleArc) {
  auto net = build_cartesian(Domain::box(Vec::Zero(2), Vec::Ones(2)), 0.25);
  const int s = net.nearest_node(v2(0, 0)), t = net.nearest_node(v2(0.25, 0));
  auto c = lift_arcs(net, s, {net.find_arc(s, t)});
  ASSERT_EQ(c.pieces(), 1);
  EXPECT_DOUBLE_EQ(c.rho[0][0], 0.25);
  EXPECT_EQ(c.rho[0].sum(), c.rho[0][0]);
  EXPECT_EQ(decomposition_error(net.family(), c), 0.0);
  EXPECT_EQ(c.nodes, (std::vector<int>{s, t}));
}

TEST(Lift, Staircase) {
  auto net = grid(3);
  std::vector<int> nodes{grid_node(net, 3, 0, 0), grid_node(net, 3, 1, 0), grid_node(net, 3, 1, 1), grid_node(net, 3, 2, 1),
                         grid_node(net, 3, 2, 2)};
  auto c = lift_path(net, nodes);
  ASSERT_EQ(c.pieces(), 4);
  for (double k : c.knots) EXPECT_NEAR(k * 4, std::round(k * 4), 1e-15);
  // Integral of rho over [0, 1] per class: total length in +x and +y.
  Vec tot = Vec::Zero(4);
  for (int i = 0; i < c.pieces(); ++i) tot += c.rho[static_cast<std::size_t>(i)] * c.dt(i);
  EXPECT_NEAR(tot[0], 1.0, 1e-15);
  EXPECT_NEAR(tot[1], 1.0, 1e-15);
  EXPECT_EQ(tot[2] + tot[3], 0.0);
  EXPECT_LT(decomposition_error(net.family(), c), 1e-14);
  EXPECT_THROW(lift_path(net, {nodes[0], nodes[2]}), InvalidArgument);
}

TEST(Reparameterize, MovesKnotsToArclength) {
  auto c = two_piece(1.0, 3.0);
  auto r = reparameterize(c);
  ASSERT_EQ(r.pieces(), 2);
  EXPECT_NEAR(r.knots[1], 0.25, 1e-15);
  EXPECT_NEAR(r.velocity(0).norm(), 4.0, 1e-14);
  EXPECT_NEAR(r.velocity(1).norm(), 4.0, 1e-14);
  EXPECT_NEAR(r.rho_l1(), c.rho_l1(), 1e-14);
  EXPECT_LT(decomposition_error(DirectionFamily::cartesian(2), r), 1e-13);
  // Constant speed input is a fixed point.
  auto again = reparameterize(r);
  for (std::size_t i = 0; i < r.knots.size(); ++i) EXPECT_NEAR(again.knots[i], r.knots[i], 1e-15);
}

TEST(Reparameterize, PreservesLagrangianAndDropsStillPieces) {
  auto fam = DirectionFamily::cartesian(2);
  std::vector<Polynomial> ps;
  for (int k = 0; k < 4; ++k) ps.push_back(Polynomial({Monomial{1.0, {}}, Monomial{1.0 + k, {1}}, Monomial{0.5, {0, 2}}}));
  auto xi = XiField::polynomial(ps);
  auto c = two_piece(0.4, 1.7);
  EXPECT_NEAR(L_xi(fam, reparameterize(c), xi), L_xi(fam, c, xi), 1e-12);

  GeneralizedCurve still = c;
  still.points.insert(still.points.begin() + 1, still.points[1]);
  still.knots = {0.0, 0.2, 0.5, 1.0};
  still.rho.insert(still.rho.begin() + 1, Vec::Zero(4));
  still.rho[0] *= 0.5 / 0.2;  // first piece now lasts 0.2
  auto r = reparameterize(still);
  EXPECT_EQ(r.pieces(), 2);
  EXPECT_NEAR(L_xi(fam, r, xi), L_xi(fam, still, xi), 1e-12);
}

TEST(Lagrangian, ArcValuesMatchFieldOnLift) {
  auto net = grid(5);
  auto xi = XiField::constant({1.0, 2.0, 3.0, 4.0});
  std::vector<double> arc_xi(static_cast<std::size_t>(net.num_arcs()));
  for (int a = 0; a < net.num_arcs(); ++a) arc_xi[static_cast<std::size_t>(a)] = 1.0 + net.arc(a).cls;
  auto c = lift_path(net, {grid_node(net, 5, 0, 0), grid_node(net, 5, 1, 0), grid_node(net, 5, 1, 1), grid_node(net, 5, 0, 1)});
  EXPECT_NEAR(L_xi(net.family(), c, xi), L_xi_arcs(c, arc_xi), 1e-14);
  // +x, +y, -x: 0.25 (1 + 2 + 3).
  EXPECT_NEAR(L_xi_arcs(c, arc_xi), 0.25 * 6, 1e-14);
}

TEST(Reduce, CancelsOpposingDirections) {
  auto fam = DirectionFamily::cartesian(2);
  GeneralizedCurve c;
  c.points = {v2(0, 0), v2(1, 0)};
  c.knots = {0.0, 1.0};
  c.rho = {vec_of({3.0, 0.5, 2.0, 0.5})};
  auto r = reduce_decomposition(fam, c);
  EXPECT_NEAR(r.rho[0][0], 1.0, 1e-14);
  EXPECT_EQ(r.rho[0][2], 0.0);
  EXPECT_EQ(r.rho[0][1] * r.rho[0][3], 0.0);
  EXPECT_LT(decomposition_error(fam, r), 1e-14);
}

TEST(Reduce, MinimalInputUnchanged) {
  auto fam = DirectionFamily::cartesian(2);
  auto c = two_piece(1.0, 2.0);
  auto r = reduce_decomposition(fam, c);
  for (int i = 0; i < c.pieces(); ++i) EXPECT_EQ(r.rho[static_cast<std::size_t>(i)], c.rho[static_cast<std::size_t>(i)]);
}

TEST(Reduce, BoundedByConeConstant) {
  auto fam = DirectionFamily::hexagonal();
  const double delta = cone_constant(fam, {Vec::Zero(2)});
  EXPECT_GT(delta, 0.0);
  EXPECT_LE(delta, 1.0);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0, 2);
  const auto V = fam.directions_at(Vec::Zero(2));
  for (int i = 0; i < 100; ++i) {
    Vec rho(6);
    for (int k = 0; k < 6; ++k) rho[k] = u(rng);
    GeneralizedCurve c;
    c.points = {Vec::Zero(2), V * rho};
    c.knots = {0.0, 1.0};
    c.rho = {rho};
    auto r = reduce_decomposition(fam, c);
    const Vec& rb = r.rho[0];
    EXPECT_LT(decomposition_error(fam, r), 1e-12);
    EXPECT_TRUE(((rb.array() <= rho.array() + 1e-14)).all());
    EXPECT_LE(rb.sum(), c.velocity(0).norm() / delta + 1e-12);
    // The reduced sum is never below the cheapest decomposition.
    EXPECT_GE(rb.sum(), oracle::basis_enumeration(V, c.velocity(0), Vec::Ones(6)) - 1e-12);
  }
}

TEST(CurveMeasure, WeightsFollowDimension) {
  auto net = grid(5);
  const int n0 = grid_node(net, 5, 0, 0), n1 = grid_node(net, 5, 1, 0), n2 = grid_node(net, 5, 1, 1);
  FlowState f;
  f.paths.push_back({n0, n2, {n0, n1, n2}, {net.find_arc(n0, n1), net.find_arc(n1, n2)}, 0.7});
  f.arc_masses = masses_from_paths(net.num_arcs(), f.paths);
  auto q = build_Q_eps(net, f);
  ASSERT_EQ(q.atoms.size(), 1u);
  EXPECT_DOUBLE_EQ(q.atoms[0].weight, 0.7);  // d = 2

  auto net4 = build_cartesian(Domain::box(Vec::Zero(4), Vec::Ones(4)), 0.25);
  FlowState f4;
  f4.paths.push_back({0, net4.arc(0).head, {0, net4.arc(0).head}, {0}, 2.0});
  auto q4 = build_Q_eps(net4, f4);
  EXPECT_NEAR(q4.atoms[0].weight, 0.25 * 2.0, 1e-15);

  GeneralizedCurveMeasure empty;
  EXPECT_EQ(empty.total(), 0.0);
  EXPECT_THROW(empty.normalized(), InvalidArgument);
}

TEST(CurveMeasure, BookkeepingAndPlanConsistency) {
  auto net = grid(6);
  auto model = PowerLawModel::uniform(1.5, 4, 1, 1);
  TransportPlan plan;
  plan.add(0, 35, 1.0);
  plan.add(5, 30, 0.5);
  auto res = solve_beckmann(net, model, plan);
  auto q = build_Q_eps(net, res.flow);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 2);
  std::vector<double> xi(static_cast<std::size_t>(net.num_arcs()));
  for (auto& v : xi) v = u(rng);
  double direct = 0.0;
  for (int a = 0; a < net.num_arcs(); ++a)
    direct += net.arc(a).length * res.flow.arc_masses[static_cast<std::size_t>(a)] * xi[static_cast<std::size_t>(a)];
  EXPECT_NEAR(m_Q_arcs(q, xi), direct, 1e-12 * direct);
  EXPECT_LT(plan_consistency_error(q, plan), 1e-12);
  EXPECT_NEAR(q.normalized().total(), 1.0, 1e-14);

  // Binned density carries the same total rho mass.
  auto quad = make_quadrature(Domain::box(Vec::Zero(2), Vec::Ones(2)), 1.0 / 16);
  auto dens = m_Q_density(net.family(), q, quad);
  EXPECT_NEAR(dens.sum(), m_Q_arcs(q, std::vector<double>(xi.size(), 1.0)), 1e-10);
  EXPECT_GT(binned_beckmann(net.family(), model, quad, dens), 0.0);
}

TEST(CurveMeasure, Json) {
  auto net = grid(3);
  const int a = grid_node(net, 3, 0, 0), b = grid_node(net, 3, 1, 0);
  FlowState f;
  f.paths.push_back({a, b, {a, b}, {net.find_arc(a, b)}, 0.5});
  auto j = io::measure_to_json(build_Q_eps(net, f));
  ASSERT_EQ(j["atoms"].size(), 1u);
  EXPECT_EQ(j["atoms"][0]["nodes"], (std::vector<int>{a, b}));
  EXPECT_EQ(j["atoms"][0]["weight"].get<double>(), 0.5);
  EXPECT_EQ(j["atoms"][0]["rho_knots"][0].size(), 6u);
}
