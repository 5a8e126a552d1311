#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "wardrop/wardrop.hpp"

using namespace wardrop;

namespace {

const Vec kX = Vec::Zero(2);

PowerLawModel single(double q, double a, double delta) { return PowerLawModel::uniform(q, 1, a, delta); }

}  // namespace

TEST(PowerLaw, TimeValues) {
  EXPECT_DOUBLE_EQ(single(2, 1, 1).g(kX, 0, 0), 1.0);
  EXPECT_DOUBLE_EQ(single(2, 1, 1).g(kX, 0, 3), 4.0);
  EXPECT_NEAR(single(1.5, 2, 0.5).g(kX, 0, 4), 4.5, 1e-15);
  EXPECT_THROW(single(2, 1, 1).g(kX, 0, -1), InvalidArgument);
}

TEST(PowerLaw, CostValues) {
  auto m = single(2, 1, 1);
  EXPECT_EQ(m.G(kX, 0, 0), 0.0);
  EXPECT_NEAR(m.G(kX, 0, 3), 7.5, 1e-12);
  EXPECT_NEAR(oracle::simpson([&](double s) { return m.g(kX, 0, s); }, 0, 3), 7.5, 1e-10);
  // G(m)/m -> delta as m -> 0.
  auto m2 = single(1.7, 2.0, 0.3);
  EXPECT_NEAR(m2.G(kX, 0, 1e-9) / 1e-9, 0.3, 1e-5);
  EXPECT_THROW(m.G(kX, 0, -0.1), InvalidArgument);
}

TEST(PowerLaw, CostIsIntegralOfTime) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> uq(1.2, 3), ua(0.3, 3), ud(0.1, 2), um(0, 5);
  for (int i = 0; i < 50; ++i) {
    auto m = single(uq(rng), ua(rng), ud(rng));
    const double mass = um(rng);
    // s = mass u^4 removes the singular derivative of s^{q-1} at 0.
    auto f = [&](double u) { return m.g(kX, 0, mass * std::pow(u, 4)) * 4 * mass * std::pow(u, 3); };
    EXPECT_NEAR(m.G(kX, 0, mass), oracle::simpson(f, 0, 1), 1e-9 * std::max(1.0, mass));
  }
}

TEST(PowerLaw, ConjugateValues) {
  auto m = single(2, 1, 1);
  EXPECT_EQ(m.H(kX, 0, 0.5), 0.0);
  EXPECT_EQ(m.H(kX, 0, 1.0), 0.0);
  EXPECT_NEAR(m.H(kX, 0, 3), 2.0, 1e-14);
  EXPECT_NEAR(oracle::sup_conjugate(1, 1, 2, 3), 2.0, 1e-8);
  EXPECT_THROW(m.H(kX, 0, -1), InvalidArgument);
}

TEST(PowerLaw, FenchelYoungAtMaximizer) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> uq(1.2, 3), ua(0.3, 3), ud(0.0, 2), ut(0, 5);
  for (int i = 0; i < 100; ++i) {
    const double q = uq(rng), a = ua(rng), d = ud(rng), t = d + ut(rng);
    auto m = single(q, a, d);
    const double ms = std::pow((t - d) / a, 1 / (q - 1));
    EXPECT_NEAR(m.H(kX, 0, t) + m.G(kX, 0, ms), ms * t, 1e-9 * std::max(1.0, ms * t));
  }
}

TEST(PowerLaw, ConjugacyAgainstSupOracle) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> uq(1.5, 3), ua(0.5, 2), ud(0.0, 2), ut(0, 4);
  for (int i = 0; i < 200; ++i) {
    const double q = uq(rng), a = ua(rng), d = ud(rng), t = ut(rng);
    const double h = single(q, a, d).H(kX, 0, t);
    EXPECT_NEAR(h, oracle::sup_conjugate(a, d, q, t), 1e-8 * std::max(1.0, h));
  }
}

TEST(PowerLaw, DerivativeOfConjugateIsInverseTime) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> uq(1.3, 3), ua(0.5, 2), ud(0.1, 1), ut(0.2, 3);
  for (int i = 0; i < 50; ++i) {
    auto m = single(uq(rng), ua(rng), ud(rng));
    const double t = m.delta(0) + ut(rng);
    const double h = 1e-6;
    const double fd = (m.H(kX, 0, t + h) - m.H(kX, 0, t - h)) / (2 * h);
    // Inverse by bisection on g, independent of the closed form.
    double lo = 0, hi = 1;
    while (m.g(kX, 0, hi) < t) hi *= 2;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (m.g(kX, 0, mid) < t ? lo : hi) = mid;
    }
    EXPECT_NEAR(fd, lo, 1e-5 * std::max(1.0, lo));
    EXPECT_NEAR(m.g_inverse(kX, 0, t), lo, 1e-10 * std::max(1.0, lo));
  }
}

TEST(PowerLaw, ConvexityProperties) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> uq(1.2, 3), ua(0.5, 2), ud(0.1, 1), u(0, 4);
  for (int i = 0; i < 200; ++i) {
    auto m = single(uq(rng), ua(rng), ud(rng));
    const double d = m.delta(0);
    // H strictly convex beyond delta.
    const double t1 = d + u(rng) + 1e-3, t2 = t1 + 0.1 + u(rng);
    EXPECT_LT(m.H(kX, 0, 0.5 * (t1 + t2)), 0.5 * (m.H(kX, 0, t1) + m.H(kX, 0, t2)));
    // G convex, g strictly increasing.
    const double m1 = u(rng), m2 = m1 + 0.1 + u(rng);
    EXPECT_LE(m.G(kX, 0, 0.5 * (m1 + m2)), 0.5 * (m.G(kX, 0, m1) + m.G(kX, 0, m2)) + 1e-14);
    EXPECT_GT(m.g(kX, 0, m2), m.g(kX, 0, m1));
  }
}

TEST(PowerLaw, GrowthSandwich) {
  // a m^{q-1} <= g <= b (m^{q-1} + 1) with b = max(a, delta).
  auto m = single(1.6, 0.7, 1.3);
  for (double s = 0; s < 50; s += 0.37) {
    const double g = m.g(kX, 0, s), mp = std::pow(s, 0.6);
    EXPECT_LE(0.7 * mp, g);
    EXPECT_LE(g, 1.3 * (mp + 1));
  }
}

TEST(PowerLaw, SpatiallyVaryingWeight) {
  // a(x) = 1 + x1.
  PowerLawModel m(2.0, {{Polynomial({Monomial{1.0, {}}, Monomial{1.0, {1}}}), 0.5}});
  Vec x(2);
  x << 2.0, 0.0;
  EXPECT_DOUBLE_EQ(m.g(x, 0, 2.0), 3.0 * 2.0 + 0.5);
  PowerLawModel bad(2.0, {{Polynomial({Monomial{-1.0, {}}}), 0.5}});
  EXPECT_THROW(bad.g(x, 0, 1.0), InvalidArgument);
}

TEST(PowerLaw, ParameterChecks) {
  EXPECT_THROW(single(1.0, 1, 1), InvalidArgument);
  EXPECT_THROW(single(2.0, 1, -0.5), InvalidArgument);
  EXPECT_THROW(single(2, 1, 1).g(kX, 3, 1.0), InvalidArgument);
}

TEST(Rescale, PlanarArc) {
  auto m = single(2, 1, 1);
  const double eps = 0.25;
  Vec e(2);
  e << eps, 0;
  auto r = rescale(m, kX, e, 0, 0.1);
  EXPECT_NEAR(r.time, eps * m.g(kX, 0, 0.1 / eps), 1e-15);
  EXPECT_NEAR(r.xi, r.time / eps, 1e-15);
  EXPECT_NEAR(rescale(m, kX, e, 0, 0.0).time, eps * 1.0, 1e-15);
  EXPECT_THROW(rescale(m, kX, Vec::Zero(2), 0, 1.0), InvalidArgument);
}

TEST(Rescale, HigherDimensionScale) {
  auto m = PowerLawModel::uniform(1.3, 6, 2.0, 0.4);
  Vec e = Vec::Zero(3);
  e[2] = 0.5;
  const double s = std::pow(0.5, 1.5);
  auto r = rescale(m, Vec::Zero(3), e, 2, 0.2);
  EXPECT_NEAR(r.time, s * (2.0 * std::pow(0.2 / s, 0.3) + 0.4), 1e-14);
}

TEST(Rescale, RoundTripThroughInverse) {
  auto net = build_cartesian(Domain::box(Vec::Zero(2), Vec::Ones(2)), 0.1);
  auto m = PowerLawModel::uniform(1.7, 4, 1.3, 0.6);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> um(0, 3);
  for (int i = 0; i < 100; ++i) {
    const int a = static_cast<int>(rng() % static_cast<unsigned>(net.num_arcs()));
    const double mass = um(rng);
    const double t = arc_time(m, net, a, mass);
    EXPECT_NEAR(arc_mass_for_time(m, net, a, t), mass, 1e-10 * std::max(1.0, mass));
  }
}

TEST(GrowthCertify, ExactPower) {
  auto c = growth_certify(single(2, 1, 0), 2.0, {kX});
  EXPECT_NEAR(c.lambda, 0.5, 1e-12);
  EXPECT_NEAR(c.Lambda, 0.5, 1e-3);
  EXPECT_LE(c.lambda, c.Lambda);
}

TEST(GrowthCertify, ShiftedPower) {
  auto c = growth_certify(single(2, 1, 1), 2.0, {kX});
  EXPECT_GE(c.Lambda, 0.5 - 1e-3);
  EXPECT_LE(c.lambda, 0.5);
  EXPECT_GT(c.lambda, 0.0);
  // Sandwich on a sample grid.
  auto m = single(2, 1, 1);
  for (double t = 0; t <= 100; t += 0.5) {
    const double h = m.H(kX, 0, t), tp = t * t;
    EXPECT_LE(c.lambda * (tp - 1), h + 1e-12);
    EXPECT_LE(h, c.Lambda * (tp + 1) + 1e-12);
  }
}

TEST(GrowthCertify, WrongExponentFails) {
  EXPECT_THROW(growth_certify(single(2, 1, 1), 3.0, {kX}), CertificationFailure);
  EXPECT_THROW(growth_certify(single(2, 1, 1), 1.5, {kX}), CertificationFailure);
}

TEST(CustomModel, MatchesPowerLaw) {
  auto pl = single(1.8, 1.4, 0.7);
  CustomModel cm(1, 1.8, [](const Vec&, int, double m) { return 1.4 * std::pow(m, 0.8) + 0.7; });
  for (double m : {0.0, 0.3, 1.0, 4.2}) EXPECT_NEAR(cm.G(kX, 0, m), pl.G(kX, 0, m), 1e-10);
  for (double t : {0.1, 0.7, 1.5, 3.0, 9.0}) EXPECT_NEAR(cm.H(kX, 0, t), pl.H(kX, 0, t), 1e-9);
}
