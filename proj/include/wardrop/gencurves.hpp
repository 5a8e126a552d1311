#pragma once

#include <cmath>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

#include "assignment.hpp"
#include "continuum.hpp"
#include "lp.hpp"
#include "network.hpp"

namespace wardrop {

/// Piecewise affine curve sigma on [0, 1] with a piecewise constant
/// decomposition rho_k >= 0 of its velocity along the family directions.
struct GeneralizedCurve {
  std::vector<Vec> points;    // sigma at the knots
  std::vector<double> knots;  // 0 = t_0 < ... < t_L = 1
  std::vector<Vec> rho;       // one N-vector per piece
  std::vector<int> nodes;     // network nodes at the knots, empty if not network-borne
  std::vector<int> arcs;      // network arc of each piece, empty if not network-borne

  int pieces() const { return static_cast<int>(rho.size()); }
  double dt(int i) const { return knots[static_cast<std::size_t>(i) + 1] - knots[static_cast<std::size_t>(i)]; }
  Vec velocity(int i) const {
    return (points[static_cast<std::size_t>(i) + 1] - points[static_cast<std::size_t>(i)]) / dt(i);
  }
  Vec midpoint(int i) const {
    return 0.5 * (points[static_cast<std::size_t>(i)] + points[static_cast<std::size_t>(i) + 1]);
  }
  double length() const {
    double s = 0.0;
    for (std::size_t i = 0; i + 1 < points.size(); ++i) s += (points[i + 1] - points[i]).norm();
    return s;
  }
  /// sum_k of the L^1 norms of rho_k.
  double rho_l1() const {
    double s = 0.0;
    for (int i = 0; i < pieces(); ++i) s += rho[static_cast<std::size_t>(i)].sum() * dt(i);
    return s;
  }
};

/// max over pieces of |sigma'(t) - sum_k v_k(sigma(t)) rho_k(t)| at piece midpoints.
inline double decomposition_error(const DirectionFamily& family, const GeneralizedCurve& c) {
  double worst = 0.0;
  for (int i = 0; i < c.pieces(); ++i) {
    const Vec r = c.velocity(i) - family.directions_at(c.midpoint(i)) * c.rho[static_cast<std::size_t>(i)];
    worst = std::max(worst, r.norm());
  }
  return worst;
}

/// Lift of a network path given by its arcs: uniform knots k/L and rho equal
/// to L |e| on the class of the k-th arc.
inline GeneralizedCurve lift_arcs(const Network& net, int source, const std::vector<int>& arcs) {
  GeneralizedCurve c;
  c.nodes = path_nodes(net, source, arcs);
  c.arcs = arcs;
  const auto L = static_cast<double>(arcs.size());
  for (int v : c.nodes) c.points.push_back(net.node(v));
  if (arcs.empty()) {  // a point: one idle piece
    c.points.push_back(c.points.front());
    c.knots = {0.0, 1.0};
    c.rho.push_back(Vec::Zero(net.family().size()));
    return c;
  }
  for (std::size_t k = 0; k <= arcs.size(); ++k) c.knots.push_back(static_cast<double>(k) / L);
  c.knots.back() = 1.0;
  for (int a : arcs) {
    Vec r = Vec::Zero(net.family().size());
    r[net.arc(a).cls] = L * net.arc(a).length;
    c.rho.push_back(std::move(r));
  }
  return c;
}

/// Lift of a node sequence; consecutive nodes must be joined by an arc (the
/// smallest arc id is used when several are).
inline GeneralizedCurve lift_path(const Network& net, const std::vector<int>& nodes) {
  if (nodes.empty()) throw InvalidArgument("not a path: no nodes");
  std::vector<int> arcs;
  for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
    const int a = net.find_arc(nodes[i], nodes[i + 1]);
    if (a < 0)
      throw InvalidArgument("not a path: no arc " + std::to_string(nodes[i]) + " -> " + std::to_string(nodes[i + 1]));
    arcs.push_back(a);
  }
  return lift_arcs(net, nodes.front(), arcs);
}

/// Constant-speed reparameterization: knots move to arclength fractions and
/// rho is multiplied by l(sigma) / |sigma'|. Pieces where sigma stands still
/// have zero duration afterwards and are dropped.
inline GeneralizedCurve reparameterize(const GeneralizedCurve& c) {
  const double l = c.length();
  if (!(l > 0)) throw InvalidArgument("cannot reparameterize a curve of zero length");
  GeneralizedCurve out;
  out.points.push_back(c.points.front());
  out.knots.push_back(0.0);
  if (!c.nodes.empty()) out.nodes.push_back(c.nodes.front());
  double s = 0.0;
  for (int i = 0; i < c.pieces(); ++i) {
    const auto ui = static_cast<std::size_t>(i);
    const double seg = (c.points[ui + 1] - c.points[ui]).norm();
    if (seg == 0.0) continue;
    s += seg;
    const double speed = seg / c.dt(i);
    out.points.push_back(c.points[ui + 1]);
    out.knots.push_back(s / l);
    out.rho.push_back(c.rho[ui] * (l / speed));
    if (!c.nodes.empty()) out.nodes.push_back(c.nodes[ui + 1]);
    if (!c.arcs.empty()) out.arcs.push_back(c.arcs[ui]);
  }
  out.knots.back() = 1.0;
  return out;
}

/// L_xi(sigma, rho) = sum_k int_0^1 xi(sigma(t), v_k(sigma(t))) rho_k(t) dt with
/// 8-point Gauss-Legendre on each piece (exact for polynomial xi of degree <= 15).
inline double L_xi(const DirectionFamily& family, const GeneralizedCurve& c, const XiField& xi) {
  using Rule = boost::math::quadrature::gauss<double, 8>;
  double s = 0.0;
  for (int i = 0; i < c.pieces(); ++i) {
    const auto& r = c.rho[static_cast<std::size_t>(i)];
    if (r.isZero(0.0)) continue;
    const Vec& a = c.points[static_cast<std::size_t>(i)];
    const Vec& b = c.points[static_cast<std::size_t>(i) + 1];
    auto f = [&](double u) {
      const Vec x = a + 0.5 * (u + 1) * (b - a);
      double v = 0.0;
      for (int k = 0; k < family.size(); ++k)
        if (r[k] != 0) v += xi(x, k) * r[k];
      return v;
    };
    s += 0.5 * c.dt(i) * Rule::integrate(f, -1.0, 1.0);
  }
  return s;
}

/// L_xi for a metric that is constant on each network arc.
inline double L_xi_arcs(const GeneralizedCurve& c, const std::vector<double>& arc_values) {
  if (static_cast<int>(c.arcs.size()) != c.pieces()) throw InvalidArgument("curve is not network-borne");
  double s = 0.0;
  for (int i = 0; i < c.pieces(); ++i) s += arc_values[static_cast<std::size_t>(c.arcs[static_cast<std::size_t>(i)])] * c.rho[static_cast<std::size_t>(i)].sum() * c.dt(i);
  return s;
}

// ---------------------------------------------------------------------------
// Bounded decompositions.
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<Vec> sphere_samples(int d, int count, unsigned seed = 7) {
  std::vector<Vec> out;
  if (d == 2) {
    for (int i = 0; i < count; ++i) {
      const double a = 2 * std::numbers::pi * i / count;
      Vec u(2);
      u << std::cos(a), std::sin(a);
      out.push_back(u);
    }
    return out;
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  for (int i = 0; i < count; ++i) {
    Vec u(d);
    for (int j = 0; j < d; ++j) u[j] = nd(rng);
    out.push_back(u / u.norm());
  }
  return out;
}

// Nonnegative lambda with sum 1 and sum lambda_k v_k = 0, if any.
inline std::optional<Vec> null_combination(const Eigen::MatrixXd& V) {
  const Eigen::Index d = V.rows(), n = V.cols();
  Eigen::MatrixXd A(d + 1, n);
  A.topRows(d) = V;
  A.row(d).setOnes();
  Vec b = Vec::Zero(d + 1);
  b[d] = 1.0;
  auto r = lp::solve(Vec::Zero(n), A, b);
  if (r.status != lp::Status::optimal) return std::nullopt;
  return r.x;
}

}  // namespace detail

/// Cone separation constant: the smallest, over sample points x and over
/// index sets I whose directions have 0 outside their convex hull, of
/// max_u min_{k in I} v_k(x).u with u ranging over sampled unit vectors
/// (512 in 2d, 2048 otherwise). Sampling can only lower the value, so
/// 1 / cone_constant is a valid bound constant.
inline double cone_constant(const DirectionFamily& family, const std::vector<Vec>& points, int samples = 0) {
  const int n = family.size();
  if (n > 20) throw InvalidArgument("too many directions for subset enumeration");
  if (samples <= 0) samples = family.dim() == 2 ? 512 : 2048;
  const auto us = detail::sphere_samples(family.dim(), samples);
  double delta = 1.0;
  for (const auto& x : points) {
    const Eigen::MatrixXd V = family.directions_at(x);
    for (unsigned mask = 1; mask < (1u << n); ++mask) {
      std::vector<int> idx;
      for (int k = 0; k < n; ++k)
        if (mask & (1u << k)) idx.push_back(k);
      Eigen::MatrixXd S(V.rows(), static_cast<Eigen::Index>(idx.size()));
      for (std::size_t j = 0; j < idx.size(); ++j) S.col(static_cast<Eigen::Index>(j)) = V.col(idx[j]);
      if (detail::null_combination(S)) continue;
      double best = -kInfinity;
      for (const auto& u : us) best = std::max(best, (S.transpose() * u).minCoeff());
      if (!(best > 0)) throw Error("cone separation not resolved by the direction sample");
      delta = std::min(delta, best);
    }
  }
  return delta;
}

/// Removes null conical combinations from each piece's rho until 0 is no
/// longer in the convex hull of the active directions. The result is
/// componentwise below rho and decomposes the same velocity.
inline GeneralizedCurve reduce_decomposition(const DirectionFamily& family, const GeneralizedCurve& c) {
  GeneralizedCurve out = c;
  const int n = family.size();
  for (int i = 0; i < out.pieces(); ++i) {
    Vec& r = out.rho[static_cast<std::size_t>(i)];
    const Eigen::MatrixXd V = family.directions_at(out.midpoint(i));
    const double scale = std::max(r.maxCoeff(), 0.0);
    for (int k = 0; k < n; ++k)
      if (r[k] <= 1e-15 * scale) r[k] = 0.0;
    while (true) {
      std::vector<int> act;
      for (int k = 0; k < n; ++k)
        if (r[k] > 0) act.push_back(k);
      if (act.empty()) break;
      Eigen::MatrixXd S(V.rows(), static_cast<Eigen::Index>(act.size()));
      for (std::size_t j = 0; j < act.size(); ++j) S.col(static_cast<Eigen::Index>(j)) = V.col(act[j]);
      auto lam = detail::null_combination(S);
      if (!lam) break;
      double step = kInfinity;
      int hit = -1;
      for (std::size_t j = 0; j < act.size(); ++j) {
        const double l = (*lam)[static_cast<Eigen::Index>(j)];
        if (l > 1e-14 && r[act[j]] / l < step) {
          step = r[act[j]] / l;
          hit = act[j];
        }
      }
      if (hit < 0) break;
      for (std::size_t j = 0; j < act.size(); ++j)
        r[act[j]] = std::max(0.0, r[act[j]] - step * (*lam)[static_cast<Eigen::Index>(j)]);
      r[hit] = 0.0;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Discrete measures on generalized curves.
// ---------------------------------------------------------------------------

struct CurveAtom {
  GeneralizedCurve curve;
  double weight = 0.0;
};

struct GeneralizedCurveMeasure {
  std::vector<CurveAtom> atoms;
  bool probability = false;

  double total() const {
    double s = 0.0;
    for (const auto& a : atoms) s += a.weight;
    return s;
  }
  GeneralizedCurveMeasure normalized() const {
    GeneralizedCurveMeasure m = *this;
    const double t = total();
    if (!(t > 0)) throw InvalidArgument("cannot normalize an empty measure");
    for (auto& a : m.atoms) a.weight /= t;
    m.probability = true;
    return m;
  }
};

/// One atom per carried path, weight eps^{d/2-1} w, curve reparameterized to
/// constant speed.
inline GeneralizedCurveMeasure build_Q_eps(const Network& net, const FlowState& flow) {
  GeneralizedCurveMeasure q;
  const double factor = std::pow(net.epsilon(), 0.5 * net.dim() - 1);
  for (const auto& p : flow.paths) {
    if (!(p.flow > 0)) continue;
    auto c = lift_arcs(net, p.source, p.arcs);
    q.atoms.push_back({p.arcs.empty() ? std::move(c) : reparameterize(c), factor * p.flow});
  }
  return q;
}

/// Pairing of m^Q with xi: sum over atoms of weight * L_xi.
inline double m_Q(const DirectionFamily& family, const GeneralizedCurveMeasure& q, const XiField& xi) {
  double s = 0.0;
  for (const auto& a : q.atoms) s += a.weight * L_xi(family, a.curve, xi);
  return s;
}

/// Pairing of m^Q with a metric that is constant on each network arc.
inline double m_Q_arcs(const GeneralizedCurveMeasure& q, const std::vector<double>& arc_values) {
  double s = 0.0;
  for (const auto& a : q.atoms) s += a.weight * L_xi_arcs(a.curve, arc_values);
  return s;
}

/// m^Q_k binned on the quadrature cells: entry (cell, k) is the weighted
/// integral of rho_k over the times sigma spends in the cell. Each piece is
/// split into sub-segments no longer than a quarter cell.
inline Eigen::MatrixXd m_Q_density(const DirectionFamily& family, const GeneralizedCurveMeasure& q,
                                   const CellQuadrature& quad) {
  std::map<long, Eigen::Index> row;
  for (std::size_t i = 0; i < quad.cell_index.size(); ++i) row[quad.cell_index[i]] = static_cast<Eigen::Index>(i);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(quad.centers.size()), family.size());
  for (const auto& atom : q.atoms) {
    const auto& c = atom.curve;
    for (int i = 0; i < c.pieces(); ++i) {
      const auto& r = c.rho[static_cast<std::size_t>(i)];
      if (r.isZero(0.0)) continue;
      const Vec& a = c.points[static_cast<std::size_t>(i)];
      const Vec& b = c.points[static_cast<std::size_t>(i) + 1];
      const int sub = std::max(1, static_cast<int>(std::ceil(4 * (b - a).norm() / quad.h)));
      const double w = atom.weight * c.dt(i) / sub;
      for (int s = 0; s < sub; ++s) {
        const Vec x = a + (s + 0.5) / sub * (b - a);
        auto it = row.find(quad.locate(x));
        if (it == row.end()) continue;
        out.row(it->second) += w * r.transpose();
      }
    }
  }
  return out;
}

/// Beckmann functional of a binned density: sum over cells and classes of
/// c_k |cell| G(x, k, m_k / (c_k |cell|)).
inline double binned_beckmann(const DirectionFamily& family, const CongestionModel& model, const CellQuadrature& quad,
                              const Eigen::MatrixXd& density) {
  double s = 0.0;
  for (std::size_t i = 0; i < quad.centers.size(); ++i) {
    const Vec& x = quad.centers[i];
    const double vol = quad.weights[i];
    for (int k = 0; k < family.size(); ++k) {
      const double theta = family.coefficient(x, k) * vol;
      if (!(theta > 0)) continue;
      s += theta * model.G(x, k, density(static_cast<Eigen::Index>(i), k) / theta);
    }
  }
  return s;
}

/// Push-forward of the measure under (sigma(0), sigma(1)), keyed by the
/// endpoint nodes of network-borne curves.
inline std::map<OdPair, double> endpoint_plan(const GeneralizedCurveMeasure& q) {
  std::map<OdPair, double> out;
  for (const auto& a : q.atoms) {
    if (a.curve.nodes.empty()) throw InvalidArgument("curve is not network-borne");
    out[{a.curve.nodes.front(), a.curve.nodes.back()}] += a.weight;
  }
  return out;
}

/// Largest deviation between the endpoint push-forward of the normalized
/// measure and the normalized plan.
inline double plan_consistency_error(const GeneralizedCurveMeasure& q, const TransportPlan& plan) {
  auto push = endpoint_plan(q.normalized());
  const double total = plan.total();
  double worst = 0.0;
  for (const auto& [od, g] : plan.entries()) {
    auto it = push.find(od);
    worst = std::max(worst, std::abs((it == push.end() ? 0.0 : it->second) - g / total));
  }
  for (const auto& [od, w] : push)
    if (plan.entries().count(od) == 0) worst = std::max(worst, w);
  return worst;
}

}  // namespace wardrop
