#pragma once

#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <unordered_map>
#include <vector>

#include "congestion.hpp"
#include "direction_family.hpp"
#include "domain.hpp"
#include "dual.hpp"
#include "lp.hpp"
#include "network.hpp"
#include "shortest_path.hpp"

namespace wardrop {

class DisconnectedError : public Error {
 public:
  using Error::Error;
};

/// Per-class metric xi_k(x) >= 0.
class XiField {
 public:
  enum class Regularity { continuous, lp_only };
  using Fn = std::function<double(const Vec& x, int k)>;

  XiField(int classes, Fn fn, Regularity reg = Regularity::continuous)
      : n_(classes), fn_(std::move(fn)), reg_(reg) {
    if (n_ <= 0) throw InvalidArgument("field needs at least one class");
  }

  static XiField constant(std::vector<double> values) {
    for (double v : values)
      if (!(v >= 0)) throw InvalidArgument("metric values must be nonnegative");
    const int n = static_cast<int>(values.size());
    return XiField(n, [values = std::move(values)](const Vec&, int k) { return values[static_cast<std::size_t>(k)]; });
  }
  static XiField uniform(int classes, double value) {
    return constant(std::vector<double>(static_cast<std::size_t>(classes), value));
  }
  static XiField polynomial(std::vector<Polynomial> per_class) {
    const int n = static_cast<int>(per_class.size());
    return XiField(n, [p = std::move(per_class)](const Vec& x, int k) { return p[static_cast<std::size_t>(k)](x); });
  }

  /// Multilinear interpolation of grid values; values[k][flat] with the first
  /// axis varying fastest. Points outside the grid are clamped to it.
  static XiField grid(Vec origin, double spacing, std::vector<int> shape, std::vector<std::vector<double>> values,
                      Regularity reg = Regularity::continuous) {
    if (!(spacing > 0)) throw InvalidArgument("grid spacing must be positive");
    long total = 1;
    for (int s : shape) {
      if (s < 2) throw InvalidArgument("grid needs at least two points per axis");
      total *= s;
    }
    for (const auto& v : values) {
      if (static_cast<long>(v.size()) != total) throw InvalidArgument("grid value count mismatch");
      for (double x : v)
        if (!(x >= 0)) throw InvalidArgument("metric values must be nonnegative");
    }
    const int n = static_cast<int>(values.size());
    auto fn = [origin = std::move(origin), spacing, shape = std::move(shape), values = std::move(values)](
                  const Vec& x, int k) {
      const auto d = static_cast<int>(shape.size());
      std::vector<long> base(static_cast<std::size_t>(d));
      std::vector<double> frac(static_cast<std::size_t>(d));
      for (int i = 0; i < d; ++i) {
        auto ii = static_cast<std::size_t>(i);
        double u = std::clamp((x[i] - origin[i]) / spacing, 0.0, static_cast<double>(shape[ii] - 1));
        long b = std::min(static_cast<long>(std::floor(u)), static_cast<long>(shape[ii] - 2));
        base[ii] = b;
        frac[ii] = u - static_cast<double>(b);
      }
      double s = 0.0;
      for (int corner = 0; corner < (1 << d); ++corner) {
        double w = 1.0;
        long flat = 0, stride = 1;
        for (int i = 0; i < d; ++i) {
          auto ii = static_cast<std::size_t>(i);
          int bit = (corner >> i) & 1;
          w *= bit ? frac[ii] : 1 - frac[ii];
          flat += (base[ii] + bit) * stride;
          stride *= shape[ii];
        }
        if (w != 0.0) s += w * values[static_cast<std::size_t>(k)][static_cast<std::size_t>(flat)];
      }
      return s;
    };
    return XiField(n, std::move(fn), reg);
  }

  int size() const { return n_; }
  Regularity regularity() const { return reg_; }
  bool is_continuous() const { return reg_ == Regularity::continuous; }

  double operator()(const Vec& x, int k) const {
    if (k < 0 || k >= n_) throw InvalidArgument("field class out of range");
    const double v = fn_(x, k);
    if (!(v >= 0)) throw InvalidArgument("metric field is negative at a sampled point");
    return v;
  }
  Vec at(const Vec& x) const {
    Vec v(n_);
    for (int k = 0; k < n_; ++k) v[k] = (*this)(x, k);
    return v;
  }

 private:
  int n_;
  Fn fn_;
  Regularity reg_;
};

/// theta(dx, dv) = sum_k c_k(x) delta_{v_k(x)} dx, discretized by cell quadrature.
struct ThetaMeasure {
  const DirectionFamily* family = nullptr;
  CellQuadrature quad;

  ThetaMeasure(const DirectionFamily& f, const Domain& domain, double h = 1.0 / 64)
      : family(&f), quad(make_quadrature(domain, h)) {}

  /// Integral of f(x, k) against theta.
  double integrate(const std::function<double(const Vec&, int)>& f) const {
    double s = 0.0;
    for (std::size_t i = 0; i < quad.centers.size(); ++i) {
      const Vec& x = quad.centers[i];
      double inner = 0.0;
      for (int k = 0; k < family->size(); ++k) inner += family->coefficient(x, k) * f(x, k);
      s += quad.weights[i] * inner;
    }
    return s;
  }

  /// ||xi||_{L^p(theta)}.
  double norm(const XiField& xi, double p) const {
    return std::pow(integrate([&](const Vec& x, int k) { return std::pow(xi(x, k), p); }), 1.0 / p);
  }
};

// ---------------------------------------------------------------------------
// Conical decomposition and the integrand Phi_xi.
// ---------------------------------------------------------------------------

struct Decomposition {
  Vec Z;             // optimal basic solution, Z >= 0
  double value = 0;  // sum Z_k xi_k
  double norm = 0;   // |Z| (Euclidean), for auditing the decomposition bound
};

/// min sum Z_k w_k  s.t.  sum Z_k v_k(x) = z, Z >= 0.
inline Decomposition decompose(const DirectionFamily& family, const Vec& x, const Vec& z, const Vec& weights) {
  const int n = family.size();
  if (z.size() != family.dim()) throw InvalidArgument("vector dimension does not match the family");
  if (weights.size() != n) throw InvalidArgument("one weight per direction required");
  for (int k = 0; k < n; ++k)
    if (!(weights[k] >= 0)) throw InvalidArgument("weights must be nonnegative");
  Decomposition d;
  d.Z = Vec::Zero(n);
  if (z.isZero(0.0)) return d;
  auto r = lp::solve(weights, family.directions_at(x), z);
  if (r.status == lp::Status::infeasible)
    throw InfeasibleError("directions do not positively generate the vector");
  if (r.status == lp::Status::unbounded) throw Error("unbounded decomposition program");
  d.Z = r.x;
  d.value = r.value;
  d.norm = r.x.norm();
  return d;
}

inline double phi_xi(const DirectionFamily& family, const XiField& xi, const Vec& x, const Vec& y) {
  return decompose(family, x, y, xi.at(x)).value;
}

/// Largest |Z| of the unit-weight decomposition of unit vectors at the sample
/// points; throws InfeasibleError when some direction is not generated.
inline double check_positively_generating(const DirectionFamily& family, const std::vector<Vec>& points,
                                          int directions = 256, unsigned seed = 1) {
  const int d = family.dim();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  std::vector<Vec> zs;
  if (d == 2) {
    for (int i = 0; i < directions; ++i) {
      double a = 2 * std::numbers::pi * i / directions;
      Vec z(2);
      z << std::cos(a), std::sin(a);
      zs.push_back(z);
    }
  } else {
    for (int i = 0; i < directions; ++i) {
      Vec z(d);
      for (int j = 0; j < d; ++j) z[j] = nd(rng);
      zs.push_back(z / z.norm());
    }
  }
  double worst = 0.0;
  const Vec ones = Vec::Ones(family.size());
  for (const auto& x : points) {
    for (int k = 0; k < family.size(); ++k) {
      if (std::abs(family.direction(x, k).norm() - 1) > 1e-12) throw InvalidArgument("direction is not a unit vector");
      if (!(family.coefficient(x, k) > 0)) throw InvalidArgument("volume coefficient must be positive");
    }
    for (const auto& z : zs) worst = std::max(worst, decompose(family, x, z, ones).norm);
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Path cost c_xi on an auxiliary graph.
// ---------------------------------------------------------------------------

struct PathCost {
  double value = 0.0;
  double h = 0.0;
};

/// Shortest paths on an auxiliary lattice at scale h. Built-in families use
/// their own directions at every node (the triangular lattice for both
/// six-direction families) with weight h xi_k(tail). Other constant families
/// use a cubic grid with a two-ring stencil weighted by Phi_xi.
///
/// Not thread-safe: per-source searches are cached.
class GeodesicSolver {
 public:
  GeodesicSolver(const DirectionFamily& family, const XiField& xi, const Domain& domain, double h)
      : h_(h), net_(build_aux(family, domain, h)) {
    if (xi.size() != family.size()) throw InvalidArgument("field and family class counts differ");
    weights_.resize(static_cast<std::size_t>(net_.num_arcs()));
    for (int a = 0; a < net_.num_arcs(); ++a) {
      const auto& arc = net_.arc(a);
      const Vec& x = net_.node(arc.tail);
      if (stencil_)
        weights_[static_cast<std::size_t>(a)] = decompose(family, x, arc.e, xi.at(x)).value;
      else
        weights_[static_cast<std::size_t>(a)] = arc.length * xi(x, arc.cls);
    }
  }

  double h() const { return h_; }
  const Network& graph() const { return net_; }
  int snap(const Vec& x) const { return net_.nearest_node(x); }

  PathCost cost(const Vec& x, const Vec& y) { return {cost_nodes(snap(x), snap(y)), h_}; }

  double cost_nodes(int s, int t) {
    auto it = cache_.find(s);
    if (it == cache_.end()) it = cache_.emplace(s, shortest_path(net_, weights_, s).dist).first;
    const double v = it->second[static_cast<std::size_t>(t)];
    if (!(v < kInfinity)) throw DisconnectedError("points are not connected at this resolution");
    return v;
  }

 private:
  Network build_aux(const DirectionFamily& family, const Domain& domain, double h) {
    if (!family.is_constant()) throw InvalidArgument("path costs need a constant direction family");
    switch (family.tag()) {
      case FamilyTag::cartesian: return build_cartesian(domain, h);
      case FamilyTag::triangular:
      case FamilyTag::hexagonal: return build_triangular(domain, h);
      case FamilyTag::custom: break;
    }
    stencil_ = true;
    const int d = domain.dim();
    std::vector<detail::LatticeStep> steps;
    std::vector<int> off(static_cast<std::size_t>(d), -2);
    while (true) {
      int g = 0;
      for (int v : off) g = std::gcd(g, std::abs(v));
      if (g == 1) steps.push_back({off, 0});
      int i = 0;
      for (; i < d; ++i) {
        if (++off[static_cast<std::size_t>(i)] <= 2) break;
        off[static_cast<std::size_t>(i)] = -2;
      }
      if (i == d) break;
    }
    // Class indices on the auxiliary graph are unused; class 0 keeps the
    // network invariants satisfied.
    return detail::build_lattice(
        domain, h, h * Eigen::MatrixXd::Identity(d, d), [&](const std::vector<int>&) { return steps; }, family,
        FamilyTag::custom);
  }

  double h_;
  bool stencil_ = false;
  Network net_;
  std::vector<double> weights_;
  std::unordered_map<int, std::vector<double>> cache_;
};

inline PathCost c_xi(const DirectionFamily& family, const XiField& xi, const Domain& domain, double h, const Vec& x,
                     const Vec& y) {
  if (!xi.is_continuous()) throw InvalidArgument("path costs are only defined here for continuous fields");
  GeodesicSolver s(family, xi, domain, h);
  return s.cost(x, y);
}

struct Quadruple {
  Vec x1, y1, x2, y2;
};

struct HolderStats {
  double beta = 0.0;
  double xi_norm = 0.0;
  double max_ratio = 0.0;
  double mean_ratio = 0.0;
  int used = 0;
};

/// Ratios |c(x1,y1) - c(x2,y2)| / (||xi||_{L^p(theta)} (|x1-x2|^beta + |y1-y2|^beta)), beta = 1 - d/p.
inline HolderStats holder_probe(const DirectionFamily& family, const XiField& xi, const Domain& domain, double h,
                                double p, const std::vector<Quadruple>& samples, double quad_h = 1.0 / 64) {
  HolderStats st;
  st.beta = 1 - family.dim() / p;
  st.xi_norm = ThetaMeasure(family, domain, quad_h).norm(xi, p);
  GeodesicSolver solver(family, xi, domain, h);
  double sum = 0.0;
  for (const auto& q : samples) {
    const double den = std::pow((q.x1 - q.x2).norm(), st.beta) + std::pow((q.y1 - q.y2).norm(), st.beta);
    if (!(den > 0)) continue;
    const double num = std::abs(solver.cost(q.x1, q.y1).value - solver.cost(q.x2, q.y2).value);
    const double r = num / (st.xi_norm * den);
    st.max_ratio = std::max(st.max_ratio, r);
    sum += r;
    ++st.used;
  }
  st.mean_ratio = st.used ? sum / st.used : 0.0;
  return st;
}

/// Finitely supported measure on pairs of points.
struct GammaAtom {
  Vec x, y;
  double mass = 0.0;
};

inline DualValue J_limit(const DirectionFamily& family, const CongestionModel& model, const XiField& xi,
                         const std::vector<GammaAtom>& gamma, const Domain& domain, double h,
                         double quad_h = 1.0 / 64) {
  if (!xi.is_continuous()) throw InvalidArgument("limit functional needs a continuous field");
  if (model.num_classes() < family.size()) throw InvalidArgument("model has fewer classes than the family");
  DualValue v;
  ThetaMeasure theta(family, domain, quad_h);
  v.I0 = theta.integrate([&](const Vec& x, int k) { return model.H(x, k, xi(x, k)); });
  bool any = false;
  for (const auto& g : gamma) any = any || g.mass != 0;
  if (any) {
    GeodesicSolver solver(family, xi, domain, h);
    for (const auto& g : gamma)
      if (g.mass != 0) v.I1 += g.mass * solver.cost(g.x, g.y).value;
  }
  v.value = v.I0 - v.I1;
  return v;
}

/// xi^eps(x, e) = xi(x, class of e): the recovery sequence of a continuous field.
inline MetricState sample_metric(const Network& net, const XiField& xi, double p) {
  std::vector<double> v(static_cast<std::size_t>(net.num_arcs()));
  for (int a = 0; a < net.num_arcs(); ++a) v[static_cast<std::size_t>(a)] = xi(net.node(net.arc(a).tail), net.arc(a).cls);
  return make_metric(net, std::move(v), p);
}

struct WeakConvergenceRow {
  double epsilon = 0.0;
  std::vector<double> discrete;    // S_eps(phi) per test function
  std::vector<double> target;      // integral of phi xi against theta
  std::vector<double> difference;  // |S_eps - target|
  double norm = 0.0;               // ||xi^eps||_{eps,p}
};

struct WeakConvergenceTable {
  std::vector<WeakConvergenceRow> rows;
  double norm_bound = 0.0;  // sup over rows of the discrete norm
};

/// Pairings sum |e|^d phi(x, e/|e|) xi^eps(x, e) against their continuum targets.
inline WeakConvergenceTable weak_convergence_probe(
    const std::vector<std::pair<const Network*, const MetricState*>>& sequence, const XiField& xi,
    const std::vector<TestFunction>& tests, const Domain& domain, double quad_h = 1.0 / 64) {
  WeakConvergenceTable t;
  if (sequence.empty()) return t;
  const auto& family = sequence.front().first->family();
  ThetaMeasure theta(family, domain, quad_h);
  std::vector<double> targets;
  for (const auto& phi : tests)
    targets.push_back(theta.integrate([&](const Vec& x, int k) { return phi(x, family.direction(x, k)) * xi(x, k); }));
  for (const auto& [net, metric] : sequence) {
    WeakConvergenceRow r;
    r.epsilon = net->epsilon();
    r.norm = metric->norm;
    for (std::size_t i = 0; i < tests.size(); ++i) {
      double s = 0.0;
      for (int a = 0; a < net->num_arcs(); ++a) {
        const auto& arc = net->arc(a);
        s += std::pow(arc.length, net->dim()) * tests[i](net->node(arc.tail), arc.e / arc.length) *
             metric->xi[static_cast<std::size_t>(a)];
      }
      r.discrete.push_back(s);
      r.target.push_back(targets[i]);
      r.difference.push_back(std::abs(s - targets[i]));
    }
    t.norm_bound = std::max(t.norm_bound, r.norm);
    t.rows.push_back(std::move(r));
  }
  return t;
}

}  // namespace wardrop
