#pragma once

#include <algorithm>
#include <functional>
#include <memory>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/roots.hpp>

#include "common.hpp"
#include "network.hpp"

namespace wardrop {

/// Congestion cost family: time per unit length g(x, v_k, m), its primitive
/// G and the Legendre transform H = G^*. Argument checks live here; models
/// implement the do_* hooks.
class CongestionModel {
 public:
  virtual ~CongestionModel() = default;

  virtual int num_classes() const = 0;
  /// Growth exponent q of g ~ m^{q-1}.
  virtual double exponent_q() const = 0;
  double exponent_p() const { return exponent_q() / (exponent_q() - 1); }

  double g(const Vec& x, int k, double m) const {
    check_class(k);
    if (m < 0) throw InvalidArgument("negative mass");
    return do_g(x, k, m);
  }
  double G(const Vec& x, int k, double m) const {
    check_class(k);
    if (m < 0) throw InvalidArgument("negative mass");
    return do_G(x, k, m);
  }
  double H(const Vec& x, int k, double t) const {
    check_class(k);
    if (t < 0) throw InvalidArgument("negative time");
    return do_H(x, k, t);
  }
  /// Smallest m >= 0 with g(m) >= t (0 when t is below the free-flow value).
  double g_inverse(const Vec& x, int k, double t) const {
    check_class(k);
    if (t < 0) throw InvalidArgument("negative time");
    return do_g_inverse(x, k, t);
  }
  double free_flow(const Vec& x, int k) const { return g(x, k, 0.0); }
  /// dg/dm; +inf where g has a vertical tangent.
  double g_prime(const Vec& x, int k, double m) const {
    check_class(k);
    if (m < 0) throw InvalidArgument("negative mass");
    return do_g_prime(x, k, m);
  }

 protected:
  virtual double do_g(const Vec& x, int k, double m) const = 0;
  virtual double do_G(const Vec& x, int k, double m) const = 0;
  virtual double do_H(const Vec& x, int k, double t) const = 0;

  virtual double do_g_prime(const Vec& x, int k, double m) const {
    const double h = 1e-6 * std::max(1.0, m);
    if (m < h) return (do_g(x, k, m + h) - do_g(x, k, m)) / h;
    return (do_g(x, k, m + h) - do_g(x, k, m - h)) / (2 * h);
  }

  virtual double do_g_inverse(const Vec& x, int k, double t) const {
    if (do_g(x, k, 0.0) >= t) return 0.0;
    double hi = 1.0;
    while (do_g(x, k, hi) < t) {
      hi *= 2;
      if (hi > 1e300) throw Error("g does not reach the requested time");
    }
    double lo = 0.0;
    for (int it = 0; it < 2000 && hi - lo > 1e-15 * hi; ++it) {
      double mid = 0.5 * (lo + hi);
      (do_g(x, k, mid) < t ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  }

 private:
  void check_class(int k) const {
    if (k < 0 || k >= num_classes()) throw InvalidArgument("congestion class out of range");
  }
};

/// g(x, v_k, m) = a_k(x) m^{q-1} + delta_k with closed-form G and H.
class PowerLawModel final : public CongestionModel {
 public:
  struct ClassParams {
    Polynomial a;
    double delta = 1.0;
  };

  PowerLawModel(double q, std::vector<ClassParams> classes) : q_(q), classes_(std::move(classes)) {
    if (!(q_ > 1)) throw InvalidArgument("congestion exponent q must exceed 1");
    if (classes_.empty()) throw InvalidArgument("need at least one congestion class");
    for (const auto& c : classes_)
      if (!(c.delta >= 0)) throw InvalidArgument("free-flow constants delta must be nonnegative");
  }

  /// Same constant (a, delta) for every class.
  static PowerLawModel uniform(double q, int classes, double a, double delta) {
    return PowerLawModel(q, std::vector<ClassParams>(static_cast<std::size_t>(classes),
                                                     ClassParams{Polynomial::constant(a), delta}));
  }

  int num_classes() const override { return static_cast<int>(classes_.size()); }
  double exponent_q() const override { return q_; }

  double weight(const Vec& x, int k) const {
    double a = classes_[static_cast<std::size_t>(k)].a(x);
    if (!(a > 0)) throw InvalidArgument("congestion weight a_k(x) must be positive");
    return a;
  }
  double delta(int k) const { return classes_[static_cast<std::size_t>(k)].delta; }
  const std::vector<ClassParams>& classes() const { return classes_; }

 protected:
  double do_g(const Vec& x, int k, double m) const override {
    return weight(x, k) * pow_pos(m, q_ - 1) + delta(k);
  }
  double do_G(const Vec& x, int k, double m) const override {
    return weight(x, k) * pow_pos(m, q_) / q_ + delta(k) * m;
  }
  double do_H(const Vec& x, int k, double t) const override {
    const double p = q_ / (q_ - 1);
    return std::pow(weight(x, k), -1.0 / (q_ - 1)) * pow_pos(t - delta(k), p) / p;
  }
  double do_g_inverse(const Vec& x, int k, double t) const override {
    return pow_pos((t - delta(k)) / weight(x, k), 1.0 / (q_ - 1));
  }
  double do_g_prime(const Vec& x, int k, double m) const override {
    if (m == 0.0) return q_ < 2 ? kInfinity : (q_ == 2 ? weight(x, k) : 0.0);
    return weight(x, k) * (q_ - 1) * std::pow(m, q_ - 2);
  }

 private:
  double q_;
  std::vector<ClassParams> classes_;
};

/// User supplied strictly increasing g; G by adaptive Gauss-Kronrod
/// quadrature, H through its maximizer m* = g^{-1}(t).
class CustomModel final : public CongestionModel {
 public:
  using TimeFn = std::function<double(const Vec& x, int k, double m)>;

  CustomModel(int classes, double q, TimeFn g) : classes_(classes), q_(q), g_(std::move(g)) {
    if (classes_ <= 0) throw InvalidArgument("need at least one congestion class");
    if (!(q_ > 1)) throw InvalidArgument("congestion exponent q must exceed 1");
  }

  int num_classes() const override { return classes_; }
  double exponent_q() const override { return q_; }

 protected:
  double do_g(const Vec& x, int k, double m) const override { return g_(x, k, m); }
  double do_G(const Vec& x, int k, double m) const override {
    if (m == 0.0) return 0.0;
    auto f = [&](double s) { return g_(x, k, s); };
    return boost::math::quadrature::gauss_kronrod<double, 15>::integrate(f, 0.0, m, 15, 1e-13);
  }
  double do_H(const Vec& x, int k, double t) const override {
    const double m = do_g_inverse(x, k, t);
    return std::max(0.0, m * t - do_G(x, k, m));
  }

 private:
  int classes_;
  double q_;
  TimeFn g_;
};

// ---------------------------------------------------------------------------
// Arc-level rescaling: g^eps(x,e,m) = |e|^{d/2} g(x, e/|e|, m / |e|^{d/2}).
// ---------------------------------------------------------------------------

struct RescaledArc {
  double time = 0.0;  // t on the arc
  double xi = 0.0;    // t / |e|^{d/2}
};

inline RescaledArc rescale(const CongestionModel& model, const Vec& x, const Vec& e, int k,
                           double m_arc) {
  const double len = e.norm();
  if (!(len > 0)) throw InvalidArgument("zero-length arc");
  if (m_arc < 0) throw InvalidArgument("negative mass");
  const double s = std::pow(len, 0.5 * static_cast<double>(e.size()));
  const double xi = model.g(x, k, m_arc / s);
  return {s * xi, xi};
}

inline RescaledArc rescale(const CongestionModel& model, const Network& net, int arc, double m_arc) {
  const auto& a = net.arc(arc);
  return rescale(model, net.node(a.tail), a.e, a.cls, m_arc);
}

/// Raw arc time t^eps(m).
inline double arc_time(const CongestionModel& model, const Network& net, int arc, double m) {
  return rescale(model, net, arc, m).time;
}

/// G^eps(x,e,m) = |e|^d G(x, e/|e|, m / |e|^{d/2}).
inline double arc_cost(const CongestionModel& model, const Network& net, int arc, double m) {
  const auto& a = net.arc(arc);
  const double s = net.arc_scale(arc);
  return s * s * model.G(net.node(a.tail), a.cls, m / s);
}

/// H^eps(x,e,t) = |e|^d H(x, e/|e|, t / |e|^{d/2}).
inline double arc_conjugate(const CongestionModel& model, const Network& net, int arc, double t) {
  const auto& a = net.arc(arc);
  const double s = net.arc_scale(arc);
  return s * s * model.H(net.node(a.tail), a.cls, t / s);
}

/// d t^eps / dm = g'(m / |e|^{d/2}).
inline double arc_time_derivative(const CongestionModel& model, const Network& net, int arc, double m) {
  const auto& a = net.arc(arc);
  return model.g_prime(net.node(a.tail), a.cls, m / net.arc_scale(arc));
}

/// Inverse of `arc_time` in the mass variable.
inline double arc_mass_for_time(const CongestionModel& model, const Network& net, int arc, double t) {
  const auto& a = net.arc(arc);
  const double s = net.arc_scale(arc);
  return s * model.g_inverse(net.node(a.tail), a.cls, t / s);
}

// ---------------------------------------------------------------------------
// Growth certificate lambda (xi^p - 1) <= H <= Lambda (xi^p + 1).
// ---------------------------------------------------------------------------

struct GrowthCertificate {
  double lambda = 0.0;
  double Lambda = 0.0;
};

/// Tightest sampled constants on t in [0, t_max] (plus a geometric tail out
/// to 1e4 t_max). Fails when H/t^p drifts over the last decade of the tail,
/// which is how a mismatched exponent shows up on a finite sample.
inline GrowthCertificate growth_certify(const CongestionModel& model, double p,
                                        const std::vector<Vec>& sample_points, double t_max = 100.0,
                                        int samples = 2001) {
  if (!(p > 1)) throw InvalidArgument("growth exponent must exceed 1");
  if (sample_points.empty()) throw InvalidArgument("need at least one sample point");
  std::vector<double> ts;
  for (int i = 0; i < samples; ++i) ts.push_back(t_max * i / (samples - 1));
  for (int i = 1; i <= 400; ++i) ts.push_back(t_max * std::pow(10.0, 4.0 * i / 400));
  GrowthCertificate c{kInfinity, 0.0};
  for (const auto& x : sample_points)
    for (int k = 0; k < model.num_classes(); ++k) {
      for (double t : ts) {
        const double h = model.H(x, k, t);
        const double tp = std::pow(t, p);
        c.Lambda = std::max(c.Lambda, h / (tp + 1));
        if (tp > 1) c.lambda = std::min(c.lambda, h / (tp - 1));
      }
      const double t1 = t_max * 1e3, t2 = t_max * 1e4;
      const double r1 = model.H(x, k, t1) / std::pow(t1, p);
      const double r2 = model.H(x, k, t2) / std::pow(t2, p);
      if (!(r1 > 0) || !(r2 > 0) || std::abs(std::log10(r2 / r1)) > 0.1)
        throw CertificationFailure("H does not grow like t^p for the given exponent");
    }
  if (!(c.lambda > 0) || !std::isfinite(c.Lambda))
    throw CertificationFailure("no positive growth constants on the sample");
  // Any lambda below the sampled infimum is valid; keep lambda <= Lambda.
  c.lambda = std::min(c.lambda, c.Lambda);
  return c;
}

}  // namespace wardrop
