#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace wardrop {

/// Point or vector in R^d.
using Vec = Eigen::VectorXd;

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// Errors. Everything thrown by the library derives from wardrop::Error.
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class EmptyNetworkError : public Error {
 public:
  using Error::Error;
};

class UnreachableError : public Error {
 public:
  UnreachableError(int source, int sink)
      : Error("no path from node " + std::to_string(source) + " to node " +
              std::to_string(sink)),
        source_(source),
        sink_(sink) {}
  int source() const { return source_; }
  int sink() const { return sink_; }

 private:
  int source_;
  int sink_;
};

class InfeasibleError : public Error {
 public:
  using Error::Error;
};

class CertificationFailure : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Polynomials in x in R^d, used for spatially varying weights and fields.
// ---------------------------------------------------------------------------

struct Monomial {
  double coef = 0.0;
  std::vector<int> powers;  // one exponent per coordinate; missing means 0
};

class Polynomial {
 public:
  Polynomial() = default;
  explicit Polynomial(std::vector<Monomial> terms) : terms_(std::move(terms)) {
    for (const auto& t : terms_)
      for (int p : t.powers)
        if (p < 0) throw InvalidArgument("polynomial exponents must be nonnegative");
  }

  static Polynomial constant(double c) { return Polynomial({Monomial{c, {}}}); }

  double operator()(const Vec& x) const {
    double s = 0.0;
    for (const auto& t : terms_) {
      double v = t.coef;
      for (std::size_t i = 0; i < t.powers.size(); ++i) {
        if (t.powers[i] == 0) continue;
        if (static_cast<Eigen::Index>(i) >= x.size())
          throw InvalidArgument("polynomial refers to coordinate beyond point dimension");
        v *= std::pow(x[static_cast<Eigen::Index>(i)], t.powers[i]);
      }
      s += v;
    }
    return s;
  }

  bool is_constant() const {
    for (const auto& t : terms_)
      for (int p : t.powers)
        if (p != 0) return false;
    return true;
  }

  const std::vector<Monomial>& terms() const { return terms_; }

 private:
  std::vector<Monomial> terms_;
};

/// x^p for x >= 0 with the convention 0^p = 0 for p > 0.
inline double pow_pos(double x, double p) { return x <= 0.0 ? 0.0 : std::pow(x, p); }

}  // namespace wardrop
