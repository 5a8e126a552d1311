#pragma once

#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "common.hpp"

namespace wardrop {

enum class FamilyTag { cartesian, triangular, hexagonal, custom };

inline std::string to_string(FamilyTag t) {
  switch (t) {
    case FamilyTag::cartesian: return "cartesian";
    case FamilyTag::triangular: return "triangular";
    case FamilyTag::hexagonal: return "hexagonal";
    case FamilyTag::custom: return "custom";
  }
  return "custom";
}

inline FamilyTag family_tag_from_string(const std::string& s) {
  if (s == "cartesian") return FamilyTag::cartesian;
  if (s == "triangular") return FamilyTag::triangular;
  if (s == "hexagonal") return FamilyTag::hexagonal;
  if (s == "custom") return FamilyTag::custom;
  throw ParseError("unknown family tag '" + s + "'");
}

/// Limiting arc directions v_k(x) with volume coefficients c_k(x).
///
/// The built-in lattice families have constant directions; position
/// dependent families are supported for continuum evaluation only.
class DirectionFamily {
 public:
  using DirectionFn = std::function<Vec(const Vec&, int)>;
  using CoefficientFn = std::function<double(const Vec&, int)>;

  /// +e_1, ..., +e_d, -e_1, ..., -e_d with unit coefficients.
  static DirectionFamily cartesian(int dim) {
    if (dim < 2) throw InvalidArgument("dimension must be >= 2");
    std::vector<Vec> dirs;
    for (int s : {1, -1})
      for (int i = 0; i < dim; ++i) {
        Vec v = Vec::Zero(dim);
        v[i] = s;
        dirs.push_back(v);
      }
    return DirectionFamily(FamilyTag::cartesian, std::move(dirs),
                           std::vector<double>(static_cast<std::size_t>(2 * dim), 1.0));
  }

  /// Six directions at angles pi/6 + k pi/3.
  static DirectionFamily triangular() {
    return DirectionFamily(FamilyTag::triangular, hexagonal_directions(),
                           std::vector<double>(6, 2.0 / std::sqrt(3.0)));
  }

  /// Same directions as the triangular family, honeycomb volume coefficient.
  static DirectionFamily hexagonal() {
    return DirectionFamily(FamilyTag::hexagonal, hexagonal_directions(),
                           std::vector<double>(6, 2.0 / (3.0 * std::sqrt(3.0))));
  }

  /// Constant directions (normalized here) with constant coefficients.
  static DirectionFamily constant(std::vector<Vec> dirs, std::vector<double> coeffs,
                                  FamilyTag tag = FamilyTag::custom) {
    if (dirs.empty() || dirs.size() != coeffs.size())
      throw InvalidArgument("need one coefficient per direction");
    for (auto& v : dirs) {
      double n = v.norm();
      if (!(n > 0)) throw InvalidArgument("zero direction vector");
      v /= n;
    }
    return DirectionFamily(tag, std::move(dirs), std::move(coeffs));
  }

  /// Position dependent family.
  static DirectionFamily varying(int dim, int n, DirectionFn dir, CoefficientFn coef,
                                 double holder_exponent = 1.0) {
    DirectionFamily f;
    f.tag_ = FamilyTag::custom;
    f.dim_ = dim;
    f.n_ = n;
    f.dir_fn_ = std::move(dir);
    f.coef_fn_ = std::move(coef);
    f.holder_ = holder_exponent;
    return f;
  }

  FamilyTag tag() const { return tag_; }
  int dim() const { return dim_; }
  int size() const { return n_; }
  bool is_constant() const { return !dir_fn_; }
  double holder_exponent() const { return holder_; }

  Vec direction(const Vec& x, int k) const {
    check(k);
    if (dir_fn_) {
      Vec v = dir_fn_(x, k);
      return v / v.norm();
    }
    return dirs_[static_cast<std::size_t>(k)];
  }

  double coefficient(const Vec& x, int k) const {
    check(k);
    return coef_fn_ ? coef_fn_(x, k) : coeffs_[static_cast<std::size_t>(k)];
  }

  /// d x N matrix whose columns are v_k(x).
  Eigen::MatrixXd directions_at(const Vec& x) const {
    Eigen::MatrixXd m(dim_, n_);
    for (int k = 0; k < n_; ++k) m.col(k) = direction(x, k);
    return m;
  }

  /// Constant direction k; only valid for constant families.
  const Vec& constant_direction(int k) const {
    if (dir_fn_) throw InvalidArgument("family directions vary with position");
    check(k);
    return dirs_[static_cast<std::size_t>(k)];
  }

 private:
  DirectionFamily() = default;
  DirectionFamily(FamilyTag tag, std::vector<Vec> dirs, std::vector<double> coeffs)
      : tag_(tag),
        dim_(static_cast<int>(dirs.front().size())),
        n_(static_cast<int>(dirs.size())),
        dirs_(std::move(dirs)),
        coeffs_(std::move(coeffs)) {
    for (double c : coeffs_)
      if (!(c > 0)) throw InvalidArgument("volume coefficients must be positive");
  }

  static std::vector<Vec> hexagonal_directions() {
    std::vector<Vec> dirs;
    for (int k = 0; k < 6; ++k) {
      double a = std::numbers::pi / 6 + k * std::numbers::pi / 3;
      Vec v(2);
      v << std::cos(a), std::sin(a);
      dirs.push_back(v);
    }
    return dirs;
  }

  void check(int k) const {
    if (k < 0 || k >= n_) throw InvalidArgument("direction class out of range");
  }

  FamilyTag tag_ = FamilyTag::custom;
  int dim_ = 2;
  int n_ = 0;
  std::vector<Vec> dirs_;
  std::vector<double> coeffs_;
  DirectionFn dir_fn_;
  CoefficientFn coef_fn_;
  double holder_ = 1.0;
};

}  // namespace wardrop
