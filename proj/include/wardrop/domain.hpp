#pragma once

#include <algorithm>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "common.hpp"

namespace wardrop {

/// Bounded domain with a membership predicate for its closure.
///
/// Membership is tested on the closure with a small relative tolerance so
/// that lattice nodes lying on the boundary belong to the discrete networks.
class Domain {
 public:
  enum class Kind { box, ball, polygon, blob };

  static Domain box(Vec lo, Vec hi) {
    if (lo.size() != hi.size() || lo.size() < 2)
      throw InvalidArgument("box needs matching corners of dimension >= 2");
    for (Eigen::Index i = 0; i < lo.size(); ++i)
      if (!(lo[i] < hi[i])) throw InvalidArgument("box corners must satisfy lo < hi");
    Domain d(Kind::box, static_cast<int>(lo.size()));
    d.lo_ = lo;
    d.hi_ = hi;
    d.scale_ = (hi - lo).maxCoeff();
    return d;
  }

  static Domain ball(Vec center, double radius) {
    if (center.size() < 2) throw InvalidArgument("ball dimension must be >= 2");
    if (!(radius > 0)) throw InvalidArgument("ball radius must be positive");
    Domain d(Kind::ball, static_cast<int>(center.size()));
    d.center_ = center;
    d.radius_ = radius;
    d.lo_ = center.array() - radius;
    d.hi_ = center.array() + radius;
    d.scale_ = 2 * radius;
    return d;
  }

  /// Convex polygon in the plane; vertices in counter-clockwise order.
  static Domain polygon(std::vector<Vec> vertices) {
    if (vertices.size() < 3) throw InvalidArgument("polygon needs >= 3 vertices");
    Domain d(Kind::polygon, 2);
    double area2 = 0.0;
    for (std::size_t i = 0; i < vertices.size(); ++i) {
      const Vec& a = vertices[i];
      const Vec& b = vertices[(i + 1) % vertices.size()];
      if (a.size() != 2) throw InvalidArgument("polygon vertices must be 2d");
      area2 += a[0] * b[1] - a[1] * b[0];
    }
    if (area2 < 0) std::reverse(vertices.begin(), vertices.end());
    d.vertices_ = std::move(vertices);
    d.lo_ = d.vertices_.front();
    d.hi_ = d.vertices_.front();
    for (const auto& v : d.vertices_) {
      d.lo_ = d.lo_.cwiseMin(v);
      d.hi_ = d.hi_.cwiseMax(v);
    }
    d.scale_ = (d.hi_ - d.lo_).maxCoeff();
    return d;
  }

  /// Star-shaped planar domain |x - c| < scale * r(angle) with
  /// r(phi) = c0 + sum_j (a_j cos(j phi) + b_j sin(j phi)).
  /// `profile` holds c0, a1, b1, a2, b2, ...
  static Domain blob(Vec center, double scale, std::vector<double> profile) {
    if (center.size() != 2) throw InvalidArgument("blob domains are planar");
    if (profile.empty()) throw InvalidArgument("blob profile needs at least c0");
    Domain d(Kind::blob, 2);
    d.center_ = center;
    d.radius_ = scale;
    d.profile_ = std::move(profile);
    double rmax = 0.0;
    for (int i = 0; i < 4096; ++i) {
      double phi = 2 * std::numbers::pi * i / 4096.0;
      double r = d.blob_radius(phi);
      if (!(r > 0)) throw InvalidArgument("blob radial profile must stay positive");
      rmax = std::max(rmax, r);
    }
    rmax *= 1.01;
    d.lo_ = center.array() - rmax;
    d.hi_ = center.array() + rmax;
    d.scale_ = 2 * rmax;
    return d;
  }

  /// Default smooth blob profile.
  static std::vector<double> default_blob_profile() {
    return {2.36, 0.38, 1.16, -0.42, 0.0, 0.21, 0.54};
  }

  /// Parse "box:x0,y0,x1,y1", "disk:cx,cy,r", "ball:c1,...,cd,r",
  /// "polygon:x1,y1,x2,y2,...", "blob:cx,cy,scale[,c0,a1,b1,...]".
  static Domain parse(const std::string& spec) {
    auto colon = spec.find(':');
    if (colon == std::string::npos) throw ParseError("domain spec needs 'kind:params': " + spec);
    std::string kind = spec.substr(0, colon);
    std::vector<double> v;
    std::stringstream ss(spec.substr(colon + 1));
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      try {
        v.push_back(std::stod(tok));
      } catch (const std::exception&) {
        throw ParseError("bad number '" + tok + "' in domain spec");
      }
    }
    auto vec = [&](std::size_t from, std::size_t n) {
      Vec r(static_cast<Eigen::Index>(n));
      for (std::size_t i = 0; i < n; ++i) r[static_cast<Eigen::Index>(i)] = v[from + i];
      return r;
    };
    if (kind == "box") {
      if (v.size() < 4 || v.size() % 2) throw ParseError("box needs 2d numbers");
      std::size_t d = v.size() / 2;
      return box(vec(0, d), vec(d, d));
    }
    if (kind == "disk" || kind == "ball") {
      if (v.size() < 3) throw ParseError("ball needs center and radius");
      return ball(vec(0, v.size() - 1), v.back());
    }
    if (kind == "polygon") {
      if (v.size() < 6 || v.size() % 2) throw ParseError("polygon needs pairs of coordinates");
      std::vector<Vec> pts;
      for (std::size_t i = 0; i < v.size(); i += 2) pts.push_back(vec(i, 2));
      return polygon(std::move(pts));
    }
    if (kind == "blob") {
      if (v.size() < 3) throw ParseError("blob needs cx,cy,scale");
      std::vector<double> prof(v.begin() + 3, v.end());
      if (prof.empty()) prof = default_blob_profile();
      return blob(vec(0, 2), v[2], std::move(prof));
    }
    throw ParseError("unknown domain kind '" + kind + "'");
  }

  Kind kind() const { return kind_; }
  int dim() const { return dim_; }
  const Vec& lower() const { return lo_; }
  const Vec& upper() const { return hi_; }
  bool is_convex() const { return kind_ != Kind::blob; }

  bool contains(const Vec& x) const {
    if (x.size() != dim_) throw InvalidArgument("point dimension does not match domain");
    const double tol = 1e-12 * scale_;
    switch (kind_) {
      case Kind::box:
        for (Eigen::Index i = 0; i < x.size(); ++i)
          if (x[i] < lo_[i] - tol || x[i] > hi_[i] + tol) return false;
        return true;
      case Kind::ball:
        return (x - center_).norm() <= radius_ + tol;
      case Kind::polygon:
        for (std::size_t i = 0; i < vertices_.size(); ++i) {
          const Vec& a = vertices_[i];
          const Vec& b = vertices_[(i + 1) % vertices_.size()];
          double cross = (b[0] - a[0]) * (x[1] - a[1]) - (b[1] - a[1]) * (x[0] - a[0]);
          if (cross < -tol * (b - a).norm()) return false;
        }
        return true;
      case Kind::blob: {
        Vec r = x - center_;
        double rho = r.norm();
        if (rho <= tol) return true;
        return rho <= radius_ * blob_radius(std::atan2(r[1], r[0])) + tol;
      }
    }
    return false;
  }

  /// Segment inclusion: endpoints and midpoint for convex domains, plus eight
  /// interior samples for blobs.
  bool contains_segment(const Vec& a, const Vec& b) const {
    if (!contains(a) || !contains(b)) return false;
    if (!contains(0.5 * (a + b))) return false;
    if (!is_convex()) {
      for (int i = 1; i <= 8; ++i) {
        double s = i / 9.0;
        if (!contains((1 - s) * a + s * b)) return false;
      }
    }
    return true;
  }

  /// Lebesgue measure of the domain.
  double volume() const {
    switch (kind_) {
      case Kind::box:
        return (hi_ - lo_).prod();
      case Kind::ball: {
        double d = dim_;
        return std::pow(std::numbers::pi, d / 2) / std::tgamma(d / 2 + 1) * std::pow(radius_, d);
      }
      case Kind::polygon: {
        double a = 0.0;
        for (std::size_t i = 0; i < vertices_.size(); ++i) {
          const Vec& p = vertices_[i];
          const Vec& q = vertices_[(i + 1) % vertices_.size()];
          a += p[0] * q[1] - p[1] * q[0];
        }
        return 0.5 * std::abs(a);
      }
      case Kind::blob: {
        // r(phi)^2 is a trigonometric polynomial: the periodic trapezoid rule is exact.
        const int n = 8 * static_cast<int>(profile_.size()) + 64;
        double s = 0.0;
        for (int i = 0; i < n; ++i) {
          double r = radius_ * blob_radius(2 * std::numbers::pi * i / n);
          s += r * r;
        }
        return 0.5 * s * 2 * std::numbers::pi / n;
      }
    }
    return 0.0;
  }

 private:
  Domain(Kind k, int d) : kind_(k), dim_(d) {}

  double blob_radius(double phi) const {
    double r = profile_[0];
    for (std::size_t j = 1; j < profile_.size(); ++j) {
      int harmonic = static_cast<int>((j + 1) / 2);
      r += (j % 2 == 1) ? profile_[j] * std::cos(harmonic * phi)
                        : profile_[j] * std::sin(harmonic * phi);
    }
    return r;
  }

  Kind kind_;
  int dim_;
  Vec lo_, hi_, center_;
  double radius_ = 0.0;
  double scale_ = 1.0;
  std::vector<Vec> vertices_;
  std::vector<double> profile_;
};

/// Midpoint-rule quadrature on a uniform cell grid over a domain.
/// Cells cut by the boundary get their weight and center from sub-sampling.
struct CellQuadrature {
  double h = 0.0;
  std::vector<Vec> centers;
  std::vector<double> weights;
  Vec origin;                    // lower corner of the cell grid
  std::vector<int> shape;        // cells per axis
  std::vector<long> cell_index;  // flat grid index of each retained cell

  double total_weight() const {
    double s = 0.0;
    for (double w : weights) s += w;
    return s;
  }

  /// Flat grid index of the cell containing x, or -1 outside the grid.
  long locate(const Vec& x) const {
    long flat = 0;
    for (std::size_t i = shape.size(); i-- > 0;) {
      auto ii = static_cast<Eigen::Index>(i);
      long c = static_cast<long>(std::floor((x[ii] - origin[ii]) / h));
      if (c == shape[i]) c = shape[i] - 1;  // upper boundary
      if (c < 0 || c >= shape[i]) return -1;
      flat = flat * shape[i] + c;
    }
    return flat;
  }
};

inline CellQuadrature make_quadrature(const Domain& domain, double h, int subsamples = 8) {
  if (!(h > 0)) throw InvalidArgument("quadrature resolution must be positive");
  const int d = domain.dim();
  CellQuadrature q;
  q.h = h;
  q.origin = domain.lower();
  q.shape.resize(static_cast<std::size_t>(d));
  long total = 1;
  for (int i = 0; i < d; ++i) {
    double len = domain.upper()[i] - domain.lower()[i];
    q.shape[static_cast<std::size_t>(i)] = std::max(1, static_cast<int>(std::ceil(len / h - 1e-9)));
    total *= q.shape[static_cast<std::size_t>(i)];
  }
  const double cell_vol = std::pow(h, d);
  std::vector<int> idx(static_cast<std::size_t>(d), 0);
  Vec lo(d), c(d), p(d);
  for (long flat = 0; flat < total; ++flat) {
    long r = flat;
    for (int i = 0; i < d; ++i) {
      idx[static_cast<std::size_t>(i)] = static_cast<int>(r % q.shape[static_cast<std::size_t>(i)]);
      r /= q.shape[static_cast<std::size_t>(i)];
    }
    for (int i = 0; i < d; ++i) {
      lo[i] = q.origin[i] + idx[static_cast<std::size_t>(i)] * h;
      c[i] = lo[i] + 0.5 * h;
    }
    // Classify using the center and all corners.
    bool all_in = domain.contains(c), any_in = all_in;
    for (int corner = 0; corner < (1 << d); ++corner) {
      for (int i = 0; i < d; ++i) p[i] = lo[i] + ((corner >> i) & 1) * h;
      bool in = domain.contains(p);
      all_in = all_in && in;
      any_in = any_in || in;
    }
    if (all_in && domain.is_convex()) {
      q.centers.push_back(c);
      q.weights.push_back(cell_vol);
      q.cell_index.push_back(flat);
      continue;
    }
    // Sub-sample cells touching the boundary (and every blob cell near it).
    long nsub = 1;
    for (int i = 0; i < d; ++i) nsub *= subsamples;
    long inside = 0;
    Vec acc = Vec::Zero(d);
    for (long s = 0; s < nsub; ++s) {
      long rr = s;
      for (int i = 0; i < d; ++i) {
        p[i] = lo[i] + (static_cast<double>(rr % subsamples) + 0.5) * h / subsamples;
        rr /= subsamples;
      }
      if (domain.contains(p)) {
        ++inside;
        acc += p;
      }
    }
    if (inside == 0) continue;
    q.centers.push_back(acc / static_cast<double>(inside));
    q.weights.push_back(cell_vol * static_cast<double>(inside) / static_cast<double>(nsub));
    q.cell_index.push_back(flat);
  }
  return q;
}

}  // namespace wardrop
