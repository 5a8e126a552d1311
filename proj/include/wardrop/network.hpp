#pragma once

#include <algorithm>
#include <array>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "common.hpp"
#include "direction_family.hpp"
#include "domain.hpp"

namespace wardrop {

/// Directed arc (x, e) from `tail` to `head` with e = x_head - x_tail.
struct Arc {
  int tail = 0;
  int head = 0;
  int cls = 0;
  Vec e;
  double length = 0.0;
};

/// Epsilon-scale discrete network. Immutable once built.
class Network {
 public:
  Network(double epsilon, std::vector<Vec> nodes, std::vector<Arc> arcs, DirectionFamily family,
          FamilyTag tag)
      : epsilon_(epsilon),
        nodes_(std::move(nodes)),
        arcs_(std::move(arcs)),
        family_(std::make_shared<const DirectionFamily>(std::move(family))),
        tag_(tag) {
    if (!(epsilon_ > 0)) throw InvalidArgument("epsilon must be positive");
    if (nodes_.empty()) throw EmptyNetworkError("network has no nodes");
    dim_ = static_cast<int>(nodes_.front().size());
    if (dim_ < 2) throw InvalidArgument("dimension must be >= 2");
    if (family_->dim() != dim_) throw InvalidArgument("family dimension does not match nodes");
    const int n = num_nodes();
    for (auto& a : arcs_) {
      if (a.tail < 0 || a.tail >= n || a.head < 0 || a.head >= n)
        throw InvalidArgument("arc endpoint out of range");
      if (a.cls < 0 || a.cls >= family_->size())
        throw InvalidArgument("arc class out of range");
      a.e = nodes_[static_cast<std::size_t>(a.head)] - nodes_[static_cast<std::size_t>(a.tail)];
      a.length = a.e.norm();
      if (!(a.length > 0)) throw InvalidArgument("zero-length arc");
    }
    build_adjacency();
  }

  /// Import an explicit arc list (tail, head, class); vectors come from endpoints.
  static Network from_arc_list(double epsilon, std::vector<Vec> nodes,
                               const std::vector<std::array<int, 3>>& arcs, DirectionFamily family,
                               FamilyTag tag = FamilyTag::custom) {
    std::vector<Arc> list;
    list.reserve(arcs.size());
    for (const auto& a : arcs) list.push_back(Arc{a[0], a[1], a[2], Vec(), 0.0});
    return Network(epsilon, std::move(nodes), std::move(list), std::move(family), tag);
  }

  double epsilon() const { return epsilon_; }
  int dim() const { return dim_; }
  int num_nodes() const { return static_cast<int>(nodes_.size()); }
  int num_arcs() const { return static_cast<int>(arcs_.size()); }
  const Vec& node(int i) const { return nodes_[static_cast<std::size_t>(i)]; }
  const std::vector<Vec>& nodes() const { return nodes_; }
  const Arc& arc(int a) const { return arcs_[static_cast<std::size_t>(a)]; }
  const std::vector<Arc>& arcs() const { return arcs_; }
  const DirectionFamily& family() const { return *family_; }
  FamilyTag tag() const { return tag_; }

  std::span<const int> out_arcs(int node) const {
    auto b = static_cast<std::size_t>(out_offsets_[static_cast<std::size_t>(node)]);
    auto e = static_cast<std::size_t>(out_offsets_[static_cast<std::size_t>(node) + 1]);
    return {out_list_.data() + b, e - b};
  }
  std::span<const int> in_arcs(int node) const {
    auto b = static_cast<std::size_t>(in_offsets_[static_cast<std::size_t>(node)]);
    auto e = static_cast<std::size_t>(in_offsets_[static_cast<std::size_t>(node) + 1]);
    return {in_list_.data() + b, e - b};
  }

  /// Index of the arc tail->head with the smallest id, or -1.
  int find_arc(int tail, int head) const {
    for (int a : out_arcs(tail))
      if (arcs_[static_cast<std::size_t>(a)].head == head) return a;
    return -1;
  }

  /// Nearest node to x (ties to the smaller index).
  int nearest_node(const Vec& x) const {
    int best = 0;
    double bd = kInfinity;
    for (int i = 0; i < num_nodes(); ++i) {
      double d = (nodes_[static_cast<std::size_t>(i)] - x).squaredNorm();
      if (d < bd) {
        bd = d;
        best = i;
      }
    }
    return best;
  }

  /// |e|^{d/2}: the factor between rescaled and raw arc quantities.
  double arc_scale(int a) const { return std::pow(arc(a).length, 0.5 * dim_); }

 private:
  void build_adjacency() {
    const auto n = static_cast<std::size_t>(num_nodes());
    out_offsets_.assign(n + 1, 0);
    in_offsets_.assign(n + 1, 0);
    for (const auto& a : arcs_) {
      ++out_offsets_[static_cast<std::size_t>(a.tail) + 1];
      ++in_offsets_[static_cast<std::size_t>(a.head) + 1];
    }
    for (std::size_t i = 0; i < n; ++i) {
      out_offsets_[i + 1] += out_offsets_[i];
      in_offsets_[i + 1] += in_offsets_[i];
    }
    out_list_.assign(arcs_.size(), 0);
    in_list_.assign(arcs_.size(), 0);
    std::vector<int> oc(out_offsets_.begin(), out_offsets_.end() - 1);
    std::vector<int> ic(in_offsets_.begin(), in_offsets_.end() - 1);
    for (int a = 0; a < num_arcs(); ++a) {
      const auto& arc = arcs_[static_cast<std::size_t>(a)];
      out_list_[static_cast<std::size_t>(oc[static_cast<std::size_t>(arc.tail)]++)] = a;
      in_list_[static_cast<std::size_t>(ic[static_cast<std::size_t>(arc.head)]++)] = a;
    }
  }

  double epsilon_;
  int dim_ = 2;
  std::vector<Vec> nodes_;
  std::vector<Arc> arcs_;
  std::shared_ptr<const DirectionFamily> family_;
  FamilyTag tag_;
  std::vector<int> out_offsets_, in_offsets_, out_list_, in_list_;
};

namespace detail {

struct LatticeStep {
  std::vector<int> offset;
  int cls;
};

// Generic lattice builder: node i has position basis * coords. `steps_at`
// returns the outgoing steps of a lattice point, or an empty list when the
// point is not part of the lattice (honeycomb holes).
inline Network build_lattice(const Domain& domain, double epsilon, const Eigen::MatrixXd& basis,
                             const std::function<std::vector<LatticeStep>(const std::vector<int>&)>& steps_at,
                             DirectionFamily family, FamilyTag tag) {
  if (!(epsilon > 0)) throw InvalidArgument("epsilon must be positive");
  const int d = domain.dim();
  if (basis.rows() != d || basis.cols() != d) throw InvalidArgument("lattice basis dimension mismatch");
  const Eigen::MatrixXd inv = basis.inverse();

  // Integer bounding box from the images of the domain box corners.
  std::vector<int> lo(static_cast<std::size_t>(d), std::numeric_limits<int>::max());
  std::vector<int> hi(static_cast<std::size_t>(d), std::numeric_limits<int>::min());
  Vec corner(d);
  for (int c = 0; c < (1 << d); ++c) {
    for (int i = 0; i < d; ++i) corner[i] = ((c >> i) & 1) ? domain.upper()[i] : domain.lower()[i];
    Vec z = inv * corner;
    for (int i = 0; i < d; ++i) {
      auto ii = static_cast<std::size_t>(i);
      lo[ii] = std::min(lo[ii], static_cast<int>(std::floor(z[i])) - 1);
      hi[ii] = std::max(hi[ii], static_cast<int>(std::ceil(z[i])) + 1);
    }
  }

  std::map<std::vector<int>, int> index;
  std::vector<std::vector<int>> coords;
  std::vector<Vec> pos;
  std::vector<int> cur(lo);
  Vec zc(d);
  while (true) {
    if (!steps_at(cur).empty()) {
      for (int i = 0; i < d; ++i) zc[i] = cur[static_cast<std::size_t>(i)];
      Vec x = basis * zc;
      if (domain.contains(x)) {
        index.emplace(cur, static_cast<int>(coords.size()));
        coords.push_back(cur);
        pos.push_back(x);
      }
    }
    int i = 0;
    for (; i < d; ++i) {
      auto ii = static_cast<std::size_t>(i);
      if (++cur[ii] <= hi[ii]) break;
      cur[ii] = lo[ii];
    }
    if (i == d) break;
  }
  // std::map iteration order gives a deterministic lexicographic numbering.
  std::vector<int> order;
  order.reserve(index.size());
  for (const auto& [key, id] : index) order.push_back(id);

  std::vector<Arc> arcs;
  std::vector<int> outdeg(pos.size(), 0);
  std::vector<int> head_coords;
  for (int id : order) {
    const auto& c = coords[static_cast<std::size_t>(id)];
    for (const auto& st : steps_at(c)) {
      std::vector<int> h(c);
      for (int i = 0; i < d; ++i) h[static_cast<std::size_t>(i)] += st.offset[static_cast<std::size_t>(i)];
      auto it = index.find(h);
      if (it == index.end()) continue;
      if (!domain.contains_segment(pos[static_cast<std::size_t>(id)], pos[static_cast<std::size_t>(it->second)]))
        continue;
      arcs.push_back(Arc{id, it->second, st.cls, Vec(), 0.0});
      ++outdeg[static_cast<std::size_t>(id)];
    }
  }
  // Drop nodes without outgoing arcs and renumber in lexicographic order.
  std::vector<int> renum(pos.size(), -1);
  std::vector<Vec> nodes;
  for (int id : order) {
    if (outdeg[static_cast<std::size_t>(id)] == 0) continue;
    renum[static_cast<std::size_t>(id)] = static_cast<int>(nodes.size());
    nodes.push_back(pos[static_cast<std::size_t>(id)]);
  }
  if (nodes.empty()) throw EmptyNetworkError("no lattice node of the domain carries an arc");
  std::vector<Arc> kept;
  kept.reserve(arcs.size());
  for (auto a : arcs) {
    a.tail = renum[static_cast<std::size_t>(a.tail)];
    a.head = renum[static_cast<std::size_t>(a.head)];
    if (a.tail < 0 || a.head < 0) continue;
    kept.push_back(a);
  }
  return Network(epsilon, std::move(nodes), std::move(kept), std::move(family), tag);
}

}  // namespace detail

/// Cubic grid with spacing epsilon, 2d direction classes.
inline Network build_cartesian(const Domain& domain, double epsilon) {
  const int d = domain.dim();
  Eigen::MatrixXd basis = epsilon * Eigen::MatrixXd::Identity(d, d);
  std::vector<detail::LatticeStep> steps;
  for (int s : {1, -1})
    for (int i = 0; i < d; ++i) {
      std::vector<int> off(static_cast<std::size_t>(d), 0);
      off[static_cast<std::size_t>(i)] = s;
      steps.push_back({off, s > 0 ? i : d + i});
    }
  return detail::build_lattice(
      domain, epsilon, basis, [&](const std::vector<int>&) { return steps; },
      DirectionFamily::cartesian(d), FamilyTag::cartesian);
}

namespace detail {
// Triangular lattice basis b1 = eps (cos 30, sin 30), b2 = eps (0, 1); the six
// unit steps in integer coordinates, ordered by direction class.
inline const std::array<std::array<int, 2>, 6>& triangular_steps() {
  static const std::array<std::array<int, 2>, 6> s{{{1, 0}, {0, 1}, {-1, 1}, {-1, 0}, {0, -1}, {1, -1}}};
  return s;
}
inline Eigen::MatrixXd triangular_basis(double epsilon) {
  Eigen::MatrixXd b(2, 2);
  b << std::sqrt(3.0) / 2, 0.0, 0.5, 1.0;
  return epsilon * b;
}
inline int mod3(int v) { return ((v % 3) + 3) % 3; }
}  // namespace detail

/// Triangular lattice with spacing epsilon; six direction classes.
inline Network build_triangular(const Domain& domain, double epsilon) {
  if (domain.dim() != 2) throw InvalidArgument("triangular lattice is planar");
  std::vector<detail::LatticeStep> steps;
  for (int k = 0; k < 6; ++k) {
    const auto& s = detail::triangular_steps()[static_cast<std::size_t>(k)];
    steps.push_back({{s[0], s[1]}, k});
  }
  return detail::build_lattice(
      domain, epsilon, detail::triangular_basis(epsilon),
      [&](const std::vector<int>&) { return steps; }, DirectionFamily::triangular(),
      FamilyTag::triangular);
}

/// Honeycomb with edge length epsilon: the triangular lattice minus one of its
/// three sublattices. Nodes of parity 0 use classes {0, 2, 4}, parity 1 uses
/// {1, 3, 5}.
inline Network build_hexagonal(const Domain& domain, double epsilon) {
  if (domain.dim() != 2) throw InvalidArgument("hexagonal lattice is planar");
  std::vector<detail::LatticeStep> even, odd;
  for (int k = 0; k < 6; ++k) {
    const auto& s = detail::triangular_steps()[static_cast<std::size_t>(k)];
    (k % 2 == 0 ? even : odd).push_back({{s[0], s[1]}, k});
  }
  const std::vector<detail::LatticeStep> none;
  return detail::build_lattice(
      domain, epsilon, detail::triangular_basis(epsilon),
      [&](const std::vector<int>& c) -> const std::vector<detail::LatticeStep>& {
        switch (detail::mod3(c[0] - c[1])) {
          case 0: return even;
          case 1: return odd;
          default: return none;
        }
      },
      DirectionFamily::hexagonal(), FamilyTag::hexagonal);
}

inline Network build_network(FamilyTag tag, const Domain& domain, double epsilon) {
  switch (tag) {
    case FamilyTag::cartesian: return build_cartesian(domain, epsilon);
    case FamilyTag::triangular: return build_triangular(domain, epsilon);
    case FamilyTag::hexagonal: return build_hexagonal(domain, epsilon);
    case FamilyTag::custom: break;
  }
  throw InvalidArgument("custom networks are imported, not generated");
}

// ---------------------------------------------------------------------------
// Structural hypotheses.
// ---------------------------------------------------------------------------

struct ValidationReport {
  double min_length = 0.0;
  double max_length = 0.0;
  double lower_constant = 0.0;  // min |e| / epsilon
  bool max_length_ok = false;   // max |e| <= epsilon (up to roundoff)
  std::vector<int> class_counts;
  bool partition_ok = false;
  bool reverse_arcs_present = false;
  int num_nodes = 0;
  int num_arcs = 0;
  // Direction-measure probe for one test function.
  double discrete_sum = 0.0;
  double theta_integral = 0.0;
  double difference = 0.0;
};

using TestFunction = std::function<double(const Vec& x, const Vec& v)>;

/// sum over arcs of |e|^d phi(x, e/|e|).
inline double direction_measure_sum(const Network& net, const TestFunction& phi) {
  double s = 0.0;
  for (const auto& a : net.arcs())
    s += std::pow(a.length, net.dim()) * phi(net.node(a.tail), a.e / a.length);
  return s;
}

/// Quadrature of the integral of phi against theta = sum_k c_k(x) delta_{v_k(x)} dx.
inline double theta_integral(const DirectionFamily& family, const CellQuadrature& quad,
                             const TestFunction& phi) {
  double s = 0.0;
  for (std::size_t i = 0; i < quad.centers.size(); ++i) {
    const Vec& x = quad.centers[i];
    double inner = 0.0;
    for (int k = 0; k < family.size(); ++k)
      inner += family.coefficient(x, k) * phi(x, family.direction(x, k));
    s += quad.weights[i] * inner;
  }
  return s;
}

inline ValidationReport validate_hypotheses(const Network& net, const Domain& domain,
                                            const TestFunction& phi, double quad_h = 1.0 / 64) {
  if (net.num_arcs() == 0) throw EmptyNetworkError("network has no arcs");
  ValidationReport r;
  r.num_nodes = net.num_nodes();
  r.num_arcs = net.num_arcs();
  r.min_length = kInfinity;
  r.max_length = 0.0;
  r.class_counts.assign(static_cast<std::size_t>(net.family().size()), 0);
  for (const auto& a : net.arcs()) {
    r.min_length = std::min(r.min_length, a.length);
    r.max_length = std::max(r.max_length, a.length);
    ++r.class_counts[static_cast<std::size_t>(a.cls)];
  }
  r.lower_constant = r.min_length / net.epsilon();
  r.max_length_ok = r.max_length <= net.epsilon() * (1 + 1e-12);
  int total = 0;
  for (int c : r.class_counts) total += c;
  r.partition_ok = total == net.num_arcs();
  r.reverse_arcs_present = true;
  for (const auto& a : net.arcs())
    if (net.find_arc(a.head, a.tail) < 0) {
      r.reverse_arcs_present = false;
      break;
    }
  r.discrete_sum = direction_measure_sum(net, phi);
  r.theta_integral = theta_integral(net.family(), make_quadrature(domain, quad_h), phi);
  r.difference = r.discrete_sum - r.theta_integral;
  return r;
}

}  // namespace wardrop
