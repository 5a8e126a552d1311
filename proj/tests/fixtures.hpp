// Small instances shared by several test files.
#pragma once

#include <vector>

#include "wardrop/wardrop.hpp"

namespace fixture {

using namespace wardrop;

inline Vec v2(double x, double y) {
  Vec v(2);
  v << x, y;
  return v;
}

/// Two parallel unit-length arcs 0 -> 1 of classes 0 and 1.
inline Network pigou_network() {
  auto fam = DirectionFamily::constant({v2(1, 0), v2(1, 0)}, {1.0, 1.0});
  return Network::from_arc_list(1.0, {v2(0, 0), v2(1, 0)}, {{0, 1, 0}, {0, 1, 1}}, fam);
}

/// g1 = m + 1, g2 = 1e-9 m + 2.
inline PowerLawModel pigou_model() {
  return PowerLawModel(2.0, {{Polynomial::constant(1.0), 1.0}, {Polynomial::constant(1e-9), 2.0}});
}

inline TransportPlan pigou_plan(double demand = 2.0) {
  TransportPlan p;
  p.add(0, 1, demand);
  return p;
}

/// n x n cartesian grid on the unit square (spacing 1/(n-1)).
inline Network grid(int n) {
  return build_cartesian(Domain::box(Vec::Zero(2), Vec::Ones(2)), 1.0 / (n - 1));
}

/// Node of a grid() at integer coordinates (i along x, j along y).
inline int grid_node(const Network& net, int n, int i, int j) {
  return net.nearest_node(v2(static_cast<double>(i) / (n - 1), static_cast<double>(j) / (n - 1)));
}

}  // namespace fixture
