#pragma once

#include <functional>
#include <queue>
#include <vector>

#include "network.hpp"

namespace wardrop {

/// Labels and predecessor arcs of a single-source (or single-target) search.
struct ShortestPathTree {
  int root = -1;
  bool reverse = false;         // labels are distances *to* root
  std::vector<double> dist;     // +inf when unreachable
  std::vector<int> pred_arc;    // arc used to reach the node, -1 at root/unreached
};

namespace detail {

inline ShortestPathTree dijkstra(const Network& net, const std::vector<double>& w, int root,
                                 bool reverse) {
  if (root < 0 || root >= net.num_nodes()) throw InvalidArgument("node index out of range");
  if (static_cast<int>(w.size()) != net.num_arcs()) throw InvalidArgument("one weight per arc required");
  ShortestPathTree t;
  t.root = root;
  t.reverse = reverse;
  t.dist.assign(static_cast<std::size_t>(net.num_nodes()), kInfinity);
  t.pred_arc.assign(static_cast<std::size_t>(net.num_nodes()), -1);
  std::vector<char> done(static_cast<std::size_t>(net.num_nodes()), 0);
  using Item = std::pair<double, int>;  // ordered by (distance, node id)
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  t.dist[static_cast<std::size_t>(root)] = 0.0;
  heap.emplace(0.0, root);
  while (!heap.empty()) {
    auto [du, u] = heap.top();
    heap.pop();
    if (done[static_cast<std::size_t>(u)]) continue;
    done[static_cast<std::size_t>(u)] = 1;
    for (int a : reverse ? net.in_arcs(u) : net.out_arcs(u)) {
      const double wa = w[static_cast<std::size_t>(a)];
      if (wa < 0) throw InvalidArgument("negative arc weight");
      const int v = reverse ? net.arc(a).tail : net.arc(a).head;
      const double nd = du + wa;
      auto& dv = t.dist[static_cast<std::size_t>(v)];
      if (nd < dv) {
        dv = nd;
        t.pred_arc[static_cast<std::size_t>(v)] = a;
        heap.emplace(nd, v);
      }
    }
  }
  return t;
}

}  // namespace detail

/// Shortest travel times from `source` under nonnegative arc weights.
inline ShortestPathTree shortest_path(const Network& net, const std::vector<double>& times, int source) {
  return detail::dijkstra(net, times, source, false);
}

/// Shortest travel times from every node to `target`.
inline ShortestPathTree shortest_path_to(const Network& net, const std::vector<double>& times, int target) {
  return detail::dijkstra(net, times, target, true);
}

/// Arc sequence from the root of a forward tree to `node` (empty when node == root).
inline std::vector<int> tree_path(const Network& net, const ShortestPathTree& t, int node) {
  if (t.reverse) throw InvalidArgument("tree_path expects a forward tree");
  if (!(t.dist[static_cast<std::size_t>(node)] < kInfinity)) throw UnreachableError(t.root, node);
  std::vector<int> arcs;
  for (int v = node; v != t.root;) {
    int a = t.pred_arc[static_cast<std::size_t>(v)];
    arcs.push_back(a);
    v = net.arc(a).tail;
  }
  std::reverse(arcs.begin(), arcs.end());
  return arcs;
}

/// Among the shortest paths from `source` to the root of the reverse tree
/// `to`, the one with the lexicographically smallest node sequence (parallel
/// arcs tie-break on arc id). Returns the arc sequence.
inline std::vector<int> lexicographic_path(const Network& net, const std::vector<double>& times,
                                           const ShortestPathTree& to, int source) {
  if (!to.reverse) throw InvalidArgument("lexicographic_path expects a reverse tree");
  const int sink = to.root;
  if (!(to.dist[static_cast<std::size_t>(source)] < kInfinity)) throw UnreachableError(source, sink);
  std::vector<int> arcs;
  std::vector<char> seen(static_cast<std::size_t>(net.num_nodes()), 0);
  int u = source;
  seen[static_cast<std::size_t>(u)] = 1;
  while (u != sink) {
    const double du = to.dist[static_cast<std::size_t>(u)];
    const double tol = 1e-14 * std::max(1.0, du);
    int best = -1;
    for (int a : net.out_arcs(u)) {
      const int v = net.arc(a).head;
      if (seen[static_cast<std::size_t>(v)]) continue;
      const double dv = to.dist[static_cast<std::size_t>(v)];
      if (!(dv < kInfinity)) continue;
      if (std::abs(times[static_cast<std::size_t>(a)] + dv - du) > tol) continue;
      if (best < 0 || v < net.arc(best).head || (v == net.arc(best).head && a < best)) best = a;
    }
    if (best < 0) best = to.pred_arc[static_cast<std::size_t>(u)];  // follow the tree
    arcs.push_back(best);
    u = net.arc(best).head;
    if (seen[static_cast<std::size_t>(u)] && u != sink) throw Error("shortest path extraction looped");
    seen[static_cast<std::size_t>(u)] = 1;
  }
  return arcs;
}

/// Node sequence of an arc path starting at `source`.
inline std::vector<int> path_nodes(const Network& net, int source, const std::vector<int>& arcs) {
  std::vector<int> nodes{source};
  for (int a : arcs) {
    if (net.arc(a).tail != nodes.back()) throw InvalidArgument("arcs do not form a path");
    nodes.push_back(net.arc(a).head);
  }
  return nodes;
}

}  // namespace wardrop
