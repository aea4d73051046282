#include "iie/distance_graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <set>
#include <string>

namespace iie {

std::vector<std::vector<std::pair<int, double>>> DistanceGraph::adjacency()
    const {
  std::vector<std::vector<std::pair<int, double>>> adj(num_vertices);
  for (const Edge& e : edges) {
    if (e.weight <= 0.0) continue;
    adj[e.i].emplace_back(e.j, e.dist);
    adj[e.j].emplace_back(e.i, e.dist);
  }
  return adj;
}

std::vector<std::vector<int>> connected_components(const DistanceGraph& graph) {
  const auto adj = graph.adjacency();
  std::vector<int> label(graph.num_vertices, -1);
  std::vector<std::vector<int>> comps;
  for (int s = 0; s < graph.num_vertices; ++s) {
    if (label[s] >= 0) continue;
    const int id = static_cast<int>(comps.size());
    comps.emplace_back();
    std::vector<int> stack{s};
    label[s] = id;
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      comps[id].push_back(v);
      for (const auto& [u, d] : adj[v])
        if (label[u] < 0) {
          label[u] = id;
          stack.push_back(u);
        }
    }
  }
  for (auto& c : comps) std::sort(c.begin(), c.end());
  std::sort(comps.begin(), comps.end(),
            [](const auto& a, const auto& b) { return a.size() > b.size(); });
  return comps;
}

DistanceGraph induced_subgraph(const DistanceGraph& graph,
                               const std::vector<int>& ids) {
  std::vector<int> sorted = ids;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

  std::vector<int> index(graph.num_vertices, -1);
  for (std::size_t i = 0; i < sorted.size(); ++i) index[sorted[i]] = static_cast<int>(i);

  DistanceGraph sub;
  sub.num_vertices = static_cast<int>(sorted.size());
  for (const auto& e : graph.edges)
    if (index[e.i] >= 0 && index[e.j] >= 0)
      sub.edges.push_back({index[e.i], index[e.j], e.dist, e.weight});
  return sub;
}

DistanceGraph with_edge_lengths_from(const DistanceGraph& graph,
                                     const Eigen::MatrixXd& coords) {
  DistanceGraph out = graph;
  for (auto& e : out.edges)
    e.dist = (coords.row(e.i) - coords.row(e.j)).norm();
  return out;
}

namespace {

std::string component_summary(const std::vector<std::vector<int>>& comps) {
  std::string msg = "graph has " + std::to_string(comps.size()) +
                    " components with sizes";
  for (const auto& c : comps) msg += " " + std::to_string(c.size());
  return msg;
}

/// Shared kNN construction: dist(i, j) supplies the candidate edge length.
template <typename DistFn>
DistanceGraph knn_graph_impl(int n, int k, DistFn dist, bool allow_disconnected) {
  if (k < 1 || k >= n)
    throw InvalidInput("build_knn_graph: require 1 <= k < N");

  std::set<std::pair<int, int>> selected;
  std::vector<std::pair<double, int>> cand(n - 1);
  for (int i = 0; i < n; ++i) {
    cand.clear();
    for (int j = 0; j < n; ++j)
      if (j != i) cand.emplace_back(dist(i, j), j);
    std::nth_element(cand.begin(), cand.begin() + (k - 1), cand.end());
    for (int r = 0; r < k; ++r) {
      const int j = cand[r].second;
      selected.emplace(std::min(i, j), std::max(i, j));
    }
  }

  DistanceGraph graph;
  graph.num_vertices = n;
  graph.edges.reserve(selected.size());
  for (const auto& [i, j] : selected)
    graph.edges.push_back({i, j, dist(i, j), 1.0});

  if (!allow_disconnected) {
    const auto comps = connected_components(graph);
    if (comps.size() > 1)
      throw DisconnectedGraph("build_knn_graph: " + component_summary(comps));
  }
  return graph;
}

}  // namespace

DistanceGraph build_knn_graph(const PointSet& observed, const MetricField& field,
                              int k, bool allow_disconnected) {
  const int n = static_cast<int>(observed.size());
  if (static_cast<int>(field.tensors.size()) != n)
    throw InvalidInput("build_knn_graph: metric field does not cover all points");

  auto dist = [&](int i, int j) {
    return std::sqrt(approx_intrinsic_sq_distance(
        observed.point(i).transpose(), observed.point(j).transpose(),
        field.tensors[i], field.tensors[j]));
  };
  return knn_graph_impl(n, k, dist, allow_disconnected);
}

DistanceGraph build_knn_graph_euclidean(const PointSet& observed, int k,
                                        bool allow_disconnected) {
  const int n = static_cast<int>(observed.size());
  auto dist = [&](int i, int j) {
    return (observed.point(i) - observed.point(j)).norm();
  };
  return knn_graph_impl(n, k, dist, allow_disconnected);
}

std::vector<double> dijkstra(const DistanceGraph& graph, int source) {
  const auto adj = graph.adjacency();
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(graph.num_vertices, kInf);
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  dist[source] = 0.0;
  heap.emplace(0.0, source);
  while (!heap.empty()) {
    const auto [d, v] = heap.top();
    heap.pop();
    if (d > dist[v]) continue;
    for (const auto& [u, w] : adj[v]) {
      const double nd = d + w;
      if (nd < dist[u]) {
        dist[u] = nd;
        heap.emplace(nd, u);
      }
    }
  }
  return dist;
}

Eigen::MatrixXd geodesic_all_pairs(const DistanceGraph& graph) {
  const auto comps = connected_components(graph);
  if (comps.size() > 1)
    throw DisconnectedGraph("geodesic_all_pairs: " + component_summary(comps));

  const int n = graph.num_vertices;
  Eigen::MatrixXd d(n, n);
  for (int s = 0; s < n; ++s) {
    const auto row = dijkstra(graph, s);
    for (int t = 0; t < n; ++t) d(s, t) = row[t];
  }
  // the s->t and t->s relaxations can round differently along the same path;
  // the lower triangle is authoritative.
  for (int s = 0; s < n; ++s) {
    d(s, s) = 0.0;
    for (int t = 0; t < s; ++t) d(t, s) = d(s, t);
  }
  return d;
}

double intrinsic_path_length(const std::vector<int>& path,
                             const PointSet& observed,
                             const MetricField& field) {
  if (path.size() < 2) return 0.0;
  double total = 0.0;
  for (std::size_t p = 0; p + 1 < path.size(); ++p) {
    const int i = path[p];
    const int j = path[p + 1];
    total += std::sqrt(approx_intrinsic_sq_distance(
        observed.point(i).transpose(), observed.point(j).transpose(),
        field.tensors[i], field.tensors[j]));
  }
  return total;
}

}  // namespace iie
