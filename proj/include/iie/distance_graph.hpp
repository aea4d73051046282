#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "iie/metric.hpp"
#include "iie/point_set.hpp"

namespace iie {

/// Sparse graph of trusted short-range intrinsic distance estimates.
/// Edges are stored once with i < j; weights are binary trust flags.
struct DistanceGraph {
  struct Edge {
    int i;
    int j;
    double dist;
    double weight;  // 0 or 1
  };

  std::vector<Edge> edges;
  int num_vertices = 0;

  /// Adjacency lists over edges with weight > 0: per vertex, (neighbor, dist).
  std::vector<std::vector<std::pair<int, double>>> adjacency() const;
};

/// Connected components of the positive-weight edge set, largest first.
/// Each component is a sorted list of vertex ids.
std::vector<std::vector<int>> connected_components(const DistanceGraph& graph);

/// Subgraph induced by `ids` (sorted, deduplicated internally). Vertices are
/// renumbered 0..|ids|-1 in id order; the mapping back is `ids` itself.
DistanceGraph induced_subgraph(const DistanceGraph& graph,
                               const std::vector<int>& ids);

/// Same edge set with every edge length replaced by the Euclidean distance
/// between the endpoint rows of `coords`. Used by failure detection.
DistanceGraph with_edge_lengths_from(const DistanceGraph& graph,
                                     const Eigen::MatrixXd& coords);

/// kNN graph under the metric-approximated intrinsic distance, symmetrized
/// by union. All included edges carry weight 1. Throws DisconnectedGraph
/// listing component sizes when the result is not connected; callers that
/// can proceed on the largest component catch it and re-build.
DistanceGraph build_knn_graph(const PointSet& observed,
                              const MetricField& field, int k,
                              bool allow_disconnected = false);

/// kNN graph on plain observed Euclidean distances (standard-Isomap input).
DistanceGraph build_knn_graph_euclidean(const PointSet& observed, int k,
                                        bool allow_disconnected = false);

/// All-pairs shortest-path distances via per-source Dijkstra.
/// Requires a connected graph.
Eigen::MatrixXd geodesic_all_pairs(const DistanceGraph& graph);

/// Single-source shortest-path distances (infinity for unreachable).
std::vector<double> dijkstra(const DistanceGraph& graph, int source);

/// Discrete metric line integral: sum of sqrt(approx_intrinsic_sq_distance)
/// over consecutive path points. Empty and single-point paths measure 0.
double intrinsic_path_length(const std::vector<int>& path,
                             const PointSet& observed,
                             const MetricField& field);

}  // namespace iie
