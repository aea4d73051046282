#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "iie/distance_graph.hpp"
#include "iie/point_set.hpp"

namespace iie {

/// n-dimensional coordinates plus stress diagnostics. `stress` is the
/// weighted stress against the graph the embedding was built from; ops with
/// no graph context (classical_mds) leave it at 0.
struct EmbeddingResult {
  Eigen::MatrixXd coords;  // N x n
  double stress = 0.0;
  std::optional<double> full_stress_vs_truth;
  int iterations = 0;
  bool converged = true;
  bool rank_deficient = false;
  bool failure_flag = false;
};

/// Subset of graph vertices embedded independently by the multi-scale
/// scheme; overlap_ids are shared with the sibling patch.
struct Patch {
  std::vector<int> vertex_ids;
  std::vector<int> overlap_ids;
};

struct FailureReport {
  double rho = 0.0;  // median normalized geodesic discrepancy
  double threshold = 0.0;
  bool failed = false;
};

/// Least-squares rigid map x -> rotation * x + translation. `rotation` is
/// orthogonal; reflections are permitted.
struct RigidTransform {
  Eigen::MatrixXd rotation;
  Eigen::VectorXd translation;

  Eigen::MatrixXd apply(const Eigen::MatrixXd& coords) const {
    return (coords * rotation.transpose()).rowwise() + translation.transpose();
  }
};

struct MultiscaleConfig {
  double smacof_tol = 1e-6;
  int smacof_max_iter = 1000;
  bool failure_detection = true;
  double failure_threshold = 0.1;
  double overlap_margin = 0.2;
  int min_patch_size = 50;
  int max_depth = 4;
};

/// Diagnostic record of the recursive splits taken by multiscale_embed.
struct SplitTree {
  int num_vertices = 0;
  double rho = 0.0;
  bool direct_ok = true;
  bool split_failed = false;
  std::vector<SplitTree> children;
};

/// Weighted stress sum_{i<j} w_ij (||x_i - x_j|| - d_ij)^2 over graph edges.
double weighted_stress(const Eigen::MatrixXd& coords, const DistanceGraph& graph);

/// Unweighted all-pairs stress against ground-truth intrinsic coordinates.
double full_stress(const Eigen::MatrixXd& coords, const PointSet& truth);

/// Classical MDS: double-center -1/2 J D^2 J and take the top-n eigenpairs,
/// clamping negative eigenvalues to zero. Columns ordered by descending
/// eigenvalue; rank_deficient set when fewer than n positive eigenvalues.
EmbeddingResult classical_mds(const Eigen::MatrixXd& dist_matrix, int n);

/// Non-intrinsic baseline: Euclidean kNN graph, shortest paths, classical MDS.
EmbeddingResult standard_isomap(const PointSet& observed, int k, int n);

/// Intrinsic Isomap: geodesic_all_pairs on the metric-corrected graph, then
/// classical MDS.
EmbeddingResult intrinsic_isomap(const DistanceGraph& graph, int n);

/// One Guttman-transform update of the weighted stress. Stress never
/// increases. Coincident connected pairs contribute a zero ratio term.
Eigen::MatrixXd smacof_step(const Eigen::MatrixXd& coords,
                            const DistanceGraph& graph);

/// Iterate smacof_step until the relative stress decrease drops below tol or
/// max_iter is reached.
EmbeddingResult smacof_optimize(const Eigen::MatrixXd& init,
                                const DistanceGraph& graph, double tol = 1e-6,
                                int max_iter = 1000);

/// Rigid transform minimizing sum ||R*source[i] + t - target[j]||^2 over the
/// given (source_row, target_row) correspondences.
RigidTransform procrustes_align(
    const Eigen::MatrixXd& source, const Eigen::MatrixXd& target,
    const std::vector<std::pair<int, int>>& correspondences);

/// Row-to-row alignment of two equally sized coordinate sets.
RigidTransform procrustes_align(const Eigen::MatrixXd& source,
                                const Eigen::MatrixXd& target);

/// Consistency check between the estimated intrinsic geodesics and geodesics
/// recomputed over the same edge set with embedding-space edge lengths.
FailureReport detect_embedding_failure(const EmbeddingResult& embed,
                                       const DistanceGraph& graph,
                                       const Eigen::MatrixXd& geodesics,
                                       double threshold = 0.1);

/// Split at the two geodesically most distant vertices; each vertex joins its
/// nearer pole and a band of near-equidistant vertices joins both patches.
std::pair<Patch, Patch> split_patches(const DistanceGraph& graph,
                                      const Eigen::MatrixXd& geodesics,
                                      double overlap_margin = 0.2,
                                      int min_patch_size = 50);

/// Full embedding pipeline with recursive split / register / merge fallback
/// when the direct intrinsic-Isomap + SMACOF route fails the consistency
/// check.
EmbeddingResult multiscale_embed(const DistanceGraph& graph, int n,
                                 const MultiscaleConfig& config,
                                 SplitTree* tree = nullptr);

}  // namespace iie
