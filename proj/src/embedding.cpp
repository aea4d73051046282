#include "iie/embedding.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <set>

namespace iie {

double weighted_stress(const Eigen::MatrixXd& coords,
                       const DistanceGraph& graph) {
  if (coords.rows() < graph.num_vertices)
    throw InvalidInput("weighted_stress: coords do not cover all vertices");
  double s = 0.0;
  for (const auto& e : graph.edges) {
    if (e.weight <= 0.0) continue;
    const double d = (coords.row(e.i) - coords.row(e.j)).norm();
    s += e.weight * (d - e.dist) * (d - e.dist);
  }
  return s;
}

double full_stress(const Eigen::MatrixXd& coords, const PointSet& truth) {
  if (coords.rows() != truth.size())
    throw InvalidInput("full_stress: size mismatch");
  double s = 0.0;
  for (Eigen::Index i = 0; i < coords.rows(); ++i)
    for (Eigen::Index j = i + 1; j < coords.rows(); ++j) {
      const double d = (coords.row(i) - coords.row(j)).norm();
      const double t = (truth.point(i) - truth.point(j)).norm();
      s += (d - t) * (d - t);
    }
  return s;
}

EmbeddingResult classical_mds(const Eigen::MatrixXd& dist_matrix, int n) {
  const Eigen::Index N = dist_matrix.rows();
  if (dist_matrix.cols() != N || n < 1 || n > N)
    throw InvalidInput("classical_mds: bad shape or target dimension");

  // B = -1/2 C D^2 C via explicit double centering.
  Eigen::MatrixXd d2 = dist_matrix.array().square();
  const Eigen::VectorXd row_mean = d2.rowwise().mean();
  const double total_mean = row_mean.mean();
  Eigen::MatrixXd b = -0.5 * (d2.colwise() - row_mean);
  b = (b.rowwise() + 0.5 * row_mean.transpose()).eval();
  b.array() -= 0.5 * total_mean;
  b = (0.5 * (b + b.transpose())).eval();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(b);
  if (eig.info() != Eigen::Success)
    throw IllConditioned("classical_mds: eigendecomposition failed");

  EmbeddingResult result;
  result.coords = Eigen::MatrixXd::Zero(N, n);
  for (int c = 0; c < n; ++c) {
    const Eigen::Index k = N - 1 - c;  // eigenvalues come back ascending
    const double lambda = eig.eigenvalues()(k);
    if (lambda > 0.0)
      result.coords.col(c) = eig.eigenvectors().col(k) * std::sqrt(lambda);
    else
      result.rank_deficient = true;  // pad with zeros
  }
  return result;
}

EmbeddingResult standard_isomap(const PointSet& observed, int k, int n) {
  const DistanceGraph graph = build_knn_graph_euclidean(observed, k);
  EmbeddingResult result = classical_mds(geodesic_all_pairs(graph), n);
  result.stress = weighted_stress(result.coords, graph);
  return result;
}

EmbeddingResult intrinsic_isomap(const DistanceGraph& graph, int n) {
  EmbeddingResult result = classical_mds(geodesic_all_pairs(graph), n);
  result.stress = weighted_stress(result.coords, graph);
  return result;
}

namespace {

/// Guttman-transform machinery shared by smacof_step and smacof_optimize.
/// V is the binary-weight Laplacian; its pseudo-inverse action is realized
/// through a Cholesky factorization of V + (1/N) 1 1^T, computed once.
class SmacofSolver {
 public:
  explicit SmacofSolver(const DistanceGraph& graph) : graph_(graph) {
    const int n = graph.num_vertices;
    Eigen::MatrixXd v = Eigen::MatrixXd::Constant(n, n, 1.0 / n);
    for (const auto& e : graph.edges) {
      if (e.weight <= 0.0) continue;
      v(e.i, e.i) += e.weight;
      v(e.j, e.j) += e.weight;
      v(e.i, e.j) -= e.weight;
      v(e.j, e.i) -= e.weight;
    }
    llt_.compute(v);
    if (llt_.info() != Eigen::Success)
      throw IllConditioned("smacof: V factorization failed (disconnected graph?)");
  }

  Eigen::MatrixXd step(const Eigen::MatrixXd& coords) const {
    const int n = graph_.num_vertices;
    Eigen::MatrixXd bx = Eigen::MatrixXd::Zero(n, coords.cols());
    for (const auto& e : graph_.edges) {
      if (e.weight <= 0.0) continue;
      const Eigen::RowVectorXd diff = coords.row(e.i) - coords.row(e.j);
      const double d = diff.norm();
      if (d <= 0.0) continue;  // coincident pair: ratio term is 0
      const Eigen::RowVectorXd contrib = (e.weight * e.dist / d) * diff;
      bx.row(e.i) += contrib;
      bx.row(e.j) -= contrib;
    }
    // columns of B(X) X sum to zero, so this solve is exactly V^dagger B(X) X
    return llt_.solve(bx);
  }

 private:
  const DistanceGraph& graph_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

}  // namespace

Eigen::MatrixXd smacof_step(const Eigen::MatrixXd& coords,
                            const DistanceGraph& graph) {
  if (coords.rows() != graph.num_vertices)
    throw InvalidInput("smacof_step: coords do not cover all vertices");
  return SmacofSolver(graph).step(coords);
}

EmbeddingResult smacof_optimize(const Eigen::MatrixXd& init,
                                const DistanceGraph& graph, double tol,
                                int max_iter) {
  if (!init.allFinite())
    throw InvalidInput("smacof_optimize: non-finite initialization");

  EmbeddingResult result;
  result.coords = init;
  result.stress = weighted_stress(init, graph);
  result.converged = false;

  SmacofSolver solver(graph);
  for (int it = 0; it < max_iter; ++it) {
    Eigen::MatrixXd next = solver.step(result.coords);
    const double s = weighted_stress(next, graph);
    result.iterations = it + 1;
    const double drop = result.stress - s;
    result.coords = std::move(next);
    const double prev = result.stress;
    result.stress = s;
    if (drop < tol * (prev > 0.0 ? prev : 1.0)) {
      result.converged = true;
      break;
    }
  }
  return result;
}

RigidTransform procrustes_align(
    const Eigen::MatrixXd& source, const Eigen::MatrixXd& target,
    const std::vector<std::pair<int, int>>& correspondences) {
  const Eigen::Index dim = source.cols();
  if (target.cols() != dim)
    throw InvalidInput("procrustes_align: dimension mismatch");
  if (static_cast<Eigen::Index>(correspondences.size()) < dim + 1)
    throw DegenerateAlignment("procrustes_align: too few correspondences");

  Eigen::VectorXd src_mean = Eigen::VectorXd::Zero(dim);
  Eigen::VectorXd tgt_mean = Eigen::VectorXd::Zero(dim);
  for (const auto& [s, t] : correspondences) {
    src_mean += source.row(s).transpose();
    tgt_mean += target.row(t).transpose();
  }
  src_mean /= static_cast<double>(correspondences.size());
  tgt_mean /= static_cast<double>(correspondences.size());

  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim);
  double scale = 0.0;
  for (const auto& [s, t] : correspondences) {
    const Eigen::VectorXd sc = source.row(s).transpose() - src_mean;
    const Eigen::VectorXd tc = target.row(t).transpose() - tgt_mean;
    h += tc * sc.transpose();
    scale += sc.squaredNorm();
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const double smax = svd.singularValues()(0);
  if (scale <= 0.0 || smax <= 0.0 ||
      svd.singularValues()(dim - 1) <= 1e-12 * smax)
    throw DegenerateAlignment("procrustes_align: rank-deficient correspondences");

  RigidTransform xf;
  xf.rotation = svd.matrixU() * svd.matrixV().transpose();
  xf.translation = tgt_mean - xf.rotation * src_mean;
  return xf;
}

RigidTransform procrustes_align(const Eigen::MatrixXd& source,
                                const Eigen::MatrixXd& target) {
  if (source.rows() != target.rows())
    throw InvalidInput("procrustes_align: size mismatch");
  std::vector<std::pair<int, int>> corr(source.rows());
  for (Eigen::Index i = 0; i < source.rows(); ++i)
    corr[i] = {static_cast<int>(i), static_cast<int>(i)};
  return procrustes_align(source, target, corr);
}

FailureReport detect_embedding_failure(const EmbeddingResult& embed,
                                       const DistanceGraph& graph,
                                       const Eigen::MatrixXd& geodesics,
                                       double threshold) {
  const Eigen::MatrixXd emb_geo =
      geodesic_all_pairs(with_edge_lengths_from(graph, embed.coords));

  std::vector<double> rel;
  rel.reserve(static_cast<std::size_t>(graph.num_vertices) *
              (graph.num_vertices - 1) / 2);
  for (int i = 0; i < graph.num_vertices; ++i)
    for (int j = i + 1; j < graph.num_vertices; ++j) {
      const double g = geodesics(i, j);
      if (g > 0.0) rel.push_back(std::abs(g - emb_geo(i, j)) / g);
    }

  FailureReport report;
  report.threshold = threshold;
  if (!rel.empty()) {
    const std::size_t mid = rel.size() / 2;
    std::nth_element(rel.begin(), rel.begin() + mid, rel.end());
    report.rho = rel[mid];
  }
  report.failed = report.rho > threshold;
  return report;
}

namespace {

void dijkstra_predecessors(const DistanceGraph& graph, int source,
                           std::vector<int>& pred) {
  const auto adj = graph.adjacency();
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(graph.num_vertices, kInf);
  pred.assign(graph.num_vertices, -1);
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
        pred[u] = v;
        heap.emplace(nd, u);
      }
    }
  }
}

/// Add shortest-path predecessor chains until the induced subgraph of
/// `members` is connected to `pole`.
void connect_via_predecessors(const DistanceGraph& graph, int pole,
                              std::set<int>& members) {
  std::vector<int> pred;
  dijkstra_predecessors(graph, pole, pred);
  for (int rounds = 0; rounds < graph.num_vertices; ++rounds) {
    std::vector<int> ids(members.begin(), members.end());
    const DistanceGraph sub = induced_subgraph(graph, ids);
    const auto comps = connected_components(sub);
    if (comps.size() <= 1) return;
    const std::size_t before = members.size();
    for (const auto& comp : comps) {
      for (int local : comp) {
        int v = ids[local];
        while (v != pole && pred[v] >= 0) {
          v = pred[v];
          if (members.count(v)) break;
          members.insert(v);
        }
      }
    }
    if (members.size() == before) return;  // no progress; give up
  }
}

}  // namespace

std::pair<Patch, Patch> split_patches(const DistanceGraph& graph,
                                      const Eigen::MatrixXd& geodesics,
                                      double overlap_margin,
                                      int min_patch_size) {
  const int n = graph.num_vertices;
  if (n < 2 * min_patch_size)
    throw SplitFailed("split_patches: graph below 2 * min_patch_size");

  int pole_a = 0, pole_b = 1;
  double sep = -1.0;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (geodesics(i, j) > sep) {
        sep = geodesics(i, j);
        pole_a = i;
        pole_b = j;
      }
  if (sep <= 0.0) throw SplitFailed("split_patches: zero-diameter graph");

  const double band = overlap_margin * sep;
  std::set<int> a_set, b_set;
  for (int v = 0; v < n; ++v) {
    const double gap = geodesics(pole_a, v) - geodesics(pole_b, v);
    if (gap < band) a_set.insert(v);
    if (-gap < band) b_set.insert(v);
  }

  connect_via_predecessors(graph, pole_a, a_set);
  connect_via_predecessors(graph, pole_b, b_set);

  Patch a, b;
  a.vertex_ids.assign(a_set.begin(), a_set.end());
  b.vertex_ids.assign(b_set.begin(), b_set.end());
  for (int v : a.vertex_ids)
    if (b_set.count(v)) a.overlap_ids.push_back(v);
  b.overlap_ids = a.overlap_ids;

  if (a.overlap_ids.empty())
    throw SplitFailed("split_patches: empty overlap");
  if (static_cast<int>(a.vertex_ids.size()) >= n ||
      static_cast<int>(b.vertex_ids.size()) >= n)
    throw SplitFailed("split_patches: degenerate split (one patch covers graph)");
  if (connected_components(induced_subgraph(graph, a.vertex_ids)).size() > 1 ||
      connected_components(induced_subgraph(graph, b.vertex_ids)).size() > 1)
    throw SplitFailed("split_patches: could not produce two connected patches");
  return {a, b};
}

namespace {

EmbeddingResult multiscale_recurse(const DistanceGraph& graph, int n,
                                   const MultiscaleConfig& config, int depth,
                                   SplitTree& tree) {
  tree.num_vertices = graph.num_vertices;

  const Eigen::MatrixXd geodesics = geodesic_all_pairs(graph);
  const EmbeddingResult init = classical_mds(geodesics, n);
  EmbeddingResult direct = smacof_optimize(init.coords, graph, config.smacof_tol,
                                           config.smacof_max_iter);

  if (!config.failure_detection) return direct;

  const FailureReport check =
      detect_embedding_failure(direct, graph, geodesics, config.failure_threshold);
  tree.rho = check.rho;
  tree.direct_ok = !check.failed;
  if (!check.failed) return direct;

  if (depth >= config.max_depth ||
      graph.num_vertices < 2 * config.min_patch_size) {
    direct.failure_flag = true;
    return direct;
  }

  Patch pa, pb;
  try {
    std::tie(pa, pb) = split_patches(graph, geodesics, config.overlap_margin,
                                     config.min_patch_size);
  } catch (const SplitFailed&) {
    tree.split_failed = true;
    direct.failure_flag = true;
    return direct;
  }

  const DistanceGraph ga = induced_subgraph(graph, pa.vertex_ids);
  const DistanceGraph gb = induced_subgraph(graph, pb.vertex_ids);
  tree.children.resize(2);
  const EmbeddingResult ea =
      multiscale_recurse(ga, n, config, depth + 1, tree.children[0]);
  const EmbeddingResult eb =
      multiscale_recurse(gb, n, config, depth + 1, tree.children[1]);

  // register patch B onto patch A's frame through the overlap
  std::vector<int> a_index(graph.num_vertices, -1), b_index(graph.num_vertices, -1);
  for (std::size_t i = 0; i < pa.vertex_ids.size(); ++i)
    a_index[pa.vertex_ids[i]] = static_cast<int>(i);
  for (std::size_t i = 0; i < pb.vertex_ids.size(); ++i)
    b_index[pb.vertex_ids[i]] = static_cast<int>(i);

  std::vector<std::pair<int, int>> corr;
  corr.reserve(pa.overlap_ids.size());
  for (int v : pa.overlap_ids) corr.emplace_back(b_index[v], a_index[v]);

  Eigen::MatrixXd merged(graph.num_vertices, n);
  try {
    const RigidTransform xf = procrustes_align(eb.coords, ea.coords, corr);
    const Eigen::MatrixXd tb = xf.apply(eb.coords);
    for (int v = 0; v < graph.num_vertices; ++v) {
      const bool in_a = a_index[v] >= 0;
      const bool in_b = b_index[v] >= 0;
      if (in_a && in_b)
        merged.row(v) = 0.5 * (ea.coords.row(a_index[v]) + tb.row(b_index[v]));
      else if (in_a)
        merged.row(v) = ea.coords.row(a_index[v]);
      else
        merged.row(v) = tb.row(b_index[v]);
    }
  } catch (const DegenerateAlignment&) {
    direct.failure_flag = true;
    return direct;
  }

  EmbeddingResult refined = smacof_optimize(merged, graph, config.smacof_tol,
                                            config.smacof_max_iter);
  const FailureReport final_check = detect_embedding_failure(
      refined, graph, geodesics, config.failure_threshold);
  refined.failure_flag =
      final_check.failed || ea.failure_flag || eb.failure_flag;
  return refined;
}

}  // namespace

EmbeddingResult multiscale_embed(const DistanceGraph& graph, int n,
                                 const MultiscaleConfig& config,
                                 SplitTree* tree) {
  SplitTree local;
  SplitTree& t = tree ? *tree : local;
  t = SplitTree{};
  return multiscale_recurse(graph, n, config, 0, t);
}

}  // namespace iie
