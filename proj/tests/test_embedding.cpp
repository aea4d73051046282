#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <random>

#include "iie/embedding.hpp"
#include "iie/errors.hpp"
#include "iie/rng.hpp"

using namespace iie;

namespace {

Eigen::MatrixXd random_coords(int rows, int cols, std::uint64_t seed) {
  auto rng = make_rng(seed, 0);
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = g(rng);
  return m;
}

DistanceGraph random_connected_graph(int n, std::uint64_t seed) {
  auto rng = make_rng(seed, 1);
  std::uniform_real_distribution<double> u(0.1, 2.0);
  std::uniform_int_distribution<int> pick(0, n - 1);
  DistanceGraph g;
  g.num_vertices = n;
  for (int v = 1; v < n; ++v) {
    std::uniform_int_distribution<int> parent(0, v - 1);
    g.edges.push_back({parent(rng), v, u(rng), 1.0});
  }
  for (int extra = 0; extra < 2 * n; ++extra) {
    int a = pick(rng), b = pick(rng);
    if (a == b) continue;
    g.edges.push_back({std::min(a, b), std::max(a, b), u(rng), 1.0});
  }
  return g;
}

Eigen::MatrixXd pairwise_distances(const Eigen::MatrixXd& coords) {
  const Eigen::Index n = coords.rows();
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      d(i, j) = (coords.row(i) - coords.row(j)).norm();
  return d;
}

double rmsd_after_alignment(const Eigen::MatrixXd& coords,
                            const Eigen::MatrixXd& target) {
  const RigidTransform xf = procrustes_align(coords, target);
  return std::sqrt((xf.apply(coords) - target).squaredNorm() /
                   static_cast<double>(coords.rows()));
}

DistanceGraph path_graph(int n) {
  DistanceGraph g;
  g.num_vertices = n;
  for (int v = 0; v + 1 < n; ++v) g.edges.push_back({v, v + 1, 1.0, 1.0});
  return g;
}

}  // namespace

TEST_CASE("weighted stress matches a naive edge loop") {
  const DistanceGraph g = random_connected_graph(15, 3);
  const Eigen::MatrixXd x = random_coords(15, 2, 4);
  double naive = 0.0;
  for (const auto& e : g.edges) {
    const double d = (x.row(e.i) - x.row(e.j)).norm();
    naive += e.weight * (d - e.dist) * (d - e.dist);
  }
  CHECK(weighted_stress(x, g) == doctest::Approx(naive).epsilon(1e-14));
}

TEST_CASE("full stress matches a naive double loop") {
  const Eigen::MatrixXd x = random_coords(12, 2, 5);
  const PointSet truth(random_coords(12, 2, 6));
  double naive = 0.0;
  for (int i = 0; i < 12; ++i)
    for (int j = i + 1; j < 12; ++j) {
      const double d = (x.row(i) - x.row(j)).norm();
      const double t = (truth.point(i) - truth.point(j)).norm();
      naive += (d - t) * (d - t);
    }
  CHECK(full_stress(x, truth) == doctest::Approx(naive).epsilon(1e-14));
}

TEST_CASE("classical MDS recovers planar configurations exactly") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Eigen::MatrixXd original = random_coords(20, 2, 100 + seed);
    const EmbeddingResult res = classical_mds(pairwise_distances(original), 2);
    CHECK_FALSE(res.rank_deficient);
    CHECK(rmsd_after_alignment(res.coords, original) < 1e-9);
  }
}

TEST_CASE("classical MDS flags rank deficiency on coincident points") {
  const EmbeddingResult res = classical_mds(Eigen::MatrixXd::Zero(4, 4), 2);
  CHECK(res.rank_deficient);
  CHECK(res.coords.norm() == 0.0);
}

TEST_CASE("classical MDS rejects malformed input") {
  CHECK_THROWS_AS(classical_mds(Eigen::MatrixXd::Zero(3, 4), 2), InvalidInput);
  CHECK_THROWS_AS(classical_mds(Eigen::MatrixXd::Zero(3, 3), 0), InvalidInput);
  CHECK_THROWS_AS(classical_mds(Eigen::MatrixXd::Zero(3, 3), 4), InvalidInput);
}

TEST_CASE("one SMACOF step on two points lands at the closed-form optimum") {
  DistanceGraph g;
  g.num_vertices = 2;
  g.edges.push_back({0, 1, 3.0, 1.0});
  Eigen::MatrixXd x(2, 2);
  x << 0, 0, 0.5, 0;
  const Eigen::MatrixXd next = smacof_step(x, g);
  // Guttman update: points move to +-d/2 about the centroid along the
  // current direction, reaching the target distance in one step.
  CHECK(next(0, 0) == doctest::Approx(-1.5).epsilon(1e-12));
  CHECK(next(1, 0) == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(std::abs(next(0, 1)) < 1e-12);
  CHECK(weighted_stress(next, g) == doctest::Approx(0.0).epsilon(1e-20));
}

TEST_CASE("SMACOF stress is monotone non-increasing on random instances") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const DistanceGraph g = random_connected_graph(12, 200 + seed);
    Eigen::MatrixXd x = random_coords(12, 2, 300 + seed);
    double stress = weighted_stress(x, g);
    for (int it = 0; it < 30; ++it) {
      x = smacof_step(x, g);
      const double next = weighted_stress(x, g);
      CHECK(next <= stress * (1.0 + 1e-12) + 1e-15);
      stress = next;
    }
  }
}

TEST_CASE("SMACOF drives realizable instances to near-zero stress") {
  const Eigen::MatrixXd truth = random_coords(20, 2, 7);
  DistanceGraph g = random_connected_graph(20, 7);
  for (auto& e : g.edges) e.dist = (truth.row(e.i) - truth.row(e.j)).norm();
  // start from a perturbation of the realizing configuration
  const Eigen::MatrixXd init = truth + 0.05 * random_coords(20, 2, 8);
  const EmbeddingResult res = smacof_optimize(init, g, 1e-9, 5000);
  CHECK(res.stress < 1e-10);
  CHECK(res.converged);
}

TEST_CASE("SMACOF tolerates coincident initial points") {
  DistanceGraph g = path_graph(4);
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(4, 2);
  x.row(3) << 1.0, 0.0;  // rows 0..2 coincident
  const Eigen::MatrixXd next = smacof_step(x, g);
  CHECK(next.allFinite());
}

TEST_CASE("procrustes recovers a planted rigid transform") {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const Eigen::MatrixXd src = random_coords(10, 2, 400 + seed);
    const double theta = 0.3 + static_cast<double>(seed);
    Eigen::MatrixXd rot(2, 2);
    rot << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
    if (seed % 2 == 1) rot.col(1) *= -1.0;  // reflections are allowed
    Eigen::VectorXd t(2);
    t << 1.5, -0.25;
    const Eigen::MatrixXd tgt =
        (src * rot.transpose()).rowwise() + t.transpose();
    const RigidTransform xf = procrustes_align(src, tgt);
    CHECK((xf.rotation - rot).norm() < 1e-10);
    CHECK((xf.translation - t).norm() < 1e-10);
    CHECK((xf.apply(src) - tgt).norm() < 1e-9);
  }
}

TEST_CASE("procrustes beats an exhaustive rotation grid") {
  const Eigen::MatrixXd src = random_coords(8, 2, 11);
  const Eigen::MatrixXd tgt = random_coords(8, 2, 12);
  const RigidTransform xf = procrustes_align(src, tgt);
  const double opt = (xf.apply(src) - tgt).squaredNorm();

  // independent oracle: dense angle grid over rotations and reflections with
  // the optimal translation (centroid match) for each candidate
  const Eigen::RowVectorXd sc = src.colwise().mean();
  const Eigen::RowVectorXd tc = tgt.colwise().mean();
  double best = std::numeric_limits<double>::infinity();
  for (int refl = 0; refl < 2; ++refl)
    for (int a = 0; a < 3600; ++a) {
      const double th = a * (2.0 * std::numbers::pi / 3600.0);
      Eigen::MatrixXd r(2, 2);
      r << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
      if (refl) r.col(1) *= -1.0;
      const Eigen::MatrixXd moved =
          ((src.rowwise() - sc) * r.transpose()).rowwise() + tc;
      best = std::min(best, (moved - tgt).squaredNorm());
    }
  CHECK(opt <= best + 1e-9);
  CHECK(opt >= best - 0.05 * best);  // the grid cannot beat it by much
}

TEST_CASE("procrustes rejects degenerate correspondence sets") {
  const Eigen::MatrixXd src = random_coords(5, 2, 13);
  const Eigen::MatrixXd tgt = random_coords(5, 2, 14);
  CHECK_THROWS_AS(procrustes_align(src, tgt, {{0, 0}, {1, 1}}),
                  DegenerateAlignment);

  Eigen::MatrixXd collinear(4, 2);
  collinear << 0, 0, 1, 0, 2, 0, 3, 0;
  CHECK_THROWS_AS(procrustes_align(collinear, tgt.topRows(4)),
                  DegenerateAlignment);
}

TEST_CASE("failure detection passes faithful embeddings and flags scaled ones") {
  const Eigen::MatrixXd truth = random_coords(25, 2, 15);
  DistanceGraph g = random_connected_graph(25, 15);
  for (auto& e : g.edges) e.dist = (truth.row(e.i) - truth.row(e.j)).norm();
  const Eigen::MatrixXd geo = geodesic_all_pairs(g);

  EmbeddingResult exact;
  exact.coords = truth;
  const FailureReport ok = detect_embedding_failure(exact, g, geo, 0.1);
  CHECK(ok.rho < 1e-12);
  CHECK_FALSE(ok.failed);

  EmbeddingResult scaled;
  scaled.coords = 2.0 * truth;
  const FailureReport bad = detect_embedding_failure(scaled, g, geo, 0.1);
  CHECK(bad.rho == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(bad.failed);
}

TEST_CASE("split_patches halves a path graph at its diameter poles") {
  const int n = 40;
  const DistanceGraph g = path_graph(n);
  const Eigen::MatrixXd geo = geodesic_all_pairs(g);
  const auto [a, b] = split_patches(g, geo, 0.2, 5);

  CHECK_FALSE(a.overlap_ids.empty());
  CHECK(a.overlap_ids == b.overlap_ids);
  CHECK(static_cast<int>(a.vertex_ids.size()) < n);
  CHECK(static_cast<int>(b.vertex_ids.size()) < n);

  // every vertex lands in at least one patch
  std::vector<bool> covered(n, false);
  for (int v : a.vertex_ids) covered[v] = true;
  for (int v : b.vertex_ids) covered[v] = true;
  for (int v = 0; v < n; ++v) CHECK(covered[v]);

  // patches are contiguous (connected in the path graph)
  CHECK(connected_components(induced_subgraph(g, a.vertex_ids)).size() == 1);
  CHECK(connected_components(induced_subgraph(g, b.vertex_ids)).size() == 1);
  // the poles live in opposite patches
  CHECK(std::find(a.vertex_ids.begin(), a.vertex_ids.end(), 0) !=
        a.vertex_ids.end());
  CHECK(std::find(b.vertex_ids.begin(), b.vertex_ids.end(), n - 1) !=
        b.vertex_ids.end());
}

TEST_CASE("split_patches rejects graphs below twice the minimum patch size") {
  const DistanceGraph g = path_graph(10);
  const Eigen::MatrixXd geo = geodesic_all_pairs(g);
  CHECK_THROWS_AS(split_patches(g, geo, 0.2, 50), SplitFailed);
}

TEST_CASE("multiscale with detection off equals the direct route") {
  const Eigen::MatrixXd truth = random_coords(30, 2, 21);
  DistanceGraph g = random_connected_graph(30, 21);
  for (auto& e : g.edges) e.dist = (truth.row(e.i) - truth.row(e.j)).norm();

  MultiscaleConfig mc;
  mc.failure_detection = false;
  const EmbeddingResult ms = multiscale_embed(g, 2, mc);

  const EmbeddingResult init = classical_mds(geodesic_all_pairs(g), 2);
  const EmbeddingResult direct =
      smacof_optimize(init.coords, g, mc.smacof_tol, mc.smacof_max_iter);
  CHECK(ms.stress == doctest::Approx(direct.stress).epsilon(1e-14));
  CHECK((ms.coords - direct.coords).norm() == 0.0);
  CHECK_FALSE(ms.failure_flag);
}
