#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "iie/errors.hpp"
#include "iie/metric_net.hpp"
#include "iie/rng.hpp"

using namespace iie;

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

/// Clusters drawn from y = J(x) dx + noise around random base observations;
/// J varies smoothly with the base point.
ObservationClusters synthetic_clusters(int num_clusters, int samples_each,
                                       std::uint64_t seed) {
  auto rng = make_rng(seed, 3);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(-1.0, 1.0);

  ObservationClusters clusters;
  clusters.sigma_int_sq = 0.04;
  clusters.sigma_obs_sq = 0.0025;
  clusters.intrinsic_dim = 2;
  const double si = std::sqrt(clusters.sigma_int_sq);
  const double so = std::sqrt(clusters.sigma_obs_sq);

  for (int c = 0; c < num_clusters; ++c) {
    Eigen::VectorXd base(3);
    for (int d = 0; d < 3; ++d) base(d) = u(rng);
    Eigen::MatrixXd j(3, 2);
    j << 1.0 + 0.3 * base(0), 0.1, -0.2, 0.8 + 0.3 * base(1), 0.3 * base(2),
        0.4;
    ObservationClusters::Cluster cl;
    cl.center_id = c;
    cl.samples.resize(samples_each, 3);
    for (int s = 0; s < samples_each; ++s) {
      Eigen::Vector2d dx(si * g(rng), si * g(rng));
      Eigen::Vector3d eps(so * g(rng), so * g(rng), so * g(rng));
      cl.samples.row(s) = (base + j * dx + eps).transpose();
    }
    clusters.clusters.push_back(std::move(cl));
  }
  return clusters;
}

/// Independently coded penalized-likelihood value for the FD oracle.
double penalized_ll(const ObservationClusters& clusters, const NetParams& p,
                    double weight_decay) {
  double ll = net_loglikelihood(clusters, p);
  for (const auto& w : p.weights) ll -= weight_decay * w.squaredNorm();
  return ll;
}

}  // namespace

TEST_CASE("net initialization is deterministic with the right shapes") {
  const NetParams a = init_net_params(3, 2, 8, 5, 42);
  const NetParams b = init_net_params(3, 2, 8, 5, 42);
  const NetParams c = init_net_params(3, 2, 8, 5, 43);
  CHECK(a.weights[0].rows() == 8);
  CHECK(a.weights[0].cols() == 3);
  CHECK(a.weights[1].rows() == 5);
  CHECK(a.weights[1].cols() == 8);
  CHECK(a.weights[2].rows() == 6);
  CHECK(a.weights[2].cols() == 5);
  CHECK(a.hidden1() == 8);
  CHECK(a.hidden2() == 5);
  CHECK(a.parameter_count() == (8 * 3 + 8) + (5 * 8 + 5) + (6 * 5 + 6));
  for (int l = 0; l < 3; ++l) {
    CHECK((a.weights[l] - b.weights[l]).norm() == 0.0);
    CHECK(a.biases[l].norm() == 0.0);
  }
  CHECK((a.weights[0] - c.weights[0]).norm() > 0.0);
}

TEST_CASE("net output reshapes to the Jacobian row-major") {
  NetParams p = init_net_params(3, 2, 4, 4, 1);
  p.weights[2].setZero();
  p.biases[2] << 1, 2, 3, 4, 5, 6;
  const JacobianEstimate jac = net_forward(Eigen::Vector3d(0, 0, 0), p);
  Eigen::MatrixXd expected(3, 2);
  expected << 1, 2, 3, 4, 5, 6;
  CHECK((jac.matrix - expected).norm() == 0.0);
}

TEST_CASE("net_forward rejects mismatched input dimensions") {
  const NetParams p = init_net_params(3, 2, 4, 4, 1);
  CHECK_THROWS_AS(net_forward(Eigen::Vector2d(0, 0), p), InvalidInput);
}

TEST_CASE("model covariance composes the low-rank and isotropic parts") {
  Eigen::MatrixXd j(3, 2);
  j << 1, 0, 0, 2, 1, 1;
  const Eigen::MatrixXd c = model_covariance({j, 0}, 0.25, 0.04);
  const Eigen::MatrixXd expected =
      0.25 * j * j.transpose() + 0.04 * Eigen::MatrixXd::Identity(3, 3);
  CHECK((c - expected).norm() < 1e-14);
  CHECK_THROWS_AS(model_covariance({j, 0}, 0.25, 0.0), InvalidInput);
}

TEST_CASE("log-likelihood matches an independently coded formula") {
  const ObservationClusters clusters = synthetic_clusters(6, 10, 5);
  const NetParams p = init_net_params(3, 2, 6, 6, 9);

  double expected = 0.0;
  for (const auto& cl : clusters.clusters) {
    const Eigen::VectorXd mean = cl.samples.colwise().mean().transpose();
    const Eigen::MatrixXd s = sample_covariance(cl.samples);
    const Eigen::MatrixXd jac = net_forward(mean, p).matrix;
    const Eigen::MatrixXd c =
        clusters.sigma_int_sq * jac * jac.transpose() +
        clusters.sigma_obs_sq * Eigen::MatrixXd::Identity(3, 3);
    const double n_i = static_cast<double>(cl.samples.rows());
    expected += -0.5 * n_i *
                (3.0 * kLog2Pi + std::log(c.determinant()) +
                 (c.inverse() * s).trace());
  }
  CHECK(net_loglikelihood(clusters, p) ==
        doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("analytic gradient matches central finite differences") {
  const ObservationClusters clusters = synthetic_clusters(5, 8, 11);
  const double lambda = 0.01;

  double worst = 0.0;
  for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
    NetParams p = init_net_params(3, 2, 8, 8, seed);
    const NetParams grad = net_gradient(clusters, p, lambda);
    const double h = 1e-6;

    auto check_block = [&](Eigen::MatrixXd& block, const Eigen::MatrixXd& g) {
      for (Eigen::Index r = 0; r < block.rows(); ++r)
        for (Eigen::Index c = 0; c < block.cols(); ++c) {
          const double saved = block(r, c);
          block(r, c) = saved + h;
          const double up = penalized_ll(clusters, p, lambda);
          block(r, c) = saved - h;
          const double dn = penalized_ll(clusters, p, lambda);
          block(r, c) = saved;
          const double fd = (up - dn) / (2.0 * h);
          const double denom = std::max(std::abs(fd), 1e-6);
          worst = std::max(worst, std::abs(fd - g(r, c)) / denom);
        }
    };
    for (int l = 0; l < 3; ++l) {
      check_block(p.weights[l], grad.weights[l]);
      for (Eigen::Index r = 0; r < p.biases[l].size(); ++r) {
        const double saved = p.biases[l](r);
        p.biases[l](r) = saved + h;
        const double up = penalized_ll(clusters, p, lambda);
        p.biases[l](r) = saved - h;
        const double dn = penalized_ll(clusters, p, lambda);
        p.biases[l](r) = saved;
        const double fd = (up - dn) / (2.0 * h);
        const double denom = std::max(std::abs(fd), 1e-6);
        worst = std::max(worst, std::abs(fd - grad.biases[l](r)) / denom);
      }
    }
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("weight decay never touches the biases") {
  const ObservationClusters clusters = synthetic_clusters(4, 6, 13);
  const NetParams p = init_net_params(3, 2, 5, 5, 3);
  const NetParams plain = net_gradient(clusters, p, 0.0);
  const NetParams decayed = net_gradient(clusters, p, 0.5);
  for (int l = 0; l < 3; ++l) {
    CHECK((plain.biases[l] - decayed.biases[l]).norm() == 0.0);
    const Eigen::MatrixXd diff =
        plain.weights[l] - decayed.weights[l] - 1.0 * p.weights[l];
    CHECK(diff.norm() < 1e-12);  // difference is exactly 2*0.5*W
  }
}

TEST_CASE("the likelihood differs from the negative KL sum by a theta-free "
          "constant") {
  const ObservationClusters clusters = synthetic_clusters(6, 12, 17);
  const auto stats = cluster_stats(clusters);

  // constant = -1/2 sum N_i [m ln(2 pi) + m + ln|S_i|]
  double expected_const = 0.0;
  for (const auto& st : stats)
    expected_const += -0.5 * st.count *
                      (3.0 * kLog2Pi + 3.0 + std::log(st.cov.determinant()));

  double first = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const NetParams p = init_net_params(3, 2, 6, 6, 500 + seed);
    double kl_sum = 0.0;
    for (std::size_t i = 0; i < stats.size(); ++i) {
      const Eigen::MatrixXd jac = net_forward(stats[i].mean, p).matrix;
      const Eigen::MatrixXd c =
          clusters.sigma_int_sq * jac * jac.transpose() +
          clusters.sigma_obs_sq * Eigen::MatrixXd::Identity(3, 3);
      // KL(N(mu, S) || N(mu, C)) for matched means
      const double kl =
          0.5 * ((c.inverse() * stats[i].cov).trace() - 3.0 +
                 std::log(c.determinant() / stats[i].cov.determinant()));
      kl_sum += stats[i].count * kl;
    }
    const double value = net_loglikelihood(clusters, p) + kl_sum;
    if (seed == 0) first = value;
    CHECK(value == doctest::Approx(first).epsilon(1e-8));
    CHECK(value == doctest::Approx(expected_const).epsilon(1e-8));
  }
}

TEST_CASE("training improves the validation likelihood and is deterministic") {
  const ObservationClusters clusters = synthetic_clusters(40, 10, 23);
  TrainConfig cfg;
  cfg.max_epochs = 60;
  cfg.learning_rate = 5e-3;
  cfg.hidden1 = 8;
  cfg.hidden2 = 8;
  cfg.seed = 7;

  const TrainResult a = train_metric_net(clusters, cfg);
  const TrainResult b = train_metric_net(clusters, cfg);
  REQUIRE(a.curve.size() == 60);
  CHECK(a.best_val_ll > a.curve.front().val_ll);
  CHECK(a.best_epoch >= 0);
  CHECK(a.best_val_ll == b.best_val_ll);
  for (int l = 0; l < 3; ++l)
    CHECK((a.params.weights[l] - b.params.weights[l]).norm() == 0.0);

  // minibatch path is deterministic too
  TrainConfig mb = cfg;
  mb.batch = 8;
  const TrainResult c = train_metric_net(clusters, mb);
  const TrainResult d = train_metric_net(clusters, mb);
  CHECK(c.best_val_ll == d.best_val_ll);
}

TEST_CASE("training rejects degenerate inputs") {
  ObservationClusters clusters = synthetic_clusters(1, 5, 29);
  TrainConfig cfg;
  CHECK_THROWS_AS(train_metric_net(clusters, cfg), InvalidInput);
}

TEST_CASE("cross-validation breaks exact ties toward fewer parameters") {
  const ObservationClusters clusters = synthetic_clusters(20, 8, 31);
  TrainConfig cfg;
  cfg.max_epochs = 10;
  cfg.cv_folds = 2;
  cfg.seed = 3;
  // identical candidate listed twice scores identically; a bigger candidate
  // with the same score would lose, and duplicated entries keep the first
  const std::vector<CvCandidate> grid = {{6, 6, 0.01}, {6, 6, 0.001}};
  const CvResult res = cross_validate(clusters, grid, cfg);
  REQUIRE(res.scores.size() == 2);
  if (res.scores[0].mean_val_ll == res.scores[1].mean_val_ll)
    CHECK(res.best.weight_decay == 0.001);  // smaller lambda wins ties
  CHECK_FALSE(res.scores[0].failed);
}

TEST_CASE("cross-validation picks the clearly better candidate") {
  const ObservationClusters clusters = synthetic_clusters(30, 10, 37);
  TrainConfig cfg;
  cfg.max_epochs = 40;
  cfg.learning_rate = 5e-3;
  cfg.cv_folds = 2;
  cfg.seed = 11;
  // absurd weight decay cripples the second candidate
  const std::vector<CvCandidate> grid = {{8, 8, 0.001}, {8, 8, 1000.0}};
  const CvResult res = cross_validate(clusters, grid, cfg);
  CHECK(res.best.weight_decay == 0.001);
  CHECK(res.scores[0].mean_val_ll > res.scores[1].mean_val_ll);
}

TEST_CASE("metric field from the net covers every observed point") {
  const NetParams p = init_net_params(3, 2, 6, 6, 41);
  Eigen::MatrixXd obs = Eigen::MatrixXd::Random(7, 3);
  const MetricField field = metric_field_from_net(PointSet(obs), p);
  CHECK(field.tensors.size() == 7);
  CHECK(field.intrinsic_dim == 2);
  for (const auto& t : field.tensors) {
    CHECK(t.matrix.rows() == 3);
    CHECK((t.matrix - t.matrix.transpose()).norm() < 1e-12);
  }
}
