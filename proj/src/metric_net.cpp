#include "iie/metric_net.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "iie/rng.hpp"

namespace iie {

namespace {

Eigen::VectorXd sigmoid(const Eigen::VectorXd& z) {
  return (1.0 / (1.0 + (-z.array()).exp())).matrix();
}

struct ForwardCache {
  Eigen::VectorXd a1;
  Eigen::VectorXd a2;
  Eigen::VectorXd out;
};

ForwardCache forward_cached(const Eigen::VectorXd& y, const NetParams& p) {
  ForwardCache c;
  c.a1 = sigmoid(p.weights[0] * y + p.biases[0]);
  c.a2 = sigmoid(p.weights[1] * c.a1 + p.biases[1]);
  c.out = p.weights[2] * c.a2 + p.biases[2];
  return c;
}

Eigen::MatrixXd reshape_out(const Eigen::VectorXd& out, int m, int n) {
  Eigen::MatrixXd j(m, n);
  for (int r = 0; r < m; ++r)
    for (int c = 0; c < n; ++c) j(r, c) = out(r * n + c);
  return j;
}

/// Cholesky of C with a single ridge-bump retry before giving up.
Eigen::LLT<Eigen::MatrixXd> factor_covariance(Eigen::MatrixXd c) {
  Eigen::LLT<Eigen::MatrixXd> llt(c);
  if (llt.info() == Eigen::Success) return llt;
  c.diagonal().array() += 1e-10 * c.trace();
  llt.compute(c);
  if (llt.info() != Eigen::Success)
    throw IllConditioned("metric-net: covariance factorization failed");
  return llt;
}

double cluster_ll_term(const ClusterStats& st, const NetParams& params,
                       double sigma_int_sq, double sigma_obs_sq) {
  const int m = params.out_rows;
  JacobianEstimate jac;
  jac.matrix = reshape_out(forward_cached(st.mean, params).out, m,
                           params.out_cols);
  const Eigen::MatrixXd c = model_covariance(jac, sigma_int_sq, sigma_obs_sq);
  const auto llt = factor_covariance(c);
  const double log_det =
      2.0 * llt.matrixLLT().diagonal().array().log().sum();
  const double tr = llt.solve(st.cov).trace();
  constexpr double kLog2Pi = 1.8378770664093454836;
  return -0.5 * st.count * (m * kLog2Pi + log_det + tr);
}

double loglik_subset(const std::vector<ClusterStats>& stats,
                     const std::vector<int>& idx, const NetParams& params,
                     double sigma_int_sq, double sigma_obs_sq) {
  double ll = 0.0;
  for (int i : idx)
    ll += cluster_ll_term(stats[i], params, sigma_int_sq, sigma_obs_sq);
  return ll;
}

NetParams gradient_subset(const std::vector<ClusterStats>& stats,
                          const std::vector<int>& idx, const NetParams& params,
                          double sigma_int_sq, double sigma_obs_sq,
                          double weight_decay) {
  const int m = params.out_rows;
  const int n = params.out_cols;
  NetParams grad = params.zeros_like();
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(m, m);

  for (int i : idx) {
    const ClusterStats& st = stats[i];
    const ForwardCache cache = forward_cached(st.mean, params);
    const Eigen::MatrixXd jac = reshape_out(cache.out, m, n);

    Eigen::MatrixXd c = sigma_int_sq * (jac * jac.transpose());
    c.diagonal().array() += sigma_obs_sq;
    const auto llt = factor_covariance(c);
    const Eigen::MatrixXd cinv = llt.solve(eye);
    // dL/dC for the term -N/2 [ln|C| + Tr(C^-1 S)]
    const Eigen::MatrixXd g = 0.5 * st.count * (cinv * st.cov * cinv - cinv);
    const Eigen::MatrixXd dj = 2.0 * sigma_int_sq * (g * jac);

    Eigen::VectorXd g_out(m * n);
    for (int r = 0; r < m; ++r)
      for (int cc = 0; cc < n; ++cc) g_out(r * n + cc) = dj(r, cc);

    grad.weights[2] += g_out * cache.a2.transpose();
    grad.biases[2] += g_out;
    const Eigen::VectorXd g_z2 =
        (params.weights[2].transpose() * g_out).cwiseProduct(
            cache.a2.cwiseProduct(Eigen::VectorXd::Ones(cache.a2.size()) -
                                  cache.a2));
    grad.weights[1] += g_z2 * cache.a1.transpose();
    grad.biases[1] += g_z2;
    const Eigen::VectorXd g_z1 =
        (params.weights[1].transpose() * g_z2).cwiseProduct(
            cache.a1.cwiseProduct(Eigen::VectorXd::Ones(cache.a1.size()) -
                                  cache.a1));
    grad.weights[0] += g_z1 * st.mean.transpose();
    grad.biases[0] += g_z1;
  }

  if (weight_decay > 0.0)
    for (std::size_t l = 0; l < grad.weights.size(); ++l)
      grad.weights[l] -= 2.0 * weight_decay * params.weights[l];
  return grad;
}

}  // namespace

std::size_t NetParams::parameter_count() const {
  std::size_t count = 0;
  for (const auto& w : weights) count += static_cast<std::size_t>(w.size());
  for (const auto& b : biases) count += static_cast<std::size_t>(b.size());
  return count;
}

NetParams NetParams::zeros_like() const {
  NetParams z = *this;
  for (auto& w : z.weights) w.setZero();
  for (auto& b : z.biases) b.setZero();
  return z;
}

std::vector<ClusterStats> cluster_stats(const ObservationClusters& clusters) {
  std::vector<ClusterStats> stats;
  stats.reserve(clusters.clusters.size());
  for (const auto& cl : clusters.clusters) {
    if (cl.samples.rows() < 1)
      throw InvalidInput("cluster_stats: empty cluster");
    ClusterStats st;
    st.mean = cl.samples.colwise().mean().transpose();
    st.cov = sample_covariance(cl.samples);
    st.count = static_cast<double>(cl.samples.rows());
    stats.push_back(std::move(st));
  }
  return stats;
}

NetParams init_net_params(int m, int n, int hidden1, int hidden2,
                          std::uint64_t seed) {
  auto rng = make_rng(seed, 17);
  auto xavier = [&](int rows, int cols) {
    const double a = std::sqrt(6.0 / (rows + cols));
    std::uniform_real_distribution<double> u(-a, a);
    Eigen::MatrixXd w(rows, cols);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) w(r, c) = u(rng);
    return w;
  };

  NetParams p;
  p.input_dim = m;
  p.out_rows = m;
  p.out_cols = n;
  p.weights = {xavier(hidden1, m), xavier(hidden2, hidden1),
               xavier(m * n, hidden2)};
  p.biases = {Eigen::VectorXd::Zero(hidden1), Eigen::VectorXd::Zero(hidden2),
              Eigen::VectorXd::Zero(m * n)};
  return p;
}

JacobianEstimate net_forward(const Eigen::VectorXd& y, const NetParams& params) {
  if (y.size() != params.input_dim)
    throw InvalidInput("net_forward: input dimension mismatch");
  JacobianEstimate jac;
  jac.matrix = reshape_out(forward_cached(y, params).out, params.out_rows,
                           params.out_cols);
  return jac;
}

Eigen::MatrixXd model_covariance(const JacobianEstimate& jac,
                                 double sigma_int_sq, double sigma_obs_sq) {
  if (sigma_obs_sq <= 0.0)
    throw InvalidInput("model_covariance: sigma_obs^2 must be positive");
  Eigen::MatrixXd c = sigma_int_sq * (jac.matrix * jac.matrix.transpose());
  c.diagonal().array() += sigma_obs_sq;
  return c;
}

double net_loglikelihood(const ObservationClusters& clusters,
                         const NetParams& params) {
  if (clusters.sigma_obs_sq <= 0.0)
    throw InvalidInput("net_loglikelihood: sigma_obs^2 must be positive");
  const auto stats = cluster_stats(clusters);
  std::vector<int> all(stats.size());
  std::iota(all.begin(), all.end(), 0);
  return loglik_subset(stats, all, params, clusters.sigma_int_sq,
                       clusters.sigma_obs_sq);
}

NetParams net_gradient(const ObservationClusters& clusters,
                       const NetParams& params, double weight_decay) {
  const auto stats = cluster_stats(clusters);
  std::vector<int> all(stats.size());
  std::iota(all.begin(), all.end(), 0);
  return gradient_subset(stats, all, params, clusters.sigma_int_sq,
                         clusters.sigma_obs_sq, weight_decay);
}

TrainResult train_metric_net(const ObservationClusters& clusters,
                             const TrainConfig& config) {
  if (clusters.clusters.size() < 2)
    throw InvalidInput("train_metric_net: need at least 2 clusters");
  const auto stats = cluster_stats(clusters);
  const int total = static_cast<int>(stats.size());
  const int m = static_cast<int>(clusters.obs_dim());
  const int n = clusters.intrinsic_dim;

  // holdout split
  std::vector<int> order(total);
  std::iota(order.begin(), order.end(), 0);
  auto split_rng = make_rng(config.seed, 1);
  std::shuffle(order.begin(), order.end(), split_rng);
  int n_val = static_cast<int>(std::lround(config.holdout_fraction * total));
  n_val = std::clamp(n_val, 1, total - 1);
  std::vector<int> val_idx(order.begin(), order.begin() + n_val);
  std::vector<int> train_idx(order.begin() + n_val, order.end());

  NetParams params =
      init_net_params(m, n, config.hidden1, config.hidden2, config.seed);
  NetParams adam_m = params.zeros_like();
  NetParams adam_v = params.zeros_like();
  long step = 0;

  auto adam_update = [&](const NetParams& grad) {
    ++step;
    const double b1 = config.adam_beta1;
    const double b2 = config.adam_beta2;
    const double corr1 = 1.0 - std::pow(b1, static_cast<double>(step));
    const double corr2 = 1.0 - std::pow(b2, static_cast<double>(step));
    auto update = [&](Eigen::Ref<Eigen::MatrixXd> p, Eigen::Ref<Eigen::MatrixXd> mm,
                      Eigen::Ref<Eigen::MatrixXd> vv, const Eigen::MatrixXd& g) {
      mm = b1 * mm + (1.0 - b1) * g;
      vv = b2 * vv.array().matrix() + (1.0 - b2) * g.array().square().matrix();
      // ascent: move along the likelihood gradient
      p.array() += config.learning_rate * (mm.array() / corr1) /
                   ((vv.array() / corr2).sqrt() + config.adam_epsilon);
    };
    for (std::size_t l = 0; l < params.weights.size(); ++l) {
      update(params.weights[l], adam_m.weights[l], adam_v.weights[l],
             grad.weights[l]);
      update(params.biases[l], adam_m.biases[l], adam_v.biases[l],
             grad.biases[l]);
    }
  };

  TrainResult result;
  double best_val = -std::numeric_limits<double>::infinity();

  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    if (config.batch <= 0 ||
        config.batch >= static_cast<int>(train_idx.size())) {
      adam_update(gradient_subset(stats, train_idx, params,
                                  clusters.sigma_int_sq, clusters.sigma_obs_sq,
                                  config.weight_decay));
    } else {
      std::vector<int> shuffled = train_idx;
      auto epoch_rng = make_rng(config.seed, 1000 + epoch);
      std::shuffle(shuffled.begin(), shuffled.end(), epoch_rng);
      for (std::size_t start = 0; start < shuffled.size();
           start += config.batch) {
        const std::size_t stop =
            std::min(shuffled.size(), start + config.batch);
        std::vector<int> batch(shuffled.begin() + start,
                               shuffled.begin() + stop);
        adam_update(gradient_subset(stats, batch, params,
                                    clusters.sigma_int_sq,
                                    clusters.sigma_obs_sq,
                                    config.weight_decay));
      }
    }

    const double train_ll = loglik_subset(stats, train_idx, params,
                                          clusters.sigma_int_sq,
                                          clusters.sigma_obs_sq);
    const double val_ll = loglik_subset(stats, val_idx, params,
                                        clusters.sigma_int_sq,
                                        clusters.sigma_obs_sq);
    if (!std::isfinite(train_ll) || !std::isfinite(val_ll))
      throw TrainingDiverged("train_metric_net: non-finite likelihood", epoch);

    result.curve.push_back({epoch, train_ll, val_ll});
    if (val_ll > best_val) {
      best_val = val_ll;
      result.params = params;
      result.best_epoch = epoch;
    }
  }

  result.best_val_ll = best_val;
  return result;
}

CvResult cross_validate(const ObservationClusters& clusters,
                        const std::vector<CvCandidate>& grid,
                        const TrainConfig& config) {
  if (grid.empty()) throw InvalidInput("cross_validate: empty grid");

  CvResult result;
  for (const auto& cand : grid) {
    CvScore score{cand, 0.0, false};
    double sum = 0.0;
    try {
      for (int fold = 0; fold < config.cv_folds; ++fold) {
        TrainConfig fold_cfg = config;
        fold_cfg.hidden1 = cand.hidden1;
        fold_cfg.hidden2 = cand.hidden2;
        fold_cfg.weight_decay = cand.weight_decay;
        fold_cfg.seed = derive_seed(config.seed, 100 + fold);
        sum += train_metric_net(clusters, fold_cfg).best_val_ll;
      }
      score.mean_val_ll = sum / config.cv_folds;
    } catch (const Error&) {
      score.failed = true;
      score.mean_val_ll = -std::numeric_limits<double>::infinity();
    }
    result.scores.push_back(score);
  }

  const int m = static_cast<int>(clusters.obs_dim());
  const int n = clusters.intrinsic_dim;
  auto param_count = [&](const CvCandidate& c) {
    return static_cast<long>(c.hidden1) * (m + 1) +
           static_cast<long>(c.hidden2) * (c.hidden1 + 1) +
           static_cast<long>(m) * n * (c.hidden2 + 1);
  };

  int best = -1;
  for (std::size_t i = 0; i < result.scores.size(); ++i) {
    if (result.scores[i].failed) continue;
    if (best < 0) {
      best = static_cast<int>(i);
      continue;
    }
    const auto& a = result.scores[i];
    const auto& b = result.scores[best];
    if (a.mean_val_ll > b.mean_val_ll ||
        (a.mean_val_ll == b.mean_val_ll &&
         (param_count(a.candidate) < param_count(b.candidate) ||
          (param_count(a.candidate) == param_count(b.candidate) &&
           a.candidate.weight_decay < b.candidate.weight_decay))))
      best = static_cast<int>(i);
  }
  if (best < 0) throw TrainingDiverged("cross_validate: all candidates failed", -1);
  result.best = result.scores[best].candidate;
  return result;
}

MetricField metric_field_from_net(const PointSet& observed,
                                  const NetParams& params) {
  MetricField field;
  field.intrinsic_dim = params.out_cols;
  field.tensors.reserve(observed.size());
  for (Eigen::Index i = 0; i < observed.size(); ++i) {
    JacobianEstimate jac = net_forward(observed.point(i).transpose(), params);
    jac.base_point_id = i;
    field.tensors.push_back(pushforward_metric(jac));
  }
  return field;
}

}  // namespace iie
