#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "iie/metric.hpp"
#include "iie/metric_estimation.hpp"
#include "iie/point_set.hpp"

namespace iie {

/// Weights of the Jacobian regressor: two sigmoid hidden layers followed by
/// a linear layer whose output reshapes to an m x n Jacobian.
struct NetParams {
  std::vector<Eigen::MatrixXd> weights;  // 3 layers
  std::vector<Eigen::VectorXd> biases;
  int input_dim = 0;   // m
  int out_rows = 0;    // m
  int out_cols = 0;    // n

  int hidden1() const { return static_cast<int>(weights[0].rows()); }
  int hidden2() const { return static_cast<int>(weights[1].rows()); }
  std::size_t parameter_count() const;

  /// Structural zero (same shapes, all entries 0); gradient container.
  NetParams zeros_like() const;
};

struct TrainConfig {
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double weight_decay = 0.0;  // lambda
  int max_epochs = 500;
  int batch = 0;  // clusters per step; 0 = full batch
  std::uint64_t seed = 0;
  double holdout_fraction = 0.2;
  int cv_folds = 5;
  int hidden1 = 16;
  int hidden2 = 16;
};

struct TrainCurvePoint {
  int epoch;
  double train_ll;
  double val_ll;
};

struct TrainResult {
  NetParams params;  // snapshot at best validation likelihood
  std::vector<TrainCurvePoint> curve;
  int best_epoch = -1;
  double best_val_ll = 0.0;
};

/// Per-cluster sufficient statistics of the likelihood.
struct ClusterStats {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;  // biased sample covariance
  double count;
};

std::vector<ClusterStats> cluster_stats(const ObservationClusters& clusters);

/// Deterministic random initialization (uniform Xavier) for the given shapes.
NetParams init_net_params(int m, int n, int hidden1, int hidden2,
                          std::uint64_t seed);

/// Forward pass: sigmoid, sigmoid, linear; output reshaped row-major to m x n.
JacobianEstimate net_forward(const Eigen::VectorXd& y, const NetParams& params);

/// Model covariance C = sigma_int^2 J J^T + sigma_obs^2 I. Requires
/// sigma_obs^2 > 0 so that C is invertible.
Eigen::MatrixXd model_covariance(const JacobianEstimate& jac,
                                 double sigma_int_sq, double sigma_obs_sq);

/// Anisotropic-GMM log-likelihood of the clusters under the network's
/// Jacobian field, evaluated at the cluster sample means.
double net_loglikelihood(const ObservationClusters& clusters,
                         const NetParams& params);

/// Analytic gradient of net_loglikelihood minus the weight-decay penalty
/// lambda * sum ||W||_F^2 (weights only, biases undecayed).
NetParams net_gradient(const ObservationClusters& clusters,
                       const NetParams& params, double weight_decay);

/// ADAM ascent on the penalized likelihood with an 80/20 holdout; returns the
/// parameters at the best validation likelihood seen.
TrainResult train_metric_net(const ObservationClusters& clusters,
                             const TrainConfig& config);

struct CvCandidate {
  int hidden1;
  int hidden2;
  double weight_decay;
};

struct CvScore {
  CvCandidate candidate;
  double mean_val_ll;
  bool failed = false;
};

struct CvResult {
  CvCandidate best;
  std::vector<CvScore> scores;
};

/// Repeated random-split cross-validation over the hyperparameter grid;
/// highest mean validation likelihood wins, ties break toward fewer
/// parameters then smaller weight decay. Failed candidates are skipped.
CvResult cross_validate(const ObservationClusters& clusters,
                        const std::vector<CvCandidate>& grid,
                        const TrainConfig& config);

/// Push-forward metric field evaluated through the trained network.
MetricField metric_field_from_net(const PointSet& observed,
                                  const NetParams& params);

}  // namespace iie
