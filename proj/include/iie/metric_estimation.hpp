#pragma once

#include <Eigen/Dense>
#include <vector>

#include "iie/metric.hpp"

namespace iie {

/// Grouped repeated observations: cluster c holds the observations of
/// intrinsic draws around latent location c. Variances are assumed known.
struct ObservationClusters {
  struct Cluster {
    int center_id = 0;
    Eigen::MatrixXd samples;  // N_i x m, one observation per row
  };

  std::vector<Cluster> clusters;
  double sigma_int_sq = 0.0;
  double sigma_obs_sq = 0.0;
  int intrinsic_dim = 0;

  Eigen::Index obs_dim() const {
    return clusters.empty() ? 0 : clusters.front().samples.cols();
  }
};

/// One rigid-array measurement: f at a base point and at k known
/// displacements. `offsets` is the n x k matrix U-hat of Eq-style columns.
struct SensorArrayShot {
  Eigen::VectorXd base_obs;      // f(x), length m
  Eigen::MatrixXd displaced_obs; // m x k, column l = f(x + u_l)
  Eigen::MatrixXd offsets;       // n x k
  Eigen::Index base_point_id = -1;
};

/// Biased sample covariance S = (1/N) sum (y - ybar)(y - ybar)^T.
Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& cluster);

/// Probabilistic-PCA metric estimate from one cluster: eigendecompose S,
/// shrink the top-n eigenvalues by the mean of the trailing ones, rescale by
/// 1/sigma_int^2 to Jacobian-product units, and return the push-forward
/// metric of the resulting rank-n factor.
MetricTensor local_metric_estimate(const Eigen::MatrixXd& cluster,
                                   double sigma_int_sq, double sigma_obs_sq,
                                   int n);

/// Least-squares Jacobian recovery from a rigid-array shot:
/// D U^T (U U^T)^-1 with D formed column-wise as f(x+u_l) - f(x).
JacobianEstimate array_jacobian_estimate(const SensorArrayShot& shot);

}  // namespace iie
