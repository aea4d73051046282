#include "iie/metric_estimation.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <cmath>

namespace iie {

Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& cluster) {
  if (cluster.rows() < 1)
    throw InvalidInput("sample_covariance: empty cluster");
  const Eigen::RowVectorXd mean = cluster.colwise().mean();
  const Eigen::MatrixXd centered = cluster.rowwise() - mean;
  // biased 1/N normalization, matching the likelihood the estimates feed
  return (centered.transpose() * centered) / static_cast<double>(cluster.rows());
}

MetricTensor local_metric_estimate(const Eigen::MatrixXd& cluster,
                                   double sigma_int_sq, double sigma_obs_sq,
                                   int n) {
  const Eigen::Index m = cluster.cols();
  if (cluster.rows() < 2)
    throw InsufficientSamples("local_metric_estimate: need at least 2 samples");
  if (sigma_int_sq <= 0.0)
    throw InvalidInput("local_metric_estimate: sigma_int^2 must be positive");
  if (sigma_obs_sq < 0.0)
    throw InvalidInput("local_metric_estimate: negative sigma_obs^2");
  if (n < 1 || n >= m)
    throw InvalidInput("local_metric_estimate: require 1 <= n < m");

  const Eigen::MatrixXd s = sample_covariance(cluster);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s);
  if (eig.info() != Eigen::Success)
    throw IllConditioned("local_metric_estimate: eigendecomposition failed");

  // eigenvalues ascending: trailing m-n smallest estimate the noise floor
  const double noise_floor = eig.eigenvalues().head(m - n).mean();

  // rank-n factor of the estimated J J^T, in Jacobian-product units; the
  // 1/sigma_int^2 rescaling is implied by the covariance model
  // C = sigma_int^2 J J^T + sigma_obs^2 I.
  Eigen::MatrixXd factor = Eigen::MatrixXd::Zero(m, n);
  for (int c = 0; c < n; ++c) {
    const Eigen::Index k = m - 1 - c;
    const double shrunk = eig.eigenvalues()(k) - noise_floor;
    if (shrunk > 0.0)
      factor.col(c) =
          eig.eigenvectors().col(k) * std::sqrt(shrunk / sigma_int_sq);
  }

  JacobianEstimate jac;
  jac.matrix = std::move(factor);
  return pushforward_metric(jac);
}

JacobianEstimate array_jacobian_estimate(const SensorArrayShot& shot) {
  const Eigen::MatrixXd& u = shot.offsets;
  const Eigen::Index n = u.rows();
  const Eigen::Index k = u.cols();
  if (k < n)
    throw DegenerateArray("array_jacobian_estimate: fewer offsets than dims");
  if (shot.displaced_obs.cols() != k ||
      shot.displaced_obs.rows() != shot.base_obs.size())
    throw InvalidInput("array_jacobian_estimate: shape mismatch");

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(u);
  if (svd.singularValues()(n - 1) <= 1e-10 * svd.singularValues()(0))
    throw DegenerateArray("array_jacobian_estimate: offsets not full row rank");

  const Eigen::MatrixXd d = shot.displaced_obs.colwise() - shot.base_obs;

  JacobianEstimate jac;
  jac.base_point_id = shot.base_point_id;
  jac.matrix = d * u.transpose() * (u * u.transpose()).inverse();
  return jac;
}

}  // namespace iie
