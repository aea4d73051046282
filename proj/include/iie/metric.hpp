#pragma once

#include <Eigen/Dense>
#include <vector>

#include "iie/errors.hpp"
#include "iie/point_set.hpp"

namespace iie {

/// Estimated Jacobian df/dx of the observation function at one sample
/// point: an m x n matrix mapping intrinsic displacements to observed ones.
struct JacobianEstimate {
  Eigen::MatrixXd matrix;   // m x n
  Eigen::Index base_point_id = -1;
};

/// Push-forward metric tensor at one observed point: an m x m symmetric PSD
/// matrix of numerical rank <= n that turns observed-space quadratic forms
/// into intrinsic squared distances.
struct MetricTensor {
  Eigen::MatrixXd matrix;  // m x m
  Eigen::Index rank_target = 0;
};

/// One MetricTensor per point of an observed PointSet.
struct MetricField {
  std::vector<MetricTensor> tensors;  // indexed by point id
  Eigen::Index intrinsic_dim = 0;
};

/// Push-forward metric M = pinv(J J^T), computed through the SVD of J with
/// singular values below 1e-12 * sigma_max treated as zero.
MetricTensor pushforward_metric(const JacobianEstimate& jac);

/// Locally valid squared intrinsic distance between two observed points:
///   1/2 (y_i - y_j)^T M_i (y_i - y_j) + 1/2 (y_i - y_j)^T M_j (y_i - y_j).
/// Tiny negatives (>= -1e-12) clamp to zero.
double approx_intrinsic_sq_distance(const Eigen::VectorXd& y_i,
                                    const Eigen::VectorXd& y_j,
                                    const MetricTensor& m_i,
                                    const MetricTensor& m_j);

}  // namespace iie
