#include "iie/metric.hpp"

#include <Eigen/SVD>

namespace iie {

MetricTensor pushforward_metric(const JacobianEstimate& jac) {
  const Eigen::MatrixXd& j = jac.matrix;
  if (!j.allFinite()) throw InvalidInput("pushforward_metric: non-finite Jacobian");
  if (j.rows() < j.cols())
    throw InvalidInput("pushforward_metric: expected m >= n");
  if (j.isZero(0.0))
    throw DegenerateJacobian("pushforward_metric: all-zero Jacobian");

  // pinv(J J^T) via the SVD of J: J = U S V^T gives pinv(J J^T) = U S^-2 U^T
  // on the retained singular directions.
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(j, Eigen::ComputeThinU);
  const Eigen::VectorXd& s = svd.singularValues();
  const double cutoff = 1e-12 * s(0);

  Eigen::VectorXd inv_sq = Eigen::VectorXd::Zero(s.size());
  for (Eigen::Index k = 0; k < s.size(); ++k)
    if (s(k) > cutoff) inv_sq(k) = 1.0 / (s(k) * s(k));

  MetricTensor out;
  out.rank_target = j.cols();
  out.matrix = svd.matrixU() * inv_sq.asDiagonal() * svd.matrixU().transpose();
  // enforce exact symmetry against round-off
  out.matrix = 0.5 * (out.matrix + out.matrix.transpose()).eval();
  return out;
}

double approx_intrinsic_sq_distance(const Eigen::VectorXd& y_i,
                                    const Eigen::VectorXd& y_j,
                                    const MetricTensor& m_i,
                                    const MetricTensor& m_j) {
  if (y_i.size() != y_j.size() || m_i.matrix.rows() != y_i.size() ||
      m_j.matrix.rows() != y_i.size())
    throw InvalidInput("approx_intrinsic_sq_distance: dimension mismatch");

  const Eigen::VectorXd d = y_i - y_j;
  const double v =
      0.5 * d.dot(m_i.matrix * d) + 0.5 * d.dot(m_j.matrix * d);
  if (v < -1e-12)
    throw NonPSDMetric("approx_intrinsic_sq_distance: negative quadratic form");
  return v < 0.0 ? 0.0 : v;
}

}  // namespace iie
