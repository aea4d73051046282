#pragma once

#include <Eigen/Dense>

#include "iie/errors.hpp"

namespace iie {

/// Indexed collection of vectors living in one space (intrinsic R^n or
/// observed R^m). Row i holds the coordinates of point id i.
class PointSet {
 public:
  PointSet() = default;

  explicit PointSet(Eigen::MatrixXd points) : points_(std::move(points)) {
    if (!points_.allFinite())
      throw InvalidInput("PointSet: non-finite coordinates");
  }

  Eigen::Index size() const { return points_.rows(); }
  Eigen::Index dim() const { return points_.cols(); }

  Eigen::MatrixXd::ConstRowXpr point(Eigen::Index id) const {
    return points_.row(id);
  }
  const Eigen::MatrixXd& matrix() const { return points_; }

 private:
  Eigen::MatrixXd points_;
};

}  // namespace iie
