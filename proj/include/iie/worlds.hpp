#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "iie/metric.hpp"
#include "iie/metric_estimation.hpp"
#include "iie/point_set.hpp"

namespace iie {

/// Observation function f: R^n -> R^m together with its analytic Jacobian.
struct ObservationModel {
  std::string name;
  int intrinsic_dim = 0;  // n
  int obs_dim = 0;        // m
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> f;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> jacobian;  // m x n

  PointSet observe(const PointSet& intrinsic) const;
};

/// Sampleable latent region of R^n with a membership predicate. Sampling is
/// uniform rejection over the bounding box.
struct IntrinsicDomain {
  std::string name;
  Eigen::VectorXd box_lo;
  Eigen::VectorXd box_hi;
  std::function<bool(const Eigen::VectorXd&)> contains;

  PointSet sample(int count, std::uint64_t seed) const;
};

/// Square of the given side centered at the origin, minus a centered
/// plus-shaped hole with the given arm width and length.
IntrinsicDomain cross_hole_square(double side, double cross_arm_width,
                                  double cross_arm_length);

/// Archimedean-spiral corridor: centerline r = r0 + growth * theta for
/// theta in [0, theta_max], of the given width. Highly non-convex.
IntrinsicDomain nonconvex_corridor_domain(double r0 = 0.35,
                                          double growth = 0.09,
                                          double theta_max = 10.99557428756428,
                                          double width = 0.25);

/// Axis-aligned rectangle [lo, hi]^n (convex reference domain).
IntrinsicDomain rectangle_domain(const Eigen::VectorXd& lo,
                                 const Eigen::VectorXd& hi);

/// Sphere-wrapping map (sin(2.5 x1) sin(x2), sin(2.5 x1) cos(x2), -sin(x2)).
ObservationModel severed_sphere_model();

/// Identity observation in n dimensions.
ObservationModel identity_model(int n);

/// Smooth radial signal-strength decay measured from three fixed anchors.
/// Illustrative stand-in for a free-space RSS modality.
ObservationModel rss_decay_model();

/// Random smooth trigonometric map R^2 -> R^m; illustrative stand-in for an
/// arbitrary unknown modality.
ObservationModel random_trig_model(int m, std::uint64_t seed);

ObservationModel model_by_name(const std::string& name, std::uint64_t seed = 0);

/// Max relative error between the analytic Jacobian and central finite
/// differences (step 1e-6) at `count` random domain points.
double validate_model_jacobian(const ObservationModel& model,
                               const IntrinsicDomain& domain, int count,
                               std::uint64_t seed);

/// Analytic push-forward metric field: pinv(J J^T) at the true latent points.
MetricField metric_field_from_model(const ObservationModel& model,
                                    const PointSet& intrinsic_truth);

struct GmmDataset {
  ObservationClusters clusters;
  PointSet truth;  // latent cluster centers, evaluation only
};

/// N uniform latent centers; per center N_i isotropic Gaussian intrinsic
/// draws mapped through f plus isotropic observation noise.
GmmDataset gmm_sample_clusters(const IntrinsicDomain& domain,
                               const ObservationModel& model, int N, int N_i,
                               double sigma_int, double sigma_obs,
                               std::uint64_t seed);

struct ArrayDataset {
  std::vector<SensorArrayShot> shots;  // offsets stored unrotated
  PointSet truth;
  std::vector<Eigen::MatrixXd> rotations;  // per-shot true array rotation
};

/// Per center, observe f at the center and at rotated array offsets. The
/// stored offsets remain the unrotated ones; the estimator must be invariant.
ArrayDataset sensor_array_sample(const IntrinsicDomain& domain,
                                 const ObservationModel& model, int N,
                                 const Eigen::MatrixXd& offsets,
                                 bool randomize_rotation, std::uint64_t seed);

/// Default L-shaped array: two sensors displaced along the axes from a base.
Eigen::MatrixXd l_array_offsets(double spacing = 0.15);

struct PcaResult {
  PointSet projected;
  Eigen::MatrixXd basis;  // m x k, columns = principal directions
  Eigen::VectorXd mean;
  Eigen::VectorXd explained_variance_fraction;
};

/// Mean-centered projection onto the top principal directions.
PcaResult pca_project(const PointSet& points, int num_components);

}  // namespace iie
