#include "iie/worlds.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <numbers>

#include "iie/rng.hpp"

namespace iie {

PointSet ObservationModel::observe(const PointSet& intrinsic) const {
  Eigen::MatrixXd out(intrinsic.size(), obs_dim);
  for (Eigen::Index i = 0; i < intrinsic.size(); ++i)
    out.row(i) = f(intrinsic.point(i).transpose()).transpose();
  return PointSet(std::move(out));
}

PointSet IntrinsicDomain::sample(int count, std::uint64_t seed) const {
  if (count < 1) throw InvalidInput("IntrinsicDomain::sample: count < 1");
  const Eigen::Index dim = box_lo.size();
  auto rng = make_rng(seed, 3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  Eigen::MatrixXd pts(count, dim);
  for (int i = 0; i < count; ++i) {
    Eigen::VectorXd x(dim);
    do {
      for (Eigen::Index d = 0; d < dim; ++d)
        x(d) = box_lo(d) + (box_hi(d) - box_lo(d)) * unit(rng);
    } while (!contains(x));
    pts.row(i) = x.transpose();
  }
  return PointSet(std::move(pts));
}

IntrinsicDomain cross_hole_square(double side, double cross_arm_width,
                                  double cross_arm_length) {
  if (side <= 0.0 || cross_arm_width <= 0.0 ||
      cross_arm_width > cross_arm_length || cross_arm_length >= side)
    throw InvalidInput("cross_hole_square: degenerate dimensions");

  const double h = side / 2.0;
  const double w = cross_arm_width / 2.0;
  const double l = cross_arm_length / 2.0;

  IntrinsicDomain dom;
  dom.name = "cross_hole_square";
  dom.box_lo = Eigen::Vector2d(-h, -h);
  dom.box_hi = Eigen::Vector2d(h, h);
  dom.contains = [h, w, l](const Eigen::VectorXd& x) {
    if (std::abs(x(0)) > h || std::abs(x(1)) > h) return false;
    const bool in_horizontal = std::abs(x(0)) <= l && std::abs(x(1)) <= w;
    const bool in_vertical = std::abs(x(0)) <= w && std::abs(x(1)) <= l;
    return !(in_horizontal || in_vertical);
  };
  return dom;
}

IntrinsicDomain nonconvex_corridor_domain(double r0, double growth,
                                          double theta_max, double width) {
  if (r0 <= 0.0 || growth <= 0.0 || theta_max <= 0.0 || width <= 0.0 ||
      width >= 2.0 * std::numbers::pi * growth + 1e-12)
    // corridor must not touch the next turn of the spiral
    throw InvalidInput("nonconvex_corridor_domain: degenerate dimensions");

  const double r_max = r0 + growth * theta_max + width / 2.0;

  IntrinsicDomain dom;
  dom.name = "spiral_corridor";
  dom.box_lo = Eigen::Vector2d(-r_max, -r_max);
  dom.box_hi = Eigen::Vector2d(r_max, r_max);
  dom.contains = [r0, growth, theta_max, width](const Eigen::VectorXd& x) {
    const double r = x.norm();
    if (r < r0 - width / 2.0 || r > r0 + growth * theta_max + width / 2.0)
      return false;
    const double base = std::atan2(x(1), x(0));  // (-pi, pi]
    for (double t = base; t <= theta_max; t += 2.0 * std::numbers::pi) {
      if (t < 0.0) continue;
      if (std::abs(r - (r0 + growth * t)) <= width / 2.0) return true;
    }
    return false;
  };
  return dom;
}

IntrinsicDomain rectangle_domain(const Eigen::VectorXd& lo,
                                 const Eigen::VectorXd& hi) {
  if (lo.size() != hi.size() || ((hi - lo).array() <= 0.0).any())
    throw InvalidInput("rectangle_domain: degenerate box");
  IntrinsicDomain dom;
  dom.name = "rectangle";
  dom.box_lo = lo;
  dom.box_hi = hi;
  dom.contains = [lo, hi](const Eigen::VectorXd& x) {
    return (x.array() >= lo.array()).all() && (x.array() <= hi.array()).all();
  };
  return dom;
}

ObservationModel severed_sphere_model() {
  ObservationModel model;
  model.name = "severed_sphere";
  model.intrinsic_dim = 2;
  model.obs_dim = 3;
  model.f = [](const Eigen::VectorXd& x) {
    Eigen::Vector3d y;
    y << std::sin(2.5 * x(0)) * std::sin(x(1)),
        std::sin(2.5 * x(0)) * std::cos(x(1)), -std::sin(x(1));
    return y;
  };
  model.jacobian = [](const Eigen::VectorXd& x) {
    const double s1 = std::sin(2.5 * x(0));
    const double c1 = std::cos(2.5 * x(0));
    const double s2 = std::sin(x(1));
    const double c2 = std::cos(x(1));
    Eigen::MatrixXd j(3, 2);
    j << 2.5 * c1 * s2, s1 * c2,
         2.5 * c1 * c2, -s1 * s2,
         0.0, -c2;
    return j;
  };
  return model;
}

ObservationModel identity_model(int n) {
  ObservationModel model;
  model.name = "identity";
  model.intrinsic_dim = n;
  model.obs_dim = n;
  model.f = [](const Eigen::VectorXd& x) { return x; };
  model.jacobian = [n](const Eigen::VectorXd&) {
    return Eigen::MatrixXd::Identity(n, n);
  };
  return model;
}

ObservationModel rss_decay_model() {
  // three fixed anchors; each channel decays smoothly with squared distance
  const std::vector<Eigen::Vector2d> anchors = {
      {1.5, 0.0}, {-1.0, 1.2}, {-0.5, -1.5}};
  const double scale_sq = 1.5 * 1.5;

  ObservationModel model;
  model.name = "rss_decay";
  model.intrinsic_dim = 2;
  model.obs_dim = 3;
  model.f = [anchors, scale_sq](const Eigen::VectorXd& x) {
    Eigen::VectorXd y(3);
    for (int i = 0; i < 3; ++i)
      y(i) = std::exp(-(x - anchors[i]).squaredNorm() / scale_sq);
    return y;
  };
  model.jacobian = [anchors, scale_sq](const Eigen::VectorXd& x) {
    Eigen::MatrixXd j(3, 2);
    for (int i = 0; i < 3; ++i) {
      const double v = std::exp(-(x - anchors[i]).squaredNorm() / scale_sq);
      j.row(i) = (-2.0 / scale_sq) * v * (x - anchors[i]).transpose();
    }
    return j;
  };
  return model;
}

ObservationModel random_trig_model(int m, std::uint64_t seed) {
  if (m < 2) throw InvalidInput("random_trig_model: m < 2");
  auto rng = make_rng(seed, 7);
  std::uniform_real_distribution<double> amp(0.5, 1.5);
  std::uniform_real_distribution<double> freq(-1.5, 1.5);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);

  Eigen::VectorXd a(m), p(m);
  Eigen::MatrixXd w(m, 2);
  for (int i = 0; i < m; ++i) {
    a(i) = amp(rng);
    w(i, 0) = freq(rng);
    w(i, 1) = freq(rng);
    p(i) = phase(rng);
  }

  ObservationModel model;
  model.name = "random_trig";
  model.intrinsic_dim = 2;
  model.obs_dim = m;
  model.f = [a, w, p, m](const Eigen::VectorXd& x) {
    Eigen::VectorXd y(m);
    for (int i = 0; i < m; ++i)
      y(i) = a(i) * std::sin(w.row(i).dot(x) + p(i));
    return y;
  };
  model.jacobian = [a, w, p, m](const Eigen::VectorXd& x) {
    Eigen::MatrixXd j(m, 2);
    for (int i = 0; i < m; ++i)
      j.row(i) = a(i) * std::cos(w.row(i).dot(x) + p(i)) * w.row(i);
    return j;
  };
  return model;
}

ObservationModel model_by_name(const std::string& name, std::uint64_t seed) {
  if (name == "severed_sphere") return severed_sphere_model();
  if (name == "identity") return identity_model(2);
  if (name == "rss_decay") return rss_decay_model();
  if (name == "random_trig") return random_trig_model(3, seed);
  throw InvalidInput("unknown observation model: " + name);
}

double validate_model_jacobian(const ObservationModel& model,
                               const IntrinsicDomain& domain, int count,
                               std::uint64_t seed) {
  const PointSet pts = domain.sample(count, seed);
  const double step = 1e-6;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < pts.size(); ++i) {
    const Eigen::VectorXd x = pts.point(i).transpose();
    const Eigen::MatrixXd analytic = model.jacobian(x);
    Eigen::MatrixXd fd(model.obs_dim, model.intrinsic_dim);
    for (int d = 0; d < model.intrinsic_dim; ++d) {
      Eigen::VectorXd xp = x, xm = x;
      xp(d) += step;
      xm(d) -= step;
      fd.col(d) = (model.f(xp) - model.f(xm)) / (2.0 * step);
    }
    const double denom = analytic.norm();
    if (denom > 0.0)
      worst = std::max(worst, (fd - analytic).norm() / denom);
  }
  return worst;
}

MetricField metric_field_from_model(const ObservationModel& model,
                                    const PointSet& intrinsic_truth) {
  MetricField field;
  field.intrinsic_dim = model.intrinsic_dim;
  field.tensors.reserve(intrinsic_truth.size());
  for (Eigen::Index i = 0; i < intrinsic_truth.size(); ++i) {
    JacobianEstimate jac;
    jac.base_point_id = i;
    jac.matrix = model.jacobian(intrinsic_truth.point(i).transpose());
    field.tensors.push_back(pushforward_metric(jac));
  }
  return field;
}

GmmDataset gmm_sample_clusters(const IntrinsicDomain& domain,
                               const ObservationModel& model, int N, int N_i,
                               double sigma_int, double sigma_obs,
                               std::uint64_t seed) {
  if (sigma_int < 0.0 || sigma_obs < 0.0)
    throw InvalidInput("gmm_sample_clusters: negative sigma");
  if (N < 1 || N_i < 1)
    throw InvalidInput("gmm_sample_clusters: need N >= 1 and N_i >= 1");

  GmmDataset data;
  data.truth = domain.sample(N, derive_seed(seed, 0));
  data.clusters.sigma_int_sq = sigma_int * sigma_int;
  data.clusters.sigma_obs_sq = sigma_obs * sigma_obs;
  data.clusters.intrinsic_dim = model.intrinsic_dim;
  data.clusters.clusters.reserve(N);

  for (int i = 0; i < N; ++i) {
    auto rng = make_rng(seed, 10000 + static_cast<std::uint64_t>(i));
    std::normal_distribution<double> gauss(0.0, 1.0);
    const Eigen::VectorXd center = data.truth.point(i).transpose();

    ObservationClusters::Cluster cl;
    cl.center_id = i;
    cl.samples.resize(N_i, model.obs_dim);
    for (int j = 0; j < N_i; ++j) {
      Eigen::VectorXd x = center;
      for (Eigen::Index d = 0; d < x.size(); ++d)
        x(d) += sigma_int * gauss(rng);
      Eigen::VectorXd y = model.f(x);
      for (Eigen::Index d = 0; d < y.size(); ++d)
        y(d) += sigma_obs * gauss(rng);
      cl.samples.row(j) = y.transpose();
    }
    data.clusters.clusters.push_back(std::move(cl));
  }
  return data;
}

namespace {

Eigen::MatrixXd random_rotation(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd g(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) g(r, c) = gauss(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ();
  // fix signs so diag(R) > 0, then force det = +1
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int c = 0; c < n; ++c)
    if (r(c, c) < 0.0) q.col(c) *= -1.0;
  if (q.determinant() < 0.0) q.col(0) *= -1.0;
  return q;
}

}  // namespace

ArrayDataset sensor_array_sample(const IntrinsicDomain& domain,
                                 const ObservationModel& model, int N,
                                 const Eigen::MatrixXd& offsets,
                                 bool randomize_rotation, std::uint64_t seed) {
  const int n = model.intrinsic_dim;
  if (offsets.rows() != n || offsets.cols() < n)
    throw DegenerateArray("sensor_array_sample: bad offsets shape");
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(offsets);
  if (svd.singularValues()(n - 1) <= 1e-10 * svd.singularValues()(0))
    throw DegenerateArray("sensor_array_sample: offsets rank deficient");

  ArrayDataset data;
  data.truth = domain.sample(N, derive_seed(seed, 0));
  data.shots.reserve(N);
  data.rotations.reserve(N);

  for (int i = 0; i < N; ++i) {
    auto rng = make_rng(seed, 20000 + static_cast<std::uint64_t>(i));
    const Eigen::MatrixXd rot = randomize_rotation
                                    ? random_rotation(n, rng)
                                    : Eigen::MatrixXd::Identity(n, n);
    const Eigen::VectorXd x = data.truth.point(i).transpose();

    SensorArrayShot shot;
    shot.base_point_id = i;
    shot.offsets = offsets;
    shot.base_obs = model.f(x);
    shot.displaced_obs.resize(model.obs_dim, offsets.cols());
    for (int l = 0; l < offsets.cols(); ++l)
      shot.displaced_obs.col(l) = model.f(x + rot * offsets.col(l));

    data.shots.push_back(std::move(shot));
    data.rotations.push_back(rot);
  }
  return data;
}

Eigen::MatrixXd l_array_offsets(double spacing) {
  Eigen::MatrixXd u(2, 2);
  u << spacing, 0.0, 0.0, spacing;
  return u;
}

PcaResult pca_project(const PointSet& points, int num_components) {
  const Eigen::Index m = points.dim();
  if (num_components < 1 ||
      num_components > std::min<Eigen::Index>(points.size(), m))
    throw InvalidInput("pca_project: bad component count");

  const Eigen::RowVectorXd mean = points.matrix().colwise().mean();
  const Eigen::MatrixXd centered = points.matrix().rowwise() - mean;
  const Eigen::MatrixXd cov =
      centered.transpose() * centered / static_cast<double>(points.size());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);

  PcaResult out;
  out.mean = mean.transpose();
  out.basis.resize(m, num_components);
  out.explained_variance_fraction.resize(num_components);
  const double total = std::max(eig.eigenvalues().sum(), 1e-300);
  for (int c = 0; c < num_components; ++c) {
    const Eigen::Index k = m - 1 - c;
    out.basis.col(c) = eig.eigenvectors().col(k);
    out.explained_variance_fraction(c) =
        std::max(eig.eigenvalues()(k), 0.0) / total;
  }
  out.projected = PointSet(centered * out.basis);
  return out;
}

}  // namespace iie
