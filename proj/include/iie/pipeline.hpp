#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "iie/embedding.hpp"
#include "iie/metric_net.hpp"
#include "iie/worlds.hpp"

namespace iie {

/// World half of an experiment: which latent domain and observation model to
/// sample, how many points, and the sampling noise / array geometry.
struct WorldConfig {
  std::string domain = "rectangle";  // rectangle | cross_hole_square | corridor
  // rectangle / cross_hole_square
  double side = 1.2;
  double arm_width = 0.3;
  double arm_length = 0.9;
  // corridor
  double r0 = 0.35;
  double growth = 0.09;
  double theta_max = 10.99557428756428;
  double width = 0.25;

  std::string model = "severed_sphere";
  int model_dim = 3;  // obs dim for identity / random_trig

  int N = 1000;
  int N_i = 1;  // samples per cluster (local / net sources)
  double sigma_int = 0.05;
  double sigma_obs = 0.01;

  double array_spacing = 0.15;
  bool array_randomize_rotation = true;
};

struct ExperimentConfig {
  WorldConfig world;
  std::string metric_source = "analytic";  // analytic | local | array | net
  int k = 30;
  int n = 2;
  double smacof_tol = 1e-6;
  int smacof_max_iter = 1000;
  bool multiscale = false;
  MultiscaleConfig multiscale_params;
  TrainConfig net;
  std::vector<CvCandidate> cv_grid;  // empty = train with `net` as-is
  std::uint64_t seed = 0;
  std::filesystem::path out_dir = "run";
};

/// Parse a JSON config document; unknown keys anywhere are rejected.
ExperimentConfig parse_experiment_config(const std::string& json_text);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// Apply a `key=value` or `section.key=value` override to the JSON document
/// before parsing. Values parse as JSON when possible, else as strings.
std::string apply_config_override(const std::string& json_text,
                                  const std::string& assignment);

/// Instantiate the latent domain / observation model a config describes.
IntrinsicDomain make_domain(const WorldConfig& world);
ObservationModel make_model(const WorldConfig& world, std::uint64_t seed);

struct MethodEval {
  double full_stress = 0.0;
  double aligned_rmsd = 0.0;
  bool rank_deficient = false;
  bool failure_flag = false;
};

struct StageTiming {
  std::string stage;
  double seconds = 0.0;
};

struct RunReport {
  std::string world;
  std::string model;
  std::string metric_source;
  int num_points = 0;         // vertices actually embedded
  int num_points_sampled = 0; // before any largest-component restriction
  std::uint64_t seed = 0;
  double domain_diameter = 0.0;
  /// Relative error of the graph-edge intrinsic distance estimates vs the
  /// true latent distances, at the 5/25/50/75/95 percentiles.
  std::vector<double> edge_rel_err_quantiles;
  std::map<std::string, MethodEval> methods;
  bool failure_flag = false;
  std::vector<std::string> artifacts;  // paths relative to out_dir
  std::vector<StageTiming> timings;    // persisted separately, never in report.json

  std::filesystem::path out_dir;
};

/// End-to-end pipeline: generate -> metric -> graph -> embed (three methods)
/// -> evaluate -> persist artifacts + report.json (+ timings.json). Any stage
/// error rethrows with the stage name prefixed.
RunReport run_experiment(const ExperimentConfig& config);

/// Serialize/deserialize the deterministic part of a report (timings and
/// out_dir excluded).
std::string report_to_json(const RunReport& report);
RunReport report_from_json(const std::string& json_text);
RunReport load_report(const std::filesystem::path& path);

/// CSV table `world,metric_source,method,full_stress,aligned_rmsd,runtime_sec`
/// with one row per method per report; deterministic order.
std::string compare_table(const std::vector<RunReport>& reports);

/// Scatter plot of (estimate, truth) pairs with the identity reference line,
/// as a standalone SVG; pure function of the inputs.
void emit_scatter_svg(const std::vector<std::pair<double, double>>& pairs,
                      const std::filesystem::path& path);

/// Scatter of 2-D point rows (used for embedding/truth plots).
void emit_points_svg(const Eigen::MatrixXd& coords,
                     const std::filesystem::path& path);

}  // namespace iie
