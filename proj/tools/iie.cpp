#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <Eigen/Core>

#include "iie/errors.hpp"
#include "iie/io.hpp"
#include "iie/metric_estimation.hpp"
#include "iie/pipeline.hpp"
#include "iie/rng.hpp"

namespace {

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw iie::IOError("cannot open: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Load config, apply --set overrides, then IIE_SEED / --out overrides.
iie::ExperimentConfig resolve_config(const std::string& config_path,
                                     const std::vector<std::string>& sets,
                                     const std::string& out_dir) {
  std::string text = read_text(config_path);
  for (const auto& s : sets) text = iie::apply_config_override(text, s);
  iie::ExperimentConfig cfg = iie::parse_experiment_config(text);
  if (const char* env_seed = std::getenv("IIE_SEED"))
    cfg.seed = std::stoull(env_seed);
  if (!out_dir.empty()) cfg.out_dir = out_dir;
  return cfg;
}

int cmd_generate(const iie::ExperimentConfig& cfg) {
  std::filesystem::create_directories(cfg.out_dir);
  const iie::IntrinsicDomain domain = iie::make_domain(cfg.world);
  const iie::ObservationModel model = iie::make_model(cfg.world, cfg.seed);

  if (cfg.metric_source == "array") {
    iie::ArrayDataset ds = iie::sensor_array_sample(
        domain, model, cfg.world.N, iie::l_array_offsets(cfg.world.array_spacing),
        cfg.world.array_randomize_rotation, cfg.seed);
    Eigen::MatrixXd obs(ds.shots.size(), model.obs_dim);
    for (std::size_t i = 0; i < ds.shots.size(); ++i)
      obs.row(i) = ds.shots[i].base_obs.transpose();
    iie::write_point_set_csv(cfg.out_dir / "truth.csv", ds.truth);
    iie::write_point_set_csv(cfg.out_dir / "observed.csv", iie::PointSet(obs));
    iie::write_shots_csv(cfg.out_dir / "shots.csv",
                         cfg.out_dir / "offsets.json", ds.shots);
  } else if (cfg.metric_source == "local" || cfg.metric_source == "net") {
    iie::GmmDataset ds = iie::gmm_sample_clusters(
        domain, model, cfg.world.N, cfg.world.N_i, cfg.world.sigma_int,
        cfg.world.sigma_obs, cfg.seed);
    Eigen::MatrixXd obs(ds.clusters.clusters.size(), model.obs_dim);
    for (std::size_t i = 0; i < ds.clusters.clusters.size(); ++i)
      obs.row(i) = ds.clusters.clusters[i].samples.colwise().mean();
    iie::write_point_set_csv(cfg.out_dir / "truth.csv", ds.truth);
    iie::write_point_set_csv(cfg.out_dir / "observed.csv", iie::PointSet(obs));
    iie::write_clusters_csv(cfg.out_dir / "clusters.csv", ds.clusters);
  } else {
    const iie::PointSet truth = domain.sample(cfg.world.N, cfg.seed);
    iie::write_point_set_csv(cfg.out_dir / "truth.csv", truth);
    iie::write_point_set_csv(cfg.out_dir / "observed.csv",
                             model.observe(truth));
  }
  std::cout << "wrote dataset to " << cfg.out_dir.string() << "\n";
  return 0;
}

int cmd_estimate(const iie::ExperimentConfig& cfg,
                 const std::filesystem::path& data_dir) {
  std::filesystem::create_directories(cfg.out_dir);
  const iie::ObservationModel model = iie::make_model(cfg.world, cfg.seed);
  const iie::PointSet observed =
      iie::read_point_set_csv(data_dir / "observed.csv");

  iie::MetricField field;
  field.intrinsic_dim = model.intrinsic_dim;
  if (cfg.metric_source == "analytic") {
    const iie::PointSet truth = iie::read_point_set_csv(data_dir / "truth.csv");
    field = iie::metric_field_from_model(model, truth);
  } else if (cfg.metric_source == "array") {
    const auto shots = iie::read_shots_csv(data_dir / "shots.csv",
                                           data_dir / "offsets.json");
    for (const auto& shot : shots)
      field.tensors.push_back(
          iie::pushforward_metric(iie::array_jacobian_estimate(shot)));
  } else {
    const double si = cfg.world.sigma_int * cfg.world.sigma_int;
    const double so = cfg.world.sigma_obs * cfg.world.sigma_obs;
    const iie::ObservationClusters clusters = iie::read_clusters_csv(
        data_dir / "clusters.csv", si, so, model.intrinsic_dim);
    if (cfg.metric_source == "local") {
      for (const auto& cl : clusters.clusters)
        field.tensors.push_back(
            iie::local_metric_estimate(cl.samples, si, so, model.intrinsic_dim));
    } else {
      iie::TrainConfig tc = cfg.net;
      tc.seed = iie::derive_seed(cfg.seed, 5);
      if (!cfg.cv_grid.empty()) {
        const iie::CvResult cv = iie::cross_validate(clusters, cfg.cv_grid, tc);
        tc.hidden1 = cv.best.hidden1;
        tc.hidden2 = cv.best.hidden2;
        tc.weight_decay = cv.best.weight_decay;
      }
      const iie::TrainResult tr = iie::train_metric_net(clusters, tc);
      iie::write_net_params_json(cfg.out_dir / "net_params.json", tr.params);
      iie::write_train_curve_csv(cfg.out_dir / "train_curve.csv", tr.curve);
      field = iie::metric_field_from_net(observed, tr.params);
    }
  }
  iie::write_metric_field_csv(cfg.out_dir / "metric.csv", field);
  std::cout << "wrote metric field to "
            << (cfg.out_dir / "metric.csv").string() << "\n";
  return 0;
}

int cmd_embed(const iie::ExperimentConfig& cfg,
              const std::filesystem::path& data_dir) {
  std::filesystem::create_directories(cfg.out_dir);
  const iie::ObservationModel model = iie::make_model(cfg.world, cfg.seed);
  const iie::PointSet observed =
      iie::read_point_set_csv(data_dir / "observed.csv");
  const iie::MetricField field = iie::read_metric_field_csv(
      data_dir / "metric.csv", model.intrinsic_dim);

  const iie::DistanceGraph graph = iie::build_knn_graph(observed, field, cfg.k);
  iie::write_graph_csv(cfg.out_dir / "graph.csv", graph);

  iie::MultiscaleConfig mc = cfg.multiscale_params;
  mc.smacof_tol = cfg.smacof_tol;
  mc.smacof_max_iter = cfg.smacof_max_iter;
  if (!cfg.multiscale) {
    mc.failure_detection = false;
    mc.max_depth = 0;
  }

  const auto standard = iie::standard_isomap(observed, cfg.k, cfg.n);
  const auto isomap = iie::intrinsic_isomap(graph, cfg.n);
  const auto ours = iie::multiscale_embed(graph, cfg.n, mc);
  iie::write_embedding_csv(cfg.out_dir / "standard_isomap.csv", standard.coords);
  iie::write_embedding_csv(cfg.out_dir / "intrinsic_isomap.csv", isomap.coords);
  iie::write_embedding_csv(cfg.out_dir / "intrinsic_isometric.csv", ours.coords);
  std::cout << "wrote embeddings to " << cfg.out_dir.string() << "\n";
  return ours.failure_flag ? 2 : 0;
}

int cmd_run(const iie::ExperimentConfig& cfg) {
  const iie::RunReport report = iie::run_experiment(cfg);
  std::cout << iie::compare_table({report});
  if (report.failure_flag) {
    std::cerr << "embedding failure flagged; see "
              << (report.out_dir / "report.json").string() << "\n";
    return 2;
  }
  return 0;
}

int cmd_compare(const std::vector<std::string>& report_paths,
                const std::string& out_path) {
  std::vector<iie::RunReport> reports;
  for (const auto& p : report_paths) reports.push_back(iie::load_report(p));
  const std::string table = iie::compare_table(reports);
  if (out_path.empty()) {
    std::cout << table;
  } else {
    std::ofstream out(out_path);
    if (!out) throw iie::IOError("cannot write: " + out_path);
    out << table;
  }
  return 0;
}

int cmd_report(const std::filesystem::path& run_dir) {
  const iie::RunReport r = iie::load_report(run_dir / "report.json");
  std::cout << "world: " << r.world << " (" << r.model << "), metric: "
            << r.metric_source << ", seed: " << r.seed << "\n"
            << "points: " << r.num_points << " / " << r.num_points_sampled
            << " sampled, latent diameter " << r.domain_diameter << "\n";
  std::cout << "edge distance rel-err quantiles (5/25/50/75/95%):";
  for (double q : r.edge_rel_err_quantiles) std::cout << " " << q;
  std::cout << "\n";
  for (const auto& [name, m] : r.methods)
    std::cout << "  " << name << ": full_stress=" << m.full_stress
              << " aligned_rmsd=" << m.aligned_rmsd
              << (m.failure_flag ? " [FLAGGED]" : "") << "\n";
  for (const auto& t : r.timings)
    std::cout << "  stage " << t.stage << ": " << t.seconds << " s\n";
  return r.failure_flag ? 2 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"intrinsic-isometric embedding experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> sets;
  std::string out_dir;
  std::string data_dir;
  int threads = 0;
  app.add_option("--threads", threads,
                 "cap worker threads (does not affect results)");

  auto add_common = [&](CLI::App* sub, bool needs_data) {
    sub->add_option("--config", config_path, "experiment config JSON")
        ->required();
    sub->add_option("--set", sets, "override config key (key=value)");
    sub->add_option("--out", out_dir, "output directory override");
    if (needs_data)
      sub->add_option("--data", data_dir, "input dataset directory")
          ->required();
  };

  auto* generate = app.add_subcommand("generate", "sample a synthetic world");
  add_common(generate, false);
  auto* estimate = app.add_subcommand("estimate", "estimate the metric field");
  add_common(estimate, true);
  auto* embed = app.add_subcommand("embed", "graph + embeddings from a metric");
  add_common(embed, true);
  auto* run = app.add_subcommand("run", "end-to-end experiment");
  add_common(run, false);

  auto* compare = app.add_subcommand("compare", "tabulate run reports");
  std::vector<std::string> report_paths;
  std::string table_out;
  compare->add_option("reports", report_paths, "report.json paths")->required();
  compare->add_option("--out", table_out, "write table to file");

  auto* report = app.add_subcommand("report", "summarize a run directory");
  std::string run_dir;
  report->add_option("dir", run_dir, "run output directory")->required();

  CLI11_PARSE(app, argc, argv);

  if (threads > 0) Eigen::setNbThreads(threads);

  try {
    if (generate->parsed())
      return cmd_generate(resolve_config(config_path, sets, out_dir));
    if (estimate->parsed())
      return cmd_estimate(resolve_config(config_path, sets, out_dir), data_dir);
    if (embed->parsed())
      return cmd_embed(resolve_config(config_path, sets, out_dir), data_dir);
    if (run->parsed())
      return cmd_run(resolve_config(config_path, sets, out_dir));
    if (compare->parsed()) return cmd_compare(report_paths, table_out);
    if (report->parsed()) return cmd_report(run_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
