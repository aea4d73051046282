#include "iie/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "iie/errors.hpp"
#include "iie/io.hpp"
#include "iie/metric_estimation.hpp"
#include "iie/rng.hpp"
#include "iie/worlds.hpp"

namespace iie {

namespace {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

void check_keys(const json& obj, const std::set<std::string>& allowed,
                const std::string& where) {
  for (const auto& [key, value] : obj.items())
    if (!allowed.count(key))
      throw InvalidInput("config: unknown key '" + key + "' in " + where);
}

template <typename T>
void read_field(const json& obj, const char* key, T& target) {
  if (obj.contains(key)) target = obj.at(key).get<T>();
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("config: parse error: ") + e.what());
  }

  check_keys(j, {"world", "metric_source", "k", "n", "smacof", "multiscale",
                 "net", "seed", "out_dir"},
             "top level");

  ExperimentConfig cfg;
  if (j.contains("world")) {
    const json& w = j.at("world");
    check_keys(w,
               {"domain", "side", "arm_width", "arm_length", "r0", "growth",
                "theta_max", "width", "model", "model_dim", "N", "N_i",
                "sigma_int", "sigma_obs", "array_spacing",
                "array_randomize_rotation"},
               "world");
    read_field(w, "domain", cfg.world.domain);
    read_field(w, "side", cfg.world.side);
    read_field(w, "arm_width", cfg.world.arm_width);
    read_field(w, "arm_length", cfg.world.arm_length);
    read_field(w, "r0", cfg.world.r0);
    read_field(w, "growth", cfg.world.growth);
    read_field(w, "theta_max", cfg.world.theta_max);
    read_field(w, "width", cfg.world.width);
    read_field(w, "model", cfg.world.model);
    read_field(w, "model_dim", cfg.world.model_dim);
    read_field(w, "N", cfg.world.N);
    read_field(w, "N_i", cfg.world.N_i);
    read_field(w, "sigma_int", cfg.world.sigma_int);
    read_field(w, "sigma_obs", cfg.world.sigma_obs);
    read_field(w, "array_spacing", cfg.world.array_spacing);
    read_field(w, "array_randomize_rotation",
               cfg.world.array_randomize_rotation);
  }
  read_field(j, "metric_source", cfg.metric_source);
  read_field(j, "k", cfg.k);
  read_field(j, "n", cfg.n);
  if (j.contains("smacof")) {
    const json& s = j.at("smacof");
    check_keys(s, {"tol", "max_iter"}, "smacof");
    read_field(s, "tol", cfg.smacof_tol);
    read_field(s, "max_iter", cfg.smacof_max_iter);
  }
  if (j.contains("multiscale")) {
    const json& m = j.at("multiscale");
    check_keys(m,
               {"enabled", "failure_detection", "failure_threshold",
                "overlap_margin", "min_patch_size", "max_depth"},
               "multiscale");
    read_field(m, "enabled", cfg.multiscale);
    read_field(m, "failure_detection", cfg.multiscale_params.failure_detection);
    read_field(m, "failure_threshold", cfg.multiscale_params.failure_threshold);
    read_field(m, "overlap_margin", cfg.multiscale_params.overlap_margin);
    read_field(m, "min_patch_size", cfg.multiscale_params.min_patch_size);
    read_field(m, "max_depth", cfg.multiscale_params.max_depth);
  }
  if (j.contains("net")) {
    const json& n = j.at("net");
    check_keys(n,
               {"learning_rate", "adam_beta1", "adam_beta2", "adam_epsilon",
                "weight_decay", "max_epochs", "batch", "holdout_fraction",
                "cv_folds", "hidden1", "hidden2", "cv_grid"},
               "net");
    read_field(n, "learning_rate", cfg.net.learning_rate);
    read_field(n, "adam_beta1", cfg.net.adam_beta1);
    read_field(n, "adam_beta2", cfg.net.adam_beta2);
    read_field(n, "adam_epsilon", cfg.net.adam_epsilon);
    read_field(n, "weight_decay", cfg.net.weight_decay);
    read_field(n, "max_epochs", cfg.net.max_epochs);
    read_field(n, "batch", cfg.net.batch);
    read_field(n, "holdout_fraction", cfg.net.holdout_fraction);
    read_field(n, "cv_folds", cfg.net.cv_folds);
    read_field(n, "hidden1", cfg.net.hidden1);
    read_field(n, "hidden2", cfg.net.hidden2);
    if (n.contains("cv_grid"))
      for (const auto& c : n.at("cv_grid")) {
        check_keys(c, {"hidden1", "hidden2", "weight_decay"}, "net.cv_grid");
        CvCandidate cand{c.at("hidden1").get<int>(),
                         c.at("hidden2").get<int>(),
                         c.at("weight_decay").get<double>()};
        cfg.cv_grid.push_back(cand);
      }
  }
  read_field(j, "seed", cfg.seed);
  if (j.contains("out_dir"))
    cfg.out_dir = j.at("out_dir").get<std::string>();

  static const std::set<std::string> sources = {"analytic", "local", "array",
                                                "net"};
  if (!sources.count(cfg.metric_source))
    throw InvalidInput("config: metric_source must be one of analytic, local, "
                       "array, net; got '" + cfg.metric_source + "'");
  if (cfg.k < 1) throw InvalidInput("config: k must be >= 1");
  if (cfg.n < 1) throw InvalidInput("config: n must be >= 1");
  if (cfg.world.N < 2) throw InvalidInput("config: world.N must be >= 2");
  if (cfg.world.N_i < 1) throw InvalidInput("config: world.N_i must be >= 1");
  return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IOError("cannot open config: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_experiment_config(ss.str());
}

std::string apply_config_override(const std::string& json_text,
                                  const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw InvalidInput("--set expects key=value, got '" + assignment + "'");
  const std::string key_path = assignment.substr(0, eq);
  const std::string value_text = assignment.substr(eq + 1);

  json value;
  try {
    value = json::parse(value_text);
  } catch (const json::exception&) {
    value = value_text;  // bare strings need no quoting
  }

  json doc = json::parse(json_text);
  json* node = &doc;
  std::stringstream ss(key_path);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  for (std::size_t i = 0; i + 1 < parts.size(); ++i)
    node = &(*node)[parts[i]];
  (*node)[parts.back()] = value;
  return doc.dump();
}

IntrinsicDomain make_domain(const WorldConfig& w) {
  if (w.domain == "rectangle") {
    Eigen::Vector2d lo(-w.side / 2.0, -w.side / 2.0);
    Eigen::Vector2d hi(w.side / 2.0, w.side / 2.0);
    return rectangle_domain(lo, hi);
  }
  if (w.domain == "cross_hole_square")
    return cross_hole_square(w.side, w.arm_width, w.arm_length);
  if (w.domain == "corridor")
    return nonconvex_corridor_domain(w.r0, w.growth, w.theta_max, w.width);
  throw InvalidInput("unknown domain: " + w.domain);
}

ObservationModel make_model(const WorldConfig& w, std::uint64_t seed) {
  if (w.model == "severed_sphere") return severed_sphere_model();
  if (w.model == "identity") return identity_model(2);
  if (w.model == "rss_decay") return rss_decay_model();
  if (w.model == "random_trig")
    return random_trig_model(w.model_dim, derive_seed(seed, 9));
  throw InvalidInput("unknown observation model: " + w.model);
}

namespace {

PointSet subset_points(const PointSet& ps, const std::vector<int>& ids) {
  Eigen::MatrixXd m(ids.size(), ps.dim());
  for (std::size_t r = 0; r < ids.size(); ++r) m.row(r) = ps.point(ids[r]);
  return PointSet(m);
}

MetricField subset_field(const MetricField& field, const std::vector<int>& ids) {
  MetricField out;
  out.intrinsic_dim = field.intrinsic_dim;
  for (int id : ids) out.tensors.push_back(field.tensors[id]);
  return out;
}

double quantile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = static_cast<std::size_t>(std::ceil(pos));
  const double frac = pos - static_cast<double>(lo);
  return v[lo] * (1.0 - frac) + v[hi] * frac;
}

double aligned_rmsd(const Eigen::MatrixXd& coords, const PointSet& truth) {
  if (coords.cols() != truth.dim() || coords.rows() != truth.size())
    return std::numeric_limits<double>::quiet_NaN();
  const RigidTransform t = procrustes_align(coords, truth.matrix());
  const Eigen::MatrixXd aligned = t.apply(coords);
  return std::sqrt((aligned - truth.matrix()).squaredNorm() /
                   static_cast<double>(coords.rows()));
}

double latent_diameter(const PointSet& truth) {
  double best = 0.0;
  for (Eigen::Index i = 0; i < truth.size(); ++i)
    for (Eigen::Index j = i + 1; j < truth.size(); ++j)
      best = std::max(best, (truth.point(i) - truth.point(j)).norm());
  return best;
}

class StageClock {
 public:
  explicit StageClock(std::vector<StageTiming>& sink) : sink_(sink) {}

  template <typename Fn>
  auto run(const std::string& stage, Fn&& fn) {
    const auto start = std::chrono::steady_clock::now();
    try {
      if constexpr (std::is_void_v<decltype(fn())>) {
        fn();
        record(stage, start);
      } else {
        auto out = fn();
        record(stage, start);
        return out;
      }
    } catch (const std::exception& e) {
      record(stage, start);
      throw Error("stage '" + stage + "' failed: " + std::string(e.what()));
    }
  }

 private:
  void record(const std::string& stage,
              std::chrono::steady_clock::time_point start) {
    const std::chrono::duration<double> dt =
        std::chrono::steady_clock::now() - start;
    sink_.push_back({stage, dt.count()});
  }

  std::vector<StageTiming>& sink_;
};

ordered_json method_to_json(const MethodEval& m) {
  ordered_json j;
  j["full_stress"] = m.full_stress;
  j["aligned_rmsd"] = m.aligned_rmsd;
  j["rank_deficient"] = m.rank_deficient;
  j["failure_flag"] = m.failure_flag;
  return j;
}

double json_double(const json& j) {
  if (j.is_null()) return std::numeric_limits<double>::infinity();
  return j.get<double>();
}

}  // namespace

std::string report_to_json(const RunReport& report) {
  ordered_json j;
  j["format_version"] = 1;
  j["world"] = report.world;
  j["model"] = report.model;
  j["metric_source"] = report.metric_source;
  j["seed"] = report.seed;
  j["num_points_sampled"] = report.num_points_sampled;
  j["num_points"] = report.num_points;
  j["domain_diameter"] = report.domain_diameter;
  j["edge_rel_err_quantiles"] = report.edge_rel_err_quantiles;
  j["methods"] = ordered_json::object();
  for (const auto& [name, eval] : report.methods)
    j["methods"][name] = method_to_json(eval);
  j["failure_flag"] = report.failure_flag;
  j["artifacts"] = report.artifacts;
  return j.dump(2) + "\n";
}

RunReport report_from_json(const std::string& json_text) {
  const json j = json::parse(json_text);
  RunReport r;
  r.world = j.at("world").get<std::string>();
  r.model = j.at("model").get<std::string>();
  r.metric_source = j.at("metric_source").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.num_points_sampled = j.at("num_points_sampled").get<int>();
  r.num_points = j.at("num_points").get<int>();
  r.domain_diameter = json_double(j.at("domain_diameter"));
  for (const auto& q : j.at("edge_rel_err_quantiles"))
    r.edge_rel_err_quantiles.push_back(json_double(q));
  for (const auto& [name, m] : j.at("methods").items()) {
    MethodEval eval;
    eval.full_stress = json_double(m.at("full_stress"));
    eval.aligned_rmsd = json_double(m.at("aligned_rmsd"));
    eval.rank_deficient = m.at("rank_deficient").get<bool>();
    eval.failure_flag = m.at("failure_flag").get<bool>();
    r.methods[name] = eval;
  }
  r.failure_flag = j.at("failure_flag").get<bool>();
  for (const auto& a : j.at("artifacts"))
    r.artifacts.push_back(a.get<std::string>());
  return r;
}

RunReport load_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IOError("cannot open report: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  RunReport r = report_from_json(ss.str());
  r.out_dir = path.parent_path();

  const auto timings_path = path.parent_path() / "timings.json";
  std::ifstream tin(timings_path);
  if (tin) {
    json tj;
    tin >> tj;
    for (const auto& t : tj.at("stages"))
      r.timings.push_back(
          {t.at("stage").get<std::string>(), t.at("seconds").get<double>()});
  }
  return r;
}

std::string compare_table(const std::vector<RunReport>& reports) {
  std::ostringstream out;
  out << "world,model,metric_source,method,full_stress,aligned_rmsd,"
         "runtime_sec\n";
  for (const auto& r : reports) {
    double total = 0.0;
    for (const auto& t : r.timings) total += t.seconds;
    for (const auto& [name, eval] : r.methods) {
      out << r.world << "," << r.model << "," << r.metric_source << "," << name
          << "," << format_double(eval.full_stress) << ","
          << format_double(eval.aligned_rmsd) << ",";
      if (!r.timings.empty()) out << format_double(total);
      out << "\n";
    }
  }
  return out.str();
}

namespace {

struct PlotBounds {
  double lo_x, hi_x, lo_y, hi_y;
};

constexpr double kSvgSize = 640.0;
constexpr double kSvgMargin = 48.0;

void svg_header(std::ostream& out) {
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" "
         "height=\"640\" viewBox=\"0 0 640 640\">\n"
      << "<rect width=\"640\" height=\"640\" fill=\"white\"/>\n"
      << "<rect x=\"48\" y=\"48\" width=\"544\" height=\"544\" fill=\"none\" "
         "stroke=\"black\"/>\n";
}

double map_x(double v, const PlotBounds& b) {
  const double span = b.hi_x - b.lo_x;
  return kSvgMargin + (v - b.lo_x) / span * (kSvgSize - 2 * kSvgMargin);
}

double map_y(double v, const PlotBounds& b) {
  const double span = b.hi_y - b.lo_y;
  return kSvgSize - kSvgMargin -
         (v - b.lo_y) / span * (kSvgSize - 2 * kSvgMargin);
}

PlotBounds padded_bounds(double lo_x, double hi_x, double lo_y, double hi_y) {
  if (!(hi_x > lo_x)) {
    lo_x -= 0.5;
    hi_x += 0.5;
  }
  if (!(hi_y > lo_y)) {
    lo_y -= 0.5;
    hi_y += 0.5;
  }
  const double pad_x = 0.05 * (hi_x - lo_x);
  const double pad_y = 0.05 * (hi_y - lo_y);
  return {lo_x - pad_x, hi_x + pad_x, lo_y - pad_y, hi_y + pad_y};
}

}  // namespace

void emit_scatter_svg(const std::vector<std::pair<double, double>>& pairs,
                      const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IOError("cannot write svg: " + path.string());

  double lo = 0.0, hi = 1.0;
  if (!pairs.empty()) {
    lo = std::numeric_limits<double>::infinity();
    hi = -lo;
    for (const auto& [est, truth] : pairs) {
      lo = std::min({lo, est, truth});
      hi = std::max({hi, est, truth});
    }
  }
  const PlotBounds b = padded_bounds(lo, hi, lo, hi);

  svg_header(out);
  out << "<line x1=\"" << format_double(map_x(b.lo_x, b)) << "\" y1=\""
      << format_double(map_y(b.lo_x, b)) << "\" x2=\""
      << format_double(map_x(b.hi_x, b)) << "\" y2=\""
      << format_double(map_y(b.hi_x, b))
      << "\" stroke=\"#888\" stroke-dasharray=\"4 4\"/>\n";
  for (const auto& [est, truth] : pairs)
    out << "<circle cx=\"" << format_double(map_x(truth, b)) << "\" cy=\""
        << format_double(map_y(est, b))
        << "\" r=\"2\" fill=\"#336\" fill-opacity=\"0.5\"/>\n";
  out << "</svg>\n";
}

void emit_points_svg(const Eigen::MatrixXd& coords,
                     const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IOError("cannot write svg: " + path.string());

  double lo_x = 0.0, hi_x = 1.0, lo_y = 0.0, hi_y = 1.0;
  if (coords.rows() > 0 && coords.cols() >= 2) {
    lo_x = coords.col(0).minCoeff();
    hi_x = coords.col(0).maxCoeff();
    lo_y = coords.col(1).minCoeff();
    hi_y = coords.col(1).maxCoeff();
  }
  const PlotBounds b = padded_bounds(lo_x, hi_x, lo_y, hi_y);

  svg_header(out);
  if (coords.cols() >= 2)
    for (Eigen::Index i = 0; i < coords.rows(); ++i)
      out << "<circle cx=\"" << format_double(map_x(coords(i, 0), b))
          << "\" cy=\"" << format_double(map_y(coords(i, 1), b))
          << "\" r=\"2\" fill=\"#633\" fill-opacity=\"0.6\"/>\n";
  out << "</svg>\n";
}

RunReport run_experiment(const ExperimentConfig& config) {
  RunReport report;
  report.world = config.world.domain;
  report.model = config.world.model;
  report.metric_source = config.metric_source;
  report.seed = config.seed;
  report.out_dir = config.out_dir;
  StageClock clock(report.timings);

  std::filesystem::create_directories(config.out_dir);
  const auto& out_dir = config.out_dir;
  auto artifact = [&](const std::string& name) {
    report.artifacts.push_back(name);
    return out_dir / name;
  };

  const IntrinsicDomain domain = make_domain(config.world);
  const ObservationModel model = make_model(config.world, config.seed);

  // --- generate ---------------------------------------------------------
  PointSet truth(Eigen::MatrixXd(0, model.intrinsic_dim));
  PointSet observed(Eigen::MatrixXd(0, model.obs_dim));
  ObservationClusters clusters;
  std::vector<SensorArrayShot> shots;

  clock.run("generate", [&] {
    if (config.metric_source == "analytic") {
      truth = domain.sample(config.world.N, config.seed);
      observed = model.observe(truth);
    } else if (config.metric_source == "array") {
      ArrayDataset ds = sensor_array_sample(
          domain, model, config.world.N,
          l_array_offsets(config.world.array_spacing),
          config.world.array_randomize_rotation, config.seed);
      truth = ds.truth;
      Eigen::MatrixXd obs(ds.shots.size(), model.obs_dim);
      for (std::size_t i = 0; i < ds.shots.size(); ++i)
        obs.row(i) = ds.shots[i].base_obs.transpose();
      observed = PointSet(obs);
      shots = std::move(ds.shots);
    } else {  // local | net
      GmmDataset ds = gmm_sample_clusters(
          domain, model, config.world.N, config.world.N_i,
          config.world.sigma_int, config.world.sigma_obs, config.seed);
      truth = ds.truth;
      Eigen::MatrixXd obs(ds.clusters.clusters.size(), model.obs_dim);
      for (std::size_t i = 0; i < ds.clusters.clusters.size(); ++i)
        obs.row(i) = ds.clusters.clusters[i].samples.colwise().mean();
      observed = PointSet(obs);
      clusters = std::move(ds.clusters);
    }
  });
  report.num_points_sampled = static_cast<int>(observed.size());

  // --- metric field -----------------------------------------------------
  MetricField field = clock.run("metric", [&]() -> MetricField {
    if (config.metric_source == "analytic")
      return metric_field_from_model(model, truth);
    if (config.metric_source == "array") {
      MetricField f;
      f.intrinsic_dim = model.intrinsic_dim;
      for (const auto& shot : shots)
        f.tensors.push_back(pushforward_metric(array_jacobian_estimate(shot)));
      return f;
    }
    if (config.metric_source == "local") {
      MetricField f;
      f.intrinsic_dim = model.intrinsic_dim;
      for (const auto& cl : clusters.clusters)
        f.tensors.push_back(local_metric_estimate(
            cl.samples, clusters.sigma_int_sq, clusters.sigma_obs_sq,
            model.intrinsic_dim));
      return f;
    }
    // net
    TrainConfig tc = config.net;
    tc.seed = derive_seed(config.seed, 5);
    if (!config.cv_grid.empty()) {
      const CvResult cv = cross_validate(clusters, config.cv_grid, tc);
      tc.hidden1 = cv.best.hidden1;
      tc.hidden2 = cv.best.hidden2;
      tc.weight_decay = cv.best.weight_decay;
    }
    const TrainResult tr = train_metric_net(clusters, tc);
    write_net_params_json(artifact("net_params.json"), tr.params);
    write_train_curve_csv(artifact("train_curve.csv"), tr.curve);
    return metric_field_from_net(observed, tr.params);
  });

  // --- graph (restrict to largest component when disconnected) -----------
  DistanceGraph graph = clock.run("graph", [&]() -> DistanceGraph {
    DistanceGraph g = build_knn_graph(observed, field, config.k, true);
    for (int attempt = 0; attempt < 4; ++attempt) {
      const auto comps = connected_components(g);
      if (comps.size() <= 1) break;
      truth = subset_points(truth, comps[0]);
      observed = subset_points(observed, comps[0]);
      field = subset_field(field, comps[0]);
      g = build_knn_graph(observed, field, config.k, true);
    }
    if (connected_components(g).size() > 1)
      throw DisconnectedGraph("graph: largest-component restriction did not "
                              "converge to a connected graph");
    return g;
  });
  report.num_points = static_cast<int>(observed.size());
  report.domain_diameter = latent_diameter(truth);

  // --- embeddings ---------------------------------------------------------
  std::map<std::string, EmbeddingResult> embeddings;
  clock.run("embed", [&] {
    try {
      embeddings["standard_isomap"] =
          standard_isomap(observed, config.k, config.n);
    } catch (const DisconnectedGraph&) {
      // observed-space kNN graph disconnected: baseline has no embedding
      EmbeddingResult r;
      r.coords = Eigen::MatrixXd::Zero(observed.size(), config.n);
      r.stress = std::numeric_limits<double>::infinity();
      r.converged = false;
      r.failure_flag = true;
      embeddings["standard_isomap"] = r;
    }
    embeddings["intrinsic_isomap"] = intrinsic_isomap(graph, config.n);

    MultiscaleConfig mc = config.multiscale_params;
    mc.smacof_tol = config.smacof_tol;
    mc.smacof_max_iter = config.smacof_max_iter;
    if (!config.multiscale) {
      mc.failure_detection = false;
      mc.max_depth = 0;
    }
    embeddings["intrinsic_isometric"] = multiscale_embed(graph, config.n, mc);
  });

  // --- evaluate -----------------------------------------------------------
  std::vector<std::pair<double, double>> dist_pairs;
  clock.run("evaluate", [&] {
    std::vector<double> rel_err;
    for (const auto& e : graph.edges) {
      const double d_true = (truth.point(e.i) - truth.point(e.j)).norm();
      dist_pairs.emplace_back(e.dist, d_true);
      if (d_true > 0.0) rel_err.push_back(std::abs(e.dist - d_true) / d_true);
    }
    for (double q : {0.05, 0.25, 0.5, 0.75, 0.95})
      report.edge_rel_err_quantiles.push_back(quantile(rel_err, q));

    for (const auto& [name, emb] : embeddings) {
      MethodEval eval;
      eval.full_stress = emb.failure_flag && !emb.converged
                             ? std::numeric_limits<double>::infinity()
                             : full_stress(emb.coords, truth);
      eval.aligned_rmsd = aligned_rmsd(emb.coords, truth);
      eval.rank_deficient = emb.rank_deficient;
      eval.failure_flag = emb.failure_flag;
      report.methods[name] = eval;
    }
    report.failure_flag = embeddings.at("intrinsic_isometric").failure_flag;
  });

  // --- persist ------------------------------------------------------------
  clock.run("persist", [&] {
    write_point_set_csv(artifact("truth.csv"), truth);
    write_point_set_csv(artifact("observed.csv"), observed);
    if (config.metric_source == "local" || config.metric_source == "net")
      write_clusters_csv(artifact("clusters.csv"), clusters);
    if (config.metric_source == "array")
      write_shots_csv(artifact("shots.csv"), artifact("offsets.json"), shots);
    write_metric_field_csv(artifact("metric.csv"), field);
    write_graph_csv(artifact("graph.csv"), graph);

    for (const auto& [name, emb] : embeddings) {
      write_embedding_csv(artifact(name + ".csv"), emb.coords);
      Eigen::MatrixXd plotted = emb.coords;
      if (plotted.cols() == truth.dim() && plotted.rows() == truth.size() &&
          plotted.rows() > 0)
        plotted = procrustes_align(plotted, truth.matrix()).apply(plotted);
      emit_points_svg(plotted, artifact(name + ".svg"));
    }
    emit_points_svg(truth.matrix(), artifact("truth.svg"));
    emit_scatter_svg(dist_pairs, artifact("distance_scatter.svg"));

    std::ofstream rep(out_dir / "report.json");
    if (!rep) throw IOError("cannot write report.json");
    report.artifacts.push_back("report.json");
    rep << report_to_json(report);

    ordered_json tj;
    tj["stages"] = ordered_json::array();
    for (const auto& t : report.timings) {
      ordered_json s;
      s["stage"] = t.stage;
      s["seconds"] = t.seconds;
      tj["stages"].push_back(s);
    }
    std::ofstream tim(out_dir / "timings.json");
    if (!tim) throw IOError("cannot write timings.json");
    tim << tj.dump(2) << "\n";
  });

  return report;
}

}  // namespace iie
