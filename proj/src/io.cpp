#include "iie/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

namespace iie {

namespace {

std::ofstream open_out(const std::filesystem::path& path, bool binary = false) {
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw IOError("cannot open for writing: " + path.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path& path, bool binary = false) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) throw IOError("cannot open for reading: " + path.string());
  return in;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) fields.push_back(field);
  return fields;
}

double parse_double(const std::string& s) {
  double v = 0.0;
  const auto* begin = s.data();
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end)
    throw IOError("bad numeric field: '" + s + "'");
  return v;
}

/// id,v_0,...,v_{d-1} table shared by point sets and embeddings.
void write_id_matrix_csv(const std::filesystem::path& path,
                         const Eigen::MatrixXd& m, const std::string& prefix) {
  auto out = open_out(path);
  out << "id";
  for (Eigen::Index c = 0; c < m.cols(); ++c) out << "," << prefix << c;
  out << "\n";
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    out << r;
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      out << "," << format_double(m(r, c));
    out << "\n";
  }
}

Eigen::MatrixXd read_id_matrix_csv(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw IOError("empty csv: " + path.string());
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = split_csv(line);
    std::vector<double> row;
    for (std::size_t i = 1; i < fields.size(); ++i)
      row.push_back(parse_double(fields[i]));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) return {};
  Eigen::MatrixXd m(rows.size(), rows[0].size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != rows[0].size())
      throw IOError("ragged csv: " + path.string());
    for (std::size_t c = 0; c < rows[r].size(); ++c) m(r, c) = rows[r][c];
  }
  return m;
}

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  if (j.empty()) return {};
  Eigen::MatrixXd m(j.size(), j[0].size());
  for (std::size_t r = 0; r < j.size(); ++r)
    for (std::size_t c = 0; c < j[r].size(); ++c)
      m(r, c) = j[r][c].get<double>();
  return m;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw IOError("format_double failed");
  return std::string(buf, ptr);
}

void write_point_set_csv(const std::filesystem::path& path, const PointSet& ps) {
  write_id_matrix_csv(path, ps.matrix(), "x_");
}

PointSet read_point_set_csv(const std::filesystem::path& path) {
  return PointSet(read_id_matrix_csv(path));
}

void write_graph_csv(const std::filesystem::path& path, const DistanceGraph& g) {
  auto out = open_out(path);
  out << "i,j,dist,weight\n";
  for (const auto& e : g.edges)
    out << e.i << "," << e.j << "," << format_double(e.dist) << ","
        << format_double(e.weight) << "\n";
}

DistanceGraph read_graph_csv(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line) || line != "i,j,dist,weight")
    throw IOError("bad graph csv header: " + path.string());
  DistanceGraph g;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 4) throw IOError("bad graph csv row: " + line);
    DistanceGraph::Edge e;
    e.i = static_cast<int>(parse_double(f[0]));
    e.j = static_cast<int>(parse_double(f[1]));
    e.dist = parse_double(f[2]);
    e.weight = parse_double(f[3]);
    g.edges.push_back(e);
    g.num_vertices = std::max(g.num_vertices, std::max(e.i, e.j) + 1);
  }
  return g;
}

void write_geodesic_matrix(const std::filesystem::path& path,
                           const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols())
    throw InvalidInput("write_geodesic_matrix: matrix not square");
  auto out = open_out(path, true);
  const std::uint32_t n = static_cast<std::uint32_t>(m.rows());
  const std::uint32_t reserved = 0;
  out.write(reinterpret_cast<const char*>(&n), 4);
  out.write(reinterpret_cast<const char*>(&reserved), 4);
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const double v = m(r, c);
      out.write(reinterpret_cast<const char*>(&v), 8);
    }
}

Eigen::MatrixXd read_geodesic_matrix(const std::filesystem::path& path) {
  auto in = open_in(path, true);
  std::uint32_t n = 0, reserved = 0;
  in.read(reinterpret_cast<char*>(&n), 4);
  in.read(reinterpret_cast<char*>(&reserved), 4);
  if (!in) throw IOError("truncated geodesic file: " + path.string());
  Eigen::MatrixXd m(n, n);
  for (std::uint32_t r = 0; r < n; ++r)
    for (std::uint32_t c = 0; c < n; ++c) {
      double v = 0.0;
      in.read(reinterpret_cast<char*>(&v), 8);
      m(r, c) = v;
    }
  if (!in) throw IOError("truncated geodesic file: " + path.string());
  return m;
}

void write_clusters_csv(const std::filesystem::path& path,
                        const ObservationClusters& clusters) {
  auto out = open_out(path);
  const Eigen::Index m = clusters.obs_dim();
  out << "cluster_id,sample_idx";
  for (Eigen::Index c = 0; c < m; ++c) out << ",y_" << c;
  out << "\n";
  for (const auto& cl : clusters.clusters)
    for (Eigen::Index j = 0; j < cl.samples.rows(); ++j) {
      out << cl.center_id << "," << j;
      for (Eigen::Index c = 0; c < m; ++c)
        out << "," << format_double(cl.samples(j, c));
      out << "\n";
    }
}

ObservationClusters read_clusters_csv(const std::filesystem::path& path,
                                      double sigma_int_sq, double sigma_obs_sq,
                                      int intrinsic_dim) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw IOError("empty clusters csv");

  std::map<int, std::vector<std::vector<double>>> grouped;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() < 3) throw IOError("bad clusters csv row: " + line);
    const int id = static_cast<int>(parse_double(f[0]));
    std::vector<double> y;
    for (std::size_t c = 2; c < f.size(); ++c) y.push_back(parse_double(f[c]));
    grouped[id].push_back(std::move(y));
  }

  ObservationClusters clusters;
  clusters.sigma_int_sq = sigma_int_sq;
  clusters.sigma_obs_sq = sigma_obs_sq;
  clusters.intrinsic_dim = intrinsic_dim;
  for (const auto& [id, rows] : grouped) {
    ObservationClusters::Cluster cl;
    cl.center_id = id;
    cl.samples.resize(rows.size(), rows[0].size());
    for (std::size_t r = 0; r < rows.size(); ++r)
      for (std::size_t c = 0; c < rows[r].size(); ++c)
        cl.samples(r, c) = rows[r][c];
    clusters.clusters.push_back(std::move(cl));
  }
  return clusters;
}

void write_shots_csv(const std::filesystem::path& csv_path,
                     const std::filesystem::path& offsets_json_path,
                     const std::vector<SensorArrayShot>& shots) {
  auto out = open_out(csv_path);
  const Eigen::Index m = shots.empty() ? 0 : shots.front().base_obs.size();
  out << "shot_id,sensor_idx";
  for (Eigen::Index c = 0; c < m; ++c) out << ",y_" << c;
  out << "\n";
  for (std::size_t s = 0; s < shots.size(); ++s) {
    out << s << ",0";
    for (Eigen::Index c = 0; c < m; ++c)
      out << "," << format_double(shots[s].base_obs(c));
    out << "\n";
    for (Eigen::Index l = 0; l < shots[s].displaced_obs.cols(); ++l) {
      out << s << "," << (l + 1);
      for (Eigen::Index c = 0; c < m; ++c)
        out << "," << format_double(shots[s].displaced_obs(c, l));
      out << "\n";
    }
  }

  nlohmann::json j;
  j["format_version"] = 1;
  j["offsets"] =
      shots.empty() ? nlohmann::json::array() : matrix_to_json(shots[0].offsets);
  open_out(offsets_json_path) << j.dump(2) << "\n";
}

std::vector<SensorArrayShot> read_shots_csv(
    const std::filesystem::path& csv_path,
    const std::filesystem::path& offsets_json_path) {
  nlohmann::json j;
  open_in(offsets_json_path) >> j;
  const Eigen::MatrixXd offsets = matrix_from_json(j.at("offsets"));

  auto in = open_in(csv_path);
  std::string line;
  if (!std::getline(in, line)) throw IOError("empty shots csv");

  std::map<int, std::map<int, std::vector<double>>> grouped;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() < 3) throw IOError("bad shots csv row: " + line);
    const int shot = static_cast<int>(parse_double(f[0]));
    const int sensor = static_cast<int>(parse_double(f[1]));
    std::vector<double> y;
    for (std::size_t c = 2; c < f.size(); ++c) y.push_back(parse_double(f[c]));
    grouped[shot][sensor] = std::move(y);
  }

  std::vector<SensorArrayShot> shots;
  for (const auto& [id, sensors] : grouped) {
    const auto base_it = sensors.find(0);
    if (base_it == sensors.end())
      throw IOError("shot missing base sensor: " + std::to_string(id));
    const Eigen::Index m = static_cast<Eigen::Index>(base_it->second.size());
    SensorArrayShot shot;
    shot.base_point_id = id;
    shot.offsets = offsets;
    shot.base_obs.resize(m);
    for (Eigen::Index c = 0; c < m; ++c) shot.base_obs(c) = base_it->second[c];
    shot.displaced_obs.resize(m, static_cast<Eigen::Index>(sensors.size()) - 1);
    for (const auto& [sensor, y] : sensors) {
      if (sensor == 0) continue;
      for (Eigen::Index c = 0; c < m; ++c)
        shot.displaced_obs(c, sensor - 1) = y[c];
    }
    shots.push_back(std::move(shot));
  }
  return shots;
}

void write_metric_field_csv(const std::filesystem::path& path,
                            const MetricField& field) {
  auto out = open_out(path);
  const Eigen::Index m =
      field.tensors.empty() ? 0 : field.tensors.front().matrix.rows();
  out << "id";
  for (Eigen::Index r = 0; r < m; ++r)
    for (Eigen::Index c = 0; c < m; ++c) out << ",m_" << r << c;
  out << "\n";
  for (std::size_t i = 0; i < field.tensors.size(); ++i) {
    out << i;
    const auto& t = field.tensors[i].matrix;
    for (Eigen::Index r = 0; r < m; ++r)
      for (Eigen::Index c = 0; c < m; ++c)
        out << "," << format_double(t(r, c));
    out << "\n";
  }
}

MetricField read_metric_field_csv(const std::filesystem::path& path,
                                  int intrinsic_dim) {
  const Eigen::MatrixXd flat = read_id_matrix_csv(path);
  const auto m = static_cast<Eigen::Index>(
      std::llround(std::sqrt(static_cast<double>(flat.cols()))));
  if (m * m != flat.cols())
    throw IOError("metric field csv is not square: " + path.string());
  MetricField field;
  field.intrinsic_dim = intrinsic_dim;
  for (Eigen::Index i = 0; i < flat.rows(); ++i) {
    MetricTensor t;
    t.rank_target = intrinsic_dim;
    t.matrix.resize(m, m);
    for (Eigen::Index r = 0; r < m; ++r)
      for (Eigen::Index c = 0; c < m; ++c) t.matrix(r, c) = flat(i, r * m + c);
    field.tensors.push_back(std::move(t));
  }
  return field;
}

void write_embedding_csv(const std::filesystem::path& path,
                         const Eigen::MatrixXd& coords) {
  write_id_matrix_csv(path, coords, "x_");
}

Eigen::MatrixXd read_embedding_csv(const std::filesystem::path& path) {
  return read_id_matrix_csv(path);
}

void write_net_params_json(const std::filesystem::path& path,
                           const NetParams& params) {
  nlohmann::json j;
  j["format_version"] = 1;
  j["input_dim"] = params.input_dim;
  j["out_rows"] = params.out_rows;
  j["out_cols"] = params.out_cols;
  j["hidden"] = {params.hidden1(), params.hidden2()};
  j["weights"] = nlohmann::json::array();
  j["biases"] = nlohmann::json::array();
  for (const auto& w : params.weights) j["weights"].push_back(matrix_to_json(w));
  for (const auto& b : params.biases) {
    nlohmann::json arr = nlohmann::json::array();
    for (Eigen::Index i = 0; i < b.size(); ++i) arr.push_back(b(i));
    j["biases"].push_back(arr);
  }
  open_out(path) << j.dump(2) << "\n";
}

NetParams read_net_params_json(const std::filesystem::path& path) {
  nlohmann::json j;
  open_in(path) >> j;
  NetParams p;
  p.input_dim = j.at("input_dim").get<int>();
  p.out_rows = j.at("out_rows").get<int>();
  p.out_cols = j.at("out_cols").get<int>();
  for (const auto& w : j.at("weights")) p.weights.push_back(matrix_from_json(w));
  for (const auto& b : j.at("biases")) {
    Eigen::VectorXd v(b.size());
    for (std::size_t i = 0; i < b.size(); ++i) v(i) = b[i].get<double>();
    p.biases.push_back(std::move(v));
  }
  return p;
}

void write_train_curve_csv(const std::filesystem::path& path,
                           const std::vector<TrainCurvePoint>& curve) {
  auto out = open_out(path);
  out << "epoch,train_ll,val_ll\n";
  for (const auto& pt : curve)
    out << pt.epoch << "," << format_double(pt.train_ll) << ","
        << format_double(pt.val_ll) << "\n";
}

}  // namespace iie
