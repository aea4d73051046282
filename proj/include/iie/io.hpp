#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <string>

#include "iie/distance_graph.hpp"
#include "iie/embedding.hpp"
#include "iie/metric_estimation.hpp"
#include "iie/metric_net.hpp"
#include "iie/point_set.hpp"

namespace iie {

/// Shortest round-trip decimal rendering of a double; all text formats use
/// this so identical runs produce identical bytes.
std::string format_double(double v);

void write_point_set_csv(const std::filesystem::path& path, const PointSet& ps);
PointSet read_point_set_csv(const std::filesystem::path& path);

/// DistanceGraph CSV with header `i,j,dist,weight`.
void write_graph_csv(const std::filesystem::path& path, const DistanceGraph& g);
DistanceGraph read_graph_csv(const std::filesystem::path& path);

/// Binary row-major matrix with an 8-byte header (u32 N, u32 reserved).
void write_geodesic_matrix(const std::filesystem::path& path,
                           const Eigen::MatrixXd& m);
Eigen::MatrixXd read_geodesic_matrix(const std::filesystem::path& path);

/// Cluster samples CSV `cluster_id,sample_idx,y_0,...,y_{m-1}`. Variances and
/// the intrinsic dimension travel in the dataset manifest, not the CSV.
void write_clusters_csv(const std::filesystem::path& path,
                        const ObservationClusters& clusters);
ObservationClusters read_clusters_csv(const std::filesystem::path& path,
                                      double sigma_int_sq, double sigma_obs_sq,
                                      int intrinsic_dim);

/// Array shots CSV `shot_id,sensor_idx,y_0,...` (sensor 0 = base) plus an
/// offsets sidecar JSON.
void write_shots_csv(const std::filesystem::path& csv_path,
                     const std::filesystem::path& offsets_json_path,
                     const std::vector<SensorArrayShot>& shots);
std::vector<SensorArrayShot> read_shots_csv(
    const std::filesystem::path& csv_path,
    const std::filesystem::path& offsets_json_path);

/// Metric field CSV `id,m_00,m_01,...` (row-major flattened m x m tensor).
void write_metric_field_csv(const std::filesystem::path& path,
                            const MetricField& field);
MetricField read_metric_field_csv(const std::filesystem::path& path,
                                  int intrinsic_dim);

/// Embedding coordinates CSV `id,x_0,...,x_{n-1}`.
void write_embedding_csv(const std::filesystem::path& path,
                         const Eigen::MatrixXd& coords);
Eigen::MatrixXd read_embedding_csv(const std::filesystem::path& path);

/// Network parameters as JSON (architecture + row-major weight arrays).
void write_net_params_json(const std::filesystem::path& path,
                           const NetParams& params);
NetParams read_net_params_json(const std::filesystem::path& path);

/// Training curve CSV `epoch,train_ll,val_ll`.
void write_train_curve_csv(const std::filesystem::path& path,
                           const std::vector<TrainCurvePoint>& curve);

}  // namespace iie
