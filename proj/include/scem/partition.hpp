#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "scem/mesh.hpp"

namespace scem {

class PartitionError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Cells grouped into face-connected clusters; the conductivity is constant
/// on each cluster.
struct Partition {
  std::vector<int> cluster_of;   ///< cell -> cluster in [0, count)
  Eigen::MatrixXd centers;       ///< dim x count, volume-weighted centroids
  Eigen::VectorXd volumes;       ///< per-cluster measure

  int count() const { return static_cast<int>(volumes.size()); }
};

/// Builds centers/volumes from an explicit assignment. Throws PartitionError if
/// a cluster is empty or the assignment size is wrong.
Partition make_partition(const SimplicialMesh& mesh, std::vector<int> cluster_of);

/// k-means++ seeded Lloyd clustering of cell centroids followed by a
/// connectivity repair that merges stray fragments into the adjacent cluster
/// with the nearest center.
Partition cluster_partition(const SimplicialMesh& mesh, int num_clusters, std::uint64_t seed);

/// True if every cluster is face-connected (breadth-first search per cluster).
bool clusters_connected(const SimplicialMesh& mesh, const Partition& partition);

/// Each target cluster takes the value of the source cluster with the nearest
/// center; ties go to the lower source index.
Eigen::VectorXd nearest_neighbor_project(const Partition& source, const Eigen::VectorXd& values,
                                         const Partition& target);

/// Piecewise-constant L2 norm: sqrt(sum_i |omega_i| v_i^2).
double piecewise_l2_norm(const Partition& partition, const Eigen::VectorXd& values);

Partition read_partition(std::istream& in, const SimplicialMesh& mesh);
Partition load_partition(const std::filesystem::path& path, const SimplicialMesh& mesh);
void write_partition(std::ostream& out, const Partition& partition);
void save_partition(const std::filesystem::path& path, const Partition& partition);

}  // namespace scem
