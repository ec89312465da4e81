#include "scem/partition.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <queue>
#include <string>

#include "scem/rng.hpp"
#include "scem/textio.hpp"

namespace scem {

namespace {

constexpr int kLloydIterations = 100;
constexpr int kRepairPasses = 50;

Eigen::MatrixXd cell_centroids(const SimplicialMesh& mesh) {
  Eigen::MatrixXd c(mesh.dim(), mesh.num_cells());
  for (Eigen::Index i = 0; i < mesh.num_cells(); ++i) c.col(i) = mesh.cell_centroid(i);
  return c;
}

int nearest_center(const Eigen::MatrixXd& centers, const Eigen::VectorXd& p) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < centers.cols(); ++k) {
    const double d = (centers.col(k) - p).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(k);
    }
  }
  return best;
}

// Connected components of one cluster, each a list of cells.
std::vector<std::vector<int>> cluster_components(const SimplicialMesh& mesh, const std::vector<int>& cluster_of,
                                                 const std::vector<int>& cells) {
  std::vector<std::vector<int>> comps;
  if (cells.empty()) return comps;
  const int label = cluster_of[static_cast<std::size_t>(cells.front())];
  std::vector<char> visited(cluster_of.size(), 0);
  for (int start : cells) {
    if (visited[static_cast<std::size_t>(start)]) continue;
    std::vector<int> comp;
    std::queue<int> q;
    q.push(start);
    visited[static_cast<std::size_t>(start)] = 1;
    while (!q.empty()) {
      const int c = q.front();
      q.pop();
      comp.push_back(c);
      for (int k = 0; k <= mesh.dim(); ++k) {
        const int nb = mesh.neighbor(c, k);
        if (nb >= 0 && !visited[static_cast<std::size_t>(nb)] && cluster_of[static_cast<std::size_t>(nb)] == label) {
          visited[static_cast<std::size_t>(nb)] = 1;
          q.push(nb);
        }
      }
    }
    comps.push_back(std::move(comp));
  }
  return comps;
}

std::vector<std::vector<int>> members(const std::vector<int>& cluster_of, int count) {
  std::vector<std::vector<int>> out(static_cast<std::size_t>(count));
  for (std::size_t c = 0; c < cluster_of.size(); ++c) out[static_cast<std::size_t>(cluster_of[c])].push_back(static_cast<int>(c));
  return out;
}

}  // namespace

Partition make_partition(const SimplicialMesh& mesh, std::vector<int> cluster_of) {
  if (static_cast<Eigen::Index>(cluster_of.size()) != mesh.num_cells())
    throw PartitionError("partition size does not match the cell count");
  int count = 0;
  for (int k : cluster_of) {
    if (k < 0) throw PartitionError("negative cluster index");
    count = std::max(count, k + 1);
  }
  Partition p;
  p.cluster_of = std::move(cluster_of);
  p.centers = Eigen::MatrixXd::Zero(mesh.dim(), count);
  p.volumes = Eigen::VectorXd::Zero(count);
  for (Eigen::Index c = 0; c < mesh.num_cells(); ++c) {
    const int k = p.cluster_of[static_cast<std::size_t>(c)];
    const double v = mesh.cell_volume(c);
    p.volumes(k) += v;
    p.centers.col(k) += v * mesh.cell_centroid(c);
  }
  for (int k = 0; k < count; ++k) {
    if (p.volumes(k) <= 0) throw PartitionError("cluster " + std::to_string(k) + " is empty");
    p.centers.col(k) /= p.volumes(k);
  }
  return p;
}

Partition cluster_partition(const SimplicialMesh& mesh, int num_clusters, std::uint64_t seed) {
  const Eigen::Index n = mesh.num_cells();
  if (num_clusters < 1 || num_clusters > n) throw PartitionError("cluster count must be in [1, cell count]");
  const Eigen::MatrixXd pts = cell_centroids(mesh);
  Eigen::VectorXd weight(n);
  for (Eigen::Index c = 0; c < n; ++c) weight(c) = mesh.cell_volume(c);

  // k-means++ seeding.
  PhiloxStream rng(seed, 0);
  Eigen::MatrixXd centers(mesh.dim(), num_clusters);
  const auto first = static_cast<Eigen::Index>(rng.uniform() * static_cast<double>(n));
  centers.col(0) = pts.col(std::min(first, n - 1));
  Eigen::VectorXd d2 = (pts.colwise() - centers.col(0)).colwise().squaredNorm().transpose();
  for (int k = 1; k < num_clusters; ++k) {
    const double total = d2.sum();
    Eigen::Index pick = 0;
    if (total > 0) {
      double target = rng.uniform() * total;
      pick = n - 1;
      for (Eigen::Index i = 0; i < n; ++i) {
        target -= d2(i);
        if (target < 0 && d2(i) > 0) {
          pick = i;
          break;
        }
      }
      while (d2(pick) <= 0 && pick > 0) --pick;
    }
    centers.col(k) = pts.col(pick);
    d2 = d2.cwiseMin((pts.colwise() - centers.col(k)).colwise().squaredNorm().transpose());
  }

  // Lloyd iterations.
  std::vector<int> assign(static_cast<std::size_t>(n), -1);
  for (int it = 0; it < kLloydIterations; ++it) {
    bool changed = false;
    for (Eigen::Index c = 0; c < n; ++c) {
      const int k = nearest_center(centers, pts.col(c));
      if (k != assign[static_cast<std::size_t>(c)]) {
        assign[static_cast<std::size_t>(c)] = k;
        changed = true;
      }
    }
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(mesh.dim(), num_clusters);
    Eigen::VectorXd mass = Eigen::VectorXd::Zero(num_clusters);
    for (Eigen::Index c = 0; c < n; ++c) {
      const int k = assign[static_cast<std::size_t>(c)];
      sum.col(k) += weight(c) * pts.col(c);
      mass(k) += weight(c);
    }
    for (int k = 0; k < num_clusters; ++k) {
      if (mass(k) > 0) {
        centers.col(k) = sum.col(k) / mass(k);
        continue;
      }
      // Empty cluster: restart it at the point worst served by its center.
      Eigen::Index worst = 0;
      double worst_d = -1;
      for (Eigen::Index c = 0; c < n; ++c) {
        const double d = (pts.col(c) - centers.col(assign[static_cast<std::size_t>(c)])).squaredNorm();
        if (d > worst_d) {
          worst_d = d;
          worst = c;
        }
      }
      centers.col(k) = pts.col(worst);
      assign[static_cast<std::size_t>(worst)] = k;
      changed = true;
    }
    if (!changed) break;
  }

  // Connectivity repair.
  for (int pass = 0; pass <= kRepairPasses; ++pass) {
    Partition current = make_partition(mesh, assign);
    bool moved = false;
    const auto groups = members(assign, num_clusters);
    for (int k = 0; k < num_clusters; ++k) {
      auto comps = cluster_components(mesh, assign, groups[static_cast<std::size_t>(k)]);
      if (comps.size() <= 1) continue;
      if (pass == kRepairPasses) throw PartitionError("connectivity repair did not converge");
      std::size_t keep = 0;
      for (std::size_t i = 1; i < comps.size(); ++i)
        if (comps[i].size() > comps[keep].size()) keep = i;
      for (std::size_t i = 0; i < comps.size(); ++i) {
        if (i == keep) continue;
        Eigen::VectorXd centroid = Eigen::VectorXd::Zero(mesh.dim());
        double vol = 0;
        std::vector<int> adjacent;
        for (int c : comps[i]) {
          centroid += mesh.cell_volume(c) * pts.col(c);
          vol += mesh.cell_volume(c);
          for (int j = 0; j <= mesh.dim(); ++j) {
            const int nb = mesh.neighbor(c, j);
            if (nb >= 0 && assign[static_cast<std::size_t>(nb)] != k) adjacent.push_back(assign[static_cast<std::size_t>(nb)]);
          }
        }
        if (adjacent.empty()) throw PartitionError("cluster fragment has no neighboring cluster");
        centroid /= vol;
        std::sort(adjacent.begin(), adjacent.end());
        int target = adjacent.front();
        double best = std::numeric_limits<double>::infinity();
        for (int a : adjacent) {
          const double d = (current.centers.col(a) - centroid).squaredNorm();
          if (d < best) {
            best = d;
            target = a;
          }
        }
        for (int c : comps[i]) assign[static_cast<std::size_t>(c)] = target;
        moved = true;
      }
    }
    if (!moved) return current;
  }
  throw PartitionError("connectivity repair did not converge");
}

bool clusters_connected(const SimplicialMesh& mesh, const Partition& partition) {
  const auto groups = members(partition.cluster_of, partition.count());
  for (const auto& g : groups)
    if (cluster_components(mesh, partition.cluster_of, g).size() != 1) return false;
  return true;
}

Eigen::VectorXd nearest_neighbor_project(const Partition& source, const Eigen::VectorXd& values,
                                         const Partition& target) {
  if (values.size() != source.count()) throw std::invalid_argument("value count does not match source partition");
  Eigen::VectorXd out(target.count());
  for (int t = 0; t < target.count(); ++t) out(t) = values(nearest_center(source.centers, target.centers.col(t)));
  return out;
}

double piecewise_l2_norm(const Partition& partition, const Eigen::VectorXd& values) {
  return std::sqrt((partition.volumes.array() * values.array().square()).sum());
}

Partition read_partition(std::istream& in, const SimplicialMesh& mesh) {
  std::vector<int> assign;
  std::string tok;
  while (in >> tok) {
    std::size_t used = 0;
    int k = 0;
    try {
      k = std::stoi(tok, &used);
    } catch (const std::exception&) {
      throw ParseError("bad cluster index '" + tok + "'");
    }
    if (used != tok.size()) throw ParseError("bad cluster index '" + tok + "'");
    assign.push_back(k);
  }
  return make_partition(mesh, std::move(assign));
}

Partition load_partition(const std::filesystem::path& path, const SimplicialMesh& mesh) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open partition file " + path.string());
  return read_partition(in, mesh);
}

void write_partition(std::ostream& out, const Partition& partition) {
  for (int k : partition.cluster_of) out << k << '\n';
}

void save_partition(const std::filesystem::path& path, const Partition& partition) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write partition file " + path.string());
  write_partition(out, partition);
}

}  // namespace scem
