#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

namespace scem {

/// Broken mesh connectivity: inverted/degenerate cells, duplicated cells,
/// non-manifold facets, out-of-range indices.
class MeshError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A facet on the domain boundary. `vertices[0..dim)` are ordered so that the
/// induced normal points out of the domain.
struct BoundaryFacet {
  std::array<int, 3> vertices{-1, -1, -1};
  int cell = -1;
  int opposite_local = -1;  ///< local index of the cell vertex not on the facet
};

/// Conforming simplicial mesh in two or three dimensions. Cells are stored
/// positively oriented; boundary facets are derived from cell adjacency.
class SimplicialMesh {
public:
  SimplicialMesh() = default;
  /// `vertices` is dim x n, `cells` is (dim+1) x k with 0-based indices.
  /// Negatively oriented cells are flipped; degenerate ones are rejected.
  SimplicialMesh(int dim, Eigen::MatrixXd vertices, Eigen::MatrixXi cells);

  int dim() const { return dim_; }
  Eigen::Index num_vertices() const { return vertices_.cols(); }
  Eigen::Index num_cells() const { return cells_.cols(); }
  const Eigen::MatrixXd& vertices() const { return vertices_; }
  const Eigen::MatrixXi& cells() const { return cells_; }

  std::span<const BoundaryFacet> boundary_facets() const { return facets_; }
  /// Neighbor across the face opposite local vertex k, or -1 on the boundary.
  int neighbor(Eigen::Index cell, int k) const { return neighbors_[static_cast<std::size_t>(cell)][k]; }

  double cell_volume(Eigen::Index cell) const { return volumes_[static_cast<std::size_t>(cell)]; }
  Eigen::VectorXd cell_centroid(Eigen::Index cell) const;
  /// Gradients of the barycentric coordinates, one column per local vertex.
  Eigen::MatrixXd barycentric_gradients(Eigen::Index cell) const;

  double facet_measure(std::size_t facet) const;
  Eigen::VectorXd facet_centroid(std::size_t facet) const;
  Eigen::VectorXd facet_normal(std::size_t facet) const;
  /// dim x dim matrix of facet vertex coordinates (one column per vertex).
  Eigen::MatrixXd facet_coordinates(std::size_t facet) const;

private:
  int dim_ = 0;
  Eigen::MatrixXd vertices_;
  Eigen::MatrixXi cells_;
  std::vector<double> volumes_;
  std::vector<std::array<int, 4>> neighbors_;
  std::vector<BoundaryFacet> facets_;
};

SimplicialMesh read_mesh(std::istream& in);
SimplicialMesh load_mesh(const std::filesystem::path& path);
void write_mesh(std::ostream& out, const SimplicialMesh& mesh);
void save_mesh(const std::filesystem::path& path, const SimplicialMesh& mesh);

/// Unit-disk triangulation: a fixed 32-triangle mesh refined `level` times by
/// midpoint subdivision, with new boundary vertices pushed onto the circle.
SimplicialMesh generate_disk_mesh(int refinement_level);

inline constexpr int kMaxDiskRefinement = 8;

}  // namespace scem
