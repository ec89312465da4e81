#pragma once

#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "scem/mesh.hpp"

namespace scem {

class ElectrodeError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Affine chart from an electrode patch to the parameter square [-1,1]^(dim-1):
///   y = (axes^T (x - origin) - center) / half_width.
/// `axes` are the principal in-plane directions of the electrode's vertex
/// cloud; the scaling makes the projected patch just fit inside the square.
struct LocalMap {
  Eigen::VectorXd origin;  ///< least-squares plane point (vertex centroid)
  Eigen::MatrixXd axes;    ///< dim x (dim-1), orthonormal columns
  Eigen::VectorXd center;  ///< bounding-box center of the projection
  double half_width = 1.0;

  Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
  /// Linear part d(y)/d(x), (dim-1) x dim.
  Eigen::MatrixXd jacobian() const { return axes.transpose() / half_width; }
};

/// Electrodes E_m and contact regions e_m as sets of boundary facet indices.
struct ElectrodeLayout {
  std::vector<std::vector<int>> electrodes;
  std::vector<std::vector<int>> contacts;
  std::vector<Eigen::VectorXd> midpoints;
  std::vector<LocalMap> local_maps;

  int count() const { return static_cast<int>(electrodes.size()); }
  /// Electrode owning a boundary facet, or -1.
  std::vector<int> facet_owner(std::size_t num_facets) const;
};

/// Facets whose centroid lies strictly within `electrode_radius` (resp.
/// `contact_radius`) of each midpoint. Throws ElectrodeError on empty or
/// overlapping electrodes.
ElectrodeLayout define_electrodes(const SimplicialMesh& mesh, const std::vector<Eigen::VectorXd>& midpoints,
                                  double electrode_radius, double contact_radius);

/// Evenly spaced points on the unit circle starting at angle 0.
std::vector<Eigen::VectorXd> circle_midpoints(int count);

/// Image of electrode m under its local map: mapped facets and the ridges on
/// the patch boundary, in local coordinates.
struct ElectrodeImage {
  int local_dim = 1;
  std::vector<Eigen::MatrixXd> facets;   ///< (dim-1) x dim per facet
  std::vector<Eigen::MatrixXd> ridges;   ///< (dim-1) x (dim-1) per boundary ridge

  bool contains(const Eigen::VectorXd& y) const;
  /// Distance from y to the patch boundary.
  double boundary_distance(const Eigen::VectorXd& y) const;
  /// Barycentric location of y: facet index and weights, if y lies in the image.
  std::optional<std::pair<int, Eigen::VectorXd>> locate(const Eigen::VectorXd& y) const;
};

ElectrodeImage electrode_image(const SimplicialMesh& mesh, const ElectrodeLayout& layout, int m);

/// Inverse chart: the point on E_m whose image is y (nullopt outside the image).
std::optional<Eigen::VectorXd> local_to_surface(const SimplicialMesh& mesh, const ElectrodeLayout& layout, int m,
                                                const Eigen::VectorXd& y);

}  // namespace scem
