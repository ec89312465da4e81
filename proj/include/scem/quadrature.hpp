#pragma once

#include <vector>

#include <Eigen/Core>

#include "scem/electrodes.hpp"
#include "scem/mesh.hpp"

namespace scem {

/// Reference rule on a facet simplex: barycentric points (one column each)
/// and weights summing to one.
struct FacetRule {
  Eigen::MatrixXd barycentric;
  Eigen::VectorXd weights;
};

/// Symmetric facet rule of degree >= 4: 3-point Gauss-Legendre on segments
/// (degree 5), 6-point Dunavant on triangles (degree 4).
const FacetRule& facet_rule(int facet_dim);

/// Composite Gauss rule on a segment split into `pieces` equal parts with
/// `points` nodes each. Used as a high-order reference.
FacetRule composite_segment_rule(int pieces, int points);

/// Quadrature nodes on all electrode facets. Surface fields (contact
/// admittivity and its perturbations) are sampled at these nodes.
struct SurfaceQuadrature {
  int dim = 0;
  int points_per_facet = 0;
  std::vector<int> facet;              ///< per node: boundary facet index
  std::vector<int> electrode;          ///< per node: electrode index
  std::vector<char> in_contact;        ///< per node: facet lies in e_m
  Eigen::MatrixXd barycentric;         ///< dim x nodes, weights of the facet vertices
  Eigen::VectorXd weights;             ///< includes the facet measure
  Eigen::MatrixXd points;              ///< dim x nodes, physical coordinates
  Eigen::MatrixXd local;               ///< (dim-1) x nodes, electrode-chart coordinates
  std::vector<std::vector<int>> electrode_nodes;  ///< per electrode: node indices

  Eigen::Index size() const { return weights.size(); }
  int electrode_count() const { return static_cast<int>(electrode_nodes.size()); }
  /// Integral of a sampled surface field over each electrode.
  Eigen::VectorXd electrode_integrals(const Eigen::VectorXd& field) const;
};

SurfaceQuadrature build_surface_quadrature(const SimplicialMesh& mesh, const ElectrodeLayout& layout,
                                           const FacetRule& rule);
SurfaceQuadrature build_surface_quadrature(const SimplicialMesh& mesh, const ElectrodeLayout& layout);

}  // namespace scem
