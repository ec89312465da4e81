#include "scem/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace scem {

namespace {

// Gauss-Legendre nodes/weights on [0, 1] via Golub-Welsch.
void gauss_legendre01(int n, Eigen::VectorXd& x, Eigen::VectorXd& w) {
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    const double b = k / std::sqrt(4.0 * k * k - 1.0);
    jac(k, k - 1) = jac(k - 1, k) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jac);
  x = 0.5 * (eig.eigenvalues().array() + 1.0);
  w = eig.eigenvectors().row(0).transpose().array().square();
}

FacetRule make_segment_rule() {
  FacetRule r;
  const double s = std::sqrt(15.0) / 10.0;
  const Eigen::Vector3d t(0.5 - s, 0.5, 0.5 + s);
  r.barycentric.resize(2, 3);
  r.barycentric.row(0) = (1.0 - t.array()).matrix().transpose();
  r.barycentric.row(1) = t.transpose();
  r.weights = Eigen::Vector3d(5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0);
  return r;
}

FacetRule make_triangle_rule() {
  constexpr double a = 0.445948490915965;
  constexpr double b = 0.108103018168070;
  constexpr double wa = 0.223381589678011;
  constexpr double c = 0.091576213509771;
  constexpr double d = 0.816847572980459;
  constexpr double wc = 0.109951743655322;
  FacetRule r;
  r.barycentric.resize(3, 6);
  r.barycentric << a, a, b, c, c, d,  //
      a, b, a, c, d, c,               //
      b, a, a, d, c, c;
  r.weights.resize(6);
  r.weights << wa, wa, wa, wc, wc, wc;
  return r;
}

}  // namespace

const FacetRule& facet_rule(int facet_dim) {
  static const FacetRule segment = make_segment_rule();
  static const FacetRule triangle = make_triangle_rule();
  if (facet_dim == 1) return segment;
  if (facet_dim == 2) return triangle;
  throw std::invalid_argument("facet dimension must be 1 or 2");
}

FacetRule composite_segment_rule(int pieces, int points) {
  Eigen::VectorXd x, w;
  gauss_legendre01(points, x, w);
  FacetRule r;
  r.barycentric.resize(2, pieces * points);
  r.weights.resize(pieces * points);
  for (int p = 0; p < pieces; ++p)
    for (int q = 0; q < points; ++q) {
      const double t = (p + x(q)) / pieces;
      r.barycentric.col(p * points + q) << 1.0 - t, t;
      r.weights(p * points + q) = w(q) / pieces;
    }
  return r;
}

Eigen::VectorXd SurfaceQuadrature::electrode_integrals(const Eigen::VectorXd& field) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(electrode_count());
  for (int m = 0; m < electrode_count(); ++m)
    for (int q : electrode_nodes[static_cast<std::size_t>(m)]) out(m) += weights(q) * field(q);
  return out;
}

SurfaceQuadrature build_surface_quadrature(const SimplicialMesh& mesh, const ElectrodeLayout& layout,
                                           const FacetRule& rule) {
  const int dim = mesh.dim();
  if (rule.barycentric.rows() != dim) throw std::invalid_argument("facet rule does not match mesh dimension");
  SurfaceQuadrature sq;
  sq.dim = dim;
  sq.points_per_facet = static_cast<int>(rule.weights.size());
  Eigen::Index total = 0;
  for (const auto& el : layout.electrodes) total += static_cast<Eigen::Index>(el.size()) * sq.points_per_facet;
  sq.barycentric.resize(dim, total);
  sq.weights.resize(total);
  sq.points.resize(dim, total);
  sq.local.resize(dim - 1, total);
  sq.electrode_nodes.resize(layout.electrodes.size());
  Eigen::Index q = 0;
  for (int m = 0; m < layout.count(); ++m) {
    const auto& contacts = layout.contacts[static_cast<std::size_t>(m)];
    const auto& map = layout.local_maps[static_cast<std::size_t>(m)];
    for (int f : layout.electrodes[static_cast<std::size_t>(m)]) {
      const Eigen::MatrixXd x = mesh.facet_coordinates(static_cast<std::size_t>(f));
      const double measure = mesh.facet_measure(static_cast<std::size_t>(f));
      const bool contact = std::find(contacts.begin(), contacts.end(), f) != contacts.end();
      for (int k = 0; k < sq.points_per_facet; ++k, ++q) {
        sq.facet.push_back(f);
        sq.electrode.push_back(m);
        sq.in_contact.push_back(contact ? 1 : 0);
        sq.barycentric.col(q) = rule.barycentric.col(k);
        sq.weights(q) = rule.weights(k) * measure;
        sq.points.col(q) = x * rule.barycentric.col(k);
        sq.local.col(q) = map.apply(sq.points.col(q));
        sq.electrode_nodes[static_cast<std::size_t>(m)].push_back(static_cast<int>(q));
      }
    }
  }
  return sq;
}

SurfaceQuadrature build_surface_quadrature(const SimplicialMesh& mesh, const ElectrodeLayout& layout) {
  return build_surface_quadrature(mesh, layout, facet_rule(mesh.dim() - 1));
}

}  // namespace scem
