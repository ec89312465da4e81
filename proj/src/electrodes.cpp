#include "scem/electrodes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <set>
#include <string>

#include <Eigen/Dense>

namespace scem {

namespace {

constexpr double kTieTol = 1e-12;

LocalMap fit_local_map(const SimplicialMesh& mesh, const std::vector<int>& facets) {
  const int dim = mesh.dim();
  std::set<int> vert_ids;
  for (int f : facets)
    for (int k = 0; k < dim; ++k) vert_ids.insert(mesh.boundary_facets()[static_cast<std::size_t>(f)].vertices[k]);
  Eigen::MatrixXd pts(dim, static_cast<Eigen::Index>(vert_ids.size()));
  Eigen::Index j = 0;
  for (int v : vert_ids) pts.col(j++) = mesh.vertices().col(v);

  LocalMap map;
  map.origin = pts.rowwise().mean();
  const Eigen::MatrixXd centered = pts.colwise() - map.origin;
  const Eigen::MatrixXd cov = centered * centered.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  // Eigenvalues ascend; the smallest belongs to the plane normal.
  map.axes.resize(dim, dim - 1);
  for (int k = 0; k < dim - 1; ++k) {
    Eigen::VectorXd a = eig.eigenvectors().col(dim - 1 - k);
    const double s0 = a(0);
    const double s1 = a(1);
    if (s0 < -kTieTol || (std::abs(s0) <= kTieTol && s1 < 0)) a = -a;
    map.axes.col(k) = a;
  }
  const Eigen::MatrixXd proj = map.axes.transpose() * centered;
  const Eigen::VectorXd lo = proj.rowwise().minCoeff();
  const Eigen::VectorXd hi = proj.rowwise().maxCoeff();
  map.center = 0.5 * (lo + hi);
  map.half_width = 0.5 * (hi - lo).maxCoeff();
  if (!(map.half_width > 0)) throw ElectrodeError("electrode patch has zero extent");
  return map;
}

double point_segment_distance(const Eigen::Vector2d& p, const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  const Eigen::Vector2d d = b - a;
  const double len2 = d.squaredNorm();
  double t = len2 > 0 ? (p - a).dot(d) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return (a + t * d - p).norm();
}

}  // namespace

Eigen::VectorXd LocalMap::apply(const Eigen::VectorXd& x) const {
  return (axes.transpose() * (x - origin) - center) / half_width;
}

std::vector<int> ElectrodeLayout::facet_owner(std::size_t num_facets) const {
  std::vector<int> owner(num_facets, -1);
  for (std::size_t m = 0; m < electrodes.size(); ++m)
    for (int f : electrodes[m]) owner[static_cast<std::size_t>(f)] = static_cast<int>(m);
  return owner;
}

ElectrodeLayout define_electrodes(const SimplicialMesh& mesh, const std::vector<Eigen::VectorXd>& midpoints,
                                  double electrode_radius, double contact_radius) {
  if (midpoints.size() < 2) throw ElectrodeError("at least two electrodes are required");
  if (!(contact_radius > 0) || !(contact_radius < electrode_radius))
    throw ElectrodeError("contact radius must be positive and smaller than the electrode radius");
  const auto facets = mesh.boundary_facets();
  std::vector<Eigen::VectorXd> centroids;
  centroids.reserve(facets.size());
  for (std::size_t f = 0; f < facets.size(); ++f) centroids.push_back(mesh.facet_centroid(f));

  ElectrodeLayout layout;
  layout.midpoints = midpoints;
  std::vector<int> owner(facets.size(), -1);
  for (std::size_t m = 0; m < midpoints.size(); ++m) {
    if (midpoints[m].size() != mesh.dim()) throw ElectrodeError("midpoint dimension mismatch");
    std::vector<int> el, ct;
    for (std::size_t f = 0; f < facets.size(); ++f) {
      const double d = (centroids[f] - midpoints[m]).norm();
      if (d < electrode_radius) {
        if (owner[f] >= 0)
          throw ElectrodeError("electrodes " + std::to_string(owner[f]) + " and " + std::to_string(m) +
                               " share boundary facet " + std::to_string(f));
        owner[f] = static_cast<int>(m);
        el.push_back(static_cast<int>(f));
        if (d < contact_radius) ct.push_back(static_cast<int>(f));
      }
    }
    if (el.empty()) throw ElectrodeError("electrode " + std::to_string(m) + " covers no boundary facet");
    if (ct.empty()) throw ElectrodeError("contact region of electrode " + std::to_string(m) + " is empty");
    layout.electrodes.push_back(std::move(el));
    layout.contacts.push_back(std::move(ct));
  }
  for (const auto& el : layout.electrodes) layout.local_maps.push_back(fit_local_map(mesh, el));
  return layout;
}

std::vector<Eigen::VectorXd> circle_midpoints(int count) {
  std::vector<Eigen::VectorXd> pts;
  for (int m = 0; m < count; ++m) {
    const double a = 2.0 * std::numbers::pi * m / count;
    pts.push_back(Eigen::Vector2d(std::cos(a), std::sin(a)));
  }
  return pts;
}

ElectrodeImage electrode_image(const SimplicialMesh& mesh, const ElectrodeLayout& layout, int m) {
  const int dim = mesh.dim();
  const auto& map = layout.local_maps[static_cast<std::size_t>(m)];
  ElectrodeImage img;
  img.local_dim = dim - 1;
  std::map<std::vector<int>, std::pair<int, Eigen::MatrixXd>> ridge_count;
  for (int f : layout.electrodes[static_cast<std::size_t>(m)]) {
    const auto& facet = mesh.boundary_facets()[static_cast<std::size_t>(f)];
    Eigen::MatrixXd y(dim - 1, dim);
    for (int k = 0; k < dim; ++k) y.col(k) = map.apply(mesh.vertices().col(facet.vertices[k]));
    img.facets.push_back(y);
    for (int k = 0; k < dim; ++k) {
      std::vector<int> key;
      Eigen::MatrixXd r(dim - 1, dim - 1);
      int n = 0;
      for (int j = 0; j < dim; ++j)
        if (j != k) {
          key.push_back(facet.vertices[j]);
          r.col(n++) = y.col(j);
        }
      std::sort(key.begin(), key.end());
      auto [it, inserted] = ridge_count.try_emplace(key, 0, r);
      ++it->second.first;
    }
  }
  for (const auto& [key, entry] : ridge_count)
    if (entry.first == 1) img.ridges.push_back(entry.second);
  return img;
}

std::optional<std::pair<int, Eigen::VectorXd>> ElectrodeImage::locate(const Eigen::VectorXd& y) const {
  constexpr double tol = 1e-10;
  for (std::size_t f = 0; f < facets.size(); ++f) {
    const Eigen::MatrixXd& v = facets[f];
    Eigen::MatrixXd e(local_dim, local_dim);
    for (int k = 0; k < local_dim; ++k) e.col(k) = v.col(k + 1) - v.col(0);
    const Eigen::VectorXd t = e.fullPivLu().solve(y - v.col(0));
    Eigen::VectorXd w(local_dim + 1);
    w(0) = 1.0 - t.sum();
    w.tail(local_dim) = t;
    if (w.minCoeff() >= -tol) return std::make_pair(static_cast<int>(f), w);
  }
  return std::nullopt;
}

bool ElectrodeImage::contains(const Eigen::VectorXd& y) const { return locate(y).has_value(); }

double ElectrodeImage::boundary_distance(const Eigen::VectorXd& y) const {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& r : ridges) {
    double d = 0;
    if (local_dim == 1)
      d = std::abs(y(0) - r(0, 0));
    else
      d = point_segment_distance(y, r.col(0), r.col(1));
    best = std::min(best, d);
  }
  return best;
}

std::optional<Eigen::VectorXd> local_to_surface(const SimplicialMesh& mesh, const ElectrodeLayout& layout, int m,
                                                const Eigen::VectorXd& y) {
  const ElectrodeImage img = electrode_image(mesh, layout, m);
  const auto hit = img.locate(y);
  if (!hit) return std::nullopt;
  const auto& facet = layout.electrodes[static_cast<std::size_t>(m)][static_cast<std::size_t>(hit->first)];
  const Eigen::MatrixXd x = mesh.facet_coordinates(static_cast<std::size_t>(facet));
  return Eigen::VectorXd(x * hit->second);
}

}  // namespace scem
