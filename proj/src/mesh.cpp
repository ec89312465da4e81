#include "scem/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <string>

#include <Eigen/Dense>

#include "scem/textio.hpp"

namespace scem {

namespace {

using FacetKey = std::array<int, 3>;

FacetKey make_key(std::span<const int> verts) {
  FacetKey key{-1, -1, -1};
  std::copy(verts.begin(), verts.end(), key.begin());
  std::sort(key.begin(), key.begin() + static_cast<std::ptrdiff_t>(verts.size()));
  return key;
}

Eigen::MatrixXd edge_matrix(const Eigen::MatrixXd& verts, const Eigen::MatrixXi& cells, Eigen::Index c) {
  const int dim = static_cast<int>(verts.rows());
  Eigen::MatrixXd e(dim, dim);
  for (int k = 0; k < dim; ++k) e.col(k) = verts.col(cells(k + 1, c)) - verts.col(cells(0, c));
  return e;
}

double factorial(int n) { return n <= 1 ? 1.0 : n * factorial(n - 1); }

}  // namespace

SimplicialMesh::SimplicialMesh(int dim, Eigen::MatrixXd vertices, Eigen::MatrixXi cells)
    : dim_(dim), vertices_(std::move(vertices)), cells_(std::move(cells)) {
  if (dim_ != 2 && dim_ != 3) throw MeshError("mesh dimension must be 2 or 3");
  if (vertices_.rows() != dim_) throw MeshError("vertex coordinates do not match the dimension");
  if (cells_.rows() != dim_ + 1) throw MeshError("cells must have dim+1 vertices");
  if (cells_.cols() == 0) throw MeshError("mesh has no cells");
  const Eigen::Index nv = vertices_.cols();
  const Eigen::Index nc = cells_.cols();
  if (cells_.minCoeff() < 0 || cells_.maxCoeff() >= nv) throw MeshError("cell vertex index out of range");

  // Orientation and volumes.
  double max_extent = (vertices_.rowwise().maxCoeff() - vertices_.rowwise().minCoeff()).maxCoeff();
  const double degenerate_tol = 1e-14 * std::pow(max_extent, dim_);
  volumes_.resize(static_cast<std::size_t>(nc));
  std::set<std::array<int, 4>> seen;
  for (Eigen::Index c = 0; c < nc; ++c) {
    std::array<int, 4> sorted{-1, -1, -1, -1};
    for (int k = 0; k <= dim_; ++k) sorted[k] = cells_(k, c);
    std::sort(sorted.begin(), sorted.begin() + dim_ + 1);
    for (int k = 0; k < dim_; ++k)
      if (sorted[k] == sorted[k + 1]) throw MeshError("cell " + std::to_string(c) + " repeats a vertex");
    if (!seen.insert(sorted).second) throw MeshError("duplicated cell " + std::to_string(c));

    double det = edge_matrix(vertices_, cells_, c).determinant();
    if (std::abs(det) <= degenerate_tol) throw MeshError("degenerate cell " + std::to_string(c));
    if (det < 0) {
      std::swap(cells_(0, c), cells_(1, c));
      det = -det;
    }
    volumes_[static_cast<std::size_t>(c)] = det / factorial(dim_);
  }

  // Face adjacency. A facet shared by more than two cells is non-manifold.
  std::map<FacetKey, std::vector<std::pair<int, int>>> owners;
  for (Eigen::Index c = 0; c < nc; ++c) {
    for (int k = 0; k <= dim_; ++k) {
      std::array<int, 3> verts{};
      int n = 0;
      for (int j = 0; j <= dim_; ++j)
        if (j != k) verts[n++] = cells_(j, c);
      owners[make_key(std::span<const int>(verts.data(), static_cast<std::size_t>(dim_)))].emplace_back(
          static_cast<int>(c), k);
    }
  }
  neighbors_.assign(static_cast<std::size_t>(nc), {-1, -1, -1, -1});
  for (const auto& [key, list] : owners) {
    if (list.size() > 2) throw MeshError("non-manifold facet shared by " + std::to_string(list.size()) + " cells");
    if (list.size() == 2) {
      neighbors_[static_cast<std::size_t>(list[0].first)][list[0].second] = list[1].first;
      neighbors_[static_cast<std::size_t>(list[1].first)][list[1].second] = list[0].first;
      continue;
    }
    const auto [c, k] = list.front();
    BoundaryFacet f;
    f.cell = c;
    f.opposite_local = k;
    int n = 0;
    for (int j = 0; j <= dim_; ++j)
      if (j != k) f.vertices[n++] = cells_(j, c);
    // Orient the facet normal away from the opposite vertex.
    const Eigen::VectorXd opp = vertices_.col(cells_(k, c));
    const Eigen::VectorXd a = vertices_.col(f.vertices[0]);
    Eigen::VectorXd normal(dim_);
    if (dim_ == 2) {
      const Eigen::Vector2d t = vertices_.col(f.vertices[1]) - a;
      normal = Eigen::Vector2d(t.y(), -t.x());
    } else {
      const Eigen::Vector3d t1 = vertices_.col(f.vertices[1]) - a;
      const Eigen::Vector3d t2 = vertices_.col(f.vertices[2]) - a;
      normal = t1.cross(t2);
    }
    if (normal.dot(a - opp) < 0) {
      if (dim_ == 2)
        std::swap(f.vertices[0], f.vertices[1]);
      else
        std::swap(f.vertices[1], f.vertices[2]);
    }
    facets_.push_back(f);
  }
  if (facets_.empty()) throw MeshError("mesh has no boundary");

  // Boundary must be closed: every boundary ridge is shared by exactly two facets.
  std::map<FacetKey, int> ridges;
  for (const auto& f : facets_) {
    for (int k = 0; k < dim_; ++k) {
      std::array<int, 3> verts{};
      int n = 0;
      for (int j = 0; j < dim_; ++j)
        if (j != k) verts[n++] = f.vertices[j];
      ++ridges[make_key(std::span<const int>(verts.data(), static_cast<std::size_t>(dim_ - 1)))];
    }
  }
  for (const auto& [key, count] : ridges)
    if (count != 2) throw MeshError("non-manifold boundary");
}

Eigen::VectorXd SimplicialMesh::cell_centroid(Eigen::Index cell) const {
  Eigen::VectorXd c = Eigen::VectorXd::Zero(dim_);
  for (int k = 0; k <= dim_; ++k) c += vertices_.col(cells_(k, cell));
  return c / (dim_ + 1);
}

Eigen::MatrixXd SimplicialMesh::barycentric_gradients(Eigen::Index cell) const {
  const Eigen::MatrixXd e = edge_matrix(vertices_, cells_, cell);
  const Eigen::MatrixXd inv = e.inverse();  // rows are gradients of lambda_1..lambda_d
  Eigen::MatrixXd g(dim_, dim_ + 1);
  g.rightCols(dim_) = inv.transpose();
  g.col(0) = -g.rightCols(dim_).rowwise().sum();
  return g;
}

Eigen::MatrixXd SimplicialMesh::facet_coordinates(std::size_t facet) const {
  Eigen::MatrixXd x(dim_, dim_);
  for (int k = 0; k < dim_; ++k) x.col(k) = vertices_.col(facets_[facet].vertices[k]);
  return x;
}

double SimplicialMesh::facet_measure(std::size_t facet) const {
  const Eigen::MatrixXd x = facet_coordinates(facet);
  if (dim_ == 2) return (x.col(1) - x.col(0)).norm();
  const Eigen::Vector3d t1 = x.col(1) - x.col(0);
  const Eigen::Vector3d t2 = x.col(2) - x.col(0);
  return 0.5 * t1.cross(t2).norm();
}

Eigen::VectorXd SimplicialMesh::facet_centroid(std::size_t facet) const {
  return facet_coordinates(facet).rowwise().mean();
}

Eigen::VectorXd SimplicialMesh::facet_normal(std::size_t facet) const {
  const Eigen::MatrixXd x = facet_coordinates(facet);
  if (dim_ == 2) {
    const Eigen::Vector2d t = x.col(1) - x.col(0);
    return Eigen::Vector2d(t.y(), -t.x()).normalized();
  }
  const Eigen::Vector3d t1 = x.col(1) - x.col(0);
  const Eigen::Vector3d t2 = x.col(2) - x.col(0);
  return t1.cross(t2).normalized();
}

namespace {

std::string next_content_line(std::istream& in) {
  std::string line;
  while (std::getline(in, line)) {
    const auto pos = line.find_first_not_of(" \t\r");
    if (pos != std::string::npos && line[pos] != '#') return line;
  }
  throw ParseError("unexpected end of mesh file");
}

long parse_header(std::istream& in, const std::string& keyword) {
  std::istringstream ls(next_content_line(in));
  std::string word;
  long n = -1;
  if (!(ls >> word >> n) || word != keyword || n < 0)
    throw ParseError("expected '" + keyword + " <count>' header");
  return n;
}

}  // namespace

SimplicialMesh read_mesh(std::istream& in) {
  const long dim = parse_header(in, "dim");
  if (dim != 2 && dim != 3) throw ParseError("dim must be 2 or 3");
  const long nv = parse_header(in, "vertices");
  Eigen::MatrixXd verts(dim, nv);
  for (long i = 0; i < nv; ++i) {
    std::istringstream ls(next_content_line(in));
    std::string tok;
    long k = 0;
    while (ls >> tok) {
      if (k == dim) throw ParseError("too many coordinates on vertex line " + std::to_string(i));
      verts(k++, i) = parse_double(tok);
    }
    if (k != dim) throw ParseError("too few coordinates on vertex line " + std::to_string(i));
  }
  const long nc = parse_header(in, "cells");
  Eigen::MatrixXi cells(dim + 1, nc);
  for (long i = 0; i < nc; ++i) {
    std::istringstream ls(next_content_line(in));
    long k = 0;
    std::string tok;
    while (ls >> tok) {
      if (k == dim + 1) throw ParseError("too many indices on cell line " + std::to_string(i));
      std::size_t used = 0;
      long idx = 0;
      try {
        idx = std::stol(tok, &used);
      } catch (const std::exception&) {
        throw ParseError("bad index '" + tok + "'");
      }
      if (used != tok.size()) throw ParseError("bad index '" + tok + "'");
      cells(k++, i) = static_cast<int>(idx);
    }
    if (k != dim + 1) throw ParseError("too few indices on cell line " + std::to_string(i));
  }
  return SimplicialMesh(static_cast<int>(dim), std::move(verts), std::move(cells));
}

SimplicialMesh load_mesh(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open mesh file " + path.string());
  return read_mesh(in);
}

void write_mesh(std::ostream& out, const SimplicialMesh& mesh) {
  out << "dim " << mesh.dim() << '\n';
  out << "vertices " << mesh.num_vertices() << '\n';
  write_matrix(out, mesh.vertices().transpose());
  out << "cells " << mesh.num_cells() << '\n';
  for (Eigen::Index c = 0; c < mesh.num_cells(); ++c) {
    for (int k = 0; k <= mesh.dim(); ++k) out << (k ? " " : "") << mesh.cells()(k, c);
    out << '\n';
  }
}

void save_mesh(const std::filesystem::path& path, const SimplicialMesh& mesh) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write mesh file " + path.string());
  write_mesh(out, mesh);
}

namespace {

// Center, 8 vertices on r = 1/2, 16 on the unit circle.
SimplicialMesh coarse_disk() {
  constexpr int inner = 8;
  constexpr int outer = 16;
  Eigen::MatrixXd v(2, 1 + inner + outer);
  v.col(0).setZero();
  for (int i = 0; i < inner; ++i) {
    const double a = 2.0 * std::numbers::pi * i / inner;
    v.col(1 + i) << 0.5 * std::cos(a), 0.5 * std::sin(a);
  }
  for (int i = 0; i < outer; ++i) {
    const double a = 2.0 * std::numbers::pi * i / outer;
    v.col(1 + inner + i) << std::cos(a), std::sin(a);
  }
  std::vector<std::array<int, 3>> tris;
  for (int i = 0; i < inner; ++i) tris.push_back({0, 1 + i, 1 + (i + 1) % inner});
  for (int i = 0; i < inner; ++i) {
    const int a = 1 + i;
    const int b = 1 + (i + 1) % inner;
    const int o0 = 1 + inner + 2 * i;
    const int o1 = 1 + inner + 2 * i + 1;
    const int o2 = 1 + inner + (2 * i + 2) % outer;
    tris.push_back({a, o0, o1});
    tris.push_back({a, o1, b});
    tris.push_back({b, o1, o2});
  }
  Eigen::MatrixXi c(3, static_cast<Eigen::Index>(tris.size()));
  for (std::size_t t = 0; t < tris.size(); ++t)
    c.col(static_cast<Eigen::Index>(t)) << tris[t][0], tris[t][1], tris[t][2];
  return SimplicialMesh(2, std::move(v), std::move(c));
}

SimplicialMesh refine_disk(const SimplicialMesh& mesh) {
  std::set<std::pair<int, int>> boundary_edges;
  for (const auto& f : mesh.boundary_facets())
    boundary_edges.insert(std::minmax(f.vertices[0], f.vertices[1]));

  std::vector<Eigen::Vector2d> verts;
  for (Eigen::Index i = 0; i < mesh.num_vertices(); ++i) verts.emplace_back(mesh.vertices().col(i));
  std::map<std::pair<int, int>, int> midpoint;
  auto mid = [&](int a, int b) {
    const auto key = std::minmax(a, b);
    if (auto it = midpoint.find(key); it != midpoint.end()) return it->second;
    Eigen::Vector2d p = 0.5 * (verts[static_cast<std::size_t>(a)] + verts[static_cast<std::size_t>(b)]);
    if (boundary_edges.count(key)) p.normalize();
    verts.push_back(p);
    const int id = static_cast<int>(verts.size()) - 1;
    midpoint.emplace(key, id);
    return id;
  };
  const Eigen::Index nc = mesh.num_cells();
  Eigen::MatrixXi cells(3, 4 * nc);
  for (Eigen::Index c = 0; c < nc; ++c) {
    const int a = mesh.cells()(0, c), b = mesh.cells()(1, c), d = mesh.cells()(2, c);
    const int ab = mid(a, b), bd = mid(b, d), da = mid(d, a);
    cells.col(4 * c) << a, ab, da;
    cells.col(4 * c + 1) << ab, b, bd;
    cells.col(4 * c + 2) << da, bd, d;
    cells.col(4 * c + 3) << ab, bd, da;
  }
  Eigen::MatrixXd v(2, static_cast<Eigen::Index>(verts.size()));
  for (std::size_t i = 0; i < verts.size(); ++i) v.col(static_cast<Eigen::Index>(i)) = verts[i];
  return SimplicialMesh(2, std::move(v), std::move(cells));
}

}  // namespace

SimplicialMesh generate_disk_mesh(int refinement_level) {
  if (refinement_level < 0 || refinement_level > kMaxDiskRefinement)
    throw std::invalid_argument("disk refinement level must be in [0, " + std::to_string(kMaxDiskRefinement) + "]");
  SimplicialMesh mesh = coarse_disk();
  for (int l = 0; l < refinement_level; ++l) mesh = refine_disk(mesh);
  return mesh;
}

}  // namespace scem
