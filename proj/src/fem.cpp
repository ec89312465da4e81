#include "scem/fem.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Dense>

namespace scem {

namespace {

double interpolate(const SimplicialMesh& mesh, const SurfaceQuadrature& quad, Eigen::Index q, const Eigen::VectorXd& u) {
  const auto& facet = mesh.boundary_facets()[static_cast<std::size_t>(quad.facet[static_cast<std::size_t>(q)])];
  double v = 0.0;
  for (int k = 0; k < mesh.dim(); ++k) v += quad.barycentric(k, q) * u(facet.vertices[k]);
  return v;
}

Eigen::VectorXd cell_gradient(const SimplicialMesh& mesh, Eigen::Index c, const Eigen::MatrixXd& grads,
                              const Eigen::VectorXd& u) {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(mesh.dim());
  for (int k = 0; k <= mesh.dim(); ++k) g += u(mesh.cells()(k, c)) * grads.col(k);
  return g;
}

}  // namespace

CurrentBasis CurrentBasis::create(int electrodes) {
  if (electrodes < 2) throw FemError("at least two electrodes are required");
  const int M = electrodes;
  CurrentBasis cb;
  cb.B.resize(M, M - 1);
  for (int m = 0; m < M - 1; ++m) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(M);
    v(m) = 1.0;
    v(M - 1) = -1.0;
    for (int j = 0; j < m; ++j) v -= cb.B.col(j).dot(v) * cb.B.col(j);
    cb.B.col(m) = v / v.norm();
  }
  cb.Bhat = Eigen::MatrixXd::Zero(M, M - 1);
  for (int m = 0; m < M - 1; ++m) {
    cb.Bhat(m, m) = 1.0;
    cb.Bhat(m + 1, m) = -1.0;
  }
  cb.B_pinv = cb.B.transpose();
  cb.Bhat_pinv = (cb.Bhat.transpose() * cb.Bhat).ldlt().solve(cb.Bhat.transpose());
  return cb;
}

Eigen::SparseMatrix<double> assemble_operator(const Discretization& disc, const CurrentBasis& basis,
                                              const ConductivityPair& tau) {
  const auto& mesh = disc.mesh;
  const auto& quad = disc.quadrature;
  const int dim = mesh.dim();
  const Eigen::Index n = mesh.num_vertices();
  const int M = basis.electrodes();
  const int P = basis.patterns();
  if (tau.sigma.size() != mesh.num_cells()) throw FemError("sigma must have one value per cell");
  if (tau.zeta.size() != quad.size()) throw FemError("zeta must have one value per surface quadrature node");
  if (quad.electrode_count() != M) throw FemError("basis does not match the electrode count");

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(mesh.num_cells() * (dim + 1) * (dim + 1) + quad.size() * dim * (dim + P)));
  for (Eigen::Index c = 0; c < mesh.num_cells(); ++c) {
    const Eigen::MatrixXd g = mesh.barycentric_gradients(c);
    const Eigen::MatrixXd k = (tau.sigma(c) * mesh.cell_volume(c)) * (g.transpose() * g);
    for (int i = 0; i <= dim; ++i)
      for (int j = 0; j <= dim; ++j) trip.emplace_back(mesh.cells()(i, c), mesh.cells()(j, c), k(i, j));
  }

  Eigen::VectorXd D = Eigen::VectorXd::Zero(M);
  for (Eigen::Index q = 0; q < quad.size(); ++q) {
    const double w = quad.weights(q) * tau.zeta(q);
    if (w == 0.0) continue;
    const int m = quad.electrode[static_cast<std::size_t>(q)];
    const auto& facet = mesh.boundary_facets()[static_cast<std::size_t>(quad.facet[static_cast<std::size_t>(q)])];
    D(m) += w;
    for (int i = 0; i < dim; ++i) {
      const double bi = quad.barycentric(i, q);
      for (int j = 0; j < dim; ++j) trip.emplace_back(facet.vertices[i], facet.vertices[j], w * bi * quad.barycentric(j, q));
      // -G B coupling and its transpose.
      for (int p = 0; p < P; ++p) {
        const double v = -w * bi * basis.B(m, p);
        if (v == 0.0) continue;
        trip.emplace_back(facet.vertices[i], n + p, v);
        trip.emplace_back(n + p, facet.vertices[i], v);
      }
    }
  }
  const Eigen::MatrixXd cc = basis.B.transpose() * D.asDiagonal() * basis.B;
  for (int i = 0; i < P; ++i)
    for (int j = 0; j < P; ++j) trip.emplace_back(n + i, n + j, cc(i, j));

  Eigen::SparseMatrix<double> A(n + P, n + P);
  A.setFromTriplets(trip.begin(), trip.end());
  return A;
}

bool is_spd(const Eigen::SparseMatrix<double>& matrix) {
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(matrix);
  if (ldlt.info() != Eigen::Success) return false;
  const Eigen::VectorXd d = ldlt.vectorD();
  const double top = d.cwiseAbs().maxCoeff();
  return top > 0 && d.minCoeff() > kSpdPivotRatio * top;
}

double bform_eval(const Discretization& disc, const ConductivityPair& eta, const ForwardSolution& a,
                  const ForwardSolution& b) {
  const auto& mesh = disc.mesh;
  const auto& quad = disc.quadrature;
  double s = 0.0;
  for (Eigen::Index c = 0; c < mesh.num_cells(); ++c) {
    if (eta.sigma(c) == 0.0) continue;
    const Eigen::MatrixXd g = mesh.barycentric_gradients(c);
    s += eta.sigma(c) * mesh.cell_volume(c) * cell_gradient(mesh, c, g, a.u).dot(cell_gradient(mesh, c, g, b.u));
  }
  for (Eigen::Index q = 0; q < quad.size(); ++q) {
    if (eta.zeta(q) == 0.0) continue;
    const int m = quad.electrode[static_cast<std::size_t>(q)];
    s += quad.weights(q) * eta.zeta(q) * (a.U(m) - interpolate(mesh, quad, q, a.u)) *
         (b.U(m) - interpolate(mesh, quad, q, b.u));
  }
  return s;
}

AssembledSystem::AssembledSystem(std::shared_ptr<const Discretization> disc, const CurrentBasis& basis,
                                 const ConductivityPair& tau)
    : disc_(std::move(disc)), basis_(basis), tau_(tau) {
  matrix_ = assemble_operator(*disc_, basis_, tau_);
  factor_.compute(matrix_);
  if (factor_.info() != Eigen::Success) throw FemError("factorization of the forward system failed");
  const Eigen::VectorXd d = factor_.vectorD();
  const double top = d.cwiseAbs().maxCoeff();
  if (!(top > 0) || !(d.minCoeff() > kSpdPivotRatio * top))
    throw FemError("forward system is not positive definite (min pivot " + std::to_string(d.minCoeff()) + ")");
}

Eigen::MatrixXd AssembledSystem::solve(const Eigen::MatrixXd& rhs) const {
  if (rhs.rows() != size()) throw FemError("right-hand side has the wrong length");
  Eigen::MatrixXd x(rhs.rows(), rhs.cols());
  const Eigen::Index cols = rhs.cols();
#pragma omp parallel for schedule(dynamic)
  for (Eigen::Index j = 0; j < cols; ++j) x.col(j) = factor_.solve(rhs.col(j));
  solves_ += static_cast<std::size_t>(cols);
  return x;
}

Eigen::MatrixXd AssembledSystem::solve_serial(const Eigen::MatrixXd& rhs) const {
  if (rhs.rows() != size()) throw FemError("right-hand side has the wrong length");
  Eigen::MatrixXd x(rhs.rows(), rhs.cols());
  for (Eigen::Index j = 0; j < rhs.cols(); ++j) x.col(j) = factor_.solve(rhs.col(j));
  solves_ += static_cast<std::size_t>(rhs.cols());
  return x;
}

Eigen::MatrixXd AssembledSystem::solve_currents(const Eigen::MatrixXd& currents) const {
  if (currents.rows() != basis_.electrodes()) throw FemError("current vectors must have one entry per electrode");
  const double scale = std::max(1.0, currents.cwiseAbs().maxCoeff());
  if ((currents.colwise().sum().cwiseAbs().array() > 1e-12 * scale).any()) throw FemError("currents must be mean-free");
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(size(), currents.cols());
  rhs.bottomRows(basis_.patterns()) = basis_.B.transpose() * currents;
  return solve(rhs);
}

std::vector<ForwardSolution> AssembledSystem::solve_forward(const std::vector<Eigen::VectorXd>& currents) const {
  Eigen::MatrixXd I(basis_.electrodes(), static_cast<Eigen::Index>(currents.size()));
  for (std::size_t j = 0; j < currents.size(); ++j) I.col(static_cast<Eigen::Index>(j)) = currents[j];
  const Eigen::MatrixXd x = solve_currents(I);
  std::vector<ForwardSolution> out;
  for (Eigen::Index j = 0; j < x.cols(); ++j) out.push_back(unpack(x.col(j)));
  return out;
}

Eigen::MatrixXd AssembledSystem::apply_P(const ConductivityPair& eta, const Eigen::MatrixXd& x) const {
  const Eigen::SparseMatrix<double> Aeta = assemble_operator(*disc_, basis_, eta);
  return solve(-(Aeta * x));
}

Eigen::MatrixXd AssembledSystem::apply_P_serial(const ConductivityPair& eta, const Eigen::MatrixXd& x) const {
  const Eigen::SparseMatrix<double> Aeta = assemble_operator(*disc_, basis_, eta);
  return solve_serial(-(Aeta * x));
}

ForwardSolution AssembledSystem::apply_P(const ConductivityPair& eta, const ForwardSolution& x) const {
  return unpack(apply_P(eta, Eigen::MatrixXd(pack(x))).col(0));
}

Eigen::MatrixXd AssembledSystem::forward_map() const {
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(size(), basis_.patterns());
  rhs.bottomRows(basis_.patterns()).setIdentity();
  return trace(solve(rhs));
}

ForwardSolution AssembledSystem::unpack(const Eigen::VectorXd& x) const {
  if (x.size() != size()) throw FemError("stacked vector has the wrong length");
  return {x.head(num_nodes()), basis_.B * x.tail(basis_.patterns())};
}

Eigen::VectorXd AssembledSystem::pack(const ForwardSolution& s) const {
  Eigen::VectorXd x(size());
  x.head(num_nodes()) = s.u;
  x.tail(basis_.patterns()) = basis_.B_pinv * s.U;
  return x;
}

}  // namespace scem
