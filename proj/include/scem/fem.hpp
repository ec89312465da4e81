#pragma once

#include <atomic>
#include <memory>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "scem/model.hpp"

namespace scem {

class FemError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Orthonormal basis B of the mean-free currents (Gram-Schmidt of e_m - e_M)
/// and the physical patterns Bhat = [e_m - e_{m+1}], with pseudo-inverses.
struct CurrentBasis {
  Eigen::MatrixXd B;
  Eigen::MatrixXd Bhat;
  Eigen::MatrixXd B_pinv;
  Eigen::MatrixXd Bhat_pinv;

  static CurrentBasis create(int electrodes);
  int electrodes() const { return static_cast<int>(B.rows()); }
  int patterns() const { return static_cast<int>(B.cols()); }
};

/// Nodal potential u and mean-free electrode potentials U.
struct ForwardSolution {
  Eigen::VectorXd u;
  Eigen::VectorXd U;
};

/// Matrix of the bilinear form B_tau in the unknowns [u; c], U = B c:
///   [ K_sigma + C_zeta    -G B    ]
///   [ -B^T G^T          B^T D B   ]
/// Assembly is linear in tau, so perturbations assemble the same way.
Eigen::SparseMatrix<double> assemble_operator(const Discretization& disc, const CurrentBasis& basis,
                                              const ConductivityPair& tau);

/// Positive pivots in a sparse LDL^T factorization, relative to the largest.
bool is_spd(const Eigen::SparseMatrix<double>& matrix);

inline constexpr double kSpdPivotRatio = 1e-13;

/// B_eta((u1,U1),(u2,U2)) evaluated directly from its integrals.
double bform_eval(const Discretization& disc, const ConductivityPair& eta, const ForwardSolution& a,
                  const ForwardSolution& b);

/// Factorized system for one tau. Solution blocks are stored column-wise as
/// stacked vectors [u; c].
class AssembledSystem {
public:
  /// Throws FemError if the matrix is not positive definite.
  AssembledSystem(std::shared_ptr<const Discretization> disc, const CurrentBasis& basis, const ConductivityPair& tau);
  AssembledSystem(const AssembledSystem&) = delete;
  AssembledSystem& operator=(const AssembledSystem&) = delete;

  const Discretization& discretization() const { return *disc_; }
  const CurrentBasis& basis() const { return basis_; }
  const ConductivityPair& tau() const { return tau_; }
  const Eigen::SparseMatrix<double>& matrix() const { return matrix_; }
  Eigen::Index num_nodes() const { return disc_->mesh.num_vertices(); }
  Eigen::Index size() const { return matrix_.rows(); }

  /// A^{-1} rhs, columns solved concurrently.
  Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const;
  Eigen::MatrixXd solve_serial(const Eigen::MatrixXd& rhs) const;

  /// Stacked solutions for the given mean-free currents (one per column).
  Eigen::MatrixXd solve_currents(const Eigen::MatrixXd& currents) const;
  std::vector<ForwardSolution> solve_forward(const std::vector<Eigen::VectorXd>& currents) const;

  /// P_tau(eta) applied to each column: solves A w = -A_eta x.
  Eigen::MatrixXd apply_P(const ConductivityPair& eta, const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd apply_P_serial(const ConductivityPair& eta, const Eigen::MatrixXd& x) const;
  ForwardSolution apply_P(const ConductivityPair& eta, const ForwardSolution& x) const;

  /// Lambda in the I-basis: column i holds B^T U for the current B e_i.
  Eigen::MatrixXd forward_map() const;
  /// Electrode block (the c-coordinates) of stacked solutions.
  Eigen::MatrixXd trace(const Eigen::MatrixXd& x) const { return x.bottomRows(basis_.patterns()); }

  ForwardSolution unpack(const Eigen::VectorXd& x) const;
  Eigen::VectorXd pack(const ForwardSolution& s) const;

  std::size_t solve_count() const { return solves_.load(); }
  std::size_t factorization_count() const { return 1; }

private:
  std::shared_ptr<const Discretization> disc_;
  CurrentBasis basis_;
  ConductivityPair tau_;
  Eigen::SparseMatrix<double> matrix_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> factor_;
  mutable std::atomic<std::size_t> solves_{0};
};

}  // namespace scem
