#pragma once

#include <array>
#include <functional>
#include <memory>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "scem/calculus.hpp"
#include "scem/fem.hpp"
#include "scem/model.hpp"

namespace scem {

class InversionError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// The restricted Jacobian is not injective.
class AssumptionViolated : public InversionError {
public:
  using InversionError::InversionError;
};

struct PriorSettings {
  double gamma_kappa = 0.1;
  double lambda_kappa = 1.0;
  double gamma_rho = 0.1;
  double gamma_xi = 0.02;
};

/// Block-diagonal Gaussian prior: squared-exponential kernel on the cluster
/// centers for kappa, diagonal for the contact strengths and locations.
struct PriorModel {
  ParamLayout layout;
  PriorSettings settings;
  Eigen::MatrixXd covariance;
  Eigen::MatrixXd factor;  ///< lower Cholesky factor of `covariance`
  int jitter_steps = 0;
};

PriorModel build_prior(const ParamLayout& layout, const Partition& partition, const PriorSettings& settings);

inline constexpr int kMaxJitterSteps = 3;

struct NoiseLevels {
  double delta1 = 0.0;
  double delta2 = 0.0;
};

/// Measurement noise added to the physical potentials (one column per
/// pattern e_m - e_{m+1}) and its image on vec of the I-basis data.
struct NoiseModel {
  NoiseLevels levels;
  Eigen::MatrixXd reference_potentials;  ///< M x (M-1), noiseless U^(m)(0)
  Eigen::MatrixXd pattern_variances;     ///< M x (M-1), diagonal of Gamma^(m) per column
  Eigen::MatrixXd transform;             ///< vec(Theta_hat) -> vec(B^+ Theta_hat Bhat^+ B)
  Eigen::MatrixXd covariance;            ///< Gamma_noise on vec(Theta)
  Eigen::MatrixXd whitener;              ///< S with S^T S = pseudo-inverse of Gamma_noise
  Eigen::Index rank = 0;
};

inline constexpr double kNoiseRankCutoff = 1e-12;

/// U^(m) = B Lambda B^+ Bhat e_m as columns.
Eigen::MatrixXd physical_potentials(const Eigen::MatrixXd& lambda, const CurrentBasis& basis);
/// B^+ V Bhat^+ B for physical potentials V (one column per pattern).
Eigen::MatrixXd data_from_potentials(const Eigen::MatrixXd& potentials, const CurrentBasis& basis);

NoiseModel build_noise_cov(const NoiseLevels& levels, const Eigen::MatrixXd& lambda0, const CurrentBasis& basis);

/// Data operand -> parameter increment.
using InverseOperator = std::function<ParamVector(const Eigen::MatrixXd&)>;
/// Builds the inverse belonging to a Jacobian (re-based per sequential step).
using InverseFactory = std::function<InverseOperator(const Eigen::MatrixXd& jacobian)>;

/// Minimizer of |vec(J eta - Psi)|^2_{Gamma_noise^-1} + |eta|^2_{Gamma_pr^-1}.
/// Solved in prior-whitened coordinates eta = L z:
///   (L^T J^T W J L + I) z = L^T J^T W vec(Psi).
class TikhonovInverse {
public:
  TikhonovInverse(const Eigen::MatrixXd& jacobian, const PriorModel& prior, const NoiseModel& noise);

  ParamVector operator()(const Eigen::MatrixXd& data) const;
  /// Relative norm of the whitened gradient of the functional at eta.
  double optimality_residual(const Eigen::MatrixXd& data, const ParamVector& eta) const;
  /// N x (M-1)^2 matrix applied to vec(data).
  const Eigen::MatrixXd& operator_matrix() const { return apply_; }

private:
  ParamLayout layout_;
  Eigen::MatrixXd factor_;
  Eigen::MatrixXd whitened_jacobian_;  // S J L
  Eigen::MatrixXd whitener_;
  Eigen::MatrixXd apply_;
};

InverseFactory tikhonov_factory(const PriorModel& prior, const NoiseModel& noise);

/// Moore-Penrose inverse of F = J W restricted to span(W); W is N x k.
class PseudoInverse {
public:
  /// Throws AssumptionViolated if F lacks full column rank.
  PseudoInverse(const Eigen::MatrixXd& jacobian, const Eigen::MatrixXd& subspace, const ParamLayout& layout);

  ParamVector operator()(const Eigen::MatrixXd& data) const;
  double condition_number() const { return condition_; }
  const Eigen::MatrixXd& subspace() const { return subspace_; }

private:
  ParamLayout layout_;
  Eigen::MatrixXd subspace_;
  Eigen::MatrixXd apply_;  // k x (M-1)^2
  double condition_ = 0.0;
};

inline constexpr double kRankTolerance = 1e-10;

InverseFactory pseudo_inverse_factory(const Eigen::MatrixXd& subspace, const ParamLayout& layout);

struct ReversionResult {
  int order = 0;
  std::array<ParamVector, 3> eta;
  std::array<ParamVector, 3> upsilon;  ///< partial sums
  std::array<double, 3> eta_norms{0.0, 0.0, 0.0};
};

/// Series reversion about the stack's base point, orders 1..3.
ReversionResult revert(const DerivativeStack& stack, const InverseOperator& inverse, const Eigen::MatrixXd& data,
                       int order);

struct SequentialResult {
  std::vector<ParamVector> iterates;  ///< upsilon_1 .. upsilon_steps
  std::vector<char> clamped;          ///< per step: a location was pulled back
};

/// upsilon_{j+1} = upsilon_j + M(upsilon_j)(data - Lambda(upsilon_j)), starting at 0.
/// `initial` optionally supplies the stack and inverse at the origin.
SequentialResult sequential_linearize(const std::shared_ptr<const Parametrization>& param, const CurrentBasis& basis,
                                      const InverseFactory& factory, const Eigen::MatrixXd& data, int steps,
                                      const DerivativeStack* initial_stack = nullptr,
                                      const InverseOperator* initial_inverse = nullptr);

/// Orthogonal projections onto mean-free currents supported on the injecting
/// and the measuring electrodes, in the I-basis.
struct ElectrodeProjection {
  Eigen::MatrixXd in;
  Eigen::MatrixXd out;

  static ElectrodeProjection create(const CurrentBasis& basis, const std::vector<int>& in_electrodes,
                                    const std::vector<int>& out_electrodes);
  Eigen::MatrixXd apply(const Eigen::MatrixXd& m) const { return out * m * in; }
  Eigen::MatrixXd apply_jacobian(const Eigen::MatrixXd& jacobian) const;
};

/// Mean-free projector in R^M onto vectors supported on `electrodes`.
Eigen::MatrixXd support_projector(int electrodes_total, const std::vector<int>& electrodes);

/// Projects the data before handing it to `inverse`.
InverseOperator with_projection(InverseOperator inverse, ElectrodeProjection projection);

}  // namespace scem
