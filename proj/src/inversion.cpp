#include "scem/inversion.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Dense>

namespace scem {

PriorModel build_prior(const ParamLayout& layout, const Partition& partition, const PriorSettings& s) {
  if (!(s.gamma_kappa > 0) || !(s.lambda_kappa > 0) || !(s.gamma_rho > 0) ||
      (layout.location_dim > 0 && !(s.gamma_xi > 0)))
    throw InversionError("prior standard deviations and correlation length must be positive");
  if (partition.count() != layout.clusters) throw InversionError("partition does not match the parameter layout");
  PriorModel prior;
  prior.layout = layout;
  prior.settings = s;
  const Eigen::Index N = layout.size();
  prior.covariance = Eigen::MatrixXd::Zero(N, N);
  const double gk2 = s.gamma_kappa * s.gamma_kappa;
  const double two_l2 = 2.0 * s.lambda_kappa * s.lambda_kappa;
  for (int i = 0; i < layout.clusters; ++i)
    for (int j = 0; j < layout.clusters; ++j)
      prior.covariance(i, j) = gk2 * std::exp(-(partition.centers.col(i) - partition.centers.col(j)).squaredNorm() / two_l2);
  for (int m = 0; m < layout.electrodes; ++m) {
    const Eigen::Index r = layout.strength_offset() + m;
    prior.covariance(r, r) = s.gamma_rho * s.gamma_rho;
  }
  for (Eigen::Index r = layout.location_offset(); r < N; ++r) prior.covariance(r, r) = s.gamma_xi * s.gamma_xi;

  const double jitter = 1e-12 * prior.covariance.trace() / static_cast<double>(N);
  Eigen::MatrixXd work = prior.covariance;
  for (int step = 0;; ++step) {
    Eigen::LLT<Eigen::MatrixXd> llt(work);
    if (llt.info() == Eigen::Success) {
      prior.factor = llt.matrixL();
      prior.covariance = work;
      prior.jitter_steps = step;
      return prior;
    }
    if (step == kMaxJitterSteps) break;
    work.diagonal().array() += jitter;
  }
  throw InversionError("prior covariance is not positive definite after jitter");
}

Eigen::MatrixXd physical_potentials(const Eigen::MatrixXd& lambda, const CurrentBasis& basis) {
  return basis.B * lambda * basis.B_pinv * basis.Bhat;
}

Eigen::MatrixXd data_from_potentials(const Eigen::MatrixXd& potentials, const CurrentBasis& basis) {
  return basis.B_pinv * potentials * basis.Bhat_pinv * basis.B;
}

NoiseModel build_noise_cov(const NoiseLevels& levels, const Eigen::MatrixXd& lambda0, const CurrentBasis& basis) {
  if (levels.delta1 < 0 || levels.delta2 < 0) throw InversionError("noise levels must be nonnegative");
  const int M = basis.electrodes();
  const int P = basis.patterns();
  NoiseModel nm;
  nm.levels = levels;
  nm.reference_potentials = physical_potentials(lambda0, basis);
  const double umax = nm.reference_potentials.cwiseAbs().maxCoeff();
  nm.pattern_variances = ((levels.delta1 * umax) * (levels.delta1 * umax) +
                          (levels.delta2 * nm.reference_potentials.array().abs()).square())
                             .matrix();

  // vec(B^+ Pi Theta C) = (C^T kron B^+) vec(Theta); the mean removal Pi is
  // absorbed because B^+ annihilates constants.
  const Eigen::MatrixXd C = basis.Bhat_pinv * basis.B;
  nm.transform.resize(P * P, M * P);
  for (int i = 0; i < P; ++i)
    for (int r = 0; r < P; ++r)
      for (int m = 0; m < P; ++m)
        for (int j = 0; j < M; ++j) nm.transform(i * P + r, m * M + j) = C(m, i) * basis.B_pinv(r, j);

  const Eigen::VectorXd var = Eigen::Map<const Eigen::VectorXd>(nm.pattern_variances.data(), M * P);
  nm.covariance = nm.transform * var.asDiagonal() * nm.transform.transpose();
  nm.covariance = 0.5 * (nm.covariance + nm.covariance.transpose());

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(nm.covariance);
  const Eigen::VectorXd& ev = eig.eigenvalues();
  const double top = ev.size() ? ev.maxCoeff() : 0.0;
  std::vector<Eigen::Index> keep;
  if (top > 0)
    for (Eigen::Index k = 0; k < ev.size(); ++k)
      if (ev(k) > kNoiseRankCutoff * top) keep.push_back(k);
  nm.rank = static_cast<Eigen::Index>(keep.size());
  nm.whitener.resize(nm.rank, P * P);
  for (Eigen::Index r = 0; r < nm.rank; ++r) {
    const Eigen::Index k = keep[static_cast<std::size_t>(r)];
    nm.whitener.row(r) = eig.eigenvectors().col(k).transpose() / std::sqrt(ev(k));
  }
  return nm;
}

TikhonovInverse::TikhonovInverse(const Eigen::MatrixXd& jacobian, const PriorModel& prior, const NoiseModel& noise)
    : layout_(prior.layout), factor_(prior.factor), whitener_(noise.whitener) {
  if (jacobian.cols() != layout_.size()) throw InversionError("Jacobian width does not match the prior");
  if (jacobian.rows() != noise.covariance.rows()) throw InversionError("Jacobian height does not match the noise model");
  if (noise.rank == 0) throw InversionError("noise covariance vanishes");
  whitened_jacobian_ = whitener_ * jacobian * factor_;
  Eigen::MatrixXd H = whitened_jacobian_.transpose() * whitened_jacobian_;
  H.diagonal().array() += 1.0;
  Eigen::LLT<Eigen::MatrixXd> llt(H);
  if (llt.info() != Eigen::Success) throw InversionError("normal equations could not be factorized");
  apply_ = factor_ * llt.solve(whitened_jacobian_.transpose() * whitener_);
}

ParamVector TikhonovInverse::operator()(const Eigen::MatrixXd& data) const {
  if (data.size() != apply_.cols()) throw InversionError("data matrix has the wrong size");
  return ParamVector(layout_, apply_ * vec(data));
}

double TikhonovInverse::optimality_residual(const Eigen::MatrixXd& data, const ParamVector& eta) const {
  const Eigen::VectorXd z = factor_.triangularView<Eigen::Lower>().solve(eta.values());
  const Eigen::VectorXd sd = whitener_ * vec(data);
  const Eigen::VectorXd grad = whitened_jacobian_.transpose() * (whitened_jacobian_ * z - sd) + z;
  const double scale = (whitened_jacobian_.transpose() * sd).norm();
  return scale > 0 ? grad.norm() / scale : grad.norm();
}

InverseFactory tikhonov_factory(const PriorModel& prior, const NoiseModel& noise) {
  return [prior, noise](const Eigen::MatrixXd& J) -> InverseOperator {
    auto inv = std::make_shared<TikhonovInverse>(J, prior, noise);
    return [inv](const Eigen::MatrixXd& data) { return (*inv)(data); };
  };
}

PseudoInverse::PseudoInverse(const Eigen::MatrixXd& jacobian, const Eigen::MatrixXd& subspace,
                             const ParamLayout& layout)
    : layout_(layout), subspace_(subspace) {
  if (subspace.rows() != layout.size() || jacobian.cols() != layout.size())
    throw InversionError("subspace does not match the parameter layout");
  if (subspace.cols() == 0) throw InversionError("empty subspace");
  const Eigen::MatrixXd F = jacobian * subspace;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(F, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sv = svd.singularValues();
  const double smax = sv(0);
  const double smin = sv(sv.size() - 1);
  if (F.rows() < F.cols() || !(smin > kRankTolerance * smax))
    throw AssumptionViolated("restricted Jacobian is not injective (singular values " + std::to_string(smax) + " .. " +
                             std::to_string(smin) + ")");
  condition_ = smax / smin;
  apply_ = svd.matrixV() * sv.cwiseInverse().asDiagonal() * svd.matrixU().transpose();
}

ParamVector PseudoInverse::operator()(const Eigen::MatrixXd& data) const {
  if (data.size() != apply_.cols()) throw InversionError("data matrix has the wrong size");
  return ParamVector(layout_, subspace_ * (apply_ * vec(data)));
}

InverseFactory pseudo_inverse_factory(const Eigen::MatrixXd& subspace, const ParamLayout& layout) {
  return [subspace, layout](const Eigen::MatrixXd& J) -> InverseOperator {
    auto inv = std::make_shared<PseudoInverse>(J, subspace, layout);
    return [inv](const Eigen::MatrixXd& data) { return (*inv)(data); };
  };
}

ReversionResult revert(const DerivativeStack& stack, const InverseOperator& inverse, const Eigen::MatrixXd& data,
                       int order) {
  if (order < 1 || order > 3) throw InversionError("reversion order must be 1, 2 or 3");
  const ParamLayout& layout = stack.base().layout();
  ReversionResult r;
  r.order = order;
  for (auto& e : r.eta) e = ParamVector(layout);
  r.eta[0] = inverse(data - stack.lambda());
  if (order >= 2) r.eta[1] = -0.5 * inverse(dLambda2(stack, r.eta[0]));
  if (order >= 3) r.eta[2] = -1.0 * inverse(dLambda3(stack, r.eta[0]) / 6.0 + mixed_dLambda2(stack, r.eta[0], r.eta[1]));
  r.upsilon[0] = r.eta[0];
  r.upsilon[1] = r.upsilon[0] + r.eta[1];
  r.upsilon[2] = r.upsilon[1] + r.eta[2];
  for (int k = 0; k < 3; ++k) r.eta_norms[static_cast<std::size_t>(k)] = r.eta[static_cast<std::size_t>(k)].values().norm();
  return r;
}

SequentialResult sequential_linearize(const std::shared_ptr<const Parametrization>& param, const CurrentBasis& basis,
                                      const InverseFactory& factory, const Eigen::MatrixXd& data, int steps,
                                      const DerivativeStack* initial_stack, const InverseOperator* initial_inverse) {
  if (steps < 1) throw InversionError("at least one linearization step is required");
  SequentialResult out;
  ParamVector current = param->zero();
  for (int j = 0; j < steps; ++j) {
    ParamVector step;
    if (j == 0 && initial_stack && initial_inverse) {
      step = (*initial_inverse)(data - initial_stack->lambda());
    } else {
      const DerivativeStack stack(param, basis, current);
      const InverseOperator inverse = factory(jacobian(stack));
      step = inverse(data - stack.lambda());
    }
    bool clamped = false;
    current = param->clamp(current + step, &clamped);
    out.iterates.push_back(current);
    out.clamped.push_back(clamped ? 1 : 0);
  }
  return out;
}

Eigen::MatrixXd support_projector(int electrodes_total, const std::vector<int>& electrodes) {
  if (electrodes.empty()) throw InversionError("electrode set must be nonempty");
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(electrodes_total, electrodes_total);
  const double w = 1.0 / static_cast<double>(electrodes.size());
  for (int i : electrodes) {
    if (i < 0 || i >= electrodes_total) throw InversionError("electrode index out of range");
    for (int j : electrodes) P(i, j) = (i == j ? 1.0 : 0.0) - w;
  }
  return P;
}

ElectrodeProjection ElectrodeProjection::create(const CurrentBasis& basis, const std::vector<int>& in_electrodes,
                                                const std::vector<int>& out_electrodes) {
  ElectrodeProjection p;
  p.in = basis.B.transpose() * support_projector(basis.electrodes(), in_electrodes) * basis.B;
  p.out = basis.B.transpose() * support_projector(basis.electrodes(), out_electrodes) * basis.B;
  return p;
}

Eigen::MatrixXd ElectrodeProjection::apply_jacobian(const Eigen::MatrixXd& jacobian) const {
  const Eigen::Index P = in.rows();
  Eigen::MatrixXd out_j(jacobian.rows(), jacobian.cols());
  for (Eigen::Index c = 0; c < jacobian.cols(); ++c) out_j.col(c) = vec(apply(unvec(jacobian.col(c), P)));
  return out_j;
}

InverseOperator with_projection(InverseOperator inverse, ElectrodeProjection projection) {
  return [inverse = std::move(inverse), projection = std::move(projection)](const Eigen::MatrixXd& data) {
    return inverse(projection.apply(data));
  };
}

}  // namespace scem
