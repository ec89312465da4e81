#include <cmath>

#include <Eigen/Dense>

#include "../support.hpp"
#include "doctest.h"
#include "scem/inversion.hpp"

using namespace scem;
using scem::testing::loglog_slope;
using scem::testing::random_param;
using scem::testing::small_disk;

namespace {

struct Setup {
  explicit Setup(int electrodes = 8, int clusters = 20)
      : model(make_forward_model(small_disk(2, clusters, electrodes), ModelConfig{}, ContactModel::smooth)),
        lambda0(model.lambda(model.param->zero())) {}

  const ParamLayout& layout() const { return model.param->layout(); }
  const Partition& partition() const { return model.param->discretization().partition; }

  ForwardModel model;
  Eigen::MatrixXd lambda0;
};

Eigen::MatrixXd empirical_covariance(const std::vector<Eigen::VectorXd>& xs) {
  const Eigen::Index d = xs.front().size();
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
  for (const auto& x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(d, d);
  for (const auto& x : xs) c.selfadjointView<Eigen::Lower>().rankUpdate(x - mean);
  c = c.selfadjointView<Eigen::Lower>();
  return c / static_cast<double>(xs.size() - 1);
}

Eigen::MatrixXd orthonormal_columns(Eigen::Index rows, Eigen::Index cols, PhiloxStream& rng) {
  Eigen::MatrixXd g(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) g.col(j) = rng.normal_vector(rows);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  return qr.householderQ() * Eigen::MatrixXd::Identity(rows, cols);
}

}  // namespace

TEST_CASE("prior covariance blocks") {
  const Setup s;
  const PriorSettings ps{0.3, 0.5, 0.2, 0.04};
  const PriorModel prior = build_prior(s.layout(), s.partition(), ps);
  const ParamLayout& l = s.layout();
  REQUIRE(prior.covariance.rows() == l.size());
  CHECK(prior.jitter_steps == 0);
  for (int i = 0; i < l.clusters; ++i) CHECK(prior.covariance(i, i) == doctest::Approx(0.09).epsilon(1e-12));
  for (int m = 0; m < l.electrodes; ++m) {
    const Eigen::Index r = l.strength_offset() + m;
    CHECK(prior.covariance(r, r) == doctest::Approx(0.04).epsilon(1e-12));
    CHECK(prior.covariance.row(r).norm() == doctest::Approx(0.04).epsilon(1e-12));
  }
  for (Eigen::Index r = l.location_offset(); r < l.size(); ++r)
    CHECK(prior.covariance(r, r) == doctest::Approx(0.0016).epsilon(1e-12));
  const Eigen::Vector2d d = s.partition().centers.col(0) - s.partition().centers.col(1);
  CHECK(prior.covariance(0, 1) == doctest::Approx(0.09 * std::exp(-d.squaredNorm() / 0.5)).epsilon(1e-12));
  CHECK((prior.factor * prior.factor.transpose() - prior.covariance).norm() < 1e-14);
}

TEST_CASE("short correlation length decouples the clusters") {
  const Setup s;
  double dmin = INFINITY;
  const auto& c = s.partition().centers;
  for (Eigen::Index i = 0; i < c.cols(); ++i)
    for (Eigen::Index j = i + 1; j < c.cols(); ++j) dmin = std::min(dmin, (c.col(i) - c.col(j)).norm());
  const PriorModel prior = build_prior(s.layout(), s.partition(), {0.1, 1e-3 * dmin, 0.1, 0.02});
  Eigen::MatrixXd off = prior.covariance;
  off.diagonal().setZero();
  CHECK(off.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("table prior factorizes") {
  const auto disc = make_disk_discretization(ExperimentCase{}.coarse);
  const Parametrization param(disc, ModelConfig{}, ContactModel::smooth);
  const PriorModel prior = build_prior(param.layout(), disc->partition, table_case("C1").reconstruction.prior);
  CHECK(prior.jitter_steps <= kMaxJitterSteps);
  CHECK((prior.factor * prior.factor.transpose() - prior.covariance).norm() < 1e-12 * prior.covariance.norm());
}

TEST_CASE("prior rejects bad settings") {
  const Setup s;
  CHECK_THROWS_AS(build_prior(s.layout(), s.partition(), {0.0, 1.0, 0.1, 0.02}), InversionError);
  CHECK_THROWS_AS(build_prior(s.layout(), s.partition(), {0.1, -1.0, 0.1, 0.02}), InversionError);
  CHECK_THROWS_AS(build_prior(s.layout(), s.partition(), {0.1, 1.0, 0.1, 0.0}), InversionError);
  const auto other = small_disk(2, 10, 8);
  CHECK_THROWS_AS(build_prior(s.layout(), other->partition, {}), InversionError);
}

TEST_CASE("prior draws reproduce the covariance") {
  const Setup s;
  PriorSettings ps{0.3, 1.0, 0.2, 0.04};
  ps.lambda_kappa = (s.partition().centers.col(0) - s.partition().centers.col(1)).norm();
  const PriorModel prior = build_prior(s.layout(), s.partition(), ps);

  CHECK(draw_from_prior(prior, 5, 2).values() == draw_from_prior(prior, 5, 2).values());
  CHECK(draw_from_prior(prior, 5, 2).values() != draw_from_prior(prior, 5, 3).values());

  std::vector<Eigen::VectorXd> xs;
  for (int k = 0; k < 20000; ++k) xs.push_back(draw_from_prior(prior, 17, static_cast<std::uint64_t>(k)).values());
  const Eigen::MatrixXd c = empirical_covariance(xs);
  for (Eigen::Index i = 0; i < c.rows(); ++i)
    CHECK(std::abs(c(i, i) / prior.covariance(i, i) - 1.0) < 0.05);
  CHECK(c(0, 1) / std::sqrt(c(0, 0) * c(1, 1)) == doctest::Approx(std::exp(-0.5)).epsilon(0.05 / std::exp(-0.5)));
}

TEST_CASE("noise covariance special cases") {
  const Setup s;
  const CurrentBasis& basis = s.model.basis;
  const int M = basis.electrodes();

  const NoiseModel none = build_noise_cov({0.0, 0.0}, s.lambda0, basis);
  CHECK(none.covariance.norm() == 0.0);
  CHECK(none.rank == 0);
  CHECK_THROWS_AS(TikhonovInverse(Eigen::MatrixXd::Zero(none.covariance.rows(), s.layout().size()),
                                  build_prior(s.layout(), s.partition(), {}), none),
                  InversionError);

  const NoiseModel flat = build_noise_cov({1e-3, 0.0}, s.lambda0, basis);
  const double umax = physical_potentials(s.lambda0, basis).cwiseAbs().maxCoeff();
  CHECK((flat.pattern_variances.array() - 1e-6 * umax * umax).abs().maxCoeff() < 1e-15 * umax * umax);
  CHECK(flat.rank == (M - 1) * (M - 1));

  const NoiseModel rel = build_noise_cov({0.0, 1e-2}, s.lambda0, basis);
  const Eigen::MatrixXd U0 = physical_potentials(s.lambda0, basis);
  CHECK((rel.pattern_variances - (1e-2 * U0.array().abs()).square().matrix()).norm() < 1e-15);

  CHECK_THROWS_AS(build_noise_cov({-1e-3, 0.0}, s.lambda0, basis), InversionError);
}

TEST_CASE("potentials round trip through the data map") {
  const Setup s;
  const Eigen::MatrixXd U = physical_potentials(s.lambda0, s.model.basis);
  CHECK((data_from_potentials(U, s.model.basis) - s.lambda0).norm() < 1e-13 * s.lambda0.norm());
  // Column m of U is the response to e_m - e_{m+1}.
  const int M = s.model.basis.electrodes();
  Eigen::VectorXd I = Eigen::VectorXd::Zero(M);
  I(2) = 1;
  I(3) = -1;
  const Eigen::VectorXd direct = s.model.basis.B * s.lambda0 * s.model.basis.B.transpose() * I;
  CHECK((U.col(2) - direct).norm() < 1e-13 * direct.norm());
  // Constant shifts of the potentials are invisible in the data.
  const Eigen::MatrixXd shifted = U.rowwise() + Eigen::RowVectorXd::LinSpaced(M - 1, 1.0, 2.0);
  CHECK((data_from_potentials(shifted, s.model.basis) - s.lambda0).norm() < 1e-13);
}

TEST_CASE("noise covariance matches Monte Carlo for the table levels") {
  const Setup s;
  const CurrentBasis& basis = s.model.basis;
  const int M = basis.electrodes(), P = basis.patterns();
  const NoiseLevels levels[] = {{5e-5, 5e-4}, {1e-4, 1e-3}, {5e-4, 5e-3}};
  std::uint64_t stream = 0;
  for (const auto& lv : levels) {
    const NoiseModel nm = build_noise_cov(lv, s.lambda0, basis);
    PhiloxStream rng(31, stream++);
    std::vector<Eigen::VectorXd> xs;
    for (int k = 0; k < 40000; ++k) {
      Eigen::MatrixXd theta(M, P);
      for (Eigen::Index m = 0; m < P; ++m)
        for (Eigen::Index j = 0; j < M; ++j) theta(j, m) = std::sqrt(nm.pattern_variances(j, m)) * rng.normal();
      theta.rowwise() -= theta.colwise().mean();
      xs.push_back(vec(data_from_potentials(theta, basis)));
    }
    const Eigen::MatrixXd c = empirical_covariance(xs);
    for (Eigen::Index i = 0; i < c.rows(); ++i) CHECK(std::abs(c(i, i) / nm.covariance(i, i) - 1.0) < 0.05);
  }
}

TEST_CASE("simulated measurements") {
  const Setup s;
  const CurrentBasis& basis = s.model.basis;
  const int M = basis.electrodes();
  PhiloxStream rng(3, 0);
  const ParamVector target = random_param(s.layout(), rng, 0.1, 0.1, 0.02);

  const NoiseModel none = build_noise_cov({0.0, 0.0}, s.lambda0, basis);
  const MeasurementRecord clean = simulate_measurements(s.model, target, none, 1, 0);
  CHECK(clean.data == clean.noiseless);
  CHECK(clean.noisy_potentials == clean.potentials);

  ParamVector bad = target;
  bad.location(0)(0) = 0.9;
  CHECK_THROWS_AS(simulate_measurements(s.model, bad, none, 1, 0), ModelError);

  // Additive noise is centered per pattern: entrywise variance s^2 (1 - 1/M).
  const NoiseModel flat = build_noise_cov({1e-3, 0.0}, s.lambda0, basis);
  const double sigma = 1e-3 * physical_potentials(s.lambda0, basis).cwiseAbs().maxCoeff();
  const int n = 1000;
  double sq = 0;
  Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(clean.data.rows(), clean.data.cols());
  for (int k = 0; k < n; ++k) {
    const MeasurementRecord r = simulate_measurements(s.model, target, flat, 8, static_cast<std::uint64_t>(k));
    CHECK(r.noiseless == clean.noiseless);
    const Eigen::MatrixXd theta = r.noisy_potentials - r.potentials;
    CHECK(theta.colwise().sum().cwiseAbs().maxCoeff() < 1e-13 * r.potentials.cwiseAbs().maxCoeff());
    sq += theta.squaredNorm();
    mean += r.data;
  }
  const double var = sq / (static_cast<double>(n) * M * (M - 1));
  CHECK(var / (sigma * sigma * (1.0 - 1.0 / M)) == doctest::Approx(1.0).epsilon(0.03));

  mean /= n;
  const Eigen::VectorXd sd = flat.covariance.diagonal().cwiseSqrt();
  const Eigen::VectorXd dev = vec(mean - clean.noiseless);
  for (Eigen::Index i = 0; i < dev.size(); ++i) CHECK(std::abs(dev(i)) < 4.0 * sd(i) / std::sqrt(double(n)));

  const MeasurementRecord a = simulate_measurements(s.model, target, flat, 8, 4);
  const MeasurementRecord b = simulate_measurements(s.model, target, flat, 8, 4);
  CHECK(a.data == b.data);
}

TEST_CASE("Tikhonov inverse against the dense MAP estimate") {
  const Setup s;
  const DerivativeStack stack(s.model.param, s.model.basis, s.model.param->zero());
  const Eigen::MatrixXd J = jacobian(stack);
  const PriorModel prior = build_prior(s.layout(), s.partition(), {0.3, 0.5, 0.2, 0.04});
  const NoiseModel noise = build_noise_cov({1e-3, 1e-2}, s.lambda0, s.model.basis);
  REQUIRE(noise.rank == noise.covariance.rows());
  const TikhonovInverse inv(J, prior, noise);

  PhiloxStream rng(12, 0);
  const Eigen::MatrixXd psi = unvec(1e-3 * rng.normal_vector(s.lambda0.size()), s.lambda0.rows());
  const ParamVector eta = inv(psi);

  const Eigen::MatrixXd Wn = noise.covariance.inverse();
  const Eigen::MatrixXd H = J.transpose() * Wn * J + prior.covariance.inverse();
  const Eigen::VectorXd oracle = H.ldlt().solve(J.transpose() * Wn * vec(psi));
  CHECK((eta.values() - oracle).norm() < 1e-8 * oracle.norm());
  CHECK(inv.optimality_residual(psi, eta) < 1e-8);
  CHECK(inv.optimality_residual(psi, 1.1 * eta) > 1e-3);
  CHECK(inv(Eigen::MatrixXd::Zero(psi.rows(), psi.cols())).values().norm() == 0.0);
  CHECK_THROWS_AS(inv(Eigen::MatrixXd::Zero(2, 2)), InversionError);
  CHECK_THROWS_AS(TikhonovInverse(J.leftCols(3), prior, noise), InversionError);
}

TEST_CASE("weak prior approaches weighted least squares") {
  // Smooth contacts on a homogeneous disk are blind to a joint rotation of all
  // contacts, so use the CEM layout with few clusters, where J is injective.
  const ForwardModel fm = make_forward_model(small_disk(2, 6, 8), ModelConfig{}, ContactModel::cem);
  const DerivativeStack stack(fm.param, fm.basis, fm.param->zero());
  const Eigen::MatrixXd J = jacobian(stack);
  const NoiseModel noise = build_noise_cov({1e-3, 1e-2}, stack.lambda(), fm.basis);
  const double smin = Eigen::JacobiSVD<Eigen::MatrixXd>(noise.whitener * J).singularValues().minCoeff();
  REQUIRE(smin > 1e-6);
  const double g = 1e4 / smin;
  const PriorModel prior = build_prior(fm.param->layout(), fm.param->discretization().partition, {g, 1e-3, g, g});
  const TikhonovInverse inv(J, prior, noise);
  PhiloxStream rng(4, 0);
  const Eigen::MatrixXd psi = unvec(1e-3 * rng.normal_vector(stack.lambda().size()), stack.lambda().rows());
  const Eigen::MatrixXd Wn = noise.covariance.inverse();
  const Eigen::VectorXd ls = (J.transpose() * Wn * J).ldlt().solve(J.transpose() * Wn * vec(psi));
  CHECK((inv(psi).values() - ls).norm() < 1e-3 * ls.norm());
}

TEST_CASE("pseudo-inverse on a subspace") {
  const Setup s;
  const DerivativeStack stack(s.model.param, s.model.basis, s.model.param->zero());
  const Eigen::MatrixXd J = jacobian(stack);
  PhiloxStream rng(9, 0);
  const Eigen::MatrixXd W = orthonormal_columns(s.layout().size(), 5, rng);
  const PseudoInverse pinv(J, W, s.layout());
  CHECK(pinv.condition_number() >= 1.0);

  const Eigen::VectorXd c = rng.normal_vector(5);
  const ParamVector x(s.layout(), W * c);
  const Eigen::MatrixXd data = unvec(J * x.values(), s.lambda0.rows());
  CHECK((pinv(data).values() - x.values()).norm() < 1e-10 * x.values().norm());

  // Data orthogonal to the range of J W maps to zero.
  const Eigen::MatrixXd F = J * W;
  Eigen::VectorXd r = rng.normal_vector(F.rows());
  r -= F * F.colPivHouseholderQr().solve(r);
  CHECK(pinv(unvec(r, s.lambda0.rows())).values().norm() < 1e-10 * r.norm() * pinv.condition_number());

  Eigen::MatrixXd dup(W.rows(), 3);
  dup << W.col(0), W.col(1), W.col(0);
  CHECK_THROWS_AS(PseudoInverse(J, dup, s.layout()), AssumptionViolated);
  CHECK_THROWS_AS(PseudoInverse(J, Eigen::MatrixXd::Zero(W.rows(), 0), s.layout()), InversionError);
}

TEST_CASE("reversion with exact data at the base point") {
  const Setup s;
  const DerivativeStack stack(s.model.param, s.model.basis, s.model.param->zero());
  const PriorModel prior = build_prior(s.layout(), s.partition(), {});
  const NoiseModel noise = build_noise_cov({1e-4, 1e-3}, s.lambda0, s.model.basis);
  const InverseOperator inv = tikhonov_factory(prior, noise)(jacobian(stack));
  const ReversionResult r = revert(stack, inv, stack.lambda(), 3);
  for (const auto& e : r.eta) CHECK(e.values().norm() == 0.0);
  CHECK_THROWS_AS(revert(stack, inv, stack.lambda(), 0), InversionError);
  CHECK_THROWS_AS(revert(stack, inv, stack.lambda(), 4), InversionError);
}

TEST_CASE("reversion partial sums and terms") {
  const Setup s;
  PhiloxStream rng(21, 0);
  const DerivativeStack stack(s.model.param, s.model.basis, s.model.param->zero());
  const PriorModel prior = build_prior(s.layout(), s.partition(), {});
  const NoiseModel noise = build_noise_cov({1e-4, 1e-3}, s.lambda0, s.model.basis);
  const InverseOperator inv = tikhonov_factory(prior, noise)(jacobian(stack));
  const ParamVector target = random_param(s.layout(), rng, 0.1, 0.1, 0.02);
  const Eigen::MatrixXd data = s.model.lambda(target);

  const ReversionResult r3 = revert(stack, inv, data, 3);
  CHECK(r3.upsilon[0].values() == r3.eta[0].values());
  CHECK(r3.upsilon[1].values() == (r3.eta[0] + r3.eta[1]).values());
  CHECK(r3.upsilon[2].values() == (r3.upsilon[1] + r3.eta[2]).values());
  for (std::size_t k = 0; k < 3; ++k) CHECK(r3.eta_norms[k] == r3.eta[k].values().norm());

  const ParamVector eta2 = -0.5 * inv(dLambda2(stack, r3.eta[0]));
  CHECK((r3.eta[1] - eta2).values().norm() <= 1e-14 * eta2.values().norm());

  // Lower orders are prefixes of higher ones; unused terms stay zero.
  const ReversionResult r1 = revert(stack, inv, data, 1);
  CHECK(r1.eta[0].values() == r3.eta[0].values());
  CHECK(r1.eta[1].values().norm() == 0.0);
  const ReversionResult r2 = revert(stack, inv, data, 2);
  CHECK(r2.upsilon[1].values() == r3.upsilon[1].values());
  CHECK(r2.eta[2].values().norm() == 0.0);
}

TEST_CASE("reversion error orders on random subspaces") {
  for (const int electrodes : {8, 16}) {
    const Setup s(electrodes);
    const DerivativeStack stack(s.model.param, s.model.basis, s.model.param->zero());
    const Eigen::MatrixXd J = jacobian(stack);
    PhiloxStream rng(40 + static_cast<std::uint64_t>(electrodes), 0);
    for (const int dim : {5, 10, 20}) {
      CAPTURE(electrodes);
      CAPTURE(dim);
      const Eigen::MatrixXd W = orthonormal_columns(s.layout().size(), dim, rng);
      const PseudoInverse pinv(J, W, s.layout());
      const InverseOperator inv = [&pinv](const Eigen::MatrixXd& d) { return pinv(d); };
      const Eigen::VectorXd c = rng.normal_vector(dim).normalized();
      std::vector<double> hs, e1, e2, e3;
      for (int k = 3; k <= 6; ++k) {
        const double h = std::ldexp(1.0, -k);
        const ParamVector target(s.layout(), h * W * c);
        const ReversionResult r = revert(stack, inv, s.model.lambda(target), 3);
        hs.push_back(h);
        e1.push_back((r.upsilon[0] - target).values().norm());
        e2.push_back((r.upsilon[1] - target).values().norm());
        e3.push_back((r.upsilon[2] - target).values().norm());
      }
      CHECK(loglog_slope(hs, e1) > 1.8);
      CHECK(loglog_slope(hs, e2) > 2.7);
      CHECK(loglog_slope(hs, e3) > 3.6);
      CHECK(e3.back() < e2.back());
      CHECK(e2.back() < e1.back());
    }
  }
}

namespace {

struct SequentialSetup : Setup {
  SequentialSetup()
      : prior(build_prior(layout(), partition(), {})),
        noise(build_noise_cov({1e-4, 1e-3}, lambda0, model.basis)),
        factory(tikhonov_factory(prior, noise)),
        stack(model.param, model.basis, model.param->zero()),
        inverse(factory(jacobian(stack))) {}

  PriorModel prior;
  NoiseModel noise;
  InverseFactory factory;
  DerivativeStack stack;
  InverseOperator inverse;
};

}  // namespace

TEST_CASE_FIXTURE(SequentialSetup, "one linearization step is first-order reversion") {
  PhiloxStream rng(2, 0);
  const ParamVector target = random_param(layout(), rng, 0.1, 0.1, 0.02);
  const Eigen::MatrixXd data = model.lambda(target);
  const ParamVector r1 = revert(stack, inverse, data, 1).upsilon[0];
  const SequentialResult fresh = sequential_linearize(model.param, model.basis, factory, data, 1);
  const SequentialResult reused = sequential_linearize(model.param, model.basis, factory, data, 1, &stack, &inverse);
  REQUIRE(fresh.iterates.size() == 1);
  CHECK(reused.iterates[0].values() == r1.values());
  CHECK((fresh.iterates[0] - r1).values().norm() < 1e-12 * r1.values().norm());
  CHECK_THROWS_AS(sequential_linearize(model.param, model.basis, factory, data, 0), InversionError);
}

TEST_CASE_FIXTURE(SequentialSetup, "linearization steps reduce the residual") {
  PhiloxStream rng(6, 0);
  for (int trial = 0; trial < 3; ++trial) {
    const ParamVector target = random_param(layout(), rng, 0.1, 0.1, 0.02);
    const Eigen::MatrixXd data = model.lambda(target);
    const SequentialResult r = sequential_linearize(model.param, model.basis, factory, data, 3, &stack, &inverse);
    REQUIRE(r.iterates.size() == 3);
    double prev = (lambda0 - data).norm();
    for (const auto& it : r.iterates) {
      const double res = (model.lambda(it) - data).norm();
      CHECK(res < prev);
      prev = res;
    }
  }
}

TEST_CASE_FIXTURE(SequentialSetup, "zero residual leaves the iterates at zero") {
  const SequentialResult r = sequential_linearize(model.param, model.basis, factory, lambda0, 3);
  for (const auto& it : r.iterates) CHECK(it.values().norm() == 0.0);
  for (char c : r.clamped) CHECK(c == 0);
}

TEST_CASE("electrode projections") {
  const int M = 8;
  const CurrentBasis basis = CurrentBasis::create(M);
  const int P = basis.patterns();

  const ElectrodeProjection all = ElectrodeProjection::create(basis, {0, 1, 2, 3, 4, 5, 6, 7}, {0, 1, 2, 3, 4, 5, 6, 7});
  CHECK((all.in - Eigen::MatrixXd::Identity(P, P)).norm() < 1e-14);
  CHECK((all.out - Eigen::MatrixXd::Identity(P, P)).norm() < 1e-14);

  const std::vector<int> in{1, 2, 5}, out{0, 3, 4, 6};
  const ElectrodeProjection proj = ElectrodeProjection::create(basis, in, out);
  for (const Eigen::MatrixXd* Q : {&proj.in, &proj.out}) {
    CHECK((*Q * *Q - *Q).norm() < 1e-14);
    CHECK((*Q - Q->transpose()).norm() < 1e-14);
  }

  // Oracle: Gram-Schmidt on e_i - e_{first} in I-basis coordinates.
  const auto gs_projector = [&](const std::vector<int>& set) {
    Eigen::MatrixXd Q(P, 0);
    for (std::size_t k = 1; k < set.size(); ++k) {
      Eigen::VectorXd v = Eigen::VectorXd::Zero(M);
      v(set[k]) = 1;
      v(set[0]) = -1;
      Eigen::VectorXd w = basis.B.transpose() * v;
      for (Eigen::Index j = 0; j < Q.cols(); ++j) w -= Q.col(j).dot(w) * Q.col(j);
      Q.conservativeResize(P, Q.cols() + 1);
      Q.col(Q.cols() - 1) = w.normalized();
    }
    return Eigen::MatrixXd(Q * Q.transpose());
  };
  CHECK((proj.in - gs_projector(in)).norm() < 1e-13);
  CHECK((proj.out - gs_projector(out)).norm() < 1e-13);
  CHECK(proj.in.trace() == doctest::Approx(2.0));
  CHECK(proj.out.trace() == doctest::Approx(3.0));

  PhiloxStream rng(1, 0);
  const Eigen::MatrixXd data = unvec(rng.normal_vector(P * P), P);
  const Eigen::MatrixXd J = unvec(rng.normal_vector(P * P * 3), P * P);
  const Eigen::MatrixXd PJ = proj.apply_jacobian(J);
  for (Eigen::Index c = 0; c < 3; ++c) CHECK((PJ.col(c) - vec(proj.apply(unvec(J.col(c), P)))).norm() == 0.0);

  Eigen::MatrixXd seen;
  const InverseOperator spy = [&seen](const Eigen::MatrixXd& d) {
    seen = d;
    return ParamVector(ParamLayout{ContactModel::cem, 1, 0, 0});
  };
  with_projection(spy, proj)(data);
  CHECK((seen - proj.out * data * proj.in).norm() == 0.0);

  CHECK_THROWS_AS(support_projector(M, {}), InversionError);
  CHECK_THROWS_AS(support_projector(M, {8}), InversionError);
}
