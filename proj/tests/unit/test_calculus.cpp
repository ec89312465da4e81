#include <cmath>

#include "../support.hpp"
#include "doctest.h"
#include "scem/calculus.hpp"

using namespace scem;
using scem::testing::loglog_slope;
using scem::testing::random_param;
using scem::testing::rel_diff;
using scem::testing::small_disk;

namespace {

struct Fixture {
  std::shared_ptr<const Discretization> disc = small_disk(3, 30, 8);
  CurrentBasis basis = CurrentBasis::create(8);
  std::shared_ptr<const Parametrization> param =
      std::make_shared<const Parametrization>(disc, ModelConfig{}, ContactModel::smooth);
  PhiloxStream rng{99, 0};
  ParamVector base = random_param(param->layout(), rng, 0.2, 0.2, 0.05);
  DerivativeStack stack{param, basis, base};

  ParamVector direction(double xi = 0.3) { return random_param(param->layout(), rng, 1, 1, xi); }
  Eigen::MatrixXd lambda(const ParamVector& iota) const {
    return AssembledSystem(disc, basis, param->tau(iota)).forward_map();
  }
};

}  // namespace

TEST_CASE_FIXTURE(Fixture, "zero directions give zero derivatives") {
  const ParamVector z = param->zero();
  CHECK(dLambda1(stack, z).norm() == 0.0);
  CHECK(dLambda2(stack, z).norm() == 0.0);
  CHECK(dLambda3(stack, z).norm() == 0.0);
  CHECK((taylor_eval(stack, z, 1) - stack.lambda()).norm() == 0.0);
  const std::array<ParamVector, 1> one{z};
  CHECK(jacobian(stack, one).norm() == 0.0);
}

TEST_CASE_FIXTURE(Fixture, "derivatives are symmetric and homogeneous") {
  const ParamVector eta = direction();
  const Eigen::MatrixXd d1 = dLambda1(stack, eta);
  const Eigen::MatrixXd d2 = dLambda2(stack, eta);
  const Eigen::MatrixXd d3 = dLambda3(stack, eta);
  CHECK((d1 - d1.transpose()).norm() < 1e-12 * d1.norm());
  CHECK((d2 - d2.transpose()).norm() < 1e-12 * d2.norm());
  CHECK(rel_diff(dLambda2(stack, 2.0 * eta), 4.0 * d2) < 1e-13);
  CHECK(rel_diff(dLambda3(stack, 2.0 * eta), 8.0 * d3) < 1e-13);
}

TEST_CASE_FIXTURE(Fixture, "Taylor remainder slopes") {
  const ParamVector eta = direction();
  std::vector<double> s, r1, r2, r3;
  for (int k = 3; k <= 9; ++k) {
    const double h = std::ldexp(1.0, -k);
    const Eigen::MatrixXd exact = lambda(base + h * eta);
    s.push_back(h);
    r1.push_back((exact - taylor_eval(stack, h * eta, 1)).norm());
    r2.push_back((exact - taylor_eval(stack, h * eta, 2)).norm());
    r3.push_back((exact - taylor_eval(stack, h * eta, 3)).norm());
  }
  CHECK(std::abs(loglog_slope(s, r1) - 2) <= 0.1);
  CHECK(std::abs(loglog_slope(s, r2) - 3) <= 0.15);
  CHECK(std::abs(loglog_slope(s, r3) - 4) <= 0.2);
  CHECK_THROWS(taylor_eval(stack, eta, 4));
}

TEST_CASE_FIXTURE(Fixture, "mixed second derivative") {
  const ParamVector a = direction(), b = direction(), c = direction();
  const Eigen::MatrixXd ab = mixed_dLambda2(stack, a, b);
  CHECK(rel_diff(mixed_dLambda2(stack, a, a), dLambda2(stack, a)) < 1e-13);
  CHECK(rel_diff(mixed_dLambda2(stack, b, a), ab) < 1e-13);
  CHECK(rel_diff(mixed_dLambda2(stack, 2.0 * a - c, b), 2.0 * ab - mixed_dLambda2(stack, c, b)) < 1e-12);
  CHECK(rel_diff((dLambda2(stack, a + b) - dLambda2(stack, a - b)) / 4.0, ab) < 1e-12);
}

TEST_CASE_FIXTURE(Fixture, "Jacobian from the bilinear identity") {
  const auto dirs = coordinate_directions(param->layout());
  const Eigen::MatrixXd J = jacobian(stack, dirs);
  CHECK(J.cols() == param->layout().size());
  CHECK((J - jacobian_serial(stack, dirs)).norm() == 0.0);
  const std::size_t before = stack.system().solve_count();
  jacobian(stack, dirs);
  CHECK(stack.system().solve_count() == before);

  for (Eigen::Index p : {Eigen::Index(0), Eigen::Index(7), param->layout().strength_offset() + 2,
                         param->layout().location_offset() + 5}) {
    const Eigen::MatrixXd col = unvec(J.col(p), 7);
    CHECK(rel_diff(col, dLambda1(stack, dirs[static_cast<std::size_t>(p)])) < 1e-12);
    CHECK((col - col.transpose()).norm() <= 1e-12 * col.norm());
  }

  // A cluster at the center barely sees the electrodes compared with one at the rim.
  const auto& centers = disc->partition.centers;
  Eigen::Index inner = 0, outer = 0;
  for (Eigen::Index k = 0; k < centers.cols(); ++k) {
    if (centers.col(k).norm() < centers.col(inner).norm()) inner = k;
    if (centers.col(k).norm() > centers.col(outer).norm()) outer = k;
  }
  CHECK(J.col(inner).norm() < J.col(outer).norm());
}

TEST_CASE_FIXTURE(Fixture, "third derivative costs at most seven solve sets") {
  const DerivativeStack fresh(param, basis, base);
  const ParamVector eta = direction();
  const std::size_t before = fresh.system().solve_count();
  dLambda3(fresh, eta);
  CHECK(fresh.system().solve_count() - before <= 7 * 7);
}

TEST_CASE_FIXTURE(Fixture, "compositions do not commute") {
  const ParamVector a = direction();
  const ConductivityPair d1 = param->dtau(base, a);
  const ConductivityPair d2 = param->dtau(base, a, a);
  const auto& sys = stack.system();
  const Eigen::MatrixXd x = sys.apply_P(d2, sys.apply_P(d1, stack.solutions()));
  const Eigen::MatrixXd y = sys.apply_P(d1, sys.apply_P(d2, stack.solutions()));
  CHECK(rel_diff(x, y) > 1e-6);
}

TEST_CASE_FIXTURE(Fixture, "first-order memo is a pure cache") {
  stack.clear_cache();
  const ParamVector a = direction();
  const Eigen::MatrixXd x = stack.first_order(a);
  CHECK(stack.cache_size() == 1);
  CHECK(stack.first_order(a) == x);
  CHECK(stack.cache_size() == 1);
  CHECK(x == stack.apply(a, stack.solutions()));
  for (int i = 0; i < 40; ++i) stack.first_order(direction());
  CHECK(stack.cache_size() <= 16);
}

TEST_CASE("trivial parametrization reduces to powers of P") {
  const auto disc = small_disk(2, 12, 6);
  const auto basis = CurrentBasis::create(6);
  const Parametrization p(disc, ModelConfig{}, ContactModel::smooth);
  PhiloxStream rng(5, 0);
  const ConductivityPair tau0 = p.tau(random_param(p.layout(), rng, 0.3, 0.3, 0.1));
  const ConductivityPair e1 = p.dtau(p.zero(), random_param(p.layout(), rng, 1, 1, 0.2));
  const ConductivityPair e2 = p.dtau(p.zero(), random_param(p.layout(), rng, 1, 1, 0.2));
  auto map = std::make_shared<const LinearTauMap>(disc, tau0, std::vector<ConductivityPair>{e1, e2});
  const DerivativeStack stack(map, basis, map->zero());
  ParamVector eta(map->layout());
  eta.values() << 0.4, -0.3;
  const ConductivityPair d = 0.4 * e1 + (-0.3) * e2;

  const AssembledSystem& sys = stack.system();
  const Eigen::MatrixXd N = stack.solutions();
  const Eigen::MatrixXd P1 = sys.apply_P(d, N);
  const Eigen::MatrixXd P2 = sys.apply_P(d, P1);
  const Eigen::MatrixXd P3 = sys.apply_P(d, P2);
  CHECK(rel_diff(dLambda2(stack, eta), 2.0 * sys.trace(P2)) < 1e-13);
  CHECK(rel_diff(dLambda3(stack, eta), 6.0 * sys.trace(P3)) < 1e-13);
  CHECK(rel_diff(taylor_eval(stack, eta, 3), sys.trace(N + P1 + P2 + P3)) < 1e-14);
}
