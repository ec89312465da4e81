#include "scem/calculus.hpp"

#include <array>
#include <stdexcept>

namespace scem {

namespace {

constexpr std::size_t kCacheCapacity = 16;

// Per-cell gradients and per-node contact jumps U_m - u of the stored
// solutions: everything the bilinear identity needs.
struct SolutionTraces {
  std::vector<Eigen::MatrixXd> grads;  // dim x P per cell
  Eigen::MatrixXd jumps;               // nodes x P
};

SolutionTraces solution_traces(const DerivativeStack& stack) {
  const auto& disc = stack.map().discretization();
  const auto& mesh = disc.mesh;
  const auto& quad = disc.quadrature;
  const auto& sys = stack.system();
  const Eigen::MatrixXd& X = stack.solutions();
  const Eigen::Index P = X.cols();
  const Eigen::MatrixXd Uel = sys.basis().B * sys.trace(X);  // M x P

  SolutionTraces t;
  t.grads.resize(static_cast<std::size_t>(mesh.num_cells()));
  for (Eigen::Index c = 0; c < mesh.num_cells(); ++c) {
    const Eigen::MatrixXd g = mesh.barycentric_gradients(c);
    Eigen::MatrixXd gu = Eigen::MatrixXd::Zero(mesh.dim(), P);
    for (int k = 0; k <= mesh.dim(); ++k) gu += g.col(k) * X.row(mesh.cells()(k, c));
    t.grads[static_cast<std::size_t>(c)] = std::move(gu);
  }
  t.jumps.resize(quad.size(), P);
  for (Eigen::Index q = 0; q < quad.size(); ++q) {
    const auto& facet = mesh.boundary_facets()[static_cast<std::size_t>(quad.facet[static_cast<std::size_t>(q)])];
    Eigen::RowVectorXd u = Eigen::RowVectorXd::Zero(P);
    for (int k = 0; k < mesh.dim(); ++k) u += quad.barycentric(k, q) * X.row(facet.vertices[k]);
    t.jumps.row(q) = Uel.row(quad.electrode[static_cast<std::size_t>(q)]) - u;
  }
  return t;
}

Eigen::VectorXd jacobian_column(const DerivativeStack& stack, const SolutionTraces& t, const ParamVector& dir) {
  const auto& disc = stack.map().discretization();
  const auto& mesh = disc.mesh;
  const auto& quad = disc.quadrature;
  const ConductivityPair d = stack.map().dtau(stack.base(), dir);
  const Eigen::Index P = stack.solutions().cols();
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(P, P);
  for (Eigen::Index c = 0; c < mesh.num_cells(); ++c) {
    if (d.sigma(c) == 0.0) continue;
    const auto& g = t.grads[static_cast<std::size_t>(c)];
    G.noalias() += (d.sigma(c) * mesh.cell_volume(c)) * (g.transpose() * g);
  }
  for (Eigen::Index q = 0; q < quad.size(); ++q) {
    if (d.zeta(q) == 0.0) continue;
    G.noalias() += (quad.weights(q) * d.zeta(q)) * (t.jumps.row(q).transpose() * t.jumps.row(q));
  }
  return -vec(G);
}

}  // namespace

DerivativeStack::DerivativeStack(std::shared_ptr<const TauMap> map, const CurrentBasis& basis, ParamVector iota)
    : map_(std::move(map)), iota_(std::move(iota)) {
  system_ = std::make_unique<AssembledSystem>(map_->discretization_ptr(), basis, map_->tau(iota_));
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(system_->size(), basis.patterns());
  rhs.bottomRows(basis.patterns()).setIdentity();
  solutions_ = system_->solve(rhs);
  lambda_ = system_->trace(solutions_);
}

Eigen::MatrixXd DerivativeStack::apply(std::span<const ParamVector> dirs, const Eigen::MatrixXd& x) const {
  return system_->apply_P(map_->dtau(iota_, dirs), x);
}

Eigen::MatrixXd DerivativeStack::apply(const ParamVector& a, const Eigen::MatrixXd& x) const {
  return apply(std::span<const ParamVector>(&a, 1), x);
}

Eigen::MatrixXd DerivativeStack::apply(const ParamVector& a, const ParamVector& b, const Eigen::MatrixXd& x) const {
  const std::array<ParamVector, 2> d{a, b};
  return apply(d, x);
}

Eigen::MatrixXd DerivativeStack::apply(const ParamVector& a, const ParamVector& b, const ParamVector& c,
                                       const Eigen::MatrixXd& x) const {
  const std::array<ParamVector, 3> d{a, b, c};
  return apply(d, x);
}

Eigen::MatrixXd DerivativeStack::first_order(const ParamVector& eta) const {
  {
    std::lock_guard<std::mutex> lock(cache_mutex_);
    for (const auto& [key, value] : cache_)
      if (key.size() == eta.size() && key == eta.values()) return value;
  }
  Eigen::MatrixXd value = apply(eta, solutions_);
  std::lock_guard<std::mutex> lock(cache_mutex_);
  if (cache_.size() >= kCacheCapacity) cache_.erase(cache_.begin());
  cache_.emplace_back(eta.values(), value);
  return value;
}

void DerivativeStack::clear_cache() const {
  std::lock_guard<std::mutex> lock(cache_mutex_);
  cache_.clear();
}

std::size_t DerivativeStack::cache_size() const {
  std::lock_guard<std::mutex> lock(cache_mutex_);
  return cache_.size();
}

Eigen::MatrixXd dLambda1(const DerivativeStack& stack, const ParamVector& eta) {
  return stack.system().trace(stack.first_order(eta));
}

Eigen::MatrixXd dLambda2(const DerivativeStack& stack, const ParamVector& eta) {
  const auto& sys = stack.system();
  const ConductivityPair d1 = stack.map().dtau(stack.base(), eta);
  const ConductivityPair d2 = stack.map().dtau(stack.base(), eta, eta);
  const Eigen::MatrixXd X1 = stack.first_order(eta);
  const Eigen::MatrixXd X11 = sys.apply_P(d1, X1);
  const Eigen::MatrixXd X2 = sys.apply_P(d2, stack.solutions());
  return sys.trace(2.0 * X11 + X2);
}

Eigen::MatrixXd dLambda3(const DerivativeStack& stack, const ParamVector& eta) {
  const auto& sys = stack.system();
  const ConductivityPair d1 = stack.map().dtau(stack.base(), eta);
  const ConductivityPair d2 = stack.map().dtau(stack.base(), eta, eta);
  const ConductivityPair d3 = stack.map().dtau(stack.base(), eta, eta, eta);
  const Eigen::MatrixXd& N = stack.solutions();
  const Eigen::MatrixXd X1 = stack.first_order(eta);
  const Eigen::MatrixXd X11 = sys.apply_P(d1, X1);
  const Eigen::MatrixXd X111 = sys.apply_P(d1, X11);
  const Eigen::MatrixXd X2 = sys.apply_P(d2, N);
  const Eigen::MatrixXd X21 = sys.apply_P(d2, X1);
  const Eigen::MatrixXd X12 = sys.apply_P(d1, X2);
  const Eigen::MatrixXd X3 = sys.apply_P(d3, N);
  return sys.trace(6.0 * X111 + 3.0 * X21 + 3.0 * X12 + X3);
}

Eigen::MatrixXd mixed_dLambda2(const DerivativeStack& stack, const ParamVector& a, const ParamVector& b) {
  const auto& sys = stack.system();
  const ConductivityPair da = stack.map().dtau(stack.base(), a);
  const ConductivityPair db = stack.map().dtau(stack.base(), b);
  const ConductivityPair dab = stack.map().dtau(stack.base(), a, b);
  const Eigen::MatrixXd Xab = sys.apply_P(da, stack.first_order(b));
  const Eigen::MatrixXd Xba = sys.apply_P(db, stack.first_order(a));
  const Eigen::MatrixXd X2 = sys.apply_P(dab, stack.solutions());
  return sys.trace(Xab + Xba + X2);
}

Eigen::MatrixXd taylor_eval(const DerivativeStack& stack, const ParamVector& eta, int order) {
  if (order < 1 || order > 3) throw std::invalid_argument("Taylor order must be 1, 2 or 3");
  Eigen::MatrixXd out = stack.lambda() + dLambda1(stack, eta);
  if (order >= 2) out += 0.5 * dLambda2(stack, eta);
  if (order >= 3) out += dLambda3(stack, eta) / 6.0;
  return out;
}

Eigen::MatrixXd jacobian(const DerivativeStack& stack, std::span<const ParamVector> directions) {
  const SolutionTraces t = solution_traces(stack);
  const Eigen::Index P = stack.solutions().cols();
  const auto count = static_cast<Eigen::Index>(directions.size());
  Eigen::MatrixXd J(P * P, count);
#pragma omp parallel for schedule(dynamic)
  for (Eigen::Index p = 0; p < count; ++p) J.col(p) = jacobian_column(stack, t, directions[static_cast<std::size_t>(p)]);
  return J;
}

Eigen::MatrixXd jacobian_serial(const DerivativeStack& stack, std::span<const ParamVector> directions) {
  const SolutionTraces t = solution_traces(stack);
  const Eigen::Index P = stack.solutions().cols();
  Eigen::MatrixXd J(P * P, static_cast<Eigen::Index>(directions.size()));
  for (std::size_t p = 0; p < directions.size(); ++p)
    J.col(static_cast<Eigen::Index>(p)) = jacobian_column(stack, t, directions[p]);
  return J;
}

Eigen::MatrixXd jacobian(const DerivativeStack& stack) {
  const auto dirs = coordinate_directions(stack.base().layout());
  return jacobian(stack, dirs);
}

std::vector<ParamVector> coordinate_directions(const ParamLayout& layout) {
  std::vector<ParamVector> dirs;
  dirs.reserve(static_cast<std::size_t>(layout.size()));
  for (Eigen::Index p = 0; p < layout.size(); ++p) {
    ParamVector e(layout);
    e.values()(p) = 1.0;
    dirs.push_back(std::move(e));
  }
  return dirs;
}

}  // namespace scem
