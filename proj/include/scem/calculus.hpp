#pragma once

#include <memory>
#include <mutex>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "scem/fem.hpp"
#include "scem/model.hpp"

namespace scem {

/// Forward solutions at a base point iota for all basis currents, plus the
/// machinery to push them through compositions of P_{tau^(k)}.
///
/// Solution blocks are (n + M - 1) x (M - 1) matrices; column i belongs to
/// the current I^(i) = B e_i.
class DerivativeStack {
public:
  DerivativeStack(std::shared_ptr<const TauMap> map, const CurrentBasis& basis, ParamVector iota);

  const TauMap& map() const { return *map_; }
  const ParamVector& base() const { return iota_; }
  const AssembledSystem& system() const { return *system_; }
  const Eigen::MatrixXd& solutions() const { return solutions_; }
  const Eigen::MatrixXd& lambda() const { return lambda_; }

  /// P_{tau^(k)}(dirs) x, k = dirs.size() in 1..3.
  Eigen::MatrixXd apply(std::span<const ParamVector> dirs, const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd apply(const ParamVector& a, const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd apply(const ParamVector& a, const ParamVector& b, const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd apply(const ParamVector& a, const ParamVector& b, const ParamVector& c,
                        const Eigen::MatrixXd& x) const;

  /// P_{tau'}(eta) N, memoized on the exact value of eta.
  Eigen::MatrixXd first_order(const ParamVector& eta) const;
  void clear_cache() const;
  std::size_t cache_size() const;

private:
  std::shared_ptr<const TauMap> map_;
  ParamVector iota_;
  std::unique_ptr<AssembledSystem> system_;
  Eigen::MatrixXd solutions_;
  Eigen::MatrixXd lambda_;

  mutable std::mutex cache_mutex_;
  mutable std::vector<std::pair<Eigen::VectorXd, Eigen::MatrixXd>> cache_;
};

Eigen::MatrixXd dLambda1(const DerivativeStack& stack, const ParamVector& eta);
Eigen::MatrixXd dLambda2(const DerivativeStack& stack, const ParamVector& eta);
Eigen::MatrixXd dLambda3(const DerivativeStack& stack, const ParamVector& eta);
Eigen::MatrixXd mixed_dLambda2(const DerivativeStack& stack, const ParamVector& a, const ParamVector& b);

/// Lambda(iota) + sum_{k <= order} dLambda_k(eta) / k!.
Eigen::MatrixXd taylor_eval(const DerivativeStack& stack, const ParamVector& eta, int order);

/// Column p is vec(dLambda1(directions[p])) (column-major vec), obtained
/// from -B_{dtau(e_p)}(N I^(i), N I^(j)) without further solves.
Eigen::MatrixXd jacobian(const DerivativeStack& stack, std::span<const ParamVector> directions);
Eigen::MatrixXd jacobian_serial(const DerivativeStack& stack, std::span<const ParamVector> directions);
/// Jacobian with respect to every coordinate of the parameter vector.
Eigen::MatrixXd jacobian(const DerivativeStack& stack);

/// Coordinate directions e_0 .. e_{N-1} of a layout.
std::vector<ParamVector> coordinate_directions(const ParamLayout& layout);

inline Eigen::VectorXd vec(const Eigen::MatrixXd& m) {
  return Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
}

inline Eigen::MatrixXd unvec(const Eigen::VectorXd& v, Eigen::Index rows) {
  return Eigen::Map<const Eigen::MatrixXd>(v.data(), rows, v.size() / rows);
}

}  // namespace scem
