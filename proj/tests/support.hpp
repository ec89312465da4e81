#pragma once

#include <cmath>
#include <memory>
#include <vector>

#include <Eigen/Core>

#include "scem/harness.hpp"
#include "scem/rng.hpp"

namespace scem::testing {

/// Random parameter with independent normal entries per block.
inline ParamVector random_param(const ParamLayout& layout, PhiloxStream& rng, double kappa, double rho, double xi) {
  ParamVector p(layout);
  for (Eigen::Index i = 0; i < p.kappa().size(); ++i) p.kappa()(i) = kappa * rng.normal();
  for (Eigen::Index i = 0; i < p.strength().size(); ++i) p.strength()(i) = rho * rng.normal();
  for (int m = 0; m < layout.electrodes; ++m)
    for (Eigen::Index k = 0; k < p.location(m).size(); ++k) p.location(m)(k) = xi * rng.normal();
  return p;
}

/// Least-squares slope of log(y) against log(x).
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const auto n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

inline double rel_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const double ref = std::max(a.norm(), b.norm());
  return ref == 0.0 ? 0.0 : (a - b).norm() / ref;
}

inline std::shared_ptr<const Discretization> small_disk(int level = 2, int clusters = 20, int electrodes = 8,
                                                        std::uint64_t seed = 3) {
  return make_disk_discretization({level, clusters, electrodes, 0.15, 0.10, seed});
}

}  // namespace scem::testing
