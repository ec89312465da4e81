#include "scem/model.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <string>

#include "scem/textio.hpp"

namespace scem {

namespace {

constexpr int kMaxOrder = 3;
constexpr int kNumMasks = 1 << kMaxOrder;
// exp(-700) is about 1e-304; beyond that the bump underflows anyway.
constexpr double kUnderflowExponent = 700.0;

using Blocks = std::vector<unsigned>;

void collect_partitions(unsigned mask, Blocks& current, std::vector<Blocks>& out) {
  if (mask == 0) {
    out.push_back(current);
    return;
  }
  const unsigned lowest = mask & (~mask + 1u);
  const unsigned rest = mask & ~lowest;
  // Every subset of `rest` joins the lowest element in one block.
  for (unsigned sub = rest;; sub = (sub - 1u) & rest) {
    current.push_back(sub | lowest);
    collect_partitions(rest & ~sub, current, out);
    current.pop_back();
    if (sub == 0) break;
  }
}

// Set partitions of every subset of {0, 1, 2}, indexed by bitmask.
const std::array<std::vector<Blocks>, kNumMasks>& set_partitions() {
  static const auto table = [] {
    std::array<std::vector<Blocks>, kNumMasks> t;
    for (unsigned mask = 0; mask < kNumMasks; ++mask) {
      Blocks cur;
      collect_partitions(mask, cur, t[mask]);
    }
    return t;
  }();
  return table;
}

// d^j/ds^j of exp(a - a / (1 - s / R^2)) for j = 0..3, s = |y - xi|^2.
std::array<double, 4> bump_profile(double s, const ModelConfig& cfg) {
  std::array<double, 4> d{0.0, 0.0, 0.0, 0.0};
  const double t = 1.0 - s / (cfg.R * cfg.R);
  if (t <= 0) return d;
  const double a = cfg.a;
  if (a / t > kUnderflowExponent) return d;
  const double f = std::exp(a - a / t);
  const double t2 = t * t;
  const double t3 = t2 * t;
  const double t4 = t2 * t2;
  const double c = -1.0 / (cfg.R * cfg.R);  // dt/ds
  d[0] = f;
  d[1] = c * f * a / t2;
  d[2] = c * c * f * (a * a / t4 - 2.0 * a / t3);
  d[3] = c * c * c * f * (a * a * a / (t4 * t2) - 6.0 * a * a / (t4 * t) + 6.0 * a / t4);
  return d;
}

Eigen::VectorXd contact_areas(const SurfaceQuadrature& quad) {
  Eigen::VectorXd area = Eigen::VectorXd::Zero(quad.electrode_count());
  for (Eigen::Index q = 0; q < quad.size(); ++q)
    if (quad.in_contact[static_cast<std::size_t>(q)]) area(quad.electrode[static_cast<std::size_t>(q)]) += quad.weights(q);
  return area;
}

}  // namespace

void ModelConfig::validate() const {
  if (!(R > 0)) throw ModelError("contact width R must be positive");
  if (!(a > 0)) throw ModelError("contact shape a must be positive");
}

ParamVector::ParamVector(const ParamLayout& layout) : layout_(layout), values_(Eigen::VectorXd::Zero(layout.size())) {}

ParamVector::ParamVector(const ParamLayout& layout, Eigen::VectorXd values)
    : layout_(layout), values_(std::move(values)) {
  if (values_.size() != layout_.size())
    throw ModelError("parameter vector has " + std::to_string(values_.size()) + " entries, layout expects " +
                     std::to_string(layout_.size()));
}

ParamVector& ParamVector::operator+=(const ParamVector& o) {
  if (!(layout_ == o.layout_)) throw ModelError("parameter layouts differ");
  values_ += o.values_;
  return *this;
}

ParamVector& ParamVector::operator-=(const ParamVector& o) {
  if (!(layout_ == o.layout_)) throw ModelError("parameter layouts differ");
  values_ -= o.values_;
  return *this;
}

ParamVector& ParamVector::operator*=(double s) {
  values_ *= s;
  return *this;
}

ParamVector operator+(ParamVector a, const ParamVector& b) { return a += b; }
ParamVector operator-(ParamVector a, const ParamVector& b) { return a -= b; }
ParamVector operator*(double s, ParamVector a) { return a *= s; }

void write_params(std::ostream& out, const ParamVector& p) { write_vector(out, p.values()); }

ParamVector read_params(std::istream& in, const ParamLayout& layout) {
  Eigen::VectorXd v = read_vector(in);
  if (v.size() != layout.size()) throw ParseError("parameter file length does not match the model");
  return ParamVector(layout, std::move(v));
}

ConductivityPair& ConductivityPair::operator+=(const ConductivityPair& o) {
  sigma += o.sigma;
  zeta += o.zeta;
  return *this;
}

ConductivityPair& ConductivityPair::operator*=(double s) {
  sigma *= s;
  zeta *= s;
  return *this;
}

ConductivityPair operator+(ConductivityPair a, const ConductivityPair& b) { return a += b; }
ConductivityPair operator-(ConductivityPair a, const ConductivityPair& b) {
  a.sigma -= b.sigma;
  a.zeta -= b.zeta;
  return a;
}
ConductivityPair operator*(double s, ConductivityPair a) { return a *= s; }

std::shared_ptr<const Discretization> Discretization::create(SimplicialMesh mesh, ElectrodeLayout layout,
                                                             Partition partition) {
  auto d = std::make_shared<Discretization>();
  d->quadrature = build_surface_quadrature(mesh, layout);
  for (int m = 0; m < layout.count(); ++m) d->images.push_back(electrode_image(mesh, layout, m));
  d->mesh = std::move(mesh);
  d->layout = std::move(layout);
  d->partition = std::move(partition);
  return d;
}

Eigen::VectorXd eval_sigma(const ModelConfig& config, const SimplicialMesh& mesh, const Partition& partition,
                           const Eigen::VectorXd& kappa) {
  if (kappa.size() != partition.count()) throw ModelError("kappa length does not match the cluster count");
  Eigen::VectorXd sigma(mesh.num_cells());
  for (Eigen::Index c = 0; c < mesh.num_cells(); ++c)
    sigma(c) = std::exp(config.mu_kappa + kappa(partition.cluster_of[static_cast<std::size_t>(c)]));
  return sigma;
}

Eigen::VectorXd eval_zeta_cem(const ModelConfig& config, const SurfaceQuadrature& quad, const Eigen::VectorXd& theta) {
  if (theta.size() != quad.electrode_count()) throw ModelError("theta length does not match the electrode count");
  const Eigen::VectorXd area = contact_areas(quad);
  Eigen::VectorXd zeta = Eigen::VectorXd::Zero(quad.size());
  for (Eigen::Index q = 0; q < quad.size(); ++q) {
    if (!quad.in_contact[static_cast<std::size_t>(q)]) continue;
    const int m = quad.electrode[static_cast<std::size_t>(q)];
    if (!(area(m) > 0)) throw ModelError("contact region of electrode " + std::to_string(m) + " has zero area");
    zeta(q) = std::exp(config.mu_zeta + theta(m)) / area(m);
  }
  return zeta;
}

double bump(const Eigen::VectorXd& y, const Eigen::VectorXd& xi, const ModelConfig& config) {
  return bump_profile((y - xi).squaredNorm(), config)[0];
}

bool location_admissible(const ElectrodeImage& image, const ModelConfig& config, const Eigen::VectorXd& xi) {
  if (!xi.allFinite() || !image.contains(xi)) return false;
  return image.boundary_distance(xi) >= config.R + kAdmissibilityMargin;
}

Eigen::VectorXd eval_zeta_smooth(const ModelConfig& config, const Discretization& disc, const ParamVector& iota) {
  Parametrization p(std::shared_ptr<const Discretization>(&disc, [](const Discretization*) {}), config,
                    ContactModel::smooth);
  return p.tau(iota).zeta;
}

Parametrization::Parametrization(std::shared_ptr<const Discretization> disc, ModelConfig config, ContactModel contact)
    : disc_(std::move(disc)), config_(config) {
  config_.validate();
  layout_.contact = contact;
  layout_.clusters = disc_->partition.count();
  layout_.electrodes = disc_->layout.count();
  layout_.location_dim = contact == ContactModel::smooth ? disc_->mesh.dim() - 1 : 0;
  contact_area_ = contact_areas(disc_->quadrature);
  if (contact == ContactModel::cem)
    for (int m = 0; m < layout_.electrodes; ++m)
      if (!(contact_area_(m) > 0)) throw ModelError("contact region of electrode " + std::to_string(m) + " has zero area");
}

void Parametrization::check(const ParamVector& p) const {
  if (!(p.layout() == layout_)) throw ModelError("parameter vector does not match the parametrization");
}

bool Parametrization::admissible(const ParamVector& iota) const {
  check(iota);
  if (!iota.values().allFinite()) return false;
  if (layout_.contact == ContactModel::cem) return true;
  for (int m = 0; m < layout_.electrodes; ++m)
    if (!location_admissible(disc_->images[static_cast<std::size_t>(m)], config_, iota.location(m))) return false;
  return true;
}

ParamVector Parametrization::clamp(const ParamVector& iota, bool* changed) const {
  check(iota);
  ParamVector out = iota;
  bool moved = false;
  if (layout_.contact == ContactModel::smooth) {
    for (int m = 0; m < layout_.electrodes; ++m) {
      const auto& image = disc_->images[static_cast<std::size_t>(m)];
      const Eigen::VectorXd xi = iota.location(m);
      if (location_admissible(image, config_, xi)) continue;
      // The chart centers the electrode image at the origin.
      const Eigen::VectorXd center = Eigen::VectorXd::Zero(layout_.location_dim);
      if (!location_admissible(image, config_, center))
        throw ModelError("electrode " + std::to_string(m) + " admits no contact location");
      double lo = 0.0, hi = 1.0;
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (location_admissible(image, config_, center + mid * (xi - center)))
          lo = mid;
        else
          hi = mid;
      }
      out.location(m) = center + lo * (xi - center);
      moved = true;
    }
  }
  if (changed) *changed = moved;
  return out;
}

ConductivityPair TauMap::dtau(const ParamVector& iota, const ParamVector& a) const {
  return dtau(iota, std::span<const ParamVector>(&a, 1));
}

ConductivityPair TauMap::dtau(const ParamVector& iota, const ParamVector& a, const ParamVector& b) const {
  const std::array<ParamVector, 2> d{a, b};
  return dtau(iota, d);
}

ConductivityPair TauMap::dtau(const ParamVector& iota, const ParamVector& a, const ParamVector& b,
                              const ParamVector& c) const {
  const std::array<ParamVector, 3> d{a, b, c};
  return dtau(iota, d);
}

ConductivityPair Parametrization::dtau(const ParamVector& iota, std::span<const ParamVector> dirs) const {
  check(iota);
  const int k = static_cast<int>(dirs.size());
  if (k > kMaxOrder) throw ModelError("derivatives of order above 3 are not supported");
  for (const auto& d : dirs) check(d);
  const auto& mesh = disc_->mesh;
  const auto& part = disc_->partition;
  const auto& quad = disc_->quadrature;

  ConductivityPair out;
  out.sigma.resize(mesh.num_cells());
  for (Eigen::Index c = 0; c < mesh.num_cells(); ++c) {
    const int i = part.cluster_of[static_cast<std::size_t>(c)];
    double v = std::exp(config_.mu_kappa + iota.kappa()(i));
    for (const auto& d : dirs) v *= d.kappa()(i);
    out.sigma(c) = v;
  }

  out.zeta = Eigen::VectorXd::Zero(quad.size());
  if (layout_.contact == ContactModel::cem) {
    for (Eigen::Index q = 0; q < quad.size(); ++q) {
      if (!quad.in_contact[static_cast<std::size_t>(q)]) continue;
      const int m = quad.electrode[static_cast<std::size_t>(q)];
      double v = std::exp(config_.mu_zeta + iota.strength()(m)) / contact_area_(m);
      for (const auto& d : dirs) v *= d.strength()(m);
      out.zeta(q) = v;
    }
    return out;
  }

  const auto& parts = set_partitions();
  const unsigned full = (1u << k) - 1u;
  for (int m = 0; m < layout_.electrodes; ++m) {
    const Eigen::VectorXd xi = iota.location(m);
    if (!location_admissible(disc_->images[static_cast<std::size_t>(m)], config_, xi))
      throw ModelError("contact location of electrode " + std::to_string(m) + " is inadmissible");
    const auto& nodes = quad.electrode_nodes[static_cast<std::size_t>(m)];
    const std::size_t n = nodes.size();
    std::vector<Eigen::VectorXd> dxi;
    for (const auto& d : dirs) dxi.emplace_back(d.location(m));

    // psi_T(q): mixed xi-derivative of the bump along the directions in T.
    std::array<std::vector<double>, kNumMasks> psi;
    std::array<double, kNumMasks> Z{};
    for (unsigned T = 0; T <= full; ++T) psi[T].assign(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      const int q = nodes[j];
      const Eigen::VectorXd diff = quad.local.col(q) - xi;
      const auto F = bump_profile(diff.squaredNorm(), config_);
      if (F[0] == 0.0) continue;
      std::array<double, kNumMasks> sB{};
      for (unsigned B = 1; B <= full; ++B) {
        const int bits = std::popcount(B);
        if (bits == 1) {
          sB[B] = -2.0 * diff.dot(dxi[static_cast<std::size_t>(std::countr_zero(B))]);
        } else if (bits == 2) {
          const int l0 = std::countr_zero(B);
          const int l1 = std::countr_zero(B & (B - 1u));
          sB[B] = 2.0 * dxi[static_cast<std::size_t>(l0)].dot(dxi[static_cast<std::size_t>(l1)]);
        }
      }
      for (unsigned T = 0; T <= full; ++T) {
        double v = 0.0;
        for (const auto& pi : parts[T]) {
          double term = F[pi.size()];
          for (unsigned B : pi) term *= sB[B];
          v += term;
        }
        psi[T][j] = v;
      }
    }
    for (unsigned T = 0; T <= full; ++T) {
      double z = 0.0;
      for (std::size_t j = 0; j < n; ++j) z += quad.weights(nodes[j]) * psi[T][j];
      Z[T] = z;
    }
    if (!(Z[0] > 0)) throw ModelError("normalization integral vanishes on electrode " + std::to_string(m));

    // h_T: mixed derivative of 1/Z.
    std::array<double, kNumMasks> h{};
    for (unsigned T = 0; T <= full; ++T) {
      double v = 0.0;
      for (const auto& pi : parts[T]) {
        const int nb = static_cast<int>(pi.size());
        double term = (nb % 2 ? -1.0 : 1.0) * std::tgamma(nb + 1.0) * std::pow(Z[0], -nb - 1);
        for (unsigned B : pi) term *= Z[B];
        v += term;
      }
      h[T] = v;
    }

    // Leibniz over the exponential strength factor, then psi times 1/Z.
    const double scale = std::exp(iota.strength()(m) + config_.mu_zeta);
    for (std::size_t j = 0; j < n; ++j) {
      double total = 0.0;
      for (unsigned T = 0; T <= full; ++T) {
        double rho_factor = 1.0;
        for (int l = 0; l < k; ++l)
          if (!(T & (1u << l))) rho_factor *= dirs[static_cast<std::size_t>(l)].strength()(m);
        if (rho_factor == 0.0) continue;
        double f = 0.0;
        for (unsigned S = T;; S = (S - 1u) & T) {
          f += psi[S][j] * h[T & ~S];
          if (S == 0) break;
        }
        total += rho_factor * f;
      }
      out.zeta(nodes[j]) = scale * total;
    }
  }
  return out;
}

double Parametrization::surface_norm(const Eigen::VectorXd& zeta) const {
  return std::sqrt((disc_->quadrature.weights.array() * zeta.array().square()).sum());
}

LinearTauMap::LinearTauMap(std::shared_ptr<const Discretization> disc, ConductivityPair tau0,
                           std::vector<ConductivityPair> directions)
    : disc_(std::move(disc)), tau0_(std::move(tau0)), directions_(std::move(directions)) {
  layout_.contact = ContactModel::cem;
  layout_.clusters = static_cast<int>(directions_.size());
  for (const auto& d : directions_)
    if (d.sigma.size() != tau0_.sigma.size() || d.zeta.size() != tau0_.zeta.size())
      throw ModelError("direction does not match the base conductivity pair");
}

ConductivityPair LinearTauMap::combine(const Eigen::VectorXd& coeffs) const {
  ConductivityPair out{Eigen::VectorXd::Zero(tau0_.sigma.size()), Eigen::VectorXd::Zero(tau0_.zeta.size())};
  for (std::size_t p = 0; p < directions_.size(); ++p) {
    const double c = coeffs(static_cast<Eigen::Index>(p));
    if (c == 0.0) continue;
    out.sigma += c * directions_[p].sigma;
    out.zeta += c * directions_[p].zeta;
  }
  return out;
}

ConductivityPair LinearTauMap::dtau(const ParamVector& iota, std::span<const ParamVector> dirs) const {
  if (!(iota.layout() == layout_)) throw ModelError("parameter vector does not match the parametrization");
  if (dirs.size() > static_cast<std::size_t>(kMaxOrder)) throw ModelError("derivatives of order above 3 are not supported");
  if (dirs.empty()) return tau0_ + combine(iota.values());
  if (dirs.size() == 1) return combine(dirs[0].values());
  return {Eigen::VectorXd::Zero(tau0_.sigma.size()), Eigen::VectorXd::Zero(tau0_.zeta.size())};
}

}  // namespace scem
