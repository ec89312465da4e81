#pragma once

#include <iosfwd>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "scem/electrodes.hpp"
#include "scem/mesh.hpp"
#include "scem/partition.hpp"
#include "scem/quadrature.hpp"

namespace scem {

class ModelError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

enum class ContactModel { cem, smooth };

struct ModelConfig {
  double mu_kappa = -3.0;
  double mu_zeta = -3.0;
  double R = 0.6;  ///< contact width in local electrode coordinates
  double a = 4.0;  ///< contact shape

  void validate() const;
};

/// Sizes of the parameter blocks. Storage order is kappa, then one strength
/// per electrode (theta or rho), then the electrode locations xi (smooth only,
/// `location_dim` entries per electrode, electrode-major).
struct ParamLayout {
  ContactModel contact = ContactModel::smooth;
  int clusters = 0;
  int electrodes = 0;
  int location_dim = 0;

  Eigen::Index size() const { return clusters + electrodes + electrodes * location_dim; }
  Eigen::Index strength_offset() const { return clusters; }
  Eigen::Index location_offset() const { return clusters + electrodes; }
  bool operator==(const ParamLayout&) const = default;
};

/// A parameter vector iota or a perturbation eta, with block accessors.
class ParamVector {
public:
  ParamVector() = default;
  explicit ParamVector(const ParamLayout& layout);
  ParamVector(const ParamLayout& layout, Eigen::VectorXd values);

  const ParamLayout& layout() const { return layout_; }
  Eigen::Index size() const { return values_.size(); }
  Eigen::VectorXd& values() { return values_; }
  const Eigen::VectorXd& values() const { return values_; }

  auto kappa() { return values_.segment(0, layout_.clusters); }
  auto kappa() const { return values_.segment(0, layout_.clusters); }
  auto strength() { return values_.segment(layout_.strength_offset(), layout_.electrodes); }
  auto strength() const { return values_.segment(layout_.strength_offset(), layout_.electrodes); }
  auto location(int m) { return values_.segment(layout_.location_offset() + m * layout_.location_dim, layout_.location_dim); }
  auto location(int m) const {
    return values_.segment(layout_.location_offset() + m * layout_.location_dim, layout_.location_dim);
  }

  ParamVector& operator+=(const ParamVector& o);
  ParamVector& operator-=(const ParamVector& o);
  ParamVector& operator*=(double s);

private:
  ParamLayout layout_;
  Eigen::VectorXd values_;
};

ParamVector operator+(ParamVector a, const ParamVector& b);
ParamVector operator-(ParamVector a, const ParamVector& b);
ParamVector operator*(double s, ParamVector a);

void write_params(std::ostream& out, const ParamVector& p);
/// Reads a flat vector written by write_params; the layout must be supplied.
ParamVector read_params(std::istream& in, const ParamLayout& layout);

/// Domain conductivity per cell and contact admittivity per surface
/// quadrature node. Also used for perturbations (delta sigma, delta zeta).
struct ConductivityPair {
  Eigen::VectorXd sigma;
  Eigen::VectorXd zeta;

  ConductivityPair& operator+=(const ConductivityPair& o);
  ConductivityPair& operator*=(double s);
};

ConductivityPair operator+(ConductivityPair a, const ConductivityPair& b);
ConductivityPair operator-(ConductivityPair a, const ConductivityPair& b);
ConductivityPair operator*(double s, ConductivityPair a);

/// Geometry shared by every model built on one mesh.
struct Discretization {
  SimplicialMesh mesh;
  ElectrodeLayout layout;
  Partition partition;
  SurfaceQuadrature quadrature;
  std::vector<ElectrodeImage> images;

  static std::shared_ptr<const Discretization> create(SimplicialMesh mesh, ElectrodeLayout layout,
                                                      Partition partition);
};

Eigen::VectorXd eval_sigma(const ModelConfig& config, const SimplicialMesh& mesh, const Partition& partition,
                           const Eigen::VectorXd& kappa);
Eigen::VectorXd eval_zeta_cem(const ModelConfig& config, const SurfaceQuadrature& quad, const Eigen::VectorXd& theta);
/// psi_xi(y) = exp(a - a / (1 - |y - xi|^2 / R^2)) inside the disk of radius R, 0 outside.
double bump(const Eigen::VectorXd& y, const Eigen::VectorXd& xi, const ModelConfig& config);
/// Throws ModelError if some location is inadmissible.
Eigen::VectorXd eval_zeta_smooth(const ModelConfig& config, const Discretization& disc, const ParamVector& iota);

/// Disk D(xi, R) inside the electrode image, with the 1e-9 margin.
bool location_admissible(const ElectrodeImage& image, const ModelConfig& config, const Eigen::VectorXd& xi);

inline constexpr double kAdmissibilityMargin = 1e-9;

/// A map iota -> tau(iota) with closed-form directional derivatives.
class TauMap {
public:
  virtual ~TauMap() = default;

  virtual const ParamLayout& layout() const = 0;
  virtual const std::shared_ptr<const Discretization>& discretization_ptr() const = 0;
  /// k-th mixed directional derivative, k = directions.size() in 0..3
  /// (k = 0 returns tau).
  virtual ConductivityPair dtau(const ParamVector& iota, std::span<const ParamVector> directions) const = 0;

  const Discretization& discretization() const { return *discretization_ptr(); }
  ParamVector zero() const { return ParamVector(layout()); }
  ConductivityPair tau(const ParamVector& iota) const { return dtau(iota, std::span<const ParamVector>{}); }
  ConductivityPair dtau(const ParamVector& iota, const ParamVector& a) const;
  ConductivityPair dtau(const ParamVector& iota, const ParamVector& a, const ParamVector& b) const;
  ConductivityPair dtau(const ParamVector& iota, const ParamVector& a, const ParamVector& b,
                        const ParamVector& c) const;
};

/// The log-parametrization of the domain conductivity combined with the CEM
/// or smooth contact parametrization.
class Parametrization : public TauMap {
public:
  Parametrization(std::shared_ptr<const Discretization> disc, ModelConfig config, ContactModel contact);

  using TauMap::dtau;
  const ParamLayout& layout() const override { return layout_; }
  const std::shared_ptr<const Discretization>& discretization_ptr() const override { return disc_; }
  ConductivityPair dtau(const ParamVector& iota, std::span<const ParamVector> directions) const override;

  const ModelConfig& config() const { return config_; }
  ContactModel contact() const { return layout_.contact; }

  bool admissible(const ParamVector& iota) const;
  /// Moves inadmissible locations along the ray toward the image center until
  /// admissible; `changed` reports whether anything moved.
  ParamVector clamp(const ParamVector& iota, bool* changed = nullptr) const;

  /// sqrt of the surface integral of zeta^2.
  double surface_norm(const Eigen::VectorXd& zeta) const;

private:
  void check(const ParamVector& p) const;

  std::shared_ptr<const Discretization> disc_;
  ModelConfig config_;
  ParamLayout layout_;
  Eigen::VectorXd contact_area_;
};

/// tau(iota) = tau0 + sum_p iota_p * tau_p. Second and higher derivatives
/// vanish, which makes the derivative formulas collapse to plain powers of P.
class LinearTauMap : public TauMap {
public:
  LinearTauMap(std::shared_ptr<const Discretization> disc, ConductivityPair tau0,
               std::vector<ConductivityPair> directions);

  using TauMap::dtau;
  const ParamLayout& layout() const override { return layout_; }
  const std::shared_ptr<const Discretization>& discretization_ptr() const override { return disc_; }
  ConductivityPair dtau(const ParamVector& iota, std::span<const ParamVector> directions) const override;

private:
  ConductivityPair combine(const Eigen::VectorXd& coeffs) const;

  std::shared_ptr<const Discretization> disc_;
  ConductivityPair tau0_;
  std::vector<ConductivityPair> directions_;
  ParamLayout layout_;
};

}  // namespace scem
