#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "scem/calculus.hpp"
#include "scem/fem.hpp"
#include "scem/inversion.hpp"
#include "scem/model.hpp"

namespace scem {

/// Disk discretization recipe: mesh refinement, clusters, electrode patches.
struct DiskSetup {
  int level = 3;
  int clusters = 80;
  int electrodes = 16;
  double electrode_radius = 0.15;
  double contact_radius = 0.10;
  std::uint64_t partition_seed = 7;
};

std::shared_ptr<const Discretization> make_disk_discretization(const DiskSetup& setup);

/// One side (measurement or reconstruction) of an experiment.
struct SideSpec {
  std::string mesh = "L";  ///< "L" (coarse) or "H" (fine)
  ContactModel contact = ContactModel::smooth;
  NoiseLevels noise;
  PriorSettings prior;
};

struct ExperimentCase {
  std::string name = "C1";
  SideSpec measurement;
  SideSpec reconstruction;
  ModelConfig model;
  DiskSetup coarse{3, 80, 16, 0.15, 0.10, 7};
  DiskSetup fine{4, 200, 16, 0.15, 0.10, 11};
  int samples = 100;
  std::uint64_t seed = 20240601;

  void validate() const;
};

/// Table defaults for "C1" .. "C6"; noise levels are given as fractions.
ExperimentCase table_case(const std::string& name);
std::vector<std::string> table_case_names();

/// Parametrization plus current basis: evaluates Lambda(iota).
struct ForwardModel {
  std::shared_ptr<const Parametrization> param;
  CurrentBasis basis;

  Eigen::MatrixXd lambda(const ParamVector& iota) const;
};

ForwardModel make_forward_model(std::shared_ptr<const Discretization> disc, const ModelConfig& config,
                                ContactModel contact);

/// Everything an experiment needs that does not depend on the sample.
struct CaseModels {
  ForwardModel measurement;
  ForwardModel reconstruction;
  PriorModel measurement_prior;
  PriorModel reconstruction_prior;
  Eigen::MatrixXd measurement_lambda0;
  NoiseModel measurement_noise;
  NoiseModel reconstruction_noise;
};

/// `prior_scale` multiplies gamma_kappa and gamma_rho on both sides.
CaseModels build_case_models(const ExperimentCase& c, double prior_scale = 1.0);

/// L w with w standard normal from the Philox stream (seed, stream).
ParamVector draw_from_prior(const PriorModel& prior, std::uint64_t seed, std::uint64_t stream = 0);

struct MeasurementRecord {
  ParamVector target;
  Eigen::MatrixXd noiseless;         ///< Lambda(target)
  Eigen::MatrixXd potentials;        ///< U^(m), one column per pattern
  Eigen::MatrixXd noisy_potentials;  ///< V^(m), mean-free columns
  Eigen::MatrixXd data;              ///< Upsilon
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
};

MeasurementRecord simulate_measurements(const ForwardModel& model, const ParamVector& target,
                                        const NoiseModel& noise, std::uint64_t seed, std::uint64_t stream);

struct Indicators {
  double res = 0.0;
  double res_rel = 0.0;
  double err = 0.0;
  double err_rel = 0.0;
  bool clamped = false;
  std::string failure;  ///< nonempty if the estimate could not be evaluated
};

/// Residuals of `estimate` against `data` and the kappa error against the
/// target, projecting the estimate onto the target partition when they differ.
Indicators indicators(const ForwardModel& reconstruction, const ParamVector& estimate, const Eigen::MatrixXd& data,
                      const Eigen::MatrixXd& reference_lambda0, const Partition& target_partition,
                      const Eigen::VectorXd& target_kappa);

/// Reconstruction methods: "0", "1", "2", "3", "1,1", "1,1,1".
std::vector<std::string> all_methods();

/// All method estimates for one data matrix, sharing the stack at the origin.
struct MethodEstimates {
  std::vector<std::string> methods;
  std::vector<ParamVector> estimates;
  std::vector<char> clamped;
  std::vector<std::string> failure;  ///< per method; empty on success
};

class Reconstructor {
public:
  Reconstructor(const ForwardModel& model, const PriorModel& prior, const NoiseModel& noise);

  MethodEstimates run(const Eigen::MatrixXd& data, const std::vector<std::string>& methods) const;
  ReversionResult revert(const Eigen::MatrixXd& data, int order) const;
  SequentialResult sequential(const Eigen::MatrixXd& data, int steps) const;
  const DerivativeStack& stack() const { return *stack_; }
  const Eigen::MatrixXd& jacobian() const { return jacobian_; }
  const ForwardModel& model() const { return model_; }

private:
  ForwardModel model_;
  InverseFactory factory_;
  std::shared_ptr<DerivativeStack> stack_;
  Eigen::MatrixXd jacobian_;
  InverseOperator inverse_;
};

struct SampleRow {
  int index = 0;
  double initial_residual = 0.0;  ///< |Lambda(0) - Upsilon|_F
  std::vector<Indicators> values;  ///< per method
  std::string failure;
};

struct MethodSummary {
  std::string method;
  double log10_mean_res_rel = 0.0;
  double log10_mean_err = 0.0;
  double mean_res_rel = 0.0;
  double mean_err = 0.0;
  int clamped = 0;
};

struct Experiment1Result {
  std::string case_name;
  std::uint64_t seed = 0;
  std::vector<std::string> methods;
  std::vector<SampleRow> samples;  ///< by draw index
  std::vector<int> retained;       ///< draw indices kept for the means
  std::vector<MethodSummary> summary;
};

/// Keeps the bottom 80% of samples by initial residual, ties by index.
std::vector<int> retained_samples(const std::vector<SampleRow>& samples, double keep_fraction = 0.8);

Experiment1Result experiment1(const ExperimentCase& c, const std::vector<std::string>& methods, int samples);

void write_experiment1_samples(std::ostream& out, const Experiment1Result& r);
void write_experiment1_summary(std::ostream& out, const Experiment1Result& r);

struct Experiment2Point {
  double s = 0.0;
  double noise_floor = 0.0;  ///< |Upsilon - Lambda(target)|_F
  std::vector<Indicators> values;
  std::string failure;
};

struct Experiment2Result {
  std::string case_name;
  std::uint64_t seed = 0;
  std::vector<std::string> methods;
  std::vector<Experiment2Point> points;
};

Experiment2Result experiment2(const ExperimentCase& c, const std::vector<double>& s_grid, std::uint64_t draw_seed);

void write_experiment2(std::ostream& out, const Experiment2Result& r);

}  // namespace scem
