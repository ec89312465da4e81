#include "scem/harness.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "scem/electrodes.hpp"
#include "scem/mesh.hpp"
#include "scem/partition.hpp"
#include "scem/rng.hpp"
#include "scem/textio.hpp"

namespace scem {

namespace {

struct CaseRow {
  const char* name;
  const char* mesh;
  ContactModel contact;
  NoiseLevels meas_noise;
  double meas_gamma_rho;
  double meas_gamma_kappa;
  double meas_lambda_kappa;
  NoiseLevels rec_noise;
  double rec_gamma_rho;
  double rec_gamma_kappa;
  double rec_lambda_kappa;
};

// Noise levels in the table are percentages; stored here as fractions.
constexpr CaseRow kTable[] = {
    {"C1", "L", ContactModel::smooth, {5e-5, 5e-4}, 0.1, 0.1, 1.0, {1e-4, 1e-3}, 0.1, 0.1, 1.0},
    {"C2", "L", ContactModel::smooth, {1e-4, 1e-3}, 0.3, 0.6, 0.6, {5e-4, 5e-3}, 0.3, 0.5, 0.7},
    {"C3", "H", ContactModel::cem, {5e-5, 5e-4}, 0.1, 0.1, 1.0, {1e-4, 1e-3}, 0.07, 0.1, 1.0},
    {"C4", "H", ContactModel::cem, {5e-5, 5e-4}, 0.3, 0.6, 0.6, {5e-4, 5e-3}, 0.2, 0.6, 0.6},
    {"C5", "H", ContactModel::cem, {5e-5, 5e-4}, 0.3, 0.6, 0.6, {5e-4, 5e-3}, 0.2, 0.5, 0.7},
    {"C6", "H", ContactModel::cem, {1e-4, 1e-3}, 0.3, 0.6, 0.6, {5e-4, 5e-3}, 0.2, 0.5, 0.7},
};

constexpr double kGammaXi = 0.02;

ParamVector zero_locations(ParamVector p) {
  const auto& l = p.layout();
  p.values().tail(l.size() - l.location_offset()).setZero();
  return p;
}

bool same_partition(const Partition& a, const Partition& b) {
  return &a == &b || (a.count() == b.count() && a.cluster_of == b.cluster_of);
}

Indicators failed_indicators() {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  return {nan, nan, nan, nan, false, ""};
}

double log10_or_nan(double v) { return v > 0 ? std::log10(v) : std::numeric_limits<double>::quiet_NaN(); }

}  // namespace

std::shared_ptr<const Discretization> make_disk_discretization(const DiskSetup& s) {
  SimplicialMesh mesh = generate_disk_mesh(s.level);
  ElectrodeLayout layout = define_electrodes(mesh, circle_midpoints(s.electrodes), s.electrode_radius, s.contact_radius);
  Partition partition = cluster_partition(mesh, s.clusters, s.partition_seed);
  return Discretization::create(std::move(mesh), std::move(layout), std::move(partition));
}

void ExperimentCase::validate() const {
  model.validate();
  for (const SideSpec* side : {&measurement, &reconstruction}) {
    if (side->mesh != "L" && side->mesh != "H") throw std::invalid_argument("mesh id must be L or H");
    if (side->noise.delta1 < 0 || side->noise.delta2 < 0) throw std::invalid_argument("noise levels must be nonnegative");
    const auto& p = side->prior;
    if (!(p.gamma_kappa > 0) || !(p.lambda_kappa > 0) || !(p.gamma_rho > 0) || !(p.gamma_xi > 0))
      throw std::invalid_argument("prior parameters must be positive");
  }
  if (reconstruction.mesh != "L") throw std::invalid_argument("reconstructions use the coarse mesh");
  if (reconstruction.contact != ContactModel::smooth)
    throw std::invalid_argument("reconstructions use the smooth contact model");
  if (samples < 1) throw std::invalid_argument("sample count must be positive");
  if (coarse.electrodes != fine.electrodes) throw std::invalid_argument("both meshes need the same electrode count");
}

std::vector<std::string> table_case_names() {
  std::vector<std::string> names;
  for (const auto& row : kTable) names.emplace_back(row.name);
  return names;
}

ExperimentCase table_case(const std::string& name) {
  for (const auto& row : kTable) {
    if (name != row.name) continue;
    ExperimentCase c;
    c.name = row.name;
    c.measurement.mesh = row.mesh;
    c.measurement.contact = row.contact;
    c.measurement.noise = row.meas_noise;
    c.measurement.prior = {row.meas_gamma_kappa, row.meas_lambda_kappa, row.meas_gamma_rho, kGammaXi};
    c.reconstruction.mesh = "L";
    c.reconstruction.contact = ContactModel::smooth;
    c.reconstruction.noise = row.rec_noise;
    c.reconstruction.prior = {row.rec_gamma_kappa, row.rec_lambda_kappa, row.rec_gamma_rho, kGammaXi};
    return c;
  }
  throw std::invalid_argument("unknown case '" + name + "'");
}

Eigen::MatrixXd ForwardModel::lambda(const ParamVector& iota) const {
  const AssembledSystem sys(param->discretization_ptr(), basis, param->tau(iota));
  return sys.forward_map();
}

ForwardModel make_forward_model(std::shared_ptr<const Discretization> disc, const ModelConfig& config,
                                ContactModel contact) {
  ForwardModel fm;
  fm.basis = CurrentBasis::create(disc->layout.count());
  fm.param = std::make_shared<const Parametrization>(std::move(disc), config, contact);
  return fm;
}

CaseModels build_case_models(const ExperimentCase& c, double prior_scale) {
  c.validate();
  const auto coarse = make_disk_discretization(c.coarse);
  const auto fine = c.measurement.mesh == "H" ? make_disk_discretization(c.fine) : coarse;
  CaseModels m;
  m.measurement = make_forward_model(fine, c.model, c.measurement.contact);
  m.reconstruction = make_forward_model(coarse, c.model, ContactModel::smooth);
  PriorSettings mp = c.measurement.prior;
  PriorSettings rp = c.reconstruction.prior;
  mp.gamma_kappa *= prior_scale;
  mp.gamma_rho *= prior_scale;
  rp.gamma_kappa *= prior_scale;
  rp.gamma_rho *= prior_scale;
  m.measurement_prior = build_prior(m.measurement.param->layout(), fine->partition, mp);
  m.reconstruction_prior = build_prior(m.reconstruction.param->layout(), coarse->partition, rp);
  m.measurement_lambda0 = m.measurement.lambda(m.measurement.param->zero());
  m.measurement_noise = build_noise_cov(c.measurement.noise, m.measurement_lambda0, m.measurement.basis);
  const Eigen::MatrixXd rec_lambda0 = m.reconstruction.lambda(m.reconstruction.param->zero());
  m.reconstruction_noise = build_noise_cov(c.reconstruction.noise, rec_lambda0, m.reconstruction.basis);
  return m;
}

ParamVector draw_from_prior(const PriorModel& prior, std::uint64_t seed, std::uint64_t stream) {
  PhiloxStream rng(seed, stream);
  const Eigen::VectorXd w = rng.normal_vector(prior.layout.size());
  return ParamVector(prior.layout, prior.factor * w);
}

MeasurementRecord simulate_measurements(const ForwardModel& model, const ParamVector& target,
                                        const NoiseModel& noise, std::uint64_t seed, std::uint64_t stream) {
  if (!model.param->admissible(target)) throw ModelError("target parameter is inadmissible");
  const auto& basis = model.basis;
  MeasurementRecord r;
  r.target = target;
  r.seed = seed;
  r.stream = stream;
  r.noiseless = model.lambda(target);
  r.potentials = physical_potentials(r.noiseless, basis);

  PhiloxStream rng(seed, stream);
  Eigen::MatrixXd theta(basis.electrodes(), basis.patterns());
  for (Eigen::Index m = 0; m < theta.cols(); ++m)
    for (Eigen::Index j = 0; j < theta.rows(); ++j) theta(j, m) = std::sqrt(noise.pattern_variances(j, m)) * rng.normal();
  theta.rowwise() -= theta.colwise().mean();
  r.noisy_potentials = r.potentials + theta;
  // B^+ U Bhat^+ B equals Lambda exactly, so only the noise goes through the map.
  r.data = r.noiseless + data_from_potentials(theta, basis);
  return r;
}

Indicators indicators(const ForwardModel& reconstruction, const ParamVector& estimate, const Eigen::MatrixXd& data,
                      const Eigen::MatrixXd& reference_lambda0, const Partition& target_partition,
                      const Eigen::VectorXd& target_kappa) {
  Indicators ind;
  bool clamped = false;
  const ParamVector est = reconstruction.param->clamp(estimate, &clamped);
  ind.clamped = clamped;
  ind.res = (reconstruction.lambda(est) - data).norm();
  const double ref = (reference_lambda0 - data).norm();
  ind.res_rel = ind.res / ref;
  const Partition& rec_partition = reconstruction.param->discretization().partition;
  const Eigen::VectorXd kappa = est.kappa();
  const Eigen::VectorXd projected = same_partition(rec_partition, target_partition)
                                        ? kappa
                                        : nearest_neighbor_project(rec_partition, kappa, target_partition);
  ind.err = piecewise_l2_norm(target_partition, projected - target_kappa);
  ind.err_rel = ind.err / piecewise_l2_norm(target_partition, target_kappa);
  return ind;
}

std::vector<std::string> all_methods() { return {"0", "1", "2", "3", "1,1", "1,1,1"}; }

Reconstructor::Reconstructor(const ForwardModel& model, const PriorModel& prior, const NoiseModel& noise)
    : model_(model), factory_(tikhonov_factory(prior, noise)) {
  stack_ = std::make_shared<DerivativeStack>(model_.param, model_.basis, model_.param->zero());
  jacobian_ = scem::jacobian(*stack_);
  inverse_ = factory_(jacobian_);
}

ReversionResult Reconstructor::revert(const Eigen::MatrixXd& data, int order) const {
  return scem::revert(*stack_, inverse_, data, order);
}

SequentialResult Reconstructor::sequential(const Eigen::MatrixXd& data, int steps) const {
  return sequential_linearize(model_.param, model_.basis, factory_, data, steps, stack_.get(), &inverse_);
}

MethodEstimates Reconstructor::run(const Eigen::MatrixXd& data, const std::vector<std::string>& methods) const {
  int order = 0;
  int steps = 0;
  for (const auto& m : methods) {
    if (m == "0") continue;
    if (m == "1" || m == "2" || m == "3")
      order = std::max(order, m[0] - '0');
    else if (m == "1,1")
      steps = std::max(steps, 2);
    else if (m == "1,1,1")
      steps = std::max(steps, 3);
    else
      throw std::invalid_argument("unknown method '" + m + "'");
  }
  // A failing method must not take the others down with it.
  ReversionResult rev;
  SequentialResult seq;
  std::string rev_failure, seq_failure;
  if (order > 0) try {
      rev = revert(data, order);
    } catch (const std::exception& e) {
      rev_failure = e.what();
    }
  if (steps > 0) try {
      seq = sequential(data, steps);
    } catch (const std::exception& e) {
      seq_failure = e.what();
    }
  MethodEstimates out;
  out.methods = methods;
  for (const auto& m : methods) {
    if (m == "0") {
      out.estimates.push_back(model_.param->zero());
      out.clamped.push_back(0);
      out.failure.emplace_back();
    } else if (m.size() == 1) {
      out.failure.push_back(rev_failure);
      out.estimates.push_back(rev_failure.empty() ? rev.upsilon[static_cast<std::size_t>(m[0] - '1')]
                                                  : model_.param->zero());
      out.clamped.push_back(0);
    } else {
      const std::size_t k = m == "1,1" ? 1 : 2;
      out.failure.push_back(seq_failure);
      if (!seq_failure.empty()) {
        out.estimates.push_back(model_.param->zero());
        out.clamped.push_back(0);
        continue;
      }
      out.estimates.push_back(seq.iterates[k]);
      char any = 0;
      for (std::size_t j = 0; j <= k; ++j) any = static_cast<char>(any | seq.clamped[j]);
      out.clamped.push_back(any);
    }
  }
  return out;
}

namespace {

Indicators evaluate_method(const ForwardModel& rec, const MethodEstimates& est, std::size_t k,
                           const Eigen::MatrixXd& data, const Eigen::MatrixXd& lambda0,
                           const Partition& target_partition, const Eigen::VectorXd& target_kappa) {
  Indicators v = failed_indicators();
  if (!est.failure[k].empty()) {
    v.failure = est.failure[k];
    return v;
  }
  try {
    v = indicators(rec, est.estimates[k], data, lambda0, target_partition, target_kappa);
    v.clamped = v.clamped || est.clamped[k];
  } catch (const std::exception& e) {
    v.failure = e.what();
  }
  return v;
}

}  // namespace

std::vector<int> retained_samples(const std::vector<SampleRow>& samples, double keep_fraction) {
  std::vector<int> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    const double ra = samples[static_cast<std::size_t>(a)].initial_residual;
    const double rb = samples[static_cast<std::size_t>(b)].initial_residual;
    if (std::isnan(ra) != std::isnan(rb)) return std::isnan(rb);
    if (ra != rb) return ra < rb;
    return samples[static_cast<std::size_t>(a)].index < samples[static_cast<std::size_t>(b)].index;
  });
  const auto keep = static_cast<std::size_t>(std::floor(keep_fraction * static_cast<double>(samples.size()) + 1e-9));
  std::vector<int> out;
  for (std::size_t i = 0; i < keep && i < order.size(); ++i) out.push_back(samples[static_cast<std::size_t>(order[i])].index);
  std::sort(out.begin(), out.end());
  return out;
}

Experiment1Result experiment1(const ExperimentCase& c, const std::vector<std::string>& methods, int samples) {
  if (samples < 1) throw std::invalid_argument("sample count must be positive");
  const CaseModels models = build_case_models(c);
  const Reconstructor rec(models.reconstruction, models.reconstruction_prior, models.reconstruction_noise);
  const Eigen::MatrixXd lambda0 = rec.stack().lambda();
  const Partition& target_partition = models.measurement.param->discretization().partition;

  Experiment1Result result;
  result.case_name = c.name;
  result.seed = c.seed;
  result.methods = methods;
  result.samples.resize(static_cast<std::size_t>(samples));

#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < samples; ++i) {
    SampleRow& row = result.samples[static_cast<std::size_t>(i)];
    row.index = i;
    row.initial_residual = std::numeric_limits<double>::quiet_NaN();
    row.values.assign(methods.size(), failed_indicators());
    try {
      const auto stream = static_cast<std::uint64_t>(i);
      const ParamVector target = zero_locations(draw_from_prior(models.measurement_prior, c.seed, 2 * stream));
      const MeasurementRecord record =
          simulate_measurements(models.measurement, target, models.measurement_noise, c.seed, 2 * stream + 1);
      row.initial_residual = (lambda0 - record.data).norm();
      const MethodEstimates est = rec.run(record.data, methods);
      for (std::size_t k = 0; k < methods.size(); ++k)
        row.values[k] =
            evaluate_method(models.reconstruction, est, k, record.data, lambda0, target_partition, target.kappa());
    } catch (const std::exception& e) {
      row.failure = e.what();
    }
  }

  result.retained = retained_samples(result.samples);
  for (std::size_t k = 0; k < methods.size(); ++k) {
    MethodSummary s;
    s.method = methods[k];
    double sr = 0, se = 0;
    int n = 0;
    for (int i : result.retained) {
      const auto& row = result.samples[static_cast<std::size_t>(i)];
      const auto& v = row.values[k];
      if (!std::isfinite(v.res_rel) || !std::isfinite(v.err)) continue;
      sr += v.res_rel;
      se += v.err;
      s.clamped += v.clamped ? 1 : 0;
      ++n;
    }
    s.mean_res_rel = n ? sr / n : std::numeric_limits<double>::quiet_NaN();
    s.mean_err = n ? se / n : std::numeric_limits<double>::quiet_NaN();
    s.log10_mean_res_rel = log10_or_nan(s.mean_res_rel);
    s.log10_mean_err = log10_or_nan(s.mean_err);
    result.summary.push_back(s);
  }
  return result;
}

void write_experiment1_samples(std::ostream& out, const Experiment1Result& r) {
  std::vector<char> kept(r.samples.size(), 0);
  for (int i : r.retained) kept[static_cast<std::size_t>(i)] = 1;
  out << "case,seed,sample,initial_residual,retained,method,res,res_rel,err,err_rel,clamped,failure\n";
  for (const auto& row : r.samples)
    for (std::size_t k = 0; k < r.methods.size(); ++k) {
      const auto& v = row.values[k];
      out << r.case_name << ',' << r.seed << ',' << row.index << ',' << format_double(row.initial_residual) << ','
          << int(kept[static_cast<std::size_t>(row.index)]) << ",\"" << r.methods[k] << "\"," << format_double(v.res)
          << ',' << format_double(v.res_rel) << ',' << format_double(v.err) << ',' << format_double(v.err_rel) << ','
          << int(v.clamped) << ",\"" << (row.failure.empty() ? v.failure : row.failure) << "\"\n";
    }
}

void write_experiment1_summary(std::ostream& out, const Experiment1Result& r) {
  out << "case,seed,method,retained,log10_mean_res_rel,log10_mean_err,mean_res_rel,mean_err,clamped\n";
  for (const auto& s : r.summary)
    out << r.case_name << ',' << r.seed << ",\"" << s.method << "\"," << r.retained.size() << ','
        << format_double(s.log10_mean_res_rel) << ',' << format_double(s.log10_mean_err) << ','
        << format_double(s.mean_res_rel) << ',' << format_double(s.mean_err) << ',' << s.clamped << '\n';
}

Experiment2Result experiment2(const ExperimentCase& c, const std::vector<double>& s_grid, std::uint64_t draw_seed) {
  for (double s : s_grid)
    if (!(s > 0)) throw std::invalid_argument("scaling factors must be positive");
  const CaseModels models = build_case_models(c);
  const Partition& target_partition = models.measurement.param->discretization().partition;
  const ParamVector base_target = zero_locations(draw_from_prior(models.measurement_prior, draw_seed, 0));
  const Eigen::MatrixXd lambda0 = models.reconstruction.lambda(models.reconstruction.param->zero());
  const std::vector<std::string> methods = all_methods();

  Experiment2Result result;
  result.case_name = c.name;
  result.seed = draw_seed;
  result.methods = methods;
  result.points.resize(s_grid.size());

#pragma omp parallel for schedule(dynamic)
  for (std::size_t k = 0; k < s_grid.size(); ++k) {
    Experiment2Point& pt = result.points[k];
    pt.s = s_grid[k];
    pt.values.assign(methods.size(), failed_indicators());
    pt.noise_floor = std::numeric_limits<double>::quiet_NaN();
    try {
      const ParamVector target = pt.s * base_target;
      // One noise realization for every s.
      const MeasurementRecord record =
          simulate_measurements(models.measurement, target, models.measurement_noise, draw_seed, 1);
      pt.noise_floor = (record.data - record.noiseless).norm();
      PriorSettings ps = c.reconstruction.prior;
      ps.gamma_kappa *= pt.s;
      ps.gamma_rho *= pt.s;
      const PriorModel prior =
          build_prior(models.reconstruction.param->layout(), models.reconstruction.param->discretization().partition, ps);
      const Reconstructor rec(models.reconstruction, prior, models.reconstruction_noise);
      const MethodEstimates est = rec.run(record.data, methods);
      for (std::size_t j = 0; j < methods.size(); ++j)
        pt.values[j] =
            evaluate_method(models.reconstruction, est, j, record.data, lambda0, target_partition, target.kappa());
    } catch (const std::exception& e) {
      pt.failure = e.what();
    }
  }
  return result;
}

void write_experiment2(std::ostream& out, const Experiment2Result& r) {
  out << "case,seed,s,method,res,err,res_rel,err_rel,noise_floor,clamped,failure\n";
  for (const auto& pt : r.points)
    for (std::size_t k = 0; k < r.methods.size(); ++k) {
      const auto& v = pt.values[k];
      out << r.case_name << ',' << r.seed << ',' << format_double(pt.s) << ",\"" << r.methods[k] << "\","
          << format_double(v.res) << ',' << format_double(v.err) << ',' << format_double(v.res_rel) << ','
          << format_double(v.err_rel) << ',' << format_double(pt.noise_floor) << ',' << int(v.clamped) << ",\""
          << (pt.failure.empty() ? v.failure : pt.failure) << "\"\n";
    }
}

}  // namespace scem
