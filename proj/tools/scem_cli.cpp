// Batch front end: meshes, simulated measurements, reconstructions and the
// two experiment drivers. Records are JSON, tables are CSV.

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "scem/config.hpp"
#include "scem/electrodes.hpp"
#include "scem/harness.hpp"
#include "scem/mesh.hpp"
#include "scem/partition.hpp"
#include "scem/textio.hpp"

using namespace scem;
using nlohmann::json;

namespace {

struct CaseArgs {
  std::string name = "C1";
  std::string config;
  int level = -1;
  int clusters = -1;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

void add_case_options(CLI::App* app, CaseArgs& a) {
  app->add_option("--case", a.name, "table case C1..C6")->check(CLI::IsMember(table_case_names()));
  app->add_option("--config", a.config, "JSON case file (overrides --case)")->check(CLI::ExistingFile);
  app->add_option("--level", a.level, "refinement level of the coarse mesh");
  app->add_option("--clusters", a.clusters, "cluster count of the coarse mesh");
  app->add_option("--seed", a.seed, "experiment seed")->each([&a](const std::string&) { a.seed_set = true; });
}

ExperimentCase resolve_case(const CaseArgs& a) {
  ExperimentCase c = a.config.empty() ? table_case(a.name) : load_case(a.config);
  if (a.level >= 0) c.coarse.level = a.level;
  if (a.clusters > 0) c.coarse.clusters = a.clusters;
  if (a.seed_set) c.seed = a.seed;
  c.validate();
  return c;
}

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    rows.push_back(std::move(r));
  }
  return rows;
}

Eigen::MatrixXd matrix_from(const json& j, Eigen::Index n) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != n) throw std::runtime_error("data matrix has the wrong size");
  Eigen::MatrixXd m(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const json& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != n) throw std::runtime_error("data matrix row has the wrong size");
    for (Eigen::Index k = 0; k < n; ++k) m(i, k) = row[static_cast<std::size_t>(k)].get<double>();
  }
  return m;
}

json vector_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

ParamVector params_from(const json& j, const ParamLayout& layout) {
  const auto v = j.get<std::vector<double>>();
  if (static_cast<Eigen::Index>(v.size()) != layout.size()) throw std::runtime_error("parameter vector length does not match the model");
  return ParamVector(layout, Eigen::Map<const Eigen::VectorXd>(v.data(), layout.size()));
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return json::parse(in);
}

void write_json(const std::string& path, const json& j) {
  if (path.empty() || path == "-") {
    std::cout << j.dump(1) << '\n';
    return;
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << j.dump(1) << '\n';
}

template <class F>
void with_output(const std::string& path, F&& write) {
  if (path.empty() || path == "-") {
    write(std::cout);
    return;
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  write(out);
}

std::vector<std::string> split_methods(const std::string& s) {
  if (s == "all") return all_methods();
  // Methods contain commas themselves, so the list separator is ';'.
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ';'))
    if (!item.empty()) out.push_back(item);
  return out;
}

// "a:b:n" is n log-spaced points from a to b; otherwise a comma list.
std::vector<double> parse_grid(const std::string& s) {
  std::vector<double> out;
  if (s.find(':') != std::string::npos) {
    std::stringstream ss(s);
    std::string a, b, n;
    std::getline(ss, a, ':');
    std::getline(ss, b, ':');
    std::getline(ss, n, ':');
    const double lo = parse_double(a), hi = parse_double(b);
    const int count = std::stoi(n);
    if (!(lo > 0) || !(hi > lo) || count < 2) throw std::runtime_error("grid must be lo:hi:n with 0 < lo < hi, n >= 2");
    for (int i = 0; i < count; ++i) out.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / (count - 1)));
    return out;
  }
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(parse_double(item));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Smoothened complete electrode model: simulation and series reversion reconstructions"};
  app.require_subcommand(1);

  // mesh gen | mesh cluster
  auto* mesh = app.add_subcommand("mesh", "disk meshes and cluster partitions");
  mesh->require_subcommand(1);
  int gen_level = 3;
  std::string gen_out;
  auto* gen = mesh->add_subcommand("gen", "refined triangulation of the unit disk");
  gen->add_option("--level", gen_level, "refinement level (0..8)");
  gen->add_option("-o,--out", gen_out, "mesh file")->required();

  std::string cl_mesh, cl_out;
  int cl_count = 80;
  std::uint64_t cl_seed = 7;
  auto* cluster = mesh->add_subcommand("cluster", "face-connected cluster partition of a mesh");
  cluster->add_option("--mesh", cl_mesh, "mesh file")->required()->check(CLI::ExistingFile);
  cluster->add_option("--clusters", cl_count, "number of clusters");
  cluster->add_option("--seed", cl_seed, "clustering seed");
  cluster->add_option("-o,--out", cl_out, "partition file")->required();

  // case: print the resolved configuration
  CaseArgs show_args;
  auto* show = app.add_subcommand("case", "print a case configuration as JSON");
  add_case_options(show, show_args);

  // simulate
  CaseArgs sim_args;
  int sim_sample = 0;
  std::string sim_out;
  auto* sim = app.add_subcommand("simulate", "draw a target from the prior and simulate noisy data");
  add_case_options(sim, sim_args);
  sim->add_option("--sample", sim_sample, "draw index (same streams as experiment1)");
  sim->add_option("-o,--out", sim_out, "measurement record (JSON)");

  // reconstruct
  CaseArgs rec_args;
  std::string rec_in, rec_out;
  int rec_order = 0, rec_steps = 0;
  auto* rec = app.add_subcommand("reconstruct", "estimate the parameter from a measurement record");
  add_case_options(rec, rec_args);
  rec->add_option("-i,--record", rec_in, "measurement record from 'simulate'")->required()->check(CLI::ExistingFile);
  auto* order_opt = rec->add_option("--order", rec_order, "series reversion order")->check(CLI::Range(1, 3));
  auto* seq_opt = rec->add_option("--sequential", rec_steps, "sequential linearization steps")->check(CLI::Range(1, 3));
  order_opt->excludes(seq_opt);
  rec->add_option("-o,--out", rec_out, "estimate record (JSON)");

  // indicators
  CaseArgs ind_args;
  std::string ind_record, ind_estimate, ind_out;
  auto* ind = app.add_subcommand("indicators", "residual and error of an estimate against a record");
  add_case_options(ind, ind_args);
  ind->add_option("--record", ind_record, "measurement record")->required()->check(CLI::ExistingFile);
  ind->add_option("--estimate", ind_estimate, "estimate record")->required()->check(CLI::ExistingFile);
  ind->add_option("-o,--out", ind_out, "CSV output");

  // experiment1
  CaseArgs e1_args;
  int e1_samples = -1;
  std::string e1_methods = "all", e1_prefix;
  auto* e1 = app.add_subcommand("experiment1", "Monte Carlo statistics over prior draws");
  add_case_options(e1, e1_args);
  e1->add_option("--samples", e1_samples, "number of draws (default from the case)");
  e1->add_option("--methods", e1_methods, "'all' or a ';'-separated subset of 0;1;2;3;1,1;1,1,1");
  e1->add_option("--out-prefix", e1_prefix, "writes <prefix>_samples.csv and <prefix>_summary.csv");

  // experiment2
  CaseArgs e2_args;
  std::string e2_grid = "0.2:10:25", e2_out;
  std::uint64_t e2_draw = 777;
  auto* e2 = app.add_subcommand("experiment2", "indicators along a scaled target");
  add_case_options(e2, e2_args);
  e2->add_option("--s-grid", e2_grid, "lo:hi:n (log spaced) or a comma list");
  e2->add_option("--draw-seed", e2_draw, "seed of the target draw and the noise");
  e2->add_option("-o,--out", e2_out, "CSV output");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      const SimplicialMesh m = generate_disk_mesh(gen_level);
      save_mesh(gen_out, m);
      std::cerr << "mesh: " << m.num_vertices() << " vertices, " << m.num_cells() << " cells\n";
    } else if (cluster->parsed()) {
      const SimplicialMesh m = load_mesh(cl_mesh);
      const Partition p = cluster_partition(m, cl_count, cl_seed);
      save_partition(cl_out, p);
      std::cerr << "partition: " << p.count() << " clusters\n";
    } else if (show->parsed()) {
      write_case(std::cout, resolve_case(show_args));
    } else if (sim->parsed()) {
      const ExperimentCase c = resolve_case(sim_args);
      const CaseModels models = build_case_models(c);
      const auto stream = static_cast<std::uint64_t>(sim_sample);
      ParamVector target = draw_from_prior(models.measurement_prior, c.seed, 2 * stream);
      const auto& l = target.layout();
      target.values().tail(l.size() - l.location_offset()).setZero();
      const MeasurementRecord r =
          simulate_measurements(models.measurement, target, models.measurement_noise, c.seed, 2 * stream + 1);
      write_json(sim_out, {{"case", c.name},
                           {"seed", c.seed},
                           {"sample", sim_sample},
                           {"contact", l.contact == ContactModel::cem ? "cem" : "smooth"},
                           {"target", vector_json(r.target.values())},
                           {"data", matrix_json(r.data)},
                           {"noiseless", matrix_json(r.noiseless)}});
    } else if (rec->parsed()) {
      if (rec_order == 0 && rec_steps == 0) throw std::runtime_error("give --order or --sequential");
      const ExperimentCase c = resolve_case(rec_args);
      const CaseModels models = build_case_models(c);
      const Reconstructor r(models.reconstruction, models.reconstruction_prior, models.reconstruction_noise);
      const json record = read_json(rec_in);
      const Eigen::MatrixXd data = matrix_from(record.at("data"), models.reconstruction.basis.patterns());
      json out = {{"case", c.name}};
      if (rec_order > 0) {
        const ReversionResult res = r.revert(data, rec_order);
        out["method"] = std::to_string(rec_order);
        out["estimate"] = vector_json(res.upsilon[static_cast<std::size_t>(rec_order - 1)].values());
        json terms = json::array();
        for (int k = 0; k < rec_order; ++k) terms.push_back(vector_json(res.eta[static_cast<std::size_t>(k)].values()));
        out["terms"] = terms;
      } else {
        const SequentialResult res = r.sequential(data, rec_steps);
        std::string name = "1";
        for (int k = 1; k < rec_steps; ++k) name += ",1";
        out["method"] = name;
        out["estimate"] = vector_json(res.iterates.back().values());
        json its = json::array();
        for (const auto& it : res.iterates) its.push_back(vector_json(it.values()));
        out["iterates"] = its;
        out["clamped"] = std::vector<int>(res.clamped.begin(), res.clamped.end());
      }
      write_json(rec_out, out);
    } else if (ind->parsed()) {
      const ExperimentCase c = resolve_case(ind_args);
      const CaseModels models = build_case_models(c);
      const json record = read_json(ind_record);
      const json estimate = read_json(ind_estimate);
      const ForwardModel& rm = models.reconstruction;
      const Eigen::MatrixXd data = matrix_from(record.at("data"), rm.basis.patterns());
      const ParamVector target = params_from(record.at("target"), models.measurement.param->layout());
      const ParamVector est = params_from(estimate.at("estimate"), rm.param->layout());
      const Eigen::MatrixXd lambda0 = rm.lambda(rm.param->zero());
      const Indicators v = indicators(rm, est, data, lambda0, models.measurement.param->discretization().partition,
                                      target.kappa());
      with_output(ind_out, [&](std::ostream& out) {
        out << "method,res,res_rel,err,err_rel,clamped\n"
            << '"' << estimate.value("method", std::string("?")) << "\"," << format_double(v.res) << ','
            << format_double(v.res_rel) << ',' << format_double(v.err) << ',' << format_double(v.err_rel) << ','
            << (v.clamped ? 1 : 0) << '\n';
      });
    } else if (e1->parsed()) {
      const ExperimentCase c = resolve_case(e1_args);
      const Experiment1Result r = experiment1(c, split_methods(e1_methods), e1_samples > 0 ? e1_samples : c.samples);
      if (!e1_prefix.empty()) {
        with_output(e1_prefix + "_samples.csv", [&](std::ostream& out) { write_experiment1_samples(out, r); });
        with_output(e1_prefix + "_summary.csv", [&](std::ostream& out) { write_experiment1_summary(out, r); });
      }
      write_experiment1_summary(std::cout, r);
    } else if (e2->parsed()) {
      const ExperimentCase c = resolve_case(e2_args);
      const Experiment2Result r = experiment2(c, parse_grid(e2_grid), e2_draw);
      with_output(e2_out, [&](std::ostream& out) { write_experiment2(out, r); });
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
