#include "scem/config.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include "json.hpp"

namespace scem {

namespace {

using nlohmann::json;

template <class T>
void take(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

ContactModel contact_from(const std::string& s) {
  if (s == "cem") return ContactModel::cem;
  if (s == "smooth") return ContactModel::smooth;
  throw ConfigError("contact must be 'cem' or 'smooth', got '" + s + "'");
}

std::string contact_name(ContactModel m) { return m == ContactModel::cem ? "cem" : "smooth"; }

void read_side(const json& j, SideSpec& s) {
  take(j, "mesh", s.mesh);
  if (j.contains("contact")) s.contact = contact_from(j.at("contact").get<std::string>());
  if (j.contains("noise")) {
    take(j["noise"], "delta1", s.noise.delta1);
    take(j["noise"], "delta2", s.noise.delta2);
  }
  if (j.contains("prior")) {
    const json& p = j["prior"];
    take(p, "gamma_kappa", s.prior.gamma_kappa);
    take(p, "lambda_kappa", s.prior.lambda_kappa);
    take(p, "gamma_rho", s.prior.gamma_rho);
    take(p, "gamma_xi", s.prior.gamma_xi);
  }
}

void read_disk(const json& j, DiskSetup& d) {
  take(j, "level", d.level);
  take(j, "clusters", d.clusters);
  take(j, "electrodes", d.electrodes);
  take(j, "electrode_radius", d.electrode_radius);
  take(j, "contact_radius", d.contact_radius);
  take(j, "partition_seed", d.partition_seed);
}

json side_json(const SideSpec& s) {
  return {{"mesh", s.mesh},
          {"contact", contact_name(s.contact)},
          {"noise", {{"delta1", s.noise.delta1}, {"delta2", s.noise.delta2}}},
          {"prior",
           {{"gamma_kappa", s.prior.gamma_kappa},
            {"lambda_kappa", s.prior.lambda_kappa},
            {"gamma_rho", s.prior.gamma_rho},
            {"gamma_xi", s.prior.gamma_xi}}}};
}

json disk_json(const DiskSetup& d) {
  return {{"level", d.level},
          {"clusters", d.clusters},
          {"electrodes", d.electrodes},
          {"electrode_radius", d.electrode_radius},
          {"contact_radius", d.contact_radius},
          {"partition_seed", d.partition_seed}};
}

}  // namespace

ExperimentCase read_case(std::istream& in) {
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("case config must be a JSON object");
  ExperimentCase c;
  try {
    c = table_case(j.value("base", std::string("C1")));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  take(j, "name", c.name);
  take(j, "samples", c.samples);
  take(j, "seed", c.seed);
  if (j.contains("measurement")) read_side(j["measurement"], c.measurement);
  if (j.contains("reconstruction")) read_side(j["reconstruction"], c.reconstruction);
  if (j.contains("model")) {
    const json& m = j["model"];
    take(m, "mu_kappa", c.model.mu_kappa);
    take(m, "mu_zeta", c.model.mu_zeta);
    take(m, "R", c.model.R);
    take(m, "a", c.model.a);
  }
  if (j.contains("coarse")) read_disk(j["coarse"], c.coarse);
  if (j.contains("fine")) read_disk(j["fine"], c.fine);
  try {
    c.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("invalid case: ") + e.what());
  }
  return c;
}

ExperimentCase load_case(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  return read_case(in);
}

void write_case(std::ostream& out, const ExperimentCase& c) {
  const json j = {{"name", c.name},
                  {"samples", c.samples},
                  {"seed", c.seed},
                  {"measurement", side_json(c.measurement)},
                  {"reconstruction", side_json(c.reconstruction)},
                  {"model", {{"mu_kappa", c.model.mu_kappa}, {"mu_zeta", c.model.mu_zeta}, {"R", c.model.R}, {"a", c.model.a}}},
                  {"coarse", disk_json(c.coarse)},
                  {"fine", disk_json(c.fine)}};
  out << j.dump(2) << '\n';
}

}  // namespace scem
