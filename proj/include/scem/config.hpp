#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>

#include "scem/harness.hpp"

namespace scem {

class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Reads a case from JSON. A "base" key names a table case ("C1".."C6") whose
/// fields the remaining keys override; without it the defaults of C1 apply.
///
///   {"base": "C2", "samples": 20, "seed": 5,
///    "measurement": {"noise": {"delta1": 1e-4}, "prior": {"gamma_rho": 0.2}},
///    "model": {"R": 0.5}, "coarse": {"level": 2, "clusters": 30}}
ExperimentCase read_case(std::istream& in);
ExperimentCase load_case(const std::string& path);
void write_case(std::ostream& out, const ExperimentCase& c);

}  // namespace scem
