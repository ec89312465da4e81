#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace scem {

class ParseError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Shortest decimal text that parses back to exactly the same double.
std::string format_double(double value);
double parse_double(const std::string& token);

/// Row-major decimal block, one row per line, entries separated by spaces.
void write_matrix(std::ostream& out, const Eigen::MatrixXd& m);
/// Reads `rows` lines of `cols` numbers.
Eigen::MatrixXd read_matrix(std::istream& in, Eigen::Index rows, Eigen::Index cols);

/// One value per line.
void write_vector(std::ostream& out, const Eigen::VectorXd& v);
Eigen::VectorXd read_vector(std::istream& in);

}  // namespace scem
