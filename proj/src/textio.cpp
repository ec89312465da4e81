#include "scem/textio.hpp"

#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

namespace scem {

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& token) {
  double value = 0.0;
  const char* first = token.data();
  const char* last = first + token.size();
  if (first != last && *first == '+') ++first;
  const auto res = std::from_chars(first, last, value);
  if (res.ec != std::errc() || res.ptr != last) throw ParseError("not a number: '" + token + "'");
  return value;
}

void write_matrix(std::ostream& out, const Eigen::MatrixXd& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ' ';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
}

Eigen::MatrixXd read_matrix(std::istream& in, Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd m(rows, cols);
  std::string line;
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (!std::getline(in, line)) throw ParseError("matrix block ended early at row " + std::to_string(i));
    std::istringstream ls(line);
    std::string tok;
    Eigen::Index j = 0;
    while (ls >> tok) {
      if (j == cols) throw ParseError("too many entries in matrix row " + std::to_string(i));
      m(i, j++) = parse_double(tok);
    }
    if (j != cols) throw ParseError("too few entries in matrix row " + std::to_string(i));
  }
  return m;
}

void write_vector(std::ostream& out, const Eigen::VectorXd& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) out << format_double(v(i)) << '\n';
}

Eigen::VectorXd read_vector(std::istream& in) {
  std::vector<double> values;
  std::string tok;
  while (in >> tok) values.push_back(parse_double(tok));
  return Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace scem
