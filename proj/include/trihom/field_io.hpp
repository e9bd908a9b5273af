#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace trihom {

/// Nodal field file: one ASCII header line
///   TRIHOM-FIELD v1 key=value key=value ...\n
/// followed by little-endian values in row-major order (axis 0 slowest).
/// Required keys: name, dim, shape (comma list), dtype (float32|float64).
struct FieldRecord {
  std::string name;
  std::vector<int> shape;
  std::string dtype = "float64";
  /// Extra header keys in write order.
  std::vector<std::pair<std::string, std::string>> attributes;
  std::vector<double> values;

  const std::string* attribute(const std::string& key) const;
  double number(const std::string& key) const;
};

void write_field(std::ostream& out, const FieldRecord& record);
void write_field_file(const std::string& path, const FieldRecord& record);
/// Throws InvalidArgument on malformed input.
FieldRecord read_field(std::istream& in);
FieldRecord read_field_file(const std::string& path);

std::string format_double(double x);
std::string join_ints(const std::vector<int>& v);
std::string join_doubles(const std::vector<double>& v);

}  // namespace trihom
