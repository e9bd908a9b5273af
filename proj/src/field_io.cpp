#include "trihom/field_io.hpp"

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "trihom/error.hpp"

namespace trihom {

namespace {

constexpr const char* kMagic = "TRIHOM-FIELD";

std::vector<int> parse_ints(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    int n = 0;
    const auto [end, ec] = std::from_chars(item.data(), item.data() + item.size(), n);
    require(ec == std::errc() && end == item.data() + item.size() && n >= 0, ErrorKind::InvalidArgument,
            "malformed shape '" + s + "'");
    out.push_back(n);
  }
  return out;
}

}  // namespace

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

std::string join_ints(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

std::string join_doubles(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_double(v[i]);
  return s;
}

const std::string* FieldRecord::attribute(const std::string& key) const {
  for (const auto& [k, v] : attributes)
    if (k == key) return &v;
  return nullptr;
}

double FieldRecord::number(const std::string& key) const {
  const std::string* v = attribute(key);
  require(v != nullptr, ErrorKind::InvalidArgument, "field header lacks key '" + key + "'");
  char* end = nullptr;
  const double x = std::strtod(v->c_str(), &end);
  require(!v->empty() && end == v->c_str() + v->size(), ErrorKind::InvalidArgument,
          "field header key '" + key + "' is not a number");
  return x;
}

void write_field(std::ostream& out, const FieldRecord& record) {
  std::size_t count = 1;
  for (int n : record.shape) count *= static_cast<std::size_t>(n);
  require(count == record.values.size(), ErrorKind::InvalidArgument, "field shape does not match value count");
  require(record.dtype == "float32" || record.dtype == "float64", ErrorKind::InvalidArgument, "unknown dtype");
  out << kMagic << " v1 name=" << record.name << " dim=" << record.shape.size()
      << " shape=" << join_ints(record.shape) << " dtype=" << record.dtype;
  for (const auto& [k, v] : record.attributes) out << ' ' << k << '=' << v;
  out << '\n';
  if (record.dtype == "float32") {
    std::vector<float> buf(record.values.begin(), record.values.end());
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
  } else {
    out.write(reinterpret_cast<const char*>(record.values.data()),
              static_cast<std::streamsize>(record.values.size() * sizeof(double)));
  }
}

void write_field_file(const std::string& path, const FieldRecord& record) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::InvalidArgument, "cannot open " + path + " for writing");
  write_field(out, record);
  require(static_cast<bool>(out), ErrorKind::InvalidArgument, "failed writing " + path);
}

FieldRecord read_field(std::istream& in) {
  std::string header;
  require(static_cast<bool>(std::getline(in, header)), ErrorKind::InvalidArgument, "missing field header");
  std::istringstream hs(header);
  std::string magic, version;
  hs >> magic >> version;
  require(magic == kMagic && version == "v1", ErrorKind::InvalidArgument, "not a field file");
  FieldRecord rec;
  std::string token;
  bool have_shape = false;
  int dim = -1;
  while (hs >> token) {
    const auto eq = token.find('=');
    require(eq != std::string::npos, ErrorKind::InvalidArgument, "malformed header token '" + token + "'");
    const std::string key = token.substr(0, eq), value = token.substr(eq + 1);
    if (key == "name") {
      rec.name = value;
    } else if (key == "shape") {
      rec.shape = parse_ints(value);
      have_shape = true;
    } else if (key == "dtype") {
      rec.dtype = value;
    } else if (key == "dim") {
      const auto d = parse_ints(value);
      require(d.size() == 1, ErrorKind::InvalidArgument, "malformed dim '" + value + "'");
      dim = d[0];
    } else {
      rec.attributes.emplace_back(key, value);
    }
  }
  require(have_shape, ErrorKind::InvalidArgument, "field header lacks shape");
  require(dim < 0 || static_cast<std::size_t>(dim) == rec.shape.size(), ErrorKind::InvalidArgument,
          "field dim does not match shape");
  std::size_t count = 1;
  for (int n : rec.shape) count *= static_cast<std::size_t>(n);
  rec.values.resize(count);
  if (rec.dtype == "float32") {
    std::vector<float> buf(count);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(count * sizeof(float)));
    for (std::size_t i = 0; i < count; ++i) rec.values[i] = buf[i];
  } else {
    require(rec.dtype == "float64", ErrorKind::InvalidArgument, "unknown dtype " + rec.dtype);
    in.read(reinterpret_cast<char*>(rec.values.data()), static_cast<std::streamsize>(count * sizeof(double)));
  }
  require(static_cast<bool>(in), ErrorKind::InvalidArgument, "truncated field payload");
  require(in.peek() == std::char_traits<char>::eof(), ErrorKind::InvalidArgument, "trailing bytes after field payload");
  return rec;
}

FieldRecord read_field_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::InvalidArgument, "cannot open " + path);
  return read_field(in);
}

}  // namespace trihom
