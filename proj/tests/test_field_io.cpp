#include <cstring>
#include <sstream>

#include "doctest.h"
#include "trihom/error.hpp"
#include "trihom/field_io.hpp"

using namespace trihom;

namespace {

FieldRecord sample(const std::string& dtype) {
  FieldRecord r;
  r.name = "v";
  r.shape = {2, 3};
  r.dtype = dtype;
  r.attributes = {{"t", "0.5"}, {"level", "macro"}};
  r.values = {0.0, -1.0, 0.1, 1e-300, 3.5, 1.0 / 3.0};
  return r;
}

ErrorKind read_kind(const std::string& bytes) {
  std::istringstream in(bytes);
  try {
    read_field(in);
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::ConfigError;
}

}  // namespace

TEST_SUITE("field_io") {
  TEST_CASE("float64 round trip is exact") {
    std::stringstream io;
    write_field(io, sample("float64"));
    const auto r = read_field(io);
    CHECK(r.name == "v");
    CHECK(r.shape == std::vector<int>{2, 3});
    CHECK(r.values == sample("float64").values);
    REQUIRE(r.attribute("level") != nullptr);
    CHECK(*r.attribute("level") == "macro");
    CHECK(r.number("t") == 0.5);
    CHECK(r.attribute("missing") == nullptr);
  }

  TEST_CASE("float32 round trip rounds to single precision") {
    std::stringstream io;
    write_field(io, sample("float32"));
    const auto r = read_field(io);
    const auto& src = sample("float32").values;
    REQUIRE(r.values.size() == src.size());
    for (std::size_t i = 0; i < src.size(); ++i) CHECK(r.values[i] == static_cast<double>(static_cast<float>(src[i])));
  }

  TEST_CASE("header layout and payload size") {
    std::stringstream io;
    write_field(io, sample("float64"));
    const std::string bytes = io.str();
    const auto nl = bytes.find('\n');
    REQUIRE(nl != std::string::npos);
    const std::string header = bytes.substr(0, nl);
    CHECK(header.rfind("TRIHOM-FIELD v1 ", 0) == 0);
    CHECK(header.find("name=v") != std::string::npos);
    CHECK(header.find("dim=2") != std::string::npos);
    CHECK(header.find("shape=2,3") != std::string::npos);
    CHECK(header.find("dtype=float64") != std::string::npos);
    CHECK(header.find("t=0.5") != std::string::npos);
    CHECK(bytes.size() - nl - 1 == 6 * sizeof(double));
    double first_nonzero = 0.0;
    std::memcpy(&first_nonzero, bytes.data() + nl + 1 + sizeof(double), sizeof(double));
    CHECK(first_nonzero == -1.0);
  }

  TEST_CASE("malformed input") {
    std::stringstream io;
    write_field(io, sample("float64"));
    const std::string good = io.str();
    CHECK(read_kind("") == ErrorKind::InvalidArgument);
    CHECK(read_kind("NOT-A-FIELD v1 name=v\n") == ErrorKind::InvalidArgument);
    CHECK(read_kind(good.substr(0, good.size() - 3)) == ErrorKind::InvalidArgument);
    std::string bad_dtype = good;
    bad_dtype.replace(bad_dtype.find("float64"), 7, "int1664");
    CHECK(read_kind(bad_dtype) == ErrorKind::InvalidArgument);
    CHECK(read_kind("TRIHOM-FIELD v1 name=v dim=2 shape=2,x dtype=float64\n") == ErrorKind::InvalidArgument);
    CHECK(read_kind("TRIHOM-FIELD v1 name=v dim=3 shape=2,2 dtype=float64\n") == ErrorKind::InvalidArgument);
    CHECK(read_kind(good + "x") == ErrorKind::InvalidArgument);
  }

  TEST_CASE("write rejects inconsistent records") {
    auto r = sample("float64");
    r.values.pop_back();
    std::ostringstream out;
    CHECK_THROWS_AS(write_field(out, r), Error);
    r = sample("float16");
    CHECK_THROWS_AS(write_field(out, r), Error);
  }

  TEST_CASE("number formatting round-trips") {
    for (double x : {0.1, 1.0 / 3.0, 1e-300, -2.5e17}) CHECK(std::stod(format_double(x)) == x);
    CHECK(join_ints({1, 2, 3}) == "1,2,3");
  }
}
