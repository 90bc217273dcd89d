#include "stabcert/error.hpp"
#include "stabcert/io.hpp"

#include <doctest.h>

#include <filesystem>

using namespace stabcert;

namespace {

std::string data_path(const std::string& name) { return std::string(STABCERT_DATA_DIR) + "/" + name; }

ErrorCode code_of(const std::string& text) {
  try {
    io::parse_instance_text(text);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::InvalidInput;
}

}  // namespace

TEST_CASE("data files round trip through JSON") {
  for (const auto& entry : std::filesystem::directory_iterator(STABCERT_DATA_DIR)) {
    if (entry.path().extension() != ".json") continue;
    CAPTURE(entry.path().string());
    const io::InstanceFile f = io::load_instance(entry.path().string());
    const io::InstanceFile g = io::parse_instance(io::to_json(f));
    CHECK(f == g);
    CHECK(io::to_json(g) == io::to_json(f));
  }
}

TEST_CASE("nuclear variables are converted to column-major order") {
  const io::InstanceFile f = io::load_instance(data_path("e4_nuclear.json"));
  REQUIRE(f.instance.reg.kind == RegKind::Nuclear);
  const Regularizer reg = Regularizer::nuclear(2, 3);
  const Vec file = (Vec(6) << 1, 2, 3, 4, 5, 6).finished();
  const Vec internal = io::from_file_order(reg, file);
  CHECK(internal == (Vec(6) << 1, 4, 2, 5, 3, 6).finished());
  CHECK(io::to_file_order(reg, internal) == file);
  // as_matrix of the internal vector is the row-major reading of the file.
  const Mat X = as_matrix(reg, internal);
  CHECK(X(0, 1) == 2.0);
  CHECK(X(1, 0) == 4.0);
}

TEST_CASE("minimal instance parses with defaults") {
  const io::InstanceFile f = io::parse_instance_text(R"({
    "format": "stabcert-instance/1", "layout": "row-major", "m": 1, "n": 2,
    "A": [1, 2], "b": [3], "mu": 1, "regularizer": {"kind": "l1"}})");
  CHECK(f.instance.A.rows() == 1);
  CHECK(f.instance.A(0, 1) == 2.0);
  CHECK(f.instance.v.size() == 0);
  CHECK(f.instance.tilt() == Vec::Zero(2));
  CHECK_FALSE(f.composite);
  CHECK(f.note.empty());
}

TEST_CASE("malformed instances are rejected") {
  CHECK(code_of("not json") == ErrorCode::InvalidInput);
  CHECK(code_of(R"({"format": "other", "layout": "row-major", "m": 1, "n": 1, "A": [1], "b": [1], "mu": 1,
    "regularizer": {"kind": "l1"}})") == ErrorCode::InvalidInput);
  CHECK(code_of(R"({"format": "stabcert-instance/1", "layout": "row-major", "m": 1, "n": 2, "A": [1], "b": [1],
    "mu": 1, "regularizer": {"kind": "l1"}})") == ErrorCode::InvalidInput);
  CHECK(code_of(R"({"format": "stabcert-instance/1", "layout": "row-major", "m": 1, "n": 1, "A": [1], "b": [1],
    "mu": -1, "regularizer": {"kind": "l1"}})") == ErrorCode::InvalidInput);
  CHECK(code_of(R"({"format": "stabcert-instance/1", "layout": "row-major", "m": 1, "n": 2, "A": [1, 1], "b": [1],
    "mu": 1, "regularizer": {"kind": "group_l2", "groups": [[0]]}})") == ErrorCode::InvalidInput);
  CHECK(code_of(R"({"format": "stabcert-instance/1", "layout": "row-major", "m": 1, "n": 2, "A": [1, 1], "b": [1],
    "mu": 1, "regularizer": {"kind": "nuclear", "rows": 3, "cols": 1}})") == ErrorCode::InvalidInput);
  CHECK(code_of(R"({"format": "stabcert-instance/1", "layout": "row-major", "m": 1, "n": 1, "A": [1], "b": [1],
    "mu": 1, "regularizer": {"kind": "huber"}})") == ErrorCode::InvalidInput);
  CHECK_THROWS_AS(io::load_instance(data_path("does_not_exist.json")), Error);
}

TEST_CASE("reports encode non-finite numbers as null") {
  CHECK(io::number_or_null(1.5) == 1.5);
  CHECK(io::number_or_null(std::numeric_limits<double>::infinity()).is_null());
}
