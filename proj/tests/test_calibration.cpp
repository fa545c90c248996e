#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "fri/calibration.hpp"
#include "fri/errors.hpp"

using namespace fri;

namespace {

CalibrationConstants sample_constants() {
  CalibrationConstants c;
  c.d = 4;
  c.provenance = "run-42";
  c.c1_hat = {0.31, 0.3, 0.32, 4, 4, 7, "box"};
  c.C4_hat = {1.25, 1.2, 1.3, 4, 100, 7, "range"};
  c.C10_hat = {2.5e-3, 1e-3, 4e-3, 4, 100, 7, "second moment"};
  c.c6_hat = {0, 0, 0, 4, 200, 7, "hitting union"};
  return c;
}

}  // namespace

TEST_CASE("constants survive a JSON round trip") {
  const auto c = sample_constants();
  const auto back = constants_from_json(constants_to_json(c));
  CHECK(back.d == 4);
  CHECK(back.provenance == "run-42");
  CHECK(back.c1_hat.value == c.c1_hat.value);
  CHECK(back.C4_hat.ci_hi == c.C4_hat.ci_hi);
  CHECK(back.C10_hat.value == c.C10_hat.value);
  CHECK(back.C4_hat.samples == 100);
  CHECK(back.c1_hat.basis == "box");
  CHECK(constants_to_json(back) == constants_to_json(c));
}

TEST_CASE("constants files") {
  const auto dir = std::filesystem::temp_directory_path() / "fri_constants_test";
  std::filesystem::create_directories(dir);
  const auto path = (dir / "c.json").string();
  save_constants(sample_constants(), path);
  CHECK(load_constants(path).c1_hat.value == 0.31);
  CHECK_THROWS_AS(load_constants((dir / "none.json").string()), IoError);
  std::ofstream(dir / "bad.json") << "{ not json";
  CHECK_THROWS_AS(load_constants((dir / "bad.json").string()), FormatError);
  CHECK_THROWS_AS(constants_from_json("[1, 2]"), FormatError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("a small calibration run") {
  GreenCache cache;
  CalibrationOptions o;
  o.box_n = {2, 4};
  o.range_n = {16, 32};
  o.range_reps = 10;
  o.killed_T = {4, 9};
  o.killed_reps = 10;
  o.stopped_N = {1, 2};
  o.stopped_n = 4;
  o.stopped_reps = 5;
  o.c6_T = 4;
  o.c6_reps = 10;
  const auto c = calibrate(3, o, cache);
  CHECK(c.d == 3);
  CHECK(c.c1_hat.value > 0);
  CHECK(c.c2_hat.value >= c.c1_hat.value);
  CHECK(c.C5_hat.value >= c.C4_hat.value);
  CHECK(c.C10_hat.value > 0);
  const auto again = calibrate(3, o, cache);
  CHECK(constants_to_json(again) == constants_to_json(c));
}
