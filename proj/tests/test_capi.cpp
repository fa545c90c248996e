#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "fri/fri.h"

namespace {

struct Ctx {
  fri_context* c = nullptr;
  explicit Ctx(int mc_fallback, const char* dir = nullptr) {
    fri_context_options o{dir, 1, mc_fallback};
    REQUIRE(fri_context_new(&o, &c) == FRI_OK);
  }
  ~Ctx() { fri_context_free(c); }
};

std::string temp_dir(const char* name) {
  const auto p = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(p);
  return p.string();
}

}  // namespace

TEST_CASE("version, names and status strings") {
  CHECK(std::strlen(fri_version()) > 0);
  CHECK(std::string(fri_status_name(FRI_OK)) != std::string(fri_status_name(FRI_ERR_SOLVE)));
  std::vector<std::string> names;
  for (const char* p = fri_command_names(); *p; p += std::strlen(p) + 1) names.emplace_back(p);
  for (const char* want : {"sample", "capacity", "range-cap", "crossing", "bisect", "scaling", "layers", "explore", "calibrate"})
    CHECK(std::find(names.begin(), names.end(), want) != names.end());
}

TEST_CASE("scaling function") {
  Ctx ctx(0);
  double v = 0;
  CHECK(fri_scaling(ctx.c, 3, 64, &v) == FRI_OK);
  CHECK(v == doctest::Approx(8));
  CHECK(fri_scaling(ctx.c, 3, 0.5, &v) == FRI_ERR_INVALID);
  CHECK(std::strlen(fri_last_error(ctx.c)) > 0);
  CHECK(fri_scaling(ctx.c, 2, 10, &v) != FRI_OK);
}

TEST_CASE("green tables need a cache or the fallback") {
  const auto dir = temp_dir("fri_capi_cache");
  const int32_t x[3] = {0, 0, 0};
  double g = 0;
  {
    Ctx ctx(0, dir.c_str());
    CHECK(fri_green(ctx.c, 3, 10, x, &g) == FRI_ERR_CACHE_MISSING);
  }
  Ctx ctx(1, dir.c_str());
  REQUIRE(fri_green(ctx.c, 3, 10, x, &g) == FRI_OK);
  CHECK(g >= 1);
  CHECK(g <= 11);
  double e = 0;
  REQUIRE(fri_escape(ctx.c, 3, 10, x, 1, &e) == FRI_OK);
  CHECK(e == doctest::Approx(1 / g).epsilon(1e-12));

  std::vector<int32_t> box;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b)
      for (int c = 0; c < 3; ++c) box.insert(box.end(), {a, b, c});
  std::vector<double> es(27);
  REQUIRE(fri_escape(ctx.c, 3, 10, box.data(), 27, es.data()) == FRI_OK);
  CHECK(es[13] == doctest::Approx(1.0 / 11).epsilon(1e-9));
  double cap = 0, se = 1;
  REQUIRE(fri_capacity(ctx.c, 3, 10, box.data(), 27, 1, &cap, &se) == FRI_OK);
  double sum = 0;
  for (double z : es) sum += z;
  CHECK(cap == doctest::Approx(sum).epsilon(1e-10));
  CHECK(se == 0);
  CHECK(fri_capacity(ctx.c, 3, 0, box.data(), 27, 1, &cap, &se) == FRI_ERR_INVALID);
  std::filesystem::remove_all(dir);
}

TEST_CASE("window samples through the C interface") {
  Ctx ctx(1);
  fri_window_config cfg{3, 0.3, 4, -3, 6, -1, 0, 0, 12};
  fri_sample* a = nullptr;
  fri_sample* b = nullptr;
  REQUIRE(fri_sample_window(ctx.c, &cfg, &a) == FRI_OK);
  REQUIRE(fri_sample_window(ctx.c, &cfg, &b) == FRI_OK);
  CHECK(fri_sample_equal(a, b) == 1);
  size_t n = 0;
  CHECK(fri_sample_count(a, &n) == FRI_OK);
  CHECK(n > 0);
  int32_t start[3];
  double label = 0;
  uint64_t len = 0;
  CHECK(fri_sample_trajectory(a, 0, start, &label, &len) == FRI_OK);
  CHECK(label <= 0.3);
  CHECK(fri_sample_trajectory(a, n, start, &label, &len) == FRI_ERR_INVALID);
  int pad = 0;
  double bound = 1;
  CHECK(fri_sample_padding(a, &pad, &bound) == FRI_OK);
  CHECK(bound <= 1e-3);
  int cross = -1;
  CHECK(fri_sample_crossing(ctx.c, a, 3, &cross) == FRI_OK);
  CHECK((cross == 0 || cross == 1));
  CHECK(fri_sample_crossing(ctx.c, a, 50, &cross) == FRI_ERR_INVALID);

  const auto path = temp_dir("fri_capi_sample.bin");
  CHECK(fri_sample_save(ctx.c, a, path.c_str()) == FRI_OK);
  fri_sample* c = nullptr;
  REQUIRE(fri_sample_load(ctx.c, path.c_str(), &c) == FRI_OK);
  CHECK(fri_sample_equal(a, c) == 1);
  CHECK(fri_sample_load(ctx.c, "/nonexistent/x.bin", &c) == FRI_ERR_IO);
  fri_sample_free(a);
  fri_sample_free(b);
  fri_sample_free(c);
  std::filesystem::remove(path);

  fri_window_config bad = cfg;
  bad.d = 2;
  CHECK(fri_sample_window(ctx.c, &bad, &a) == FRI_ERR_DIMENSION);
  bad = cfg;
  bad.T = 16;
  bad.u = 1;
  bad.padding = 0;
  CHECK(fri_sample_window(ctx.c, &bad, &a) == FRI_ERR_PADDING);
}

TEST_CASE("crossing probability through the C interface") {
  Ctx ctx(0);
  double p = -1, se = -1;
  REQUIRE(fri_crossing_probability(ctx.c, 3, 0.05, 16, 16, 100, 3, &p, &se) == FRI_OK);
  CHECK(p >= 0);
  CHECK(p <= 1);
  double q = -1;
  REQUIRE(fri_crossing_probability(ctx.c, 3, 0.05, 16, 16, 100, 3, &q, &se) == FRI_OK);
  CHECK(p == q);
}

TEST_CASE("run_command errors and results") {
  Ctx ctx(0);
  char* out = nullptr;
  const auto dir = temp_dir("fri_capi_run");
  CHECK(fri_run_command(ctx.c, "nope", "{}", dir.c_str(), &out) == FRI_ERR_UNKNOWN_COMMAND);
  CHECK(fri_run_command(ctx.c, "scaling", R"({"d":"3","T_grid":"16,32"})", dir.c_str(), &out) == FRI_ERR_INVALID);
  CHECK(fri_run_command(ctx.c, "scaling", R"({"d":"3","bogus":"1"})", dir.c_str(), &out) == FRI_ERR_INVALID);
  CHECK(fri_run_command(ctx.c, "crossing", R"({"d":"3","T":"0"})", dir.c_str(), &out) == FRI_ERR_INVALID);
  CHECK_FALSE(std::filesystem::exists(dir));
  CHECK(fri_run_command(ctx.c, "capacity", R"({"d":"3","T":"10","n":"2"})", dir.c_str(), &out) ==
        FRI_ERR_CACHE_MISSING);

  REQUIRE(fri_run_command(ctx.c, "crossing", R"({"d":"3","T":"16","u_grid":"0.02,0.04","reps":"50"})", dir.c_str(),
                          &out) == FRI_OK);
  const auto j = nlohmann::json::parse(out);
  fri_string_free(out);
  CHECK(j["command"] == "crossing");
  CHECK(j["outputs"].size() == 1);
  CHECK(std::filesystem::exists(std::filesystem::path(dir) / j["outputs"][0].get<std::string>()));
  std::filesystem::remove_all(dir);
}
