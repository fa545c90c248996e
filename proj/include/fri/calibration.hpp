#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fri/capacity.hpp"
#include "fri/green.hpp"

namespace fri {

/** An empirically fitted prefactor together with the data it came from. */
struct FittedConstant {
  double value = 0;
  double ci_lo = 0;
  double ci_hi = 0;
  int d = 0;
  std::uint64_t samples = 0;
  std::uint64_t seed = 0;
  std::string basis;  // what was measured
};

struct CalibrationConstants {
  int d = 0;
  std::string provenance;  // manifest id of the producing run
  FittedConstant c1_hat, c2_hat;  // cap(B_0(n)) / n^{d-2}: 0.9 x min, max
  FittedConstant C4_hat, C5_hat;  // E cap(X[0,n]) / F_d(n): min, max
  FittedConstant C6_hat;          // E cap^(T)(R_{N_T}) / F_d(T): max
  FittedConstant C10_hat;         // E cap(X[0,n])^2 / F_d(n)^2: max
  FittedConstant c5_hat;          // stopped-union capacity over its reference: min
  FittedConstant c6_hat;          // hitting-union capacity / (u_hat n_T^{d-2})
};

struct CalibrationOptions {
  std::vector<Coord> box_n{4, 8, 16, 32};
  std::vector<double> range_n{64, 128, 256};
  std::uint64_t range_reps = 100;
  std::vector<double> killed_T{16, 64};
  std::uint64_t killed_reps = 100;
  // Stopped unions: N walks from the origin, radius n.
  std::vector<int> stopped_N{1, 4, 16};
  int stopped_n = 16;
  std::uint64_t stopped_reps = 50;
  double c6_T = 16;
  double c6_u_hat = 1;
  std::uint64_t c6_reps = 200;
  std::uint64_t seed = 1;
  CapacityBudget budget;
  BoxCapOptions box;
};

// Tables come from the cache: the free one and the killed ones for
// killed_T and c6_T.
CalibrationConstants calibrate(int d, const CalibrationOptions& opt, GreenCache& cache);

std::string constants_to_json(const CalibrationConstants& c);
CalibrationConstants constants_from_json(const std::string& text);
void save_constants(const CalibrationConstants& c, const std::string& path);
CalibrationConstants load_constants(const std::string& path);

}  // namespace fri
