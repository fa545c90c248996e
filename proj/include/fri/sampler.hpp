#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "fri/capacity.hpp"
#include "fri/errors.hpp"
#include "fri/green.hpp"
#include "fri/lattice.hpp"
#include "fri/rng.hpp"
#include "fri/walk.hpp"

namespace fri {

class PaddingError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct FriConfig {
  int d = 3;
  double u = 0;
  double T = 1;
  LatticeBox window;
  int padding_radius = -1;  // -1 picks the calibrated default
  std::uint64_t seed = 0;
  double report_tol = 1e-3;
  // Labels are drawn on [0, max(u, u_top)]; samples with equal seed and
  // u_top are coupled across u.
  double u_top = 0;

  Coord n_T() const { return fri::n_T(T); }
  double label_top() const { return u > u_top ? u : u_top; }
  void validate() const;
};

struct TruncationReport {
  double t_star = 0;       // padding / n_T
  int padding = 0;
  double floor_padding = 0;  // calibrated minimum for report_tol
  double bound = 0;        // estimated expected number of omitted trajectories touching the window
  std::uint64_t calibration_reps = 0;
};

/** A trajectory with its intensity label; level-u samples keep label <= u. */
struct Trajectory {
  Path path;
  double label = 0;

  std::uint64_t lifetime() const { return path.length(); }
  friend bool operator==(const Trajectory& a, const Trajectory& b) {
    return a.label == b.label && a.path == b.path;
  }
};

struct FriSample {
  FriConfig config;
  TruncationReport report;
  std::vector<Trajectory> trajectories;  // sorted by (start, label)

  LatticeBox padded_window() const;
  // The coupled sample at level v <= config.u.
  FriSample at_level(double v) const;
  friend bool operator==(const FriSample& a, const FriSample& b);
};

struct HittingSample {
  std::vector<Point> target;  // sorted
  std::vector<double> escape;  // Es_K^(T) per target site
  std::vector<std::uint64_t> counts;
  std::vector<Trajectory> trajectories;
  double u = 0;
  double T = 0;
};

// Padding that keeps the estimated omitted-hit mass below cfg.report_tol.
TruncationReport calibrate_padding(const FriConfig& cfg);

FriSample sample_window(const FriConfig& cfg, int workers = 1);
// Labels on [0, max(u, u_top)], as in the window sampler.
FriSample sample_box_starts(int d, double u, double T, const LatticeBox& box, RngStream rng, double u_top = 0);

// Needs the killed green table for cap^(T); sizes over the solver cap fail.
HittingSample sample_hitting(const std::vector<Point>& K, double u, double T, const GreenTable& g, RngStream rng);

EdgeSet edges_of(const std::vector<Trajectory>& ts, int d);
EdgeSet edges_of(const FriSample& s);
EdgeSet edges_of(const HittingSample& s);

void save_sample(const FriSample& s, std::ostream& out);
FriSample load_sample(std::istream& in);
void save_sample(const FriSample& s, const std::string& path);
FriSample load_sample(const std::string& path);

}  // namespace fri
