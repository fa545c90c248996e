#pragma once

#include <cmath>
#include <stdexcept>

namespace fri {

/** F_d(a): sqrt(a) for d=3, a/log a for d=4 (natural log), a for d>=5. */
struct ScalingLaw {
  int d = 3;

  explicit ScalingLaw(int dim) : d(dim) {
    if (dim < 3) throw std::invalid_argument("scaling law needs d >= 3");
  }
  double operator()(double a) const {
    if (!(a > 1)) throw std::invalid_argument("F_d needs a > 1");
    if (d == 3) return std::sqrt(a);
    if (d == 4) return a / std::log(a);
    return a;
  }
};

inline double f_d(int d, double a) { return ScalingLaw(d)(a); }

}  // namespace fri
