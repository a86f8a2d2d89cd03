#pragma once

#include <vector>

#include "onnpic/errors.hpp"

namespace onnpic {

struct RdPoint {
  double bpp = 0.0;
  double psnr_db = 0.0;
  double msssim = 0.0;
};

// Rate-distortion curve: >= 1 points ordered by strictly increasing bpp.
// BD-Rate additionally requires >= 4 points.
struct RdCurve {
  std::vector<RdPoint> points;

  // Sorts by bpp and validates strict monotonicity.
  static RdCurve from_points(std::vector<RdPoint> pts);
};

enum class BdMetric { kPsnr, kMsSsim };

// Bjontegaard delta rate in percent: cubic least-squares fit of log10(bpp) as
// a function of quality for each curve, mean difference integrated over the
// common quality interval, returned as 100 * (10^deltaA - 1).
double bd_rate(const RdCurve& reference, const RdCurve& test, BdMetric metric);

// Fits the degree-3 polynomial used by bd_rate: returns coefficients c0..c3
// for log10(rate) as a function of (quality - shift). Exposed so an
// independent numerical-integration oracle can check the analytic integral.
struct BdFit {
  double shift = 0.0;
  double c[4] = {0, 0, 0, 0};
  double eval(double quality) const;
};
BdFit bd_fit_log_rate(const RdCurve& curve, BdMetric metric);

}  // namespace onnpic
