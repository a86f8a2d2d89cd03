#include "onnpic/bdrate.hpp"

#include <algorithm>
#include <cmath>

namespace onnpic {

RdCurve RdCurve::from_points(std::vector<RdPoint> pts) {
  std::sort(pts.begin(), pts.end(),
            [](const RdPoint& a, const RdPoint& b) { return a.bpp < b.bpp; });
  for (size_t i = 0; i + 1 < pts.size(); ++i) {
    if (!(pts[i].bpp < pts[i + 1].bpp)) {
      throw ArgumentError("rd curve needs strictly increasing bpp");
    }
    if (pts[i].bpp <= 0.0) {
      throw ArgumentError("rd curve has nonpositive bpp");
    }
  }
  return RdCurve{std::move(pts)};
}

namespace {

double quality_of(const RdPoint& p, BdMetric m) {
  return m == BdMetric::kPsnr ? p.psnr_db : p.msssim;
}

// Degree-3 least squares through the normal equations; qualities are shifted
// by their mean first to keep the 4x4 system well conditioned.
void polyfit3(const std::vector<double>& xs, const std::vector<double>& ys,
              double* coeff) {
  double a[4][5] = {};
  const size_t n = xs.size();
  for (size_t k = 0; k < n; ++k) {
    double pw[7];
    pw[0] = 1.0;
    for (int i = 1; i < 7; ++i) pw[i] = pw[i - 1] * xs[k];
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) a[i][j] += pw[i + j];
      a[i][4] += pw[i] * ys[k];
    }
  }
  // Gaussian elimination with partial pivoting.
  for (int col = 0; col < 4; ++col) {
    int piv = col;
    for (int r = col + 1; r < 4; ++r) {
      if (std::fabs(a[r][col]) > std::fabs(a[piv][col])) piv = r;
    }
    if (std::fabs(a[piv][col]) < 1e-300) {
      throw ComputationError("bd_rate: singular fit (degenerate curve)");
    }
    std::swap(a[piv], a[col]);
    for (int r = 0; r < 4; ++r) {
      if (r == col) continue;
      double f = a[r][col] / a[col][col];
      for (int j = col; j < 5; ++j) a[r][j] -= f * a[col][j];
    }
  }
  for (int i = 0; i < 4; ++i) coeff[i] = a[i][4] / a[i][i];
}

}  // namespace

double BdFit::eval(double quality) const {
  double u = quality - shift;
  return c[0] + u * (c[1] + u * (c[2] + u * c[3]));
}

BdFit bd_fit_log_rate(const RdCurve& curve, BdMetric metric) {
  if (curve.points.size() < 4) {
    throw ArgumentError("bd_rate needs at least 4 points per curve");
  }
  BdFit fit;
  std::vector<double> q, lr;
  for (const RdPoint& p : curve.points) {
    if (p.bpp <= 0.0) throw ArgumentError("bd_rate: nonpositive rate");
    q.push_back(quality_of(p, metric));
    lr.push_back(std::log10(p.bpp));
  }
  double mean_q = 0.0;
  for (double v : q) mean_q += v;
  mean_q /= q.size();
  fit.shift = mean_q;
  for (double& v : q) v -= mean_q;
  polyfit3(q, lr, fit.c);
  return fit;
}

double bd_rate(const RdCurve& reference, const RdCurve& test, BdMetric metric) {
  BdFit fr = bd_fit_log_rate(reference, metric);
  BdFit ft = bd_fit_log_rate(test, metric);

  auto qrange = [&](const RdCurve& c) {
    double lo = quality_of(c.points.front(), metric);
    double hi = lo;
    for (const RdPoint& p : c.points) {
      lo = std::min(lo, quality_of(p, metric));
      hi = std::max(hi, quality_of(p, metric));
    }
    return std::pair<double, double>(lo, hi);
  };
  auto [rlo, rhi] = qrange(reference);
  auto [tlo, thi] = qrange(test);
  double lo = std::max(rlo, tlo);
  double hi = std::min(rhi, thi);
  if (!(hi > lo)) {
    throw ComputationError("bd_rate: quality ranges do not overlap");
  }

  // Exact integral of the cubic over [lo, hi] in each fit's local variable.
  auto integral = [](const BdFit& f, double lo, double hi) {
    auto anti = [&](double qv) {
      double u = qv - f.shift;
      return u * (f.c[0] + u * (f.c[1] / 2 + u * (f.c[2] / 3 + u * f.c[3] / 4)));
    };
    return anti(hi) - anti(lo);
  };
  double delta = (integral(ft, lo, hi) - integral(fr, lo, hi)) / (hi - lo);
  return 100.0 * (std::pow(10.0, delta) - 1.0);
}

}  // namespace onnpic
