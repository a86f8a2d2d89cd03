#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <limits>

#include "doctest.h"
#include "onnpic/bdrate.hpp"
#include "onnpic/metrics.hpp"
#include "onnpic/rng.hpp"

using namespace onnpic;

namespace {

// Same construction as tests/support/msssim_oracle.py, which froze the
// golden values below.
Tensor golden_pattern(int size = 192) {
  Tensor img = Tensor::zeros({1, 3, size, size});
  double* p = img.mutable_data().data();
  const double pi = 3.14159265358979323846;
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        double v = (x < size / 2)
                       ? 0.5
                       : 0.5 + 0.45 * std::sin(2 * pi * x / 8.0) *
                             std::sin(2 * pi * y / 8.0);
        p[img.shape().index(0, c, y, x)] = v;
      }
    }
  }
  return img;
}

Tensor invert(const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape());
  for (int64_t i = 0; i < x.numel(); ++i) {
    out.mutable_data()[i] = 1.0 - x.data()[i];
  }
  return out;
}

Tensor box3(const Tensor& x) {
  const Shape& s = x.shape();
  Tensor out = Tensor::zeros(s);
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int y = 0; y < s.h; ++y)
        for (int xx = 0; xx < s.w; ++xx) {
          double acc = 0.0;
          int cnt = 0;
          for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
              int yy = y + dy, xw = xx + dx;
              if (yy >= 0 && yy < s.h && xw >= 0 && xw < s.w) {
                acc += x.at(n, c, yy, xw);
                ++cnt;
              }
            }
          out.mutable_data()[s.index(0, c, y, xx)] = acc / cnt;
        }
  return out;
}

Tensor shift(const Tensor& x, double d) {
  Tensor out = Tensor::zeros(x.shape());
  for (int64_t i = 0; i < x.numel(); ++i) {
    out.mutable_data()[i] = x.data()[i] + d;
  }
  return out;
}

}  // namespace

TEST_CASE("psnr closed forms") {
  Rng rng(601);
  Tensor x = Tensor::uniform({1, 3, 8, 8}, 0.0, 1.0, rng);
  CHECK(std::isinf(psnr(x, x)));

  // uniform error of 1/255 -> MSE 1 on the 255 scale -> 48.13 dB
  Tensor y = shift(x, 1.0 / 255.0);
  CHECK(psnr(x, y) == doctest::Approx(48.1308).epsilon(1e-4));

  // uniform error of 16/255 -> MSE 256 -> 10 log10(255^2/256) = 24.05 dB
  Tensor z = shift(x, 16.0 / 255.0);
  CHECK(psnr(x, z) ==
        doctest::Approx(10.0 * std::log10(255.0 * 255.0 / 256.0))
            .epsilon(1e-10));
  CHECK(psnr(x, z) == doctest::Approx(24.05).epsilon(1e-3));
}

TEST_CASE("ms_ssim: self-similarity is exactly 1") {
  Tensor x = golden_pattern();
  CHECK(ms_ssim(x, x) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("ms_ssim: inverted high-contrast pattern scores < 0.2 (golden 0)") {
  Tensor x = golden_pattern();
  double v = ms_ssim(x, invert(x));
  CHECK(v < 0.2);
  CHECK(v == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("ms_ssim: blurred-pair golden value from the independent oracle") {
  Tensor x = golden_pattern();
  double v = ms_ssim(x, box3(x));
  CHECK(v == doctest::Approx(0.971162490715).epsilon(2e-9));
}

TEST_CASE("ms_ssim is luminance-shift tolerant within the stabilizer") {
  Tensor x = golden_pattern();
  Tensor b = box3(x);
  double base = ms_ssim(x, b);
  double shifted = ms_ssim(shift(x, 0.02), shift(b, 0.02));
  CHECK(std::fabs(shifted - base) < 1e-3);
}

TEST_CASE("ms_ssim scale fallback follows the documented size thresholds") {
  CHECK(ms_ssim_scales(192, 192) == 5);
  CHECK(ms_ssim_scales(161, 161) == 5);  // 161 -> 81 -> 41 -> 21 -> 11
  CHECK(ms_ssim_scales(160, 160) == 4);
  CHECK(ms_ssim_scales(44, 44) == 3);
  CHECK(ms_ssim_scales(11, 11) == 1);
  CHECK(ms_ssim_scales(10, 400) == 0);

  Rng rng(607);
  Tensor small = Tensor::uniform({1, 3, 44, 44}, 0.0, 1.0, rng);
  CHECK(ms_ssim(small, small) == doctest::Approx(1.0).epsilon(1e-12));
  Tensor tiny = Tensor::uniform({1, 3, 10, 10}, 0.0, 1.0, rng);
  CHECK_THROWS_AS(ms_ssim(tiny, tiny), ArgumentError);
}

TEST_CASE("rd curve validation") {
  CHECK_THROWS_AS(
      RdCurve::from_points({{1.0, 30, 0.9}, {1.0, 31, 0.91}}), ArgumentError);
  RdCurve c = RdCurve::from_points(
      {{2.0, 32, 0.95}, {1.0, 30, 0.9}, {3.0, 33, 0.97}, {4.0, 34, 0.98}});
  CHECK(c.points.front().bpp == 1.0);
  CHECK(c.points.back().bpp == 4.0);
}

TEST_CASE("bd_rate: identical curves give exactly 0") {
  RdCurve c = RdCurve::from_points(
      {{0.2, 28, 0.90}, {0.4, 31, 0.94}, {0.8, 34, 0.97}, {1.6, 37, 0.99}});
  CHECK(bd_rate(c, c, BdMetric::kPsnr) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(bd_rate(c, c, BdMetric::kMsSsim) ==
        doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("bd_rate: uniform 1.10x rate scaling gives +10% (±1e-6)") {
  RdCurve ref = RdCurve::from_points(
      {{0.25, 27.5, 0.91}, {0.5, 30.2, 0.94}, {1.0, 33.8, 0.968},
       {2.0, 36.9, 0.985}, {3.5, 39.3, 0.992}});
  std::vector<RdPoint> scaled;
  for (RdPoint p : ref.points) {
    p.bpp *= 1.10;
    scaled.push_back(p);
  }
  RdCurve test = RdCurve::from_points(std::move(scaled));
  CHECK(bd_rate(ref, test, BdMetric::kPsnr) ==
        doctest::Approx(10.0).epsilon(1e-7));
  CHECK(std::fabs(bd_rate(ref, test, BdMetric::kPsnr) - 10.0) < 1e-6);
  CHECK(std::fabs(bd_rate(ref, test, BdMetric::kMsSsim) - 10.0) < 1e-6);
}

namespace {

RdCurve random_curve(Rng& rng, double q_lo, double q_hi) {
  int n = 4 + static_cast<int>(rng.uniform_int(0, 2));
  std::vector<RdPoint> pts;
  double bpp = rng.uniform(0.1, 0.3);
  for (int i = 0; i < n; ++i) {
    double f = static_cast<double>(i) / (n - 1);
    RdPoint p;
    p.bpp = bpp;
    p.psnr_db = q_lo + (q_hi - q_lo) * f + rng.uniform(-0.3, 0.3);
    p.msssim = 0.85 + 0.14 * f;
    pts.push_back(p);
    bpp *= rng.uniform(1.4, 2.2);
  }
  return RdCurve::from_points(std::move(pts));
}

// Dense trapezoid integration of the two fitted cubics: the independent
// check on the analytic integral inside bd_rate.
double bd_rate_trapezoid(const RdCurve& ref, const RdCurve& test,
                         BdMetric metric) {
  BdFit fr = bd_fit_log_rate(ref, metric);
  BdFit ft = bd_fit_log_rate(test, metric);
  auto quality = [&](const RdPoint& p) {
    return metric == BdMetric::kPsnr ? p.psnr_db : p.msssim;
  };
  auto range = [&](const RdCurve& c) {
    double lo = quality(c.points[0]), hi = lo;
    for (const auto& p : c.points) {
      lo = std::min(lo, quality(p));
      hi = std::max(hi, quality(p));
    }
    return std::pair<double, double>(lo, hi);
  };
  auto [rlo, rhi] = range(ref);
  auto [tlo, thi] = range(test);
  double lo = std::max(rlo, tlo), hi = std::min(rhi, thi);
  const int n = 10000;
  double acc = 0.0;
  for (int i = 0; i <= n; ++i) {
    double q = lo + (hi - lo) * i / n;
    double d = ft.eval(q) - fr.eval(q);
    acc += (i == 0 || i == n) ? 0.5 * d : d;
  }
  double delta = acc / n;
  return 100.0 * (std::pow(10.0, delta) - 1.0);
}

}  // namespace

TEST_CASE("bd_rate agrees with the dense integration oracle on 50 pairs") {
  Rng rng(613);
  for (int trial = 0; trial < 50; ++trial) {
    RdCurve ref = random_curve(rng, 28.0, 38.0);
    RdCurve test = random_curve(rng, 29.0, 37.0);
    double got = bd_rate(ref, test, BdMetric::kPsnr);
    double oracle = bd_rate_trapezoid(ref, test, BdMetric::kPsnr);
    CHECK(std::fabs(got - oracle) < 0.01);
  }
}

TEST_CASE("bd_rate antisymmetry in the log domain") {
  Rng rng(617);
  for (int trial = 0; trial < 20; ++trial) {
    RdCurve a = random_curve(rng, 28.0, 38.0);
    RdCurve b = random_curve(rng, 28.5, 37.5);
    double ab = bd_rate(a, b, BdMetric::kPsnr);
    double ba = bd_rate(b, a, BdMetric::kPsnr);
    double predicted = -ba / (1.0 + ba / 100.0);
    CHECK(std::fabs(ab - predicted) < 0.05);
  }
}

TEST_CASE("bd_rate error cases") {
  RdCurve three = RdCurve::from_points(
      {{0.2, 30, 0.9}, {0.4, 32, 0.93}, {0.8, 34, 0.96}});
  RdCurve four = RdCurve::from_points(
      {{0.2, 30, 0.9}, {0.4, 32, 0.93}, {0.8, 34, 0.96}, {1.6, 36, 0.98}});
  CHECK_THROWS_AS(bd_rate(three, four, BdMetric::kPsnr), ArgumentError);
  RdCurve low = RdCurve::from_points(
      {{0.2, 10, 0.50}, {0.4, 12, 0.55}, {0.8, 14, 0.60}, {1.6, 16, 0.65}});
  CHECK_THROWS_AS(bd_rate(low, four, BdMetric::kPsnr), ComputationError);
}
