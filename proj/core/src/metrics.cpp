#include "onnpic/metrics.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <vector>

namespace onnpic {

double psnr(const Tensor& x, const Tensor& x_hat, double peak) {
  if (!(x.shape() == x_hat.shape())) {
    throw DimensionError("psnr: shape mismatch");
  }
  const double* a = x.data().data();
  const double* b = x_hat.data().data();
  int64_t n = x.numel();
  double mse = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    double d = (a[i] - b[i]) * peak;
    mse += d * d;
  }
  mse /= static_cast<double>(n);
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

namespace {

constexpr int kWin = 11;
constexpr double kWinSigma = 1.5;
constexpr std::array<double, 5> kMsWeights = {0.0448, 0.2856, 0.3001, 0.2363,
                                              0.1333};
constexpr double kC1 = (0.01 * 255.0) * (0.01 * 255.0);
constexpr double kC2 = (0.03 * 255.0) * (0.03 * 255.0);

struct Plane {
  int h = 0, w = 0;
  std::vector<double> v;
  double& at(int y, int x) { return v[int64_t(y) * w + x]; }
  double at(int y, int x) const { return v[int64_t(y) * w + x]; }
};

std::array<double, kWin> gaussian_window() {
  std::array<double, kWin> g{};
  double sum = 0.0;
  for (int i = 0; i < kWin; ++i) {
    double d = i - (kWin - 1) / 2.0;
    g[i] = std::exp(-d * d / (2.0 * kWinSigma * kWinSigma));
    sum += g[i];
  }
  for (double& x : g) x /= sum;
  return g;
}

// Separable valid-window Gaussian filter: (h, w) -> (h-10, w-10).
Plane gauss_valid(const Plane& in) {
  static const std::array<double, kWin> g = gaussian_window();
  Plane tmp;
  tmp.h = in.h;
  tmp.w = in.w - kWin + 1;
  tmp.v.assign(int64_t(tmp.h) * tmp.w, 0.0);
  for (int y = 0; y < in.h; ++y) {
    for (int x = 0; x < tmp.w; ++x) {
      double acc = 0.0;
      for (int k = 0; k < kWin; ++k) acc += g[k] * in.at(y, x + k);
      tmp.at(y, x) = acc;
    }
  }
  Plane out;
  out.h = in.h - kWin + 1;
  out.w = tmp.w;
  out.v.assign(int64_t(out.h) * out.w, 0.0);
  for (int y = 0; y < out.h; ++y) {
    for (int x = 0; x < out.w; ++x) {
      double acc = 0.0;
      for (int k = 0; k < kWin; ++k) acc += g[k] * tmp.at(y + k, x);
      out.at(y, x) = acc;
    }
  }
  return out;
}

// 2x2 average pooling with ceil semantics; odd tails average what exists.
Plane downsample2(const Plane& in) {
  Plane out;
  out.h = (in.h + 1) / 2;
  out.w = (in.w + 1) / 2;
  out.v.assign(int64_t(out.h) * out.w, 0.0);
  for (int y = 0; y < out.h; ++y) {
    for (int x = 0; x < out.w; ++x) {
      double acc = 0.0;
      int cnt = 0;
      for (int dy = 0; dy < 2; ++dy) {
        for (int dx = 0; dx < 2; ++dx) {
          int sy = 2 * y + dy, sx = 2 * x + dx;
          if (sy < in.h && sx < in.w) {
            acc += in.at(sy, sx);
            ++cnt;
          }
        }
      }
      out.at(y, x) = acc / cnt;
    }
  }
  return out;
}

Plane multiply(const Plane& a, const Plane& b) {
  Plane out = a;
  for (size_t i = 0; i < out.v.size(); ++i) out.v[i] *= b.v[i];
  return out;
}

// Mean contrast-structure term and mean per-window SSIM at one scale.
void scale_stats(const Plane& x, const Plane& y, double* mean_cs,
                 double* mean_ssim) {
  Plane mu_x = gauss_valid(x);
  Plane mu_y = gauss_valid(y);
  Plane xx = gauss_valid(multiply(x, x));
  Plane yy = gauss_valid(multiply(y, y));
  Plane xy = gauss_valid(multiply(x, y));
  double acc_cs = 0.0, acc_ssim = 0.0;
  int64_t n = static_cast<int64_t>(mu_x.v.size());
  for (int64_t i = 0; i < n; ++i) {
    double mx = mu_x.v[i], my = mu_y.v[i];
    double sx = xx.v[i] - mx * mx;
    double sy = yy.v[i] - my * my;
    double sxy = xy.v[i] - mx * my;
    double cs = (2.0 * sxy + kC2) / (sx + sy + kC2);
    double lum = (2.0 * mx * my + kC1) / (mx * mx + my * my + kC1);
    acc_cs += cs;
    acc_ssim += lum * cs;
  }
  *mean_cs = acc_cs / n;
  *mean_ssim = acc_ssim / n;
}

}  // namespace

int ms_ssim_scales(int h, int w) {
  int scales = 0;
  int mh = h, mw = w;
  for (int s = 0; s < 5; ++s) {
    if (mh < kWin || mw < kWin) break;
    ++scales;
    mh = (mh + 1) / 2;
    mw = (mw + 1) / 2;
  }
  return scales;
}

double ms_ssim(const Tensor& x, const Tensor& x_hat) {
  if (!(x.shape() == x_hat.shape())) {
    throw DimensionError("ms_ssim: shape mismatch");
  }
  const Shape& s = x.shape();
  const int scales = ms_ssim_scales(s.h, s.w);
  if (scales < 1) {
    throw ArgumentError("ms_ssim: image smaller than the 11x11 window");
  }
  double wsum = 0.0;
  for (int j = 0; j < scales; ++j) wsum += kMsWeights[j];

  double result = 0.0;
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      Plane a, b;
      a.h = b.h = s.h;
      a.w = b.w = s.w;
      a.v.resize(int64_t(s.h) * s.w);
      b.v.resize(int64_t(s.h) * s.w);
      for (int y = 0; y < s.h; ++y) {
        for (int xpos = 0; xpos < s.w; ++xpos) {
          a.at(y, xpos) = x.at(n, c, y, xpos) * 255.0;
          b.at(y, xpos) = x_hat.at(n, c, y, xpos) * 255.0;
        }
      }
      double value = 1.0;
      for (int j = 0; j < scales; ++j) {
        double cs, ssim;
        scale_stats(a, b, &cs, &ssim);
        double term = (j == scales - 1) ? ssim : cs;
        if (term < 0.0) term = 0.0;
        value *= std::pow(term, kMsWeights[j] / wsum);
        if (j + 1 < scales) {
          a = downsample2(a);
          b = downsample2(b);
        }
      }
      result += value;
    }
  }
  return result / (double(s.n) * s.c);
}

}  // namespace onnpic
