#include "onnpic/noise.hpp"

#include <cmath>
#include <cstdio>

namespace onnpic {

Tensor synthesize_noise(const Tensor& x_clean, const NoiseParams& p,
                        Rng& rng) {
  if (p.sigma_r < 0.0 || p.sigma_s < 0.0) {
    throw ArgumentError("noise parameters must be nonnegative");
  }
  double lr = p.sigma_r > 0 ? std::log10(p.sigma_r) : kLogSigmaRMin;
  double ls = p.sigma_s > 0 ? std::log10(p.sigma_s) : kLogSigmaSMin;
  if (lr > kLogSigmaRMax + 1e-12 || ls > kLogSigmaSMax + 1e-12) {
    static bool warned = false;
    if (!warned) {
      std::fprintf(stderr,
                   "warning: noise params (%.4g, %.4g) exceed the training "
                   "ranges\n",
                   p.sigma_r, p.sigma_s);
      warned = true;
    }
  }
  const double var_r = p.sigma_r * p.sigma_r;
  const double inv_gamma = 1.0 / kGamma;
  Tensor out = Tensor::zeros(x_clean.shape());
  const double* px = x_clean.data().data();
  double* po = out.mutable_data().data();
  int64_t n = x_clean.numel();
  if (p.sigma_r == 0.0 && p.sigma_s == 0.0) {
    // exact pass-through, no gamma round-trip error
    for (int64_t i = 0; i < n; ++i) po[i] = px[i];
    return out;
  }
  for (int64_t i = 0; i < n; ++i) {
    double lin = std::pow(px[i], kGamma);
    double sd = std::sqrt(var_r + p.sigma_s * lin);
    double noisy = lin + sd * rng.normal();
    if (noisy < 0.0) noisy = 0.0;
    double srgb = std::pow(noisy, inv_gamma);
    po[i] = srgb < 0.0 ? 0.0 : (srgb > 1.0 ? 1.0 : srgb);
  }
  return out;
}

NoiseParams sample_train_params(Rng& rng) {
  NoiseParams p;
  p.sigma_r = std::pow(10.0, rng.uniform(kLogSigmaRMin, kLogSigmaRMax));
  p.sigma_s = std::pow(10.0, rng.uniform(kLogSigmaSMin, kLogSigmaSMax));
  return p;
}

std::array<NoiseParams, 4> test_levels() {
  // Log-spaced across the training ranges; level 1 sits at the minima and
  // level 4 at the maxima. Frozen configuration constants.
  std::array<NoiseParams, 4> levels;
  for (int i = 0; i < 4; ++i) {
    double fr = kLogSigmaRMin + (kLogSigmaRMax - kLogSigmaRMin) * i / 3.0;
    double fs = kLogSigmaSMin + (kLogSigmaSMax - kLogSigmaSMin) * i / 3.0;
    levels[i] = {std::pow(10.0, fr), std::pow(10.0, fs)};
  }
  return levels;
}

NoiseParams test_level(int level) {
  if (level < 1 || level > 4) {
    throw ArgumentError("noise level must be in 1..4");
  }
  return test_levels()[level - 1];
}

Tensor augment(const Tensor& x_clean, const AugmentSpec& spec, Rng& rng) {
  const Shape& s = x_clean.shape();
  int cw = spec.crop_w > 0 ? spec.crop_w : s.w;
  int ch = spec.crop_h > 0 ? spec.crop_h : s.h;
  if (spec.crop_x < 0 || spec.crop_y < 0 || spec.crop_x + cw > s.w ||
      spec.crop_y + ch > s.h) {
    throw ArgumentError("augment: crop outside image");
  }
  Tensor out = Tensor::zeros({s.n, s.c, ch, cw});
  double contrast = 1.0, brightness = 1.0;
  if (spec.jitter > 0.0) {
    contrast = rng.uniform(1.0 - spec.jitter, 1.0 + spec.jitter);
    brightness = rng.uniform(1.0 - spec.jitter, 1.0 + spec.jitter);
  }
  const double* px = x_clean.data().data();
  double* po = out.mutable_data().data();
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      for (int y = 0; y < ch; ++y) {
        int sy = spec.vflip ? spec.crop_y + ch - 1 - y : spec.crop_y + y;
        for (int x = 0; x < cw; ++x) {
          int sx = spec.hflip ? spec.crop_x + cw - 1 - x : spec.crop_x + x;
          double v = px[s.index(n, c, sy, sx)];
          if (spec.jitter > 0.0) {
            v = ((v - 0.5) * contrast + 0.5) * brightness;
            v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
          }
          po[out.shape().index(n, c, y, x)] = v;
        }
      }
    }
  }
  return out;
}

}  // namespace onnpic
