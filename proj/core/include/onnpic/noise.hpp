#pragma once

#include <array>

#include "onnpic/tensor.hpp"

namespace onnpic {

// Heteroscedastic Gaussian surrogate for camera sensor noise: readout noise
// sigma_r (signal-independent std) plus shot noise sigma_s (variance
// proportional to the linear-domain signal).
struct NoiseParams {
  double sigma_r = 0.0;
  double sigma_s = 0.0;
};

// Training ranges (log10): sigma_r in [1e-3, 10^-1.5], sigma_s in [1e-4, 1e-2].
inline constexpr double kLogSigmaRMin = -3.0;
inline constexpr double kLogSigmaRMax = -1.5;
inline constexpr double kLogSigmaSMin = -4.0;
inline constexpr double kLogSigmaSMax = -2.0;

// Gamma approximation of the sRGB <-> raw conversion.
inline constexpr double kGamma = 2.2;

// x in [0,1] -> linear domain x^2.2, add N(0, sigma_r^2 + sigma_s * x_lin)
// per element, re-encode with the inverse gamma and clip to [0,1].
// Parameters outside the training ranges only warn (test levels may exceed
// them).
Tensor synthesize_noise(const Tensor& x_clean, const NoiseParams& p, Rng& rng);

// Log-uniform draws over the training ranges.
NoiseParams sample_train_params(Rng& rng);

// The four frozen evaluation levels, log-spaced from the range minima
// (level 1) to the range maxima (level 4).
std::array<NoiseParams, 4> test_levels();
NoiseParams test_level(int level);  // 1..4

// Noise-free clean-image augmentation for the contrastive branch: crop, then
// flips, then multiplicative brightness/contrast jitter. Deterministic given
// the rng state.
struct AugmentSpec {
  bool hflip = false;
  bool vflip = false;
  double jitter = 0.0;  // factors drawn from [1-jitter, 1+jitter]
  int crop_x = 0, crop_y = 0;
  int crop_w = 0, crop_h = 0;  // 0 -> full frame
};

Tensor augment(const Tensor& x_clean, const AugmentSpec& spec, Rng& rng);

}  // namespace onnpic
