#pragma once

#include "onnpic/tensor.hpp"

namespace onnpic {

// 10*log10(peak^2 / MSE) with MSE computed on peak-scaled pixels (inputs in
// [0,1]). Identical images return +infinity.
double psnr(const Tensor& x, const Tensor& x_hat, double peak = 255.0);

// Multi-scale SSIM with the canonical 5-scale weights, 11x11 Gaussian window
// (sigma 1.5) and the original SSIM stabilizers on the 255 scale. Scales are
// linked by 2x2 average pooling with ceil semantics (odd tails average the
// available pixels), so the full 5-scale form needs min(H,W) >= 161. Smaller
// images drop scales and renormalize the weights; an image too small for even
// one scale is an ArgumentError. Contrast/structure terms are clamped at 0.
// Computed per channel, averaged across channels.
double ms_ssim(const Tensor& x, const Tensor& x_hat);

// Number of scales the fallback keeps for a given size (1..5).
int ms_ssim_scales(int h, int w);

}  // namespace onnpic
