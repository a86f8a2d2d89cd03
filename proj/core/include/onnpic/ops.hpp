#pragma once

#include <span>
#include <vector>

#include "onnpic/tensor.hpp"

namespace onnpic {

// Differentiable operations over NCHW tensors. Every op returns a fresh
// tensor; when the tape is recording and some input requires grad, a backward
// rule is pushed. Binary ops broadcast numpy-style: each dim must match or be
// 1 on one side; the backward pass sum-reduces over broadcast dims.

enum class Reduction { kSum, kMean };

// ---- elementwise binary (broadcasting) ----
Tensor add(Tape& t, const Tensor& a, const Tensor& b);
Tensor sub(Tape& t, const Tensor& a, const Tensor& b);
Tensor mul(Tape& t, const Tensor& a, const Tensor& b);
Tensor div(Tape& t, const Tensor& a, const Tensor& b);

// ---- elementwise with a constant ----
Tensor add_scalar(Tape& t, const Tensor& a, double s);
Tensor mul_scalar(Tape& t, const Tensor& a, double s);

// ---- elementwise unary ----
Tensor neg(Tape& t, const Tensor& a);
Tensor exp(Tape& t, const Tensor& a);
Tensor log(Tape& t, const Tensor& a);  // throws DomainError on x <= 0
Tensor abs(Tape& t, const Tensor& a);
Tensor relu(Tape& t, const Tensor& a);
Tensor leaky_relu(Tape& t, const Tensor& a, double slope);
Tensor tanh(Tape& t, const Tensor& a);
Tensor sigmoid(Tape& t, const Tensor& a);
Tensor softplus(Tape& t, const Tensor& a);
// x^n for integer n >= 1; backward n * x^(n-1). n == 0 is an ArgumentError
// (constant terms belong to layer biases).
Tensor elementwise_pow(Tape& t, const Tensor& a, int n);
// max(x, floor); zero gradient below the floor.
Tensor clamp_min(Tape& t, const Tensor& a, double floor);

// ---- reductions ----
Tensor sum(Tape& t, const Tensor& a);   // -> (1,1,1,1)
Tensor mean(Tape& t, const Tensor& a);  // -> (1,1,1,1)
Tensor global_avg_pool(Tape& t, const Tensor& a);  // (N,C,H,W) -> (N,C,1,1)
Tensor global_max_pool(Tape& t, const Tensor& a);  // ties resolve to first
Tensor channel_mean(Tape& t, const Tensor& a);     // (N,C,H,W) -> (N,1,H,W)
Tensor channel_max(Tape& t, const Tensor& a);

// ---- shape ----
Tensor reshape(Tape& t, const Tensor& a, const Shape& s);
// axis 1 concatenates channels, axis 2 concatenates rows.
Tensor concat(Tape& t, std::span<const Tensor> parts, int axis);
Tensor concat_channels(Tape& t, std::span<const Tensor> parts);
Tensor slice_channels(Tape& t, const Tensor& a, int c0, int c1);
// Top-left spatial crop to (h, w); backward zero-pads.
Tensor slice_spatial(Tape& t, const Tensor& a, int h, int w);

// Shares storage, severed from the graph: gradients do not flow past it.
Tensor detach(const Tensor& a);

// ---- linear algebra ----
// Batched matrix product over the trailing two dims. The (N,C) batch dims
// must match, or be (1,1) on one side (broadcast).
Tensor matmul(Tape& t, const Tensor& a, const Tensor& b, bool trans_a = false,
              bool trans_b = false);

// ---- convolution ----
// x: (N,Cin,H,W), w: (Cout,Cin,k,k), bias: (1,Cout,1,1) or undefined.
// Output spatial dims: floor((H + 2p - d*(k-1) - 1)/s) + 1.
Tensor conv2d(Tape& t, const Tensor& x, const Tensor& w, const Tensor& bias,
              int stride, int padding, int dilation);

// Transposed convolution (adjoint of conv2d). w: (Cin,Cout,k,k).
// Output spatial dims: (H-1)*s - 2p + k + out_padding. Used for the 2x
// upsampling stages of the synthesis transforms.
Tensor conv_transpose2d(Tape& t, const Tensor& x, const Tensor& w,
                        const Tensor& bias, int stride, int padding,
                        int out_padding);

// ---- distances / normalization ----
// Sum or mean of |a - b| over all elements -> scalar.
Tensor l1_distance(Tape& t, const Tensor& a, const Tensor& b,
                   Reduction r = Reduction::kMean);
// Per-sample unit L2 norm over the C*H*W axes of each batch element.
Tensor l2_normalize(Tape& t, const Tensor& a, double eps = 1e-12);

// ---- entropy-model primitives ----
// Standard normal CDF, shared by the training likelihood and the coder's
// table builder so the two agree to float precision.
double normal_cdf(double x);

// Mass of the length-1 bin centered on y under N(mu, sigma^2):
//   P = Phi((y - mu + 0.5)/sigma) - Phi((y - mu - 0.5)/sigma)
// sigma is clamped to sigma_floor (not an error), P floored at p_floor; both
// clamps have zero gradient on the clamped side. Differentiable in y, mu and
// sigma.
Tensor gaussian_likelihood(Tape& t, const Tensor& y, const Tensor& mu,
                           const Tensor& sigma, double sigma_floor,
                           double p_floor);

// Round half away from zero, elementwise; no gradient (inference only).
Tensor round_tensor(const Tensor& a);

}  // namespace onnpic
