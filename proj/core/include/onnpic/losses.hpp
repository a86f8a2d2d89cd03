#pragma once

#include "onnpic/ops.hpp"

namespace onnpic {

// Two-level guidance loss: mean-normalized L1 between denoised features and
// the (constant) guiding features,  G = |y0 - y0_gt|_1 + |y1 - y1_gt|_1.
Tensor guidance_loss(Tape& t, const Tensor& y0, const Tensor& y0_gt,
                     const Tensor& y1, const Tensor& y1_gt);

// NT-Xent contrastive loss over N (noisy, augmented) pairs. Embeddings are
// row vectors shaped (N, d, 1, 1); pair i's positive is its counterpart in
// the other view, negatives are the remaining 2N-2 in-batch embeddings, with
// cosine similarity and temperature tau. Averaged over all 2N anchors.
// Rows are expected unit-norm; non-normalized input is normalized with a
// warning. N = 0 is an ArgumentError.
Tensor contrastive_loss(Tape& t, const Tensor& z_noisy, const Tensor& z_aug,
                        double tau);

// MSE on 255-scaled pixels (inputs live in [0,1]).
Tensor mse_255(Tape& t, const Tensor& x, const Tensor& x_hat);

// Rate-distortion objective: bpp(y) + bpp(z) + lambda_d * MSE_255(x, x_hat).
// bits_* are scalar bit counts for the whole batch; pixel count comes from x.
Tensor rd_loss(Tape& t, const Tensor& bits_y, const Tensor& bits_z,
               const Tensor& x, const Tensor& x_hat, double lambda_d);

struct LossWeights {
  double lambda_d = 0.013;
  double lambda_g = 3.0;
  double lambda_c = 1.5;
  double tau = 0.1;
};

// Full objective: rd_loss + lambda_g * G + lambda_c * L_CL. Undefined
// guidance/contrastive tensors contribute exactly zero (ablations).
Tensor total_loss(Tape& t, const Tensor& bits_y, const Tensor& bits_z,
                  const Tensor& x, const Tensor& x_hat,
                  const Tensor& guidance, const Tensor& contrastive,
                  const LossWeights& w);

}  // namespace onnpic
