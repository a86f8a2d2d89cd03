#include "onnpic/losses.hpp"

#include <cmath>
#include <cstdio>

namespace onnpic {

Tensor guidance_loss(Tape& t, const Tensor& y0, const Tensor& y0_gt,
                     const Tensor& y1, const Tensor& y1_gt) {
  Tensor g0 = l1_distance(t, y0, y0_gt, Reduction::kMean);
  Tensor g1 = l1_distance(t, y1, y1_gt, Reduction::kMean);
  return add(t, g0, g1);
}

namespace {

bool rows_unit_norm(const Tensor& z) {
  const Shape& s = z.shape();
  int64_t per = int64_t(s.c) * s.h * s.w;
  const double* p = z.data().data();
  for (int n = 0; n < s.n; ++n) {
    double ss = 0.0;
    for (int64_t i = 0; i < per; ++i) ss += p[n * per + i] * p[n * per + i];
    if (std::fabs(std::sqrt(ss) - 1.0) > 1e-6) return false;
  }
  return true;
}

}  // namespace

Tensor contrastive_loss(Tape& t, const Tensor& z_noisy, const Tensor& z_aug,
                        double tau) {
  if (!z_noisy.defined() || z_noisy.shape().n < 1) {
    throw ArgumentError("contrastive_loss: empty batch");
  }
  if (!(z_noisy.shape() == z_aug.shape())) {
    throw DimensionError("contrastive_loss: embedding shapes differ");
  }
  if (tau <= 0.0) throw ArgumentError("contrastive_loss: tau must be > 0");
  const int N = z_noisy.shape().n;
  const int d = static_cast<int>(z_noisy.numel() / N);

  Tensor zn = z_noisy, za = z_aug;
  if (!rows_unit_norm(zn) || !rows_unit_norm(za)) {
    static bool warned = false;
    if (!warned) {
      std::fprintf(stderr,
                   "warning: contrastive embeddings not unit-norm; "
                   "normalizing\n");
      warned = true;
    }
    zn = l2_normalize(t, zn);
    za = l2_normalize(t, za);
  }

  // Stack into (2N, d): noisy block first, then augmented.
  Tensor rows[2] = {reshape(t, zn, {1, 1, N, d}), reshape(t, za, {1, 1, N, d})};
  Tensor e = concat(t, rows, 2);
  Tensor sim = mul_scalar(t, matmul(t, e, e, false, true), 1.0 / tau);

  const int M = 2 * N;
  Tensor off_diag = Tensor::zeros({1, 1, M, M});
  Tensor positives = Tensor::zeros({1, 1, M, M});
  {
    auto od = off_diag.mutable_data();
    auto pos = positives.mutable_data();
    for (int i = 0; i < M; ++i) {
      for (int j = 0; j < M; ++j) {
        if (i != j) od[int64_t(i) * M + j] = 1.0;
      }
      pos[int64_t(i) * M + (i + N) % M] = 1.0;
    }
  }
  Tensor ones = Tensor::full({1, 1, M, 1}, 1.0);
  // log denominator per anchor: sum_{j != i} exp(s_ij / tau)
  Tensor denom = matmul(t, mul(t, exp(t, sim), off_diag), ones);
  // positive similarity per anchor
  Tensor pos_sim = matmul(t, mul(t, sim, positives), ones);
  Tensor per_anchor = sub(t, log(t, denom), pos_sim);
  return mean(t, per_anchor);
}

Tensor mse_255(Tape& t, const Tensor& x, const Tensor& x_hat) {
  if (!(x.shape() == x_hat.shape())) {
    throw DimensionError("mse_255: shape mismatch");
  }
  Tensor d = mul_scalar(t, sub(t, x, x_hat), 255.0);
  return mean(t, mul(t, d, d));
}

Tensor rd_loss(Tape& t, const Tensor& bits_y, const Tensor& bits_z,
               const Tensor& x, const Tensor& x_hat, double lambda_d) {
  const Shape& s = x.shape();
  double inv_pixels = 1.0 / (double(s.n) * s.h * s.w);
  Tensor bpp = mul_scalar(t, add(t, bits_y, bits_z), inv_pixels);
  Tensor dist = mul_scalar(t, mse_255(t, x, x_hat), lambda_d);
  return add(t, bpp, dist);
}

Tensor total_loss(Tape& t, const Tensor& bits_y, const Tensor& bits_z,
                  const Tensor& x, const Tensor& x_hat,
                  const Tensor& guidance, const Tensor& contrastive,
                  const LossWeights& w) {
  Tensor loss = rd_loss(t, bits_y, bits_z, x, x_hat, w.lambda_d);
  if (guidance.defined()) {
    loss = add(t, loss, mul_scalar(t, guidance, w.lambda_g));
  }
  if (contrastive.defined()) {
    loss = add(t, loss, mul_scalar(t, contrastive, w.lambda_c));
  }
  return loss;
}

}  // namespace onnpic
