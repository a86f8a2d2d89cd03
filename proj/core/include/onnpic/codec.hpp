#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "onnpic/constants.hpp"
#include "onnpic/denoiser.hpp"
#include "onnpic/layers.hpp"

namespace onnpic {

// Quality ladder q1..q6 -> lambda_d (on 255^2-scaled MSE).
inline constexpr std::array<double, 6> kLambdaLadder = {
    0.0018, 0.0035, 0.0067, 0.013, 0.025, 0.0483};

inline constexpr double kLeakySlope = 0.01;

struct ModelConfig {
  int channels = 32;        // latent channels C
  int hyper_channels = 16;  // hyper-latent channels Cz
  int selfonn_q = 3;
  DenoiserKind denoiser_kind = DenoiserKind::kSelfOnn;
  bool multiscale = true;
  bool contrastive = true;
  int proj_dim = 64;
  int cbam_reduction = 4;
  int quality = 3;        // 1..6
  double lambda_d = 0.0;  // 0 -> take from the ladder via quality
  double lambda_g = 3.0;
  double lambda_c = 1.5;
  double tau = 0.1;

  double resolved_lambda_d() const {
    if (lambda_d > 0.0) return lambda_d;
    if (quality < 1 || quality > 6) {
      throw ConfigError("quality must be in 1..6");
    }
    return kLambdaLadder[quality - 1];
  }
};

enum class RunMode { kTrain, kInfer };

// Quantization proxy: train adds i.i.d. U(-0.5, 0.5) noise (straight-through
// identity gradient); infer rounds half away from zero.
Tensor quantize(Tape& t, const Tensor& x, RunMode mode, Rng* rng);

// Total information content -sum log2(P) in bits, as a scalar tensor.
Tensor rate_bits(Tape& t, const Tensor& likelihoods);

struct ForwardResult {
  Tensor y0, y1, z;
  Tensor y0_gt, y1_gt;  // guidance targets (constants), set when clean given
  Tensor y1_hat, z_hat;
  Tensor mu, sigma;
  Tensor p_y, p_z;
  Tensor bits_y, bits_z;  // scalar tensors
  Tensor x_hat;
  Tensor emb_noisy, emb_aug;  // unit-norm projections, set when aug given
};

// The joint compression-denoising model: shared two-level analysis
// transforms, residual feature denoisers, mean-scale hyperprior over y1,
// per-channel logistic prior over z, synthesis transform and the contrastive
// projection head.
class Model {
 public:
  Model(const ModelConfig& cfg, uint64_t seed);

  const ModelConfig& config() const { return cfg_; }

  // Runs the three-branch pipeline:
  //  - denoising branch on x_noisy (d0/d1 skipped when denoise = false),
  //  - guidance branch on x_clean when defined (gradient-stopped),
  //  - contrastive branch on x_aug when defined and the head is enabled.
  // H and W must be divisible by 16 (callers pad beforehand).
  ForwardResult forward(Tape& t, const Tensor& x_noisy, const Tensor& x_clean,
                        const Tensor& x_aug, RunMode mode, Rng* rng,
                        bool denoise = true) const;

  // Individual stages, used by the file decoder and by tests.
  Tensor analysis0(Tape& t, const Tensor& x) const;
  Tensor analysis1(Tape& t, const Tensor& f) const;
  Tensor hyper_analysis(Tape& t, const Tensor& y1) const;
  // Emits the (mu, sigma) planes for a y1 of (target_h, target_w); the raw
  // synthesis output is cropped when the hyper round-trip overshoots.
  std::pair<Tensor, Tensor> hyper_synthesis(Tape& t, const Tensor& z_hat,
                                            int target_h, int target_w) const;
  Tensor synthesize(Tape& t, const Tensor& y_hat) const;
  Tensor prior_likelihood(Tape& t, const Tensor& z_hat) const;
  Tensor project(Tape& t, const Tensor& y1) const;

  // Per-channel logistic prior parameters as plain values (coder tables).
  double prior_location(int channel) const;
  double prior_scale(int channel) const;

  const std::vector<std::pair<std::string, Tensor>>& parameters() const {
    return params_;
  }
  int64_t parameter_count() const;
  void zero_grads() const;

  const DenoiserStage& d0() const { return d0_; }
  const DenoiserStage& d1() const { return d1_; }
  const ConvLayer& ga0_layer(int i) const { return ga0_[i]; }

 private:
  ModelConfig cfg_;
  std::vector<ConvLayer> ga0_, ga1_, ha_;
  std::vector<ConvTransposeLayer> gs_, hs_;
  DenoiserStage d0_, d1_;
  Tensor prior_loc_, prior_log_scale_;  // (1, Cz, 1, 1)
  ConvLayer proj_fc1_, proj_fc2_;       // 1x1 head, when contrastive
  std::vector<std::pair<std::string, Tensor>> params_;

  void register_params();
};

}  // namespace onnpic
