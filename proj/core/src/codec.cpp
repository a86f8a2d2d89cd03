#include "onnpic/codec.hpp"

#include <cmath>

namespace onnpic {

Tensor quantize(Tape& t, const Tensor& x, RunMode mode, Rng* rng) {
  if (mode == RunMode::kInfer) return round_tensor(x);
  if (rng == nullptr) {
    throw ArgumentError("quantize: train mode needs an rng");
  }
  Tensor noise = Tensor::zeros(x.shape());
  for (double& v : noise.mutable_data()) v = rng->uniform01() - 0.5;
  return add(t, x, noise);
}

Tensor rate_bits(Tape& t, const Tensor& likelihoods) {
  // -sum log2 P == -sum ln P / ln 2; log throws DomainError on P <= 0.
  constexpr double kInvLn2 = 1.4426950408889634074;
  return mul_scalar(t, sum(t, log(t, likelihoods)), -kInvLn2);
}

Model::Model(const ModelConfig& cfg, uint64_t seed) : cfg_(cfg) {
  if (cfg.channels < 4 || cfg.channels % 4 != 0) {
    throw ConfigError("channels must be a positive multiple of 4");
  }
  if (cfg.hyper_channels < 1) throw ConfigError("hyper_channels must be >= 1");
  cfg_.resolved_lambda_d();  // validates quality
  Rng rng(mix_seed(seed, 0x6d6f64656cull));  // independent init stream
  const int C = cfg.channels, Cz = cfg.hyper_channels;

  ga0_.push_back(make_conv(3, C, 5, rng, 2, 2, 1));
  ga0_.push_back(make_conv(C, C, 5, rng, 2, 2, 1));
  ga1_.push_back(make_conv(C, C, 5, rng, 2, 2, 1));
  ga1_.push_back(make_conv(C, C, 5, rng, 2, 2, 1));
  for (int i = 0; i < 3; ++i) {
    gs_.push_back(make_conv_transpose(C, C, 5, rng, 2, 2, 1));
  }
  gs_.push_back(make_conv_transpose(C, 3, 5, rng, 2, 2, 1));
  ha_.push_back(make_conv(C, Cz, 5, rng, 2, 2, 1));
  ha_.push_back(make_conv(Cz, Cz, 5, rng, 2, 2, 1));
  hs_.push_back(make_conv_transpose(Cz, Cz, 5, rng, 2, 2, 1));
  hs_.push_back(make_conv_transpose(Cz, 2 * C, 5, rng, 2, 2, 1));

  DenoiserOptions dopt;
  dopt.kind = cfg.denoiser_kind;
  dopt.multiscale = cfg.multiscale;
  dopt.q_order = cfg.selfonn_q;
  dopt.cbam_reduction = cfg.cbam_reduction;
  DenoiserOptions d0opt = dopt;
  d0opt.kind = DenoiserKind::kConv;  // d0 is the convolutional stage
  d0_ = make_denoiser_stage(C, d0opt, rng);
  d1_ = make_denoiser_stage(C, dopt, rng);

  prior_loc_ = Tensor::zeros({1, Cz, 1, 1}, true);
  prior_log_scale_ = Tensor::zeros({1, Cz, 1, 1}, true);

  if (cfg.contrastive) {
    proj_fc1_ = make_conv(C, C, 1, rng);
    proj_fc2_ = make_conv(C, cfg.proj_dim, 1, rng);
  }
  register_params();
}

void Model::register_params() {
  params_.clear();
  auto conv_list = [&](const char* name, std::vector<ConvLayer>& ls) {
    for (size_t i = 0; i < ls.size(); ++i) {
      ls[i].collect_parameters(std::string(name) + std::to_string(i), &params_);
    }
  };
  auto convt_list = [&](const char* name, std::vector<ConvTransposeLayer>& ls) {
    for (size_t i = 0; i < ls.size(); ++i) {
      ls[i].collect_parameters(std::string(name) + std::to_string(i), &params_);
    }
  };
  conv_list("ga0.", ga0_);
  conv_list("ga1.", ga1_);
  convt_list("gs.", gs_);
  conv_list("ha.", ha_);
  convt_list("hs.", hs_);
  d0_.collect_parameters("d0", &params_);
  d1_.collect_parameters("d1", &params_);
  params_.emplace_back("prior.loc", prior_loc_);
  params_.emplace_back("prior.log_scale", prior_log_scale_);
  if (cfg_.contrastive) {
    proj_fc1_.collect_parameters("proj.fc1", &params_);
    proj_fc2_.collect_parameters("proj.fc2", &params_);
  }
}

int64_t Model::parameter_count() const {
  int64_t n = 0;
  for (const auto& [name, p] : params_) n += p.numel();
  return n;
}

void Model::zero_grads() const {
  for (const auto& [name, p] : params_) {
    const_cast<Tensor&>(p).zero_grad();
  }
}

Tensor Model::analysis0(Tape& t, const Tensor& x) const {
  Tensor h = leaky_relu(t, ga0_[0].forward(t, x), kLeakySlope);
  return leaky_relu(t, ga0_[1].forward(t, h), kLeakySlope);
}

Tensor Model::analysis1(Tape& t, const Tensor& f) const {
  Tensor h = leaky_relu(t, ga1_[0].forward(t, f), kLeakySlope);
  return leaky_relu(t, ga1_[1].forward(t, h), kLeakySlope);
}

Tensor Model::hyper_analysis(Tape& t, const Tensor& y1) const {
  Tensor h = leaky_relu(t, ha_[0].forward(t, y1), kLeakySlope);
  return ha_[1].forward(t, h);
}

std::pair<Tensor, Tensor> Model::hyper_synthesis(Tape& t, const Tensor& z_hat,
                                                 int target_h,
                                                 int target_w) const {
  Tensor h = leaky_relu(t, hs_[0].forward(t, z_hat), kLeakySlope);
  Tensor out = hs_[1].forward(t, h);
  if (out.shape().h < target_h || out.shape().w < target_w) {
    throw DimensionError("hyper synthesis undershoots the latent dims");
  }
  out = slice_spatial(t, out, target_h, target_w);
  const int C = cfg_.channels;
  Tensor mu = slice_channels(t, out, 0, C);
  Tensor sigma_raw = slice_channels(t, out, C, 2 * C);
  Tensor sigma = add_scalar(t, softplus(t, sigma_raw), kSigmaMin);
  return {mu, sigma};
}

Tensor Model::synthesize(Tape& t, const Tensor& y_hat) const {
  Tensor h = y_hat;
  for (size_t i = 0; i + 1 < gs_.size(); ++i) {
    h = leaky_relu(t, gs_[i].forward(t, h), kLeakySlope);
  }
  return gs_.back().forward(t, h);
}

Tensor Model::prior_likelihood(Tape& t, const Tensor& z_hat) const {
  Tensor scale = exp(t, prior_log_scale_);
  Tensor d = sub(t, z_hat, prior_loc_);
  Tensor hi = sigmoid(t, div(t, add_scalar(t, d, 0.5), scale));
  Tensor lo = sigmoid(t, div(t, add_scalar(t, d, -0.5), scale));
  return clamp_min(t, sub(t, hi, lo), kPMin);
}

Tensor Model::project(Tape& t, const Tensor& y1) const {
  if (!cfg_.contrastive) {
    throw ConfigError("projection head disabled (contrastive off)");
  }
  Tensor pooled = global_avg_pool(t, y1);
  Tensor h = relu(t, proj_fc1_.forward(t, pooled));
  return l2_normalize(t, proj_fc2_.forward(t, h));
}

double Model::prior_location(int channel) const {
  return prior_loc_.data()[channel];
}

double Model::prior_scale(int channel) const {
  return std::exp(prior_log_scale_.data()[channel]);
}

ForwardResult Model::forward(Tape& t, const Tensor& x_noisy,
                             const Tensor& x_clean, const Tensor& x_aug,
                             RunMode mode, Rng* rng, bool denoise) const {
  const Shape& s = x_noisy.shape();
  if (s.h % 16 != 0 || s.w % 16 != 0) {
    throw DimensionError("model input dims must be divisible by 16, got " +
                         to_string(s) + "; pad first");
  }
  if (s.c != 3) throw DimensionError("model input must have 3 channels");

  ForwardResult r;
  Tensor f0 = analysis0(t, x_noisy);
  r.y0 = denoise ? add(t, f0, d0_.forward(t, f0)) : f0;
  Tensor f1 = analysis1(t, r.y0);
  r.y1 = denoise ? add(t, f1, d1_.forward(t, f1)) : f1;

  if (x_clean.defined()) {
    // Guidance features are targets, not trainees: computed off-tape so no
    // gradient can flow back into the shared encoders through G.
    Tape frozen(false);
    r.y0_gt = analysis0(frozen, x_clean);
    r.y1_gt = analysis1(frozen, r.y0_gt);
  }

  r.z = hyper_analysis(t, r.y1);
  r.z_hat = quantize(t, r.z, mode, rng);
  auto [mu, sigma] =
      hyper_synthesis(t, r.z_hat, r.y1.shape().h, r.y1.shape().w);
  r.mu = mu;
  r.sigma = sigma;
  r.y1_hat = quantize(t, r.y1, mode, rng);
  r.p_y = gaussian_likelihood(t, r.y1_hat, r.mu, r.sigma, kSigmaMin, kPMin);
  r.p_z = prior_likelihood(t, r.z_hat);
  r.bits_y = rate_bits(t, r.p_y);
  r.bits_z = rate_bits(t, r.p_z);
  r.x_hat = synthesize(t, r.y1_hat);

  if (cfg_.contrastive && x_aug.defined()) {
    r.emb_noisy = project(t, r.y1);
    Tensor fa0 = analysis0(t, x_aug);
    Tensor fa1 = analysis1(t, fa0);
    r.emb_aug = project(t, fa1);
  }
  return r;
}

}  // namespace onnpic
