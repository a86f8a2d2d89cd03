#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>

#include "doctest.h"
#include "onnpic/checkpoint.hpp"
#include "onnpic/codec.hpp"
#include "onnpic/losses.hpp"
#include "onnpic/optimizer.hpp"
#include "onnpic/trainer.hpp"
#include "support/gradcheck.hpp"

using namespace onnpic;

namespace {

ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.channels = 8;
  cfg.hyper_channels = 4;
  cfg.proj_dim = 8;
  cfg.selfonn_q = 3;
  cfg.quality = 3;
  return cfg;
}

Tensor full_model_loss(Tape& t, const Model& model, const Tensor& noisy,
                       const Tensor& clean, const Tensor& aug,
                       uint64_t noise_seed) {
  Rng quant_rng(noise_seed);  // reseeded per call: frozen quantization noise
  ForwardResult fw =
      model.forward(t, noisy, clean, aug, RunMode::kTrain, &quant_rng);
  Tensor g = guidance_loss(t, fw.y0, fw.y0_gt, fw.y1, fw.y1_gt);
  Tensor cl = contrastive_loss(t, fw.emb_noisy, fw.emb_aug,
                               model.config().tau);
  LossWeights w;
  w.lambda_d = model.config().resolved_lambda_d();
  return total_loss(t, fw.bits_y, fw.bits_z, clean, fw.x_hat, g, cl, w);
}

// Same objective, but with the guidance targets supplied as fixed constants.
// The backward pass treats y_gt as constants (they are gradient-stopped by
// design), so the finite-difference oracle must hold them at their
// unperturbed values too; recomputing them under perturbation would measure
// a different function from the one the tape differentiates.
Tensor full_model_loss_frozen_targets(Tape& t, const Model& model,
                                      const Tensor& noisy, const Tensor& clean,
                                      const Tensor& aug, const Tensor& y0_gt,
                                      const Tensor& y1_gt,
                                      uint64_t noise_seed) {
  Rng quant_rng(noise_seed);
  ForwardResult fw =
      model.forward(t, noisy, Tensor(), aug, RunMode::kTrain, &quant_rng);
  Tensor g = guidance_loss(t, fw.y0, y0_gt, fw.y1, y1_gt);
  Tensor cl = contrastive_loss(t, fw.emb_noisy, fw.emb_aug,
                               model.config().tau);
  LossWeights w;
  w.lambda_d = model.config().resolved_lambda_d();
  return total_loss(t, fw.bits_y, fw.bits_z, clean, fw.x_hat, g, cl, w);
}

}  // namespace

TEST_CASE("quantize: inference rounding and training noise bounds") {
  Tape t;
  Tensor x = Tensor::from_vector({1, 1, 1, 2}, {2.4, -1.5});
  Tensor r = quantize(t, x, RunMode::kInfer, nullptr);
  CHECK(r.data()[0] == 2.0);
  CHECK(r.data()[1] == -2.0);

  Rng rng(701);
  Tensor big = Tensor::zeros({1, 1, 1000, 1000});
  Tensor q = quantize(t, big, RunMode::kTrain, &rng);
  double mean = 0.0;
  for (double v : q.data()) {
    CHECK(v >= -0.5);
    CHECK(v < 0.5);
    mean += v;
  }
  mean /= q.numel();
  // 3 sigma bound for the mean of 10^6 U(-0.5, 0.5) draws
  CHECK(std::fabs(mean) < 3.0 * (1.0 / std::sqrt(12.0)) / 1000.0);
}

TEST_CASE("rate_bits closed forms") {
  Tape t;
  Tensor half = Tensor::full({1, 1, 10, 10}, 0.5);
  CHECK(rate_bits(t, half).item() == doctest::Approx(100.0).epsilon(1e-12));
  Tensor one = Tensor::full({1, 1, 4, 4}, 1.0);
  CHECK(rate_bits(t, one).item() == doctest::Approx(0.0).epsilon(1e-12));
  Tensor bad = Tensor::full({1, 1, 1, 1}, 0.0);
  CHECK_THROWS_AS(rate_bits(t, bad), DomainError);
}

TEST_CASE("stride arithmetic: 64x64 input, C=32 -> y1 (1,32,4,4), z (1,16,1,1)") {
  ModelConfig cfg;  // defaults: C=32, Cz=16
  Model model(cfg, 7);
  Rng rng(703);
  Tensor x = Tensor::uniform({1, 3, 64, 64}, 0.0, 1.0, rng);
  Tape t(false);
  ForwardResult fw = model.forward(t, x, Tensor(), Tensor(), RunMode::kInfer,
                                   nullptr);
  CHECK(fw.y1.shape() == Shape{1, 32, 4, 4});
  CHECK(fw.z.shape() == Shape{1, 16, 1, 1});
  CHECK(fw.x_hat.shape() == x.shape());
  CHECK(fw.mu.shape() == fw.y1.shape());
  CHECK(fw.sigma.shape() == fw.y1.shape());
  for (double s : fw.sigma.data()) CHECK(s >= kSigmaMin);
  // inference-mode latents are integers
  for (double v : fw.y1_hat.data()) CHECK(v == std::round(v));
  for (double v : fw.z_hat.data()) CHECK(v == std::round(v));
}

TEST_CASE("input dims not divisible by 16 raise a dimension error") {
  Model model(tiny_config(), 7);
  Rng rng(707);
  Tensor x = Tensor::uniform({1, 3, 40, 48}, 0.0, 1.0, rng);
  Tape t(false);
  CHECK_THROWS_AS(
      model.forward(t, x, Tensor(), Tensor(), RunMode::kInfer, nullptr),
      DimensionError);
}

TEST_CASE("guidance identity: clean == noisy with zero-init denoisers") {
  Model model(tiny_config(), 11);
  Rng rng(709);
  Tensor x = Tensor::uniform({2, 3, 32, 32}, 0.0, 1.0, rng);
  Tape t;
  Rng qrng(1);
  ForwardResult fw = model.forward(t, x, x, Tensor(), RunMode::kTrain, &qrng);
  // zero-init final denoiser layers make y == ga(x) exactly, so the
  // denoised features coincide with the guidance features
  for (int64_t i = 0; i < fw.y0.numel(); ++i) {
    CHECK(fw.y0.data()[i] == fw.y0_gt.data()[i]);
  }
  for (int64_t i = 0; i < fw.y1.numel(); ++i) {
    CHECK(fw.y1.data()[i] == fw.y1_gt.data()[i]);
  }
  Tensor g = guidance_loss(t, fw.y0, fw.y0_gt, fw.y1, fw.y1_gt);
  CHECK(g.item() == 0.0);
  // and the total objective reduces exactly to the rd objective
  LossWeights w;
  w.lambda_d = model.config().resolved_lambda_d();
  double total =
      total_loss(t, fw.bits_y, fw.bits_z, x, fw.x_hat, g, Tensor(), w).item();
  double rd = rd_loss(t, fw.bits_y, fw.bits_z, x, fw.x_hat, w.lambda_d).item();
  CHECK(total == doctest::Approx(rd).epsilon(1e-15));
}

TEST_CASE("guidance and denoising branches share the encoder parameters") {
  Model model(tiny_config(), 13);
  Rng rng(711);
  Tensor clean = Tensor::uniform({1, 3, 32, 32}, 0.0, 1.0, rng);
  Tensor noisy = Tensor::uniform({1, 3, 32, 32}, 0.0, 1.0, rng);
  Tape t;
  Rng q1(5);
  ForwardResult before =
      model.forward(t, noisy, clean, Tensor(), RunMode::kTrain, &q1);
  // perturb one ga0 weight; both branches must respond
  const Tensor& w0 = model.parameters()[0].second;
  CHECK(model.parameters()[0].first == "ga0.0.weight");
  const_cast<Tensor&>(w0).mutable_data()[0] += 0.05;
  Tape t2;
  Rng q2(5);
  ForwardResult after =
      model.forward(t2, noisy, clean, Tensor(), RunMode::kTrain, &q2);
  double d_denoise = 0.0, d_guide = 0.0;
  for (int64_t i = 0; i < before.y0.numel(); ++i) {
    d_denoise += std::fabs(after.y0.data()[i] - before.y0.data()[i]);
    d_guide += std::fabs(after.y0_gt.data()[i] - before.y0_gt.data()[i]);
  }
  CHECK(d_denoise > 0.0);
  CHECK(d_guide > 0.0);
}

TEST_CASE("guidance targets are gradient-stopped") {
  Model model(tiny_config(), 17);
  Rng rng(713);
  Tensor clean = Tensor::uniform({1, 3, 16, 16}, 0.0, 1.0, rng);
  Tape t;
  Rng q(3);
  ForwardResult fw =
      model.forward(t, clean, clean, Tensor(), RunMode::kTrain, &q);
  CHECK_FALSE(fw.y0_gt.requires_grad());
  CHECK_FALSE(fw.y1_gt.requires_grad());
  CHECK(fw.y0.requires_grad());
}

TEST_CASE("full-model gradients match finite differences (50 params)") {
  Model model(tiny_config(), 19);
  Rng rng(717);
  Tensor clean = Tensor::uniform({2, 3, 16, 16}, 0.05, 0.95, rng);
  Tensor noisy = Tensor::zeros(clean.shape());
  for (int64_t i = 0; i < clean.numel(); ++i) {
    double v = clean.data()[i] + rng.normal(0.0, 0.05);
    noisy.mutable_data()[i] = v < 0 ? 0 : (v > 1 ? 1 : v);
  }
  Tensor aug = Tensor::zeros(clean.shape());
  for (int64_t i = 0; i < clean.numel(); ++i) {
    double v = clean.data()[i] * 1.05;
    aug.mutable_data()[i] = v > 1 ? 1 : v;
  }
  const uint64_t noise_seed = 90210;

  // capture the guidance targets once; they stay frozen across FD probes
  Tensor y0_gt, y1_gt;
  {
    Tape t0(false);
    y0_gt = model.analysis0(t0, clean);
    y1_gt = model.analysis1(t0, y0_gt);
  }

  model.zero_grads();
  Tape tape;
  Tensor loss = full_model_loss_frozen_targets(tape, model, noisy, clean, aug,
                                               y0_gt, y1_gt, noise_seed);
  tape.backward(loss);

  // 50 random (parameter, coordinate) probes against central differences.
  // The objective contains |.| and leaky-relu kinks; central differences are
  // only valid away from those crossings, so each probe is computed at two
  // step sizes and kept only when the two estimates agree (a straddled kink
  // makes them strongly h-dependent).
  const auto& params = model.parameters();
  auto fd_at = [&](Tensor& pt, int64_t idx, double h) {
    auto data = pt.mutable_data();
    double orig = data[idx];
    data[idx] = orig + h;
    Tape tp(false);
    double lp = full_model_loss_frozen_targets(tp, model, noisy, clean, aug,
                                               y0_gt, y1_gt, noise_seed)
                    .item();
    data[idx] = orig - h;
    Tape tm(false);
    double lm = full_model_loss_frozen_targets(tm, model, noisy, clean, aug,
                                               y0_gt, y1_gt, noise_seed)
                    .item();
    data[idx] = orig;
    return (lp - lm) / (2.0 * h);
  };
  double max_rel = 0.0;
  int checked = 0, attempts = 0;
  while (checked < 50 && attempts < 400) {
    ++attempts;
    auto& [name, p] =
        params[rng.uniform_int(0, static_cast<int64_t>(params.size()) - 1)];
    Tensor& pt = const_cast<Tensor&>(p);
    int64_t idx = rng.uniform_int(0, pt.numel() - 1);
    double analytic = pt.has_grad() ? pt.grad()[idx] : 0.0;
    double fd1 = fd_at(pt, idx, 1e-5);
    double fd2 = fd_at(pt, idx, 4e-5);
    if (testsupport::rel_err(fd1, fd2) > 1e-5) continue;  // kink straddle
    double rel = testsupport::rel_err(analytic, fd1);
    if (rel > max_rel) {
      max_rel = rel;
      if (rel > 1e-4) {
        std::printf("param %s[%lld]: analytic %.8e fd %.8e\n", name.c_str(),
                    static_cast<long long>(idx), analytic, fd1);
      }
    }
    ++checked;
  }
  CHECK(checked == 50);
  CHECK(max_rel < 1e-4);
}

TEST_CASE("gradient coverage: every parameter trains within 5 steps") {
  TrainConfig cfg;
  cfg.model = tiny_config();
  cfg.steps = 5;
  cfg.batch = 2;
  // patch 32 keeps the deepest feature maps at 2x2 so every tap of the
  // (dilation-1) zero-init final layers sees gradient
  cfg.patch = 32;
  cfg.context_pad = 4;
  cfg.seed = 77;
  Model model(cfg.model, cfg.seed);
  Rng rng(719);
  std::vector<Tensor> images = {Tensor::uniform({1, 3, 48, 48}, 0.0, 1.0, rng),
                                Tensor::uniform({1, 3, 48, 48}, 0.0, 1.0,
                                                rng)};
  AdamOptimizer opt(model.parameters(), 1e-4);
  std::vector<double> max_grad(model.parameters().size(), 0.0);
  for (int step = 0; step < cfg.steps; ++step) {
    Rng srng(mix_seed(cfg.seed, step));
    TrainBatch batch = sample_batch(cfg, images, srng);
    opt.zero_grad();
    Tape t;
    Tensor loss = full_model_loss(t, model, batch.noisy, batch.clean,
                                  batch.aug, mix_seed(999, step));
    t.backward(loss);
    for (size_t i = 0; i < model.parameters().size(); ++i) {
      const Tensor& p = model.parameters()[i].second;
      if (!p.has_grad()) continue;
      for (double g : p.grad()) {
        max_grad[i] = std::max(max_grad[i], std::fabs(g));
      }
    }
    opt.step();  // zero-init layers move after step one, opening the
                 // gradient path into the stage internals
  }
  for (size_t i = 0; i < model.parameters().size(); ++i) {
    const auto& [name, p] = model.parameters()[i];
    bool has_value = false;
    for (double v : p.data()) {
      if (v != 0.0) {
        has_value = true;
        break;
      }
    }
    bool got_grad = max_grad[i] > 0.0;
    INFO("parameter ", name);
    CHECK((has_value || got_grad));
  }
}

TEST_CASE("contrastive-off removes exactly the projection head parameters") {
  ModelConfig on = tiny_config();
  ModelConfig off = tiny_config();
  off.contrastive = false;
  Model m_on(on, 3);
  Model m_off(off, 3);
  int C = on.channels;
  int64_t head = int64_t(C) * C + C             // fc1 (1x1) + bias
                 + int64_t(on.proj_dim) * C + on.proj_dim;  // fc2 + bias
  CHECK(m_on.parameter_count() - m_off.parameter_count() == head);
  Tape t(false);
  Rng rng(723);
  Tensor y = Tensor::uniform({2, C, 4, 4}, -1.0, 1.0, rng);
  CHECK_THROWS_AS(m_off.project(t, y), ConfigError);
}

TEST_CASE("checkpoint round-trip restores parameters bit-exactly") {
  ModelConfig cfg = tiny_config();
  Model model(cfg, 23);
  std::string json = model_config_to_json(cfg);
  std::string path = "/tmp/onnpic_test_ckpt.bin";
  save_checkpoint(path, model, json);
  std::string echoed;
  Model back = load_model(path, &echoed);
  REQUIRE(back.parameters().size() == model.parameters().size());
  for (size_t i = 0; i < model.parameters().size(); ++i) {
    const auto& [name_a, a] = model.parameters()[i];
    const auto& [name_b, b] = back.parameters()[i];
    CHECK(name_a == name_b);
    REQUIRE(a.numel() == b.numel());
    for (int64_t j = 0; j < a.numel(); ++j) {
      CHECK(a.data()[j] == b.data()[j]);
    }
  }
  ModelConfig parsed = model_config_from_json(echoed);
  CHECK(parsed.channels == cfg.channels);
  CHECK(parsed.quality == cfg.quality);
  CHECK(parsed.contrastive == cfg.contrastive);
}

TEST_CASE("prior likelihood telescopes to one modulo the probability floor") {
  Model model(tiny_config(), 29);
  Tape t(false);
  const int Cz = model.config().hyper_channels;
  const int lo = -200, hi = 200;
  double total[8] = {};
  double floor_excess[8] = {};
  for (int v = lo; v <= hi; ++v) {
    Tensor z = Tensor::full({1, Cz, 1, 1}, v);
    Tensor p = model.prior_likelihood(t, z);
    for (int c = 0; c < Cz; ++c) {
      total[c] += p.data()[c];
      if (p.data()[c] <= kPMin) floor_excess[c] += kPMin;
    }
  }
  // the sum is exactly 1 plus what the p_min clamp added in the tails
  for (int c = 0; c < Cz; ++c) {
    CHECK(total[c] >= 1.0 - 1e-9);
    CHECK(total[c] <= 1.0 + floor_excess[c] + 1e-9);
  }
}

TEST_CASE("training-mode rate upper-bounds inference rate as a trend") {
  Model model(tiny_config(), 31);
  Rng rng(729);
  double train_total = 0.0, infer_total = 0.0;
  for (int i = 0; i < 50; ++i) {
    Tensor x = Tensor::uniform({1, 3, 32, 32}, 0.0, 1.0, rng);
    Tape t(false);
    Rng q(mix_seed(1000, i));
    ForwardResult tr =
        model.forward(t, x, Tensor(), Tensor(), RunMode::kTrain, &q);
    ForwardResult inf =
        model.forward(t, x, Tensor(), Tensor(), RunMode::kInfer, nullptr);
    train_total += tr.bits_y.item() + tr.bits_z.item();
    infer_total += inf.bits_y.item() + inf.bits_z.item();
  }
  CHECK(train_total >= infer_total * 0.98);
}
