#include "onnpic/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "json.hpp"
#include "onnpic/checkpoint.hpp"
#include "onnpic/image.hpp"
#include "onnpic/image_codec.hpp"
#include "onnpic/metrics.hpp"
#include "onnpic/noise.hpp"
#include "onnpic/optimizer.hpp"

namespace onnpic {

std::string train_config_to_json(const TrainConfig& cfg) {
  nlohmann::json j = nlohmann::json::parse(model_config_to_json(cfg.model));
  j["train"] = {
      {"steps", cfg.steps},     {"batch", cfg.batch},
      {"patch", cfg.patch},     {"context_pad", cfg.context_pad},
      {"lr", cfg.lr},           {"jitter", cfg.jitter},
      {"seed", cfg.seed},       {"telemetry_every", cfg.telemetry_every},
  };
  return j.dump(2);
}

TrainConfig train_config_from_json(const std::string& json_text) {
  TrainConfig cfg;
  cfg.model = model_config_from_json(json_text);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad config json: ") + e.what());
  }
  if (j.contains("train")) {
    auto t = j["train"];
    cfg.steps = t.value("steps", cfg.steps);
    cfg.batch = t.value("batch", cfg.batch);
    cfg.patch = t.value("patch", cfg.patch);
    cfg.context_pad = t.value("context_pad", cfg.context_pad);
    cfg.lr = t.value("lr", cfg.lr);
    cfg.jitter = t.value("jitter", cfg.jitter);
    cfg.seed = t.value("seed", cfg.seed);
    cfg.telemetry_every = t.value("telemetry_every", cfg.telemetry_every);
  }
  if (cfg.patch % 16 != 0) throw ConfigError("patch must be divisible by 16");
  if (cfg.batch < 1 || cfg.steps < 1) {
    throw ConfigError("batch and steps must be positive");
  }
  return cfg;
}

TrainConfig load_train_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ArgumentError("cannot open config " + path);
  std::string text((std::istreambuf_iterator<char>(f)),
                   std::istreambuf_iterator<char>());
  return train_config_from_json(text);
}

std::vector<Tensor> load_dataset(const std::string& dir) {
  auto paths = list_images(dir);
  if (paths.empty()) {
    throw ArgumentError("no .ppm/.pgm images in " + dir);
  }
  std::vector<Tensor> images;
  images.reserve(paths.size());
  for (const auto& p : paths) images.push_back(read_ppm(p));
  return images;
}

namespace {

Tensor batch_stack(const std::vector<Tensor>& items) {
  const Shape& s0 = items.at(0).shape();
  Tensor out = Tensor::zeros(
      {static_cast<int>(items.size()) * s0.n, s0.c, s0.h, s0.w});
  double* po = out.mutable_data().data();
  int64_t per = s0.numel();
  for (size_t i = 0; i < items.size(); ++i) {
    auto src = items[i].data();
    std::copy(src.begin(), src.end(), po + i * per);
  }
  return out;
}

}  // namespace

TrainBatch sample_batch(const TrainConfig& cfg,
                        const std::vector<Tensor>& images, Rng& rng) {
  const int big = cfg.patch + 2 * cfg.context_pad;
  std::vector<Tensor> clean, noisy, aug;
  for (int b = 0; b < cfg.batch; ++b) {
    const Tensor& img =
        images[rng.uniform_int(0, static_cast<int64_t>(images.size()) - 1)];
    const Shape& s = img.shape();
    if (s.w < big || s.h < big) {
      throw ArgumentError("dataset image smaller than patch + context");
    }
    int x0 = static_cast<int>(rng.uniform_int(0, s.w - big));
    int y0 = static_cast<int>(rng.uniform_int(0, s.h - big));
    Tensor window = crop(img, x0, y0, big, big);
    Tensor c = crop(window, cfg.context_pad, cfg.context_pad, cfg.patch,
                    cfg.patch);
    NoiseParams p = sample_train_params(rng);
    noisy.push_back(synthesize_noise(c, p, rng));
    clean.push_back(std::move(c));
    AugmentSpec spec;
    spec.hflip = rng.coin();
    spec.vflip = rng.coin();
    spec.jitter = cfg.jitter;
    spec.crop_x = static_cast<int>(rng.uniform_int(0, 2 * cfg.context_pad));
    spec.crop_y = static_cast<int>(rng.uniform_int(0, 2 * cfg.context_pad));
    spec.crop_w = cfg.patch;
    spec.crop_h = cfg.patch;
    aug.push_back(augment(window, spec, rng));
  }
  return {batch_stack(clean), batch_stack(noisy), batch_stack(aug)};
}

TrainResult train_model(Model* model, const TrainConfig& cfg,
                        const std::vector<Tensor>& images,
                        const std::string& telemetry_csv, bool verbose) {
  if (images.empty()) throw ArgumentError("empty training dataset");
  AdamOptimizer opt(model->parameters(), cfg.lr);
  LossWeights w;
  w.lambda_d = cfg.model.resolved_lambda_d();
  w.lambda_g = cfg.model.lambda_g;
  w.lambda_c = cfg.model.lambda_c;
  w.tau = cfg.model.tau;
  const bool contrastive = cfg.model.contrastive;

  std::ofstream csv;
  if (!telemetry_csv.empty()) {
    csv.open(telemetry_csv);
    csv << "step,total,bpp_y,bpp_z,mse255,guidance,contrastive,psnr_db\n";
  }

  TrainResult result;
  for (int step = 0; step < cfg.steps; ++step) {
    uint64_t step_seed = mix_seed(cfg.seed, 0x73746570ull + step);
    Rng rng(step_seed);
    TrainBatch batch = sample_batch(cfg, images, rng);

    Tape tape;
    ForwardResult fw =
        model->forward(tape, batch.noisy, batch.clean,
                       contrastive ? batch.aug : Tensor(), RunMode::kTrain,
                       &rng);
    Tensor guidance =
        guidance_loss(tape, fw.y0, fw.y0_gt, fw.y1, fw.y1_gt);
    Tensor contr;
    if (contrastive) {
      contr = contrastive_loss(tape, fw.emb_noisy, fw.emb_aug, w.tau);
    }
    Tensor loss = total_loss(tape, fw.bits_y, fw.bits_z, batch.clean,
                             fw.x_hat, guidance, contr, w);
    double loss_value = loss.item();
    if (!std::isfinite(loss_value)) {
      throw ComputationError(
          "non-finite loss at step " + std::to_string(step) +
          " (batch seed " + std::to_string(step_seed) + ")");
    }
    opt.zero_grad();
    tape.backward(loss);
    opt.step();
    result.final_loss = loss_value;

    if (step % cfg.telemetry_every == 0 || step == cfg.steps - 1) {
      double pixels = double(batch.clean.shape().n) * cfg.patch * cfg.patch;
      TelemetryRow row;
      row.step = step;
      row.total = loss_value;
      row.bpp_y = fw.bits_y.item() / pixels;
      row.bpp_z = fw.bits_z.item() / pixels;
      Tape scratch(false);
      row.mse255 = mse_255(scratch, batch.clean, fw.x_hat).item();
      row.guidance = guidance.item();
      row.contrastive = contr.defined() ? contr.item() : 0.0;
      row.psnr_db = psnr(batch.clean, clip01(fw.x_hat));
      result.telemetry.push_back(row);
      if (csv.is_open()) {
        csv << row.step << ',' << row.total << ',' << row.bpp_y << ','
            << row.bpp_z << ',' << row.mse255 << ',' << row.guidance << ','
            << row.contrastive << ',' << row.psnr_db << '\n';
        csv.flush();
      }
      if (verbose) {
        std::fprintf(stderr,
                     "step %5d  loss %8.4f  bpp %6.4f  mse %8.2f  G %6.4f  "
                     "CL %6.4f  psnr %5.2f\n",
                     row.step, row.total, row.bpp_y + row.bpp_z, row.mse255,
                     row.guidance, row.contrastive, row.psnr_db);
      }
    }
  }
  return result;
}

}  // namespace onnpic
