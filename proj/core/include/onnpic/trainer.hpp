#pragma once

#include <string>
#include <vector>

#include "onnpic/codec.hpp"
#include "onnpic/losses.hpp"

namespace onnpic {

struct TrainConfig {
  ModelConfig model;
  int steps = 4000;
  int batch = 4;
  int patch = 64;        // must be divisible by 16
  int context_pad = 8;   // clean patches are sampled with this margin so the
                         // augmented view can crop a shifted window
  double lr = 1e-4;
  double jitter = 0.2;
  uint64_t seed = 1;
  int telemetry_every = 50;
};

std::string train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const std::string& json_text);
TrainConfig load_train_config(const std::string& path);

struct TelemetryRow {
  int step;
  double total, bpp_y, bpp_z, mse255, guidance, contrastive, psnr_db;
};

struct TrainResult {
  std::vector<TelemetryRow> telemetry;
  double final_loss = 0.0;
};

// One gradient step's batch, exposed for tests.
struct TrainBatch {
  Tensor clean, noisy, aug;
};
TrainBatch sample_batch(const TrainConfig& cfg,
                        const std::vector<Tensor>& images, Rng& rng);

// Deterministic training loop: per-step rng streams are derived from the
// seed, so identical config + seed reproduce bit-identical parameters.
// Aborts with ComputationError (and the failing step's seed) on a non-finite
// loss. Telemetry CSV is written when path is nonempty.
TrainResult train_model(Model* model, const TrainConfig& cfg,
                        const std::vector<Tensor>& images,
                        const std::string& telemetry_csv = "",
                        bool verbose = false);

std::vector<Tensor> load_dataset(const std::string& dir);

}  // namespace onnpic
