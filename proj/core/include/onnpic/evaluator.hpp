#pragma once

#include <map>
#include <string>
#include <vector>

#include "onnpic/bdrate.hpp"
#include "onnpic/codec.hpp"

namespace onnpic {

// One evaluated (image, noise level, quality) tuple. bpp counts the whole
// container file; psnr/msssim compare the decoded image against the CLEAN
// source, never the noisy one.
struct EvalRow {
  std::string dataset;
  int level = 0;
  int q = 0;
  double bpp = 0.0;
  double psnr_db = 0.0;
  double msssim = 0.0;
  double enc_ms = 0.0;
  double dec_ms = 0.0;
};

struct EvalOptions {
  std::vector<int> levels = {1, 2, 3, 4};
  uint64_t seed = 1234;  // drives the per-(level, image) noise draws
  bool denoise = true;
  bool verbose = false;
};

// Encodes and decodes every image through a real bitstream. The noise draw
// for a given (level, image index) depends only on the seed, so different
// quality points see identical noisy inputs.
std::vector<EvalRow> evaluate_dataset(
    const std::vector<std::pair<int, const Model*>>& models_by_q,
    const std::string& dataset_name, const std::vector<Tensor>& images,
    const EvalOptions& options);

void write_eval_csv(const std::string& path,
                    const std::vector<EvalRow>& rows);
std::vector<EvalRow> read_eval_csv(const std::string& path);

// Mean bpp/psnr/msssim per quality for one level, ordered by bpp.
RdCurve curve_from_rows(const std::vector<EvalRow>& rows, int level);
std::vector<int> levels_in_rows(const std::vector<EvalRow>& rows);

// Inference-mode RD objective (real rounding) on a fixed probe set:
// mean over images of bpp + lambda_d * MSE_255(clean, decoded). The common
// comparison metric for the ablation trend checks.
double validation_rd_loss(const Model& model, const std::vector<Tensor>& clean,
                          const std::vector<Tensor>& noisy, double lambda_d);

}  // namespace onnpic
