#include "onnpic/evaluator.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "onnpic/image_codec.hpp"
#include "onnpic/losses.hpp"
#include "onnpic/metrics.hpp"
#include "onnpic/noise.hpp"

namespace onnpic {

namespace {

double ms_since(std::chrono::steady_clock::time_point t0) {
  auto dt = std::chrono::steady_clock::now() - t0;
  return std::chrono::duration<double, std::milli>(dt).count();
}

}  // namespace

std::vector<EvalRow> evaluate_dataset(
    const std::vector<std::pair<int, const Model*>>& models_by_q,
    const std::string& dataset_name, const std::vector<Tensor>& images,
    const EvalOptions& options) {
  std::vector<EvalRow> rows;
  for (int level : options.levels) {
    NoiseParams params = test_level(level);
    for (size_t i = 0; i < images.size(); ++i) {
      Rng noise_rng(mix_seed(options.seed, uint64_t(level) << 32 | i));
      Tensor noisy = synthesize_noise(images[i], params, noise_rng);
      for (const auto& [q, model] : models_by_q) {
        EvalRow row;
        row.dataset = dataset_name;
        row.level = level;
        row.q = q;
        auto t0 = std::chrono::steady_clock::now();
        EncodeResult enc = encode_image(*model, noisy, options.denoise);
        row.enc_ms = ms_since(t0);
        t0 = std::chrono::steady_clock::now();
        DecodeResult dec = decode_image(*model, enc.bytes);
        row.dec_ms = ms_since(t0);
        const Shape& s = images[i].shape();
        row.bpp = 8.0 * enc.bytes.size() / (double(s.h) * s.w);
        row.psnr_db = psnr(images[i], dec.image);
        row.msssim = ms_ssim(images[i], dec.image);
        if (options.verbose) {
          std::fprintf(stderr,
                       "%s level %d q%d img %zu: %.4f bpp  %.2f dB  "
                       "msssim %.4f\n",
                       dataset_name.c_str(), level, q, i, row.bpp,
                       row.psnr_db, row.msssim);
        }
        rows.push_back(std::move(row));
      }
    }
  }
  return rows;
}

void write_eval_csv(const std::string& path, const std::vector<EvalRow>& rows) {
  std::ofstream f(path);
  if (!f) throw ArgumentError("cannot write csv " + path);
  f << "dataset,level,q,bpp,psnr_db,msssim,enc_ms,dec_ms\n";
  char line[256];
  for (const EvalRow& r : rows) {
    std::snprintf(line, sizeof line, "%s,%d,%d,%.8f,%.6f,%.8f,%.3f,%.3f\n",
                  r.dataset.c_str(), r.level, r.q, r.bpp, r.psnr_db, r.msssim,
                  r.enc_ms, r.dec_ms);
    f << line;
  }
}

std::vector<EvalRow> read_eval_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ArgumentError("cannot open csv " + path);
  std::string line;
  if (!std::getline(f, line)) throw DecodeError("empty csv " + path);
  std::vector<EvalRow> rows;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string field;
    EvalRow r;
    if (!std::getline(ss, r.dataset, ',')) continue;
    auto next_num = [&](double* out) {
      if (!std::getline(ss, field, ',')) {
        throw DecodeError("malformed csv row: " + line);
      }
      *out = std::stod(field);
    };
    double v;
    next_num(&v);
    r.level = static_cast<int>(v);
    next_num(&v);
    r.q = static_cast<int>(v);
    next_num(&r.bpp);
    next_num(&r.psnr_db);
    next_num(&r.msssim);
    next_num(&r.enc_ms);
    next_num(&r.dec_ms);
    rows.push_back(std::move(r));
  }
  return rows;
}

RdCurve curve_from_rows(const std::vector<EvalRow>& rows, int level) {
  struct Acc {
    double bpp = 0, psnr = 0, ms = 0;
    int n = 0;
  };
  std::map<int, Acc> by_q;
  for (const EvalRow& r : rows) {
    if (r.level != level) continue;
    Acc& a = by_q[r.q];
    a.bpp += r.bpp;
    a.psnr += r.psnr_db;
    a.ms += r.msssim;
    a.n += 1;
  }
  if (by_q.empty()) {
    throw ArgumentError("no rows for level " + std::to_string(level));
  }
  std::vector<RdPoint> pts;
  for (auto& [q, a] : by_q) {
    pts.push_back({a.bpp / a.n, a.psnr / a.n, a.ms / a.n});
  }
  return RdCurve::from_points(std::move(pts));
}

std::vector<int> levels_in_rows(const std::vector<EvalRow>& rows) {
  std::vector<int> levels;
  for (const EvalRow& r : rows) {
    if (std::find(levels.begin(), levels.end(), r.level) == levels.end()) {
      levels.push_back(r.level);
    }
  }
  std::sort(levels.begin(), levels.end());
  return levels;
}

double validation_rd_loss(const Model& model, const std::vector<Tensor>& clean,
                          const std::vector<Tensor>& noisy, double lambda_d) {
  if (clean.size() != noisy.size() || clean.empty()) {
    throw ArgumentError("validation sets must be nonempty and aligned");
  }
  double total = 0.0;
  for (size_t i = 0; i < clean.size(); ++i) {
    EncodeResult enc = encode_image(model, noisy[i]);
    DecodeResult dec = decode_image(model, enc.bytes);
    const Shape& s = clean[i].shape();
    double bpp = 8.0 * enc.bytes.size() / (double(s.h) * s.w);
    Tape t(false);
    double mse = mse_255(t, clean[i], dec.image).item();
    total += bpp + lambda_d * mse;
  }
  return total / clean.size();
}

}  // namespace onnpic
