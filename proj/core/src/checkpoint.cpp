#include "onnpic/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>

#include "json.hpp"
#include "onnpic/bitstream.hpp"

namespace onnpic {

namespace {

constexpr char kMagic[4] = {'O', 'N', 'N', 'M'};

void put_u32(std::vector<uint8_t>* out, uint32_t v) {
  for (int i = 0; i < 4; ++i) {
    out->push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xFF));
  }
}

void put_f64(std::vector<uint8_t>* out, double d) {
  uint64_t bits;
  std::memcpy(&bits, &d, 8);
  for (int i = 0; i < 8; ++i) {
    out->push_back(static_cast<uint8_t>((bits >> (8 * i)) & 0xFF));
  }
}

struct Reader {
  const uint8_t* p;
  size_t n;
  size_t pos = 0;
  void need(size_t k) {
    if (pos + k > n) throw DecodeError("truncated checkpoint");
  }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= uint32_t(p[pos + i]) << (8 * i);
    pos += 4;
    return v;
  }
  double f64() {
    need(8);
    uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= uint64_t(p[pos + i]) << (8 * i);
    pos += 8;
    double d;
    std::memcpy(&d, &bits, 8);
    return d;
  }
  std::string str(size_t k) {
    need(k);
    std::string s(reinterpret_cast<const char*>(p + pos), k);
    pos += k;
    return s;
  }
};

}  // namespace

std::string model_config_to_json(const ModelConfig& cfg) {
  nlohmann::json j;
  j["channels"] = cfg.channels;
  j["hyper_channels"] = cfg.hyper_channels;
  j["selfonn_q"] = cfg.selfonn_q;
  j["denoiser"] = {
      {"kind", cfg.denoiser_kind == DenoiserKind::kSelfOnn ? "selfonn"
                                                           : "conv"},
      {"multiscale", cfg.multiscale},
  };
  j["cbam_reduction"] = cfg.cbam_reduction;
  j["proj_dim"] = cfg.proj_dim;
  j["quality"] = cfg.quality;
  j["loss"] = {
      {"lambda_d", cfg.lambda_d},   {"lambda_g", cfg.lambda_g},
      {"lambda_c", cfg.lambda_c},   {"tau", cfg.tau},
      {"contrastive_enabled", cfg.contrastive},
  };
  return j.dump(2);
}

ModelConfig model_config_from_json(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad config json: ") + e.what());
  }
  ModelConfig cfg;
  cfg.channels = j.value("channels", cfg.channels);
  cfg.hyper_channels = j.value("hyper_channels", cfg.hyper_channels);
  cfg.selfonn_q = j.value("selfonn_q", cfg.selfonn_q);
  if (j.contains("denoiser")) {
    auto d = j["denoiser"];
    std::string kind = d.value("kind", "selfonn");
    if (kind == "selfonn") {
      cfg.denoiser_kind = DenoiserKind::kSelfOnn;
    } else if (kind == "conv") {
      cfg.denoiser_kind = DenoiserKind::kConv;
    } else {
      throw ConfigError("denoiser.kind must be 'selfonn' or 'conv'");
    }
    cfg.multiscale = d.value("multiscale", cfg.multiscale);
  }
  cfg.cbam_reduction = j.value("cbam_reduction", cfg.cbam_reduction);
  cfg.proj_dim = j.value("proj_dim", cfg.proj_dim);
  cfg.quality = j.value("quality", cfg.quality);
  if (j.contains("loss")) {
    auto l = j["loss"];
    cfg.lambda_d = l.value("lambda_d", cfg.lambda_d);
    cfg.lambda_g = l.value("lambda_g", cfg.lambda_g);
    cfg.lambda_c = l.value("lambda_c", cfg.lambda_c);
    cfg.tau = l.value("tau", cfg.tau);
    cfg.contrastive = l.value("contrastive_enabled", cfg.contrastive);
  }
  return cfg;
}

std::vector<uint8_t> serialize_checkpoint(const Model& model,
                                          const std::string& config_json) {
  std::vector<uint8_t> out;
  out.insert(out.end(), kMagic, kMagic + 4);
  put_u32(&out, kCheckpointVersion);
  put_u32(&out, static_cast<uint32_t>(config_json.size()));
  out.insert(out.end(), config_json.begin(), config_json.end());
  const auto& params = model.parameters();
  put_u32(&out, static_cast<uint32_t>(params.size()));
  for (const auto& [name, p] : params) {
    put_u32(&out, static_cast<uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    const Shape& s = p.shape();
    put_u32(&out, s.n);
    put_u32(&out, s.c);
    put_u32(&out, s.h);
    put_u32(&out, s.w);
    for (double d : p.data()) put_f64(&out, d);
  }
  put_u32(&out, crc32_ieee(out));
  return out;
}

void save_checkpoint(const std::string& path, const Model& model,
                     const std::string& config_json) {
  auto bytes = serialize_checkpoint(model, config_json);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ArgumentError("cannot write checkpoint " + path);
  f.write(reinterpret_cast<const char*>(bytes.data()), bytes.size());
}

LoadedCheckpoint read_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ArgumentError("cannot open checkpoint " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                             std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw DecodeError("not an ONNM checkpoint: " + path);
  }
  uint32_t crc_stored = 0;
  for (int i = 0; i < 4; ++i) {
    crc_stored |= uint32_t(bytes[bytes.size() - 4 + i]) << (8 * i);
  }
  if (crc_stored !=
      crc32_ieee({bytes.data(), bytes.size() - 4})) {
    throw DecodeError("checkpoint checksum mismatch: " + path);
  }
  Reader r{bytes.data(), bytes.size() - 4, 4};
  uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw DecodeError("unsupported checkpoint version");
  }
  LoadedCheckpoint ck;
  uint32_t json_len = r.u32();
  ck.config_json = r.str(json_len);
  ck.config = model_config_from_json(ck.config_json);
  uint32_t n_params = r.u32();
  for (uint32_t i = 0; i < n_params; ++i) {
    uint32_t name_len = r.u32();
    std::string name = r.str(name_len);
    Shape s;
    s.n = static_cast<int>(r.u32());
    s.c = static_cast<int>(r.u32());
    s.h = static_cast<int>(r.u32());
    s.w = static_cast<int>(r.u32());
    std::vector<double> data(s.numel());
    for (double& d : data) d = r.f64();
    ck.tensors.emplace_back(name, Tensor::from_vector(s, std::move(data)));
  }
  return ck;
}

Model load_model(const std::string& path, std::string* config_json) {
  LoadedCheckpoint ck = read_checkpoint(path);
  Model model(ck.config, /*seed=*/0);
  std::map<std::string, Tensor> by_name(ck.tensors.begin(), ck.tensors.end());
  for (const auto& [name, p] : model.parameters()) {
    auto it = by_name.find(name);
    if (it == by_name.end()) {
      throw DecodeError("checkpoint missing parameter " + name);
    }
    if (!(it->second.shape() == p.shape())) {
      throw DecodeError("checkpoint shape mismatch for " + name);
    }
    auto dst = const_cast<Tensor&>(p).mutable_data();
    auto src = it->second.data();
    std::copy(src.begin(), src.end(), dst.begin());
  }
  if (config_json) *config_json = ck.config_json;
  return model;
}

}  // namespace onnpic
