#include "onnpic/denoiser.hpp"

namespace onnpic {

Tensor MultiScaleBlock::forward(Tape& t, const Tensor& x) const {
  if (branches.size() == 1) return branches[0].forward(t, x);
  std::vector<Tensor> outs;
  outs.reserve(branches.size());
  for (const auto& b : branches) outs.push_back(b.forward(t, x));
  return concat_channels(t, outs);
}

void MultiScaleBlock::collect_parameters(
    const std::string& prefix,
    std::vector<std::pair<std::string, Tensor>>* out) {
  for (size_t i = 0; i < branches.size(); ++i) {
    branches[i].collect_parameters(
        prefix + ".branch" + std::to_string(i + 1), out);
  }
}

Tensor CbamBlock::forward(Tape& t, const Tensor& x) const {
  // channel gate
  Tensor avg = global_avg_pool(t, x);
  Tensor mx = global_max_pool(t, x);
  Tensor a = fc2.forward(t, relu(t, fc1.forward(t, avg)));
  Tensor m = fc2.forward(t, relu(t, fc1.forward(t, mx)));
  Tensor channel_gate = sigmoid(t, add(t, a, m));
  Tensor xc = mul(t, x, channel_gate);
  // spatial gate
  Tensor stats[2] = {channel_mean(t, xc), channel_max(t, xc)};
  Tensor pooled = concat_channels(t, stats);
  Tensor spatial_gate = sigmoid(t, spatial.forward(t, pooled));
  return mul(t, xc, spatial_gate);
}

void CbamBlock::collect_parameters(
    const std::string& prefix,
    std::vector<std::pair<std::string, Tensor>>* out) {
  fc1.collect_parameters(prefix + ".fc1", out);
  fc2.collect_parameters(prefix + ".fc2", out);
  spatial.collect_parameters(prefix + ".spatial", out);
}

Tensor DenoiserStage::forward(Tape& t, const Tensor& feat) const {
  Tensor h = tanh(t, feat);
  h = multiscale.forward(t, h);
  h = cbam.forward(t, h);
  h = tanh(t, h);
  return final_layer.forward(t, h);
}

int64_t DenoiserStage::parameter_count() const {
  std::vector<std::pair<std::string, Tensor>> params;
  const_cast<DenoiserStage*>(this)->collect_parameters("d", &params);
  int64_t n = 0;
  for (auto& [name, p] : params) n += p.numel();
  return n;
}

void DenoiserStage::collect_parameters(
    const std::string& prefix,
    std::vector<std::pair<std::string, Tensor>>* out) {
  multiscale.collect_parameters(prefix + ".ms", out);
  cbam.collect_parameters(prefix + ".cbam", out);
  final_layer.collect_parameters(prefix + ".final", out);
}

MultiScaleBlock make_multiscale(int channels, const DenoiserOptions& opt,
                                Rng& rng) {
  int q = (opt.kind == DenoiserKind::kConv) ? 1 : opt.q_order;
  MultiScaleBlock block;
  if (!opt.multiscale) {
    block.branches.push_back(
        make_selfonn(channels, channels, 3, q, rng, 1, 1, 1));
    return block;
  }
  if (channels % 4 != 0) {
    throw ConfigError("multi-scale block needs channels divisible by 4, got " +
                      std::to_string(channels));
  }
  for (int dilation = 1; dilation <= 4; ++dilation) {
    // padding == dilation keeps the spatial dims with a 3x3 kernel
    block.branches.push_back(make_selfonn(channels, channels / 4, 3, q, rng, 1,
                                          dilation, dilation));
  }
  return block;
}

CbamBlock make_cbam(int channels, int reduction, Rng& rng) {
  int hidden = channels / reduction;
  if (hidden < 1) hidden = 1;
  CbamBlock b;
  b.fc1 = make_conv(channels, hidden, 1, rng);
  b.fc2 = make_conv(hidden, channels, 1, rng);
  b.spatial = make_conv(2, 1, 7, rng, 1, 3, 1);
  return b;
}

DenoiserStage make_denoiser_stage(int channels, const DenoiserOptions& opt,
                                  Rng& rng) {
  DenoiserStage stage;
  stage.kind = opt.kind;
  stage.multiscale = make_multiscale(channels, opt, rng);
  stage.cbam = make_cbam(channels, opt.cbam_reduction, rng);
  int q = (opt.kind == DenoiserKind::kConv) ? 1 : opt.q_order;
  stage.final_layer = make_selfonn_zero(channels, channels, 3, q, 1, 1, 1);
  return stage;
}

}  // namespace onnpic
