#pragma once

#include <string>
#include <vector>

#include "onnpic/layers.hpp"
#include "onnpic/selfonn.hpp"

namespace onnpic {

enum class DenoiserKind { kConv, kSelfOnn };

// Four parallel 3x3 branches with dilation rates 1..4, giving receptive
// fields of exactly 3x3, 5x5, 7x7 and 9x9. Each branch emits C/4 channels and
// the outputs are concatenated back to C channels. With multiscale off, a
// single dilation-1 branch keeps the full channel count (ablation switch).
// Branches are generative-neuron layers; a conv denoiser is the Q = 1 case.
struct MultiScaleBlock {
  std::vector<GenerativeNeuronLayer> branches;

  Tensor forward(Tape& t, const Tensor& x) const;
  void collect_parameters(const std::string& prefix,
                          std::vector<std::pair<std::string, Tensor>>* out);
};

// CBAM: channel attention (shared 2-layer MLP over avg- and max-pooled
// descriptors, sigmoid gate) followed by spatial attention (7x7 conv over the
// concatenated channel-mean/max maps, sigmoid gate). Both gates are strictly
// inside (0,1).
struct CbamBlock {
  ConvLayer fc1;      // 1x1, C -> C/r
  ConvLayer fc2;      // 1x1, C/r -> C
  ConvLayer spatial;  // 7x7, 2 -> 1

  Tensor forward(Tape& t, const Tensor& x) const;
  void collect_parameters(const std::string& prefix,
                          std::vector<std::pair<std::string, Tensor>>* out);
};

// One feature-denoiser stage. The stage returns the residual correction
// d(feat); the caller forms feat + d(feat). Wiring:
//   tanh -> multi-scale block -> CBAM -> tanh -> 3x3 layer (zero-init)
// The tanh keeps generative-layer inputs bounded, and the zero-initialized
// final layer makes the whole denoiser start as an exact identity.
struct DenoiserStage {
  DenoiserKind kind = DenoiserKind::kSelfOnn;
  MultiScaleBlock multiscale;
  CbamBlock cbam;
  GenerativeNeuronLayer final_layer;

  Tensor forward(Tape& t, const Tensor& feat) const;
  int64_t parameter_count() const;
  void collect_parameters(const std::string& prefix,
                          std::vector<std::pair<std::string, Tensor>>* out);
};

struct DenoiserOptions {
  DenoiserKind kind = DenoiserKind::kSelfOnn;
  bool multiscale = true;
  int q_order = 3;       // ignored for kConv (Q = 1)
  int cbam_reduction = 4;
};

MultiScaleBlock make_multiscale(int channels, const DenoiserOptions& opt,
                                Rng& rng);
CbamBlock make_cbam(int channels, int reduction, Rng& rng);
DenoiserStage make_denoiser_stage(int channels, const DenoiserOptions& opt,
                                  Rng& rng);

}  // namespace onnpic
