#pragma once

#include <string>
#include <utility>
#include <vector>

#include "onnpic/ops.hpp"

namespace onnpic {

// Plain convolution layer used by the analysis/synthesis transforms and the
// attention blocks.
struct ConvLayer {
  Tensor weight;  // (Cout, Cin, k, k)
  Tensor bias;    // (1, Cout, 1, 1)
  int stride = 1;
  int padding = 0;
  int dilation = 1;

  Tensor forward(Tape& t, const Tensor& x) const {
    return conv2d(t, x, weight, bias, stride, padding, dilation);
  }
  void collect_parameters(const std::string& prefix,
                          std::vector<std::pair<std::string, Tensor>>* out) {
    out->emplace_back(prefix + ".weight", weight);
    out->emplace_back(prefix + ".bias", bias);
  }
};

struct ConvTransposeLayer {
  Tensor weight;  // (Cin, Cout, k, k)
  Tensor bias;    // (1, Cout, 1, 1)
  int stride = 1;
  int padding = 0;
  int out_padding = 0;

  Tensor forward(Tape& t, const Tensor& x) const {
    return conv_transpose2d(t, x, weight, bias, stride, padding, out_padding);
  }
  void collect_parameters(const std::string& prefix,
                          std::vector<std::pair<std::string, Tensor>>* out) {
    out->emplace_back(prefix + ".weight", weight);
    out->emplace_back(prefix + ".bias", bias);
  }
};

ConvLayer make_conv(int c_in, int c_out, int k, Rng& rng, int stride = 1,
                    int padding = 0, int dilation = 1);
ConvTransposeLayer make_conv_transpose(int c_in, int c_out, int k, Rng& rng,
                                       int stride, int padding,
                                       int out_padding);

}  // namespace onnpic
