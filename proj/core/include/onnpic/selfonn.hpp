#pragma once

#include <string>
#include <vector>

#include "onnpic/ops.hpp"

namespace onnpic {

// Generative-neuron layer: each connection applies a learned degree-Q
// polynomial of the input instead of a single linear tap,
//   out = w0 + sum_{n=1..Q} conv2d(x^n, w_n),
// the truncated Taylor expansion around a = 0 with the 1/n! factors absorbed
// into the trainable kernel banks. Q = 1 reduces element-exactly to a plain
// convolution, which is also how the conv ablation is realized.
//
// Inputs are expected in [-1, 1]; the surrounding network guarantees this by
// routing activations through tanh before every generative layer.
struct GenerativeNeuronLayer {
  int q_order = 1;
  std::vector<Tensor> kernels;  // Q banks, each (Cout, Cin, k, k)
  Tensor bias;                  // (1, Cout, 1, 1)
  int stride = 1;
  int padding = 0;
  int dilation = 1;
  bool bounds_check = false;  // warn when |x| > 1 + eps
  mutable int64_t bound_violations = 0;

  Tensor forward(Tape& t, const Tensor& x) const;

  int out_channels() const { return kernels.at(0).shape().n; }
  int in_channels() const { return kernels.at(0).shape().c; }
  int kernel_size() const { return kernels.at(0).shape().h; }
  int64_t parameter_count() const;

  void collect_parameters(const std::string& prefix,
                          std::vector<std::pair<std::string, Tensor>>* out);
};

// Kernel banks drawn from U(+-1/sqrt(fan_in)) with bank n further scaled by
// 1/n!; bias zero. Deterministic given the rng state.
GenerativeNeuronLayer make_selfonn(int c_in, int c_out, int k, int q, Rng& rng,
                                   int stride = 1, int padding = 0,
                                   int dilation = 1);
GenerativeNeuronLayer make_selfonn_zero(int c_in, int c_out, int k, int q,
                                        int stride = 1, int padding = 0,
                                        int dilation = 1);

inline GenerativeNeuronLayer make_selfonn(int c_in, int c_out, int k, int q,
                                          uint64_t seed, int stride = 1,
                                          int padding = 0, int dilation = 1) {
  Rng rng(seed);
  return make_selfonn(c_in, c_out, k, q, rng, stride, padding, dilation);
}

}  // namespace onnpic
