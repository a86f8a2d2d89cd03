#include "onnpic/selfonn.hpp"

#include <cmath>
#include <cstdio>

namespace onnpic {

Tensor GenerativeNeuronLayer::forward(Tape& t, const Tensor& x) const {
  if (kernels.empty()) throw ConfigError("generative layer has no kernels");
  if (x.shape().c != in_channels()) {
    throw DimensionError("generative layer: input channels " +
                         to_string(x.shape()) + " do not match kernels");
  }
  if (bounds_check) {
    for (double v : x.data()) {
      if (std::fabs(v) > 1.0 + 1e-9) {
        ++bound_violations;
        if (bound_violations == 1) {
          std::fprintf(stderr,
                       "warning: generative layer input outside [-1,1] "
                       "(|x|=%.6f); powers may be poorly conditioned\n",
                       std::fabs(v));
        }
        break;
      }
    }
  }
  Tensor acc = conv2d(t, x, kernels[0], bias, stride, padding, dilation);
  for (int n = 2; n <= q_order; ++n) {
    Tensor xn = elementwise_pow(t, x, n);
    Tensor term = conv2d(t, xn, kernels[n - 1], Tensor(), stride, padding,
                         dilation);
    acc = add(t, acc, term);
  }
  return acc;
}

int64_t GenerativeNeuronLayer::parameter_count() const {
  int64_t count = bias.numel();
  for (const Tensor& k : kernels) count += k.numel();
  return count;
}

void GenerativeNeuronLayer::collect_parameters(
    const std::string& prefix,
    std::vector<std::pair<std::string, Tensor>>* out) {
  for (size_t n = 0; n < kernels.size(); ++n) {
    out->emplace_back(prefix + ".w" + std::to_string(n + 1), kernels[n]);
  }
  out->emplace_back(prefix + ".w0", bias);
}

GenerativeNeuronLayer make_selfonn(int c_in, int c_out, int k, int q, Rng& rng,
                                   int stride, int padding, int dilation) {
  if (c_in < 1 || c_out < 1 || k < 1 || q < 1) {
    throw ArgumentError("make_selfonn: all dims must be positive");
  }
  GenerativeNeuronLayer layer;
  layer.q_order = q;
  layer.stride = stride;
  layer.padding = padding;
  layer.dilation = dilation;
  double bound = 1.0 / std::sqrt(double(c_in) * k * k);
  double factorial = 1.0;
  for (int n = 1; n <= q; ++n) {
    factorial *= n;
    Tensor w = Tensor::uniform({c_out, c_in, k, k}, -bound / factorial,
                               bound / factorial, rng, true);
    layer.kernels.push_back(w);
  }
  layer.bias = Tensor::zeros({1, c_out, 1, 1}, true);
  return layer;
}

GenerativeNeuronLayer make_selfonn_zero(int c_in, int c_out, int k, int q,
                                        int stride, int padding, int dilation) {
  if (c_in < 1 || c_out < 1 || k < 1 || q < 1) {
    throw ArgumentError("make_selfonn: all dims must be positive");
  }
  GenerativeNeuronLayer layer;
  layer.q_order = q;
  layer.stride = stride;
  layer.padding = padding;
  layer.dilation = dilation;
  for (int n = 1; n <= q; ++n) {
    layer.kernels.push_back(Tensor::zeros({c_out, c_in, k, k}, true));
  }
  layer.bias = Tensor::zeros({1, c_out, 1, 1}, true);
  return layer;
}

}  // namespace onnpic
