#include "onnpic/layers.hpp"

#include <cmath>

namespace onnpic {

ConvLayer make_conv(int c_in, int c_out, int k, Rng& rng, int stride,
                    int padding, int dilation) {
  if (c_in < 1 || c_out < 1 || k < 1) {
    throw ArgumentError("make_conv: all dims must be positive");
  }
  ConvLayer l;
  double bound = 1.0 / std::sqrt(double(c_in) * k * k);
  l.weight = Tensor::uniform({c_out, c_in, k, k}, -bound, bound, rng, true);
  l.bias = Tensor::zeros({1, c_out, 1, 1}, true);
  l.stride = stride;
  l.padding = padding;
  l.dilation = dilation;
  return l;
}

ConvTransposeLayer make_conv_transpose(int c_in, int c_out, int k, Rng& rng,
                                       int stride, int padding,
                                       int out_padding) {
  if (c_in < 1 || c_out < 1 || k < 1) {
    throw ArgumentError("make_conv_transpose: all dims must be positive");
  }
  ConvTransposeLayer l;
  double bound = 1.0 / std::sqrt(double(c_in) * k * k);
  l.weight = Tensor::uniform({c_in, c_out, k, k}, -bound, bound, rng, true);
  l.bias = Tensor::zeros({1, c_out, 1, 1}, true);
  l.stride = stride;
  l.padding = padding;
  l.out_padding = out_padding;
  return l;
}

}  // namespace onnpic
