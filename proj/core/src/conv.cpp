#include <algorithm>
#include <cmath>

#include "onnpic/ops.hpp"

namespace onnpic {

namespace {

struct ConvDims {
  int N, Ci, H, W;   // input
  int Co, K;         // kernel
  int OH, OW;        // output
  int s, p, d;
};

inline int floor_div(int a, int b) {
  int q = a / b, r = a % b;
  return (r != 0 && ((r < 0) != (b < 0))) ? q - 1 : q;
}
inline int ceil_div(int a, int b) { return -floor_div(-a, b); }

// Valid output range [lo, hi) for one kernel tap along one axis, i.e. the
// outputs whose sampled input index o*s + k*d - p stays inside [0, in_size).
inline void tap_range(int in_size, int out_size, int s, int p, int d, int k,
                      int* lo, int* hi) {
  int off = k * d - p;
  *lo = std::max(0, ceil_div(-off, s));
  *hi = std::min(out_size, floor_div(in_size - 1 - off, s) + 1);
  if (*hi < *lo) *hi = *lo;
}

// y[n,co] = bias[co] + sum_{ci,ky,kx} w[co,ci,ky,kx] * shifted x. With
// accumulate=true the output is left as-is and summed into (no bias).
void conv_forward_kernel(const double* x, const double* w, const double* bias,
                         double* y, const ConvDims& D, bool accumulate) {
  const int64_t xp_sz = int64_t(D.H) * D.W;
  const int64_t yp_sz = int64_t(D.OH) * D.OW;
  for (int n = 0; n < D.N; ++n) {
    for (int co = 0; co < D.Co; ++co) {
      double* yp = y + (int64_t(n) * D.Co + co) * yp_sz;
      if (!accumulate) {
        std::fill(yp, yp + yp_sz, bias ? bias[co] : 0.0);
      }
      for (int ci = 0; ci < D.Ci; ++ci) {
        const double* xp = x + (int64_t(n) * D.Ci + ci) * xp_sz;
        const double* wp = w + (int64_t(co) * D.Ci + ci) * D.K * D.K;
        for (int ky = 0; ky < D.K; ++ky) {
          int oy_lo, oy_hi;
          tap_range(D.H, D.OH, D.s, D.p, D.d, ky, &oy_lo, &oy_hi);
          for (int kx = 0; kx < D.K; ++kx) {
            double wv = wp[ky * D.K + kx];
            if (wv == 0.0) continue;
            int ox_lo, ox_hi;
            tap_range(D.W, D.OW, D.s, D.p, D.d, kx, &ox_lo, &ox_hi);
            int off_y = ky * D.d - D.p, off_x = kx * D.d - D.p;
            for (int oy = oy_lo; oy < oy_hi; ++oy) {
              const double* xrow = xp + int64_t(oy * D.s + off_y) * D.W + off_x;
              double* yrow = yp + int64_t(oy) * D.OW;
              if (D.s == 1) {
                for (int ox = ox_lo; ox < ox_hi; ++ox) {
                  yrow[ox] += wv * xrow[ox];
                }
              } else {
                for (int ox = ox_lo; ox < ox_hi; ++ox) {
                  yrow[ox] += wv * xrow[ox * D.s];
                }
              }
            }
          }
        }
      }
    }
  }
}

// gx += conv-adjoint of gy (scatter through the same taps).
void conv_grad_input_kernel(const double* gy, const double* w, double* gx,
                            const ConvDims& D) {
  const int64_t xp_sz = int64_t(D.H) * D.W;
  const int64_t yp_sz = int64_t(D.OH) * D.OW;
  for (int n = 0; n < D.N; ++n) {
    for (int ci = 0; ci < D.Ci; ++ci) {
      double* gxp = gx + (int64_t(n) * D.Ci + ci) * xp_sz;
      for (int co = 0; co < D.Co; ++co) {
        const double* gyp = gy + (int64_t(n) * D.Co + co) * yp_sz;
        const double* wp = w + (int64_t(co) * D.Ci + ci) * D.K * D.K;
        for (int ky = 0; ky < D.K; ++ky) {
          int oy_lo, oy_hi;
          tap_range(D.H, D.OH, D.s, D.p, D.d, ky, &oy_lo, &oy_hi);
          for (int kx = 0; kx < D.K; ++kx) {
            double wv = wp[ky * D.K + kx];
            if (wv == 0.0) continue;
            int ox_lo, ox_hi;
            tap_range(D.W, D.OW, D.s, D.p, D.d, kx, &ox_lo, &ox_hi);
            int off_y = ky * D.d - D.p, off_x = kx * D.d - D.p;
            for (int oy = oy_lo; oy < oy_hi; ++oy) {
              double* gxrow = gxp + int64_t(oy * D.s + off_y) * D.W + off_x;
              const double* gyrow = gyp + int64_t(oy) * D.OW;
              if (D.s == 1) {
                for (int ox = ox_lo; ox < ox_hi; ++ox) {
                  gxrow[ox] += wv * gyrow[ox];
                }
              } else {
                for (int ox = ox_lo; ox < ox_hi; ++ox) {
                  gxrow[ox * D.s] += wv * gyrow[ox];
                }
              }
            }
          }
        }
      }
    }
  }
}

// gw[co,ci,ky,kx] += sum over batch/space of gy * x at the tap.
void conv_grad_weight_kernel(const double* x, const double* gy, double* gw,
                             const ConvDims& D) {
  const int64_t xp_sz = int64_t(D.H) * D.W;
  const int64_t yp_sz = int64_t(D.OH) * D.OW;
  for (int n = 0; n < D.N; ++n) {
    for (int co = 0; co < D.Co; ++co) {
      const double* gyp = gy + (int64_t(n) * D.Co + co) * yp_sz;
      for (int ci = 0; ci < D.Ci; ++ci) {
        const double* xp = x + (int64_t(n) * D.Ci + ci) * xp_sz;
        double* wp = gw + (int64_t(co) * D.Ci + ci) * D.K * D.K;
        for (int ky = 0; ky < D.K; ++ky) {
          int oy_lo, oy_hi;
          tap_range(D.H, D.OH, D.s, D.p, D.d, ky, &oy_lo, &oy_hi);
          for (int kx = 0; kx < D.K; ++kx) {
            int ox_lo, ox_hi;
            tap_range(D.W, D.OW, D.s, D.p, D.d, kx, &ox_lo, &ox_hi);
            int off_y = ky * D.d - D.p, off_x = kx * D.d - D.p;
            double acc = 0.0;
            for (int oy = oy_lo; oy < oy_hi; ++oy) {
              const double* xrow = xp + int64_t(oy * D.s + off_y) * D.W + off_x;
              const double* gyrow = gyp + int64_t(oy) * D.OW;
              if (D.s == 1) {
                for (int ox = ox_lo; ox < ox_hi; ++ox) {
                  acc += gyrow[ox] * xrow[ox];
                }
              } else {
                for (int ox = ox_lo; ox < ox_hi; ++ox) {
                  acc += gyrow[ox] * xrow[ox * D.s];
                }
              }
            }
            wp[ky * D.K + kx] += acc;
          }
        }
      }
    }
  }
}

void conv_grad_bias(const double* gy, double* gb, int N, int Co,
                    int64_t plane) {
  for (int n = 0; n < N; ++n) {
    for (int co = 0; co < Co; ++co) {
      const double* gyp = gy + (int64_t(n) * Co + co) * plane;
      double acc = 0.0;
      for (int64_t i = 0; i < plane; ++i) acc += gyp[i];
      gb[co] += acc;
    }
  }
}

}  // namespace

Tensor conv2d(Tape& t, const Tensor& x, const Tensor& w, const Tensor& bias,
              int stride, int padding, int dilation) {
  if (stride < 1 || dilation < 1) {
    throw ArgumentError("conv2d: stride and dilation must be >= 1");
  }
  if (padding < 0) throw ArgumentError("conv2d: negative padding");
  const Shape& xs = x.shape();
  const Shape& ws = w.shape();
  if (ws.h != ws.w) throw DimensionError("conv2d: kernel must be square");
  if (ws.c != xs.c) {
    throw DimensionError("conv2d: input channels " + to_string(xs) +
                         " do not match weight " + to_string(ws));
  }
  if (bias.defined() &&
      !(bias.shape() == Shape{1, ws.n, 1, 1})) {
    throw DimensionError("conv2d: bias must be (1,Cout,1,1)");
  }
  ConvDims D;
  D.N = xs.n;
  D.Ci = xs.c;
  D.H = xs.h;
  D.W = xs.w;
  D.Co = ws.n;
  D.K = ws.h;
  D.s = stride;
  D.p = padding;
  D.d = dilation;
  D.OH = (xs.h + 2 * padding - dilation * (D.K - 1) - 1) / stride + 1;
  D.OW = (xs.w + 2 * padding - dilation * (D.K - 1) - 1) / stride + 1;
  if (xs.h + 2 * padding < dilation * (D.K - 1) + 1 ||
      xs.w + 2 * padding < dilation * (D.K - 1) + 1) {
    throw DimensionError("conv2d: kernel support exceeds padded input");
  }
  Tensor out = Tensor::zeros({D.N, D.Co, D.OH, D.OW});
  conv_forward_kernel(x.data().data(), w.data().data(),
                      bias.defined() ? bias.data().data() : nullptr,
                      out.mutable_data().data(), D, false);
  bool need = t.recording() &&
              (x.requires_grad() || w.requires_grad() ||
               (bias.defined() && bias.requires_grad()));
  if (need) {
    out.set_requires_grad(true);
    auto xi = x.impl(), wi = w.impl(), oi = out.impl();
    auto bi = bias.defined() ? bias.impl() : nullptr;
    bool nx = x.requires_grad(), nw = w.requires_grad();
    bool nb = bias.defined() && bias.requires_grad();
    t.record([xi, wi, bi, oi, D, nx, nw, nb]() {
      if (oi->grad.empty()) return;
      const double* gy = oi->grad.data();
      if (nx) {
        if (xi->grad.empty()) xi->grad.assign(xi->data.size(), 0.0);
        conv_grad_input_kernel(gy, wi->data.data(), xi->grad.data(), D);
      }
      if (nw) {
        if (wi->grad.empty()) wi->grad.assign(wi->data.size(), 0.0);
        conv_grad_weight_kernel(xi->data.data(), gy, wi->grad.data(), D);
      }
      if (nb) {
        if (bi->grad.empty()) bi->grad.assign(bi->data.size(), 0.0);
        conv_grad_bias(gy, bi->grad.data(), D.N, D.Co,
                       int64_t(D.OH) * D.OW);
      }
    });
  }
  return out;
}

Tensor conv_transpose2d(Tape& t, const Tensor& x, const Tensor& w,
                        const Tensor& bias, int stride, int padding,
                        int out_padding) {
  if (stride < 1) throw ArgumentError("conv_transpose2d: stride must be >= 1");
  if (padding < 0) throw ArgumentError("conv_transpose2d: negative padding");
  if (out_padding < 0 || out_padding >= stride) {
    throw ArgumentError("conv_transpose2d: out_padding must be in [0, stride)");
  }
  const Shape& xs = x.shape();
  const Shape& ws = w.shape();  // (Cin, Cout, k, k)
  if (ws.h != ws.w) {
    throw DimensionError("conv_transpose2d: kernel must be square");
  }
  if (ws.n != xs.c) {
    throw DimensionError("conv_transpose2d: input channels " + to_string(xs) +
                         " do not match weight " + to_string(ws));
  }
  int K = ws.h;
  int OH = (xs.h - 1) * stride - 2 * padding + K + out_padding;
  int OW = (xs.w - 1) * stride - 2 * padding + K + out_padding;
  if (OH < 1 || OW < 1) {
    throw DimensionError("conv_transpose2d: empty output");
  }
  if (bias.defined() && !(bias.shape() == Shape{1, ws.c, 1, 1})) {
    throw DimensionError("conv_transpose2d: bias must be (1,Cout,1,1)");
  }
  // The matching forward-conv geometry: conv(big) -> small.
  ConvDims D;
  D.N = xs.n;
  D.Ci = ws.c;   // big side channels (transposed output)
  D.H = OH;
  D.W = OW;
  D.Co = ws.n;   // small side channels (transposed input)
  D.K = K;
  D.s = stride;
  D.p = padding;
  D.d = 1;
  D.OH = xs.h;
  D.OW = xs.w;
  Tensor out = Tensor::zeros({xs.n, ws.c, OH, OW});
  conv_grad_input_kernel(x.data().data(), w.data().data(),
                         out.mutable_data().data(), D);
  if (bias.defined()) {
    double* po = out.mutable_data().data();
    const double* pb = bias.data().data();
    int64_t plane = int64_t(OH) * OW;
    for (int n = 0; n < xs.n; ++n) {
      for (int c = 0; c < ws.c; ++c) {
        double* pp = po + (int64_t(n) * ws.c + c) * plane;
        for (int64_t i = 0; i < plane; ++i) pp[i] += pb[c];
      }
    }
  }
  bool need = t.recording() &&
              (x.requires_grad() || w.requires_grad() ||
               (bias.defined() && bias.requires_grad()));
  if (need) {
    out.set_requires_grad(true);
    auto xi = x.impl(), wi = w.impl(), oi = out.impl();
    auto bi = bias.defined() ? bias.impl() : nullptr;
    bool nx = x.requires_grad(), nw = w.requires_grad();
    bool nb = bias.defined() && bias.requires_grad();
    t.record([xi, wi, bi, oi, D, nx, nw, nb]() {
      if (oi->grad.empty()) return;
      const double* g_big = oi->grad.data();
      if (nx) {
        if (xi->grad.empty()) xi->grad.assign(xi->data.size(), 0.0);
        // d(small) = conv(d(big)); accumulate, no bias
        conv_forward_kernel(g_big, wi->data.data(), nullptr, xi->grad.data(),
                            D, true);
      }
      if (nw) {
        if (wi->grad.empty()) wi->grad.assign(wi->data.size(), 0.0);
        // conv roles: input = d(big), output-grad = x(small)
        conv_grad_weight_kernel(g_big, xi->data.data(), wi->grad.data(), D);
      }
      if (nb) {
        if (bi->grad.empty()) bi->grad.assign(bi->data.size(), 0.0);
        conv_grad_bias(g_big, bi->grad.data(), D.N, D.Ci,
                       int64_t(D.H) * D.W);
      }
    });
  }
  return out;
}

}  // namespace onnpic
