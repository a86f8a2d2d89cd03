#include "onnpic/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace onnpic {

namespace {

bool track(Tape& t, std::initializer_list<const Tensor*> ins) {
  if (!t.recording()) return false;
  for (const Tensor* p : ins) {
    if (p->defined() && p->requires_grad()) return true;
  }
  return false;
}

// Broadcast plan for binary ops: per-dim element strides, 0 where a dim of
// size 1 is stretched.
struct Bcast {
  Shape out;
  int64_t sa[4], sb[4];
};

Bcast broadcast_plan(const Shape& a, const Shape& b, const char* op) {
  Bcast p;
  int da[4] = {a.n, a.c, a.h, a.w};
  int db[4] = {b.n, b.c, b.h, b.w};
  int out[4];
  for (int i = 0; i < 4; ++i) {
    if (da[i] == db[i]) {
      out[i] = da[i];
    } else if (da[i] == 1 || db[i] == 1) {
      out[i] = std::max(da[i], db[i]);
    } else {
      throw DimensionError(std::string(op) + ": shapes " + to_string(a) +
                           " and " + to_string(b) + " do not broadcast");
    }
  }
  p.out = {out[0], out[1], out[2], out[3]};
  int64_t sa = 1, sb = 1;
  for (int i = 3; i >= 0; --i) {
    p.sa[i] = (da[i] == 1 && out[i] != 1) ? 0 : sa;
    p.sb[i] = (db[i] == 1 && out[i] != 1) ? 0 : sb;
    sa *= da[i];
    sb *= db[i];
  }
  return p;
}

// Applies a binary op elementwise over the broadcast product. FwdFn computes
// the output value; the two grad functors compute local partials given the
// input values. Backward accumulates through the same strides, which yields
// the required sum-reduction over broadcast dims.
template <class F>
Tensor binary_op(Tape& t, const Tensor& a, const Tensor& b, const char* name,
                 F f,
                 double (*dfa)(double, double, double),
                 double (*dfb)(double, double, double)) {
  Bcast p = broadcast_plan(a.shape(), b.shape(), name);
  Tensor out = Tensor::zeros(p.out);
  {
    const double* pa = a.data().data();
    const double* pb = b.data().data();
    double* po = out.mutable_data().data();
    int64_t i = 0;
    for (int n = 0; n < p.out.n; ++n)
      for (int c = 0; c < p.out.c; ++c)
        for (int y = 0; y < p.out.h; ++y) {
          int64_t ia = n * p.sa[0] + c * p.sa[1] + y * p.sa[2];
          int64_t ib = n * p.sb[0] + c * p.sb[1] + y * p.sb[2];
          for (int x = 0; x < p.out.w; ++x) {
            po[i++] = f(pa[ia + x * p.sa[3]], pb[ib + x * p.sb[3]]);
          }
        }
  }
  if (track(t, {&a, &b})) {
    out.set_requires_grad(true);
    auto ai = a.impl(), bi = b.impl(), oi = out.impl();
    bool need_a = a.requires_grad(), need_b = b.requires_grad();
    t.record([ai, bi, oi, p, dfa, dfb, need_a, need_b]() {
      if (oi->grad.empty()) return;
      const double* go = oi->grad.data();
      const double* pa = ai->data.data();
      const double* pb = bi->data.data();
      double* ga = nullptr;
      double* gb = nullptr;
      if (need_a) {
        if (ai->grad.empty()) ai->grad.assign(ai->data.size(), 0.0);
        ga = ai->grad.data();
      }
      if (need_b) {
        if (bi->grad.empty()) bi->grad.assign(bi->data.size(), 0.0);
        gb = bi->grad.data();
      }
      int64_t i = 0;
      for (int n = 0; n < p.out.n; ++n)
        for (int c = 0; c < p.out.c; ++c)
          for (int y = 0; y < p.out.h; ++y) {
            int64_t ia = n * p.sa[0] + c * p.sa[1] + y * p.sa[2];
            int64_t ib = n * p.sb[0] + c * p.sb[1] + y * p.sb[2];
            for (int x = 0; x < p.out.w; ++x, ++i) {
              double va = pa[ia + x * p.sa[3]];
              double vb = pb[ib + x * p.sb[3]];
              if (ga) ga[ia + x * p.sa[3]] += go[i] * dfa(va, vb, oi->data[i]);
              if (gb) gb[ib + x * p.sb[3]] += go[i] * dfb(va, vb, oi->data[i]);
            }
          }
    });
  }
  return out;
}

template <class F, class DF>
Tensor unary_op(Tape& t, const Tensor& a, F f, DF df) {
  Tensor out = Tensor::zeros(a.shape());
  const double* pa = a.data().data();
  double* po = out.mutable_data().data();
  int64_t n = a.numel();
  for (int64_t i = 0; i < n; ++i) po[i] = f(pa[i]);
  if (track(t, {&a})) {
    out.set_requires_grad(true);
    auto ai = a.impl(), oi = out.impl();
    t.record([ai, oi, df]() {
      if (oi->grad.empty()) return;
      if (ai->grad.empty()) ai->grad.assign(ai->data.size(), 0.0);
      const double* go = oi->grad.data();
      double* ga = ai->grad.data();
      int64_t n = static_cast<int64_t>(ai->data.size());
      for (int64_t i = 0; i < n; ++i) {
        ga[i] += go[i] * df(ai->data[i], oi->data[i]);
      }
    });
  }
  return out;
}

}  // namespace

Tensor add(Tape& t, const Tensor& a, const Tensor& b) {
  return binary_op(
      t, a, b, "add", [](double x, double y) { return x + y; },
      [](double, double, double) { return 1.0; },
      [](double, double, double) { return 1.0; });
}

Tensor sub(Tape& t, const Tensor& a, const Tensor& b) {
  return binary_op(
      t, a, b, "sub", [](double x, double y) { return x - y; },
      [](double, double, double) { return 1.0; },
      [](double, double, double) { return -1.0; });
}

Tensor mul(Tape& t, const Tensor& a, const Tensor& b) {
  return binary_op(
      t, a, b, "mul", [](double x, double y) { return x * y; },
      [](double, double vb, double) { return vb; },
      [](double va, double, double) { return va; });
}

Tensor div(Tape& t, const Tensor& a, const Tensor& b) {
  return binary_op(
      t, a, b, "div", [](double x, double y) { return x / y; },
      [](double, double vb, double) { return 1.0 / vb; },
      [](double va, double vb, double) { return -va / (vb * vb); });
}

Tensor add_scalar(Tape& t, const Tensor& a, double s) {
  return unary_op(
      t, a, [s](double x) { return x + s; },
      [](double, double) { return 1.0; });
}

Tensor mul_scalar(Tape& t, const Tensor& a, double s) {
  return unary_op(
      t, a, [s](double x) { return x * s; },
      [s](double, double) { return s; });
}

Tensor neg(Tape& t, const Tensor& a) { return mul_scalar(t, a, -1.0); }

Tensor exp(Tape& t, const Tensor& a) {
  return unary_op(
      t, a, [](double x) { return std::exp(x); },
      [](double, double y) { return y; });
}

Tensor log(Tape& t, const Tensor& a) {
  for (double x : a.data()) {
    if (x <= 0.0) {
      throw DomainError("log: nonpositive input (missing clamp upstream?)");
    }
  }
  return unary_op(
      t, a, [](double x) { return std::log(x); },
      [](double x, double) { return 1.0 / x; });
}

Tensor abs(Tape& t, const Tensor& a) {
  return unary_op(
      t, a, [](double x) { return std::fabs(x); },
      [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Tensor relu(Tape& t, const Tensor& a) {
  return unary_op(
      t, a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor leaky_relu(Tape& t, const Tensor& a, double slope) {
  return unary_op(
      t, a, [slope](double x) { return x > 0.0 ? x : slope * x; },
      [slope](double x, double) { return x > 0.0 ? 1.0 : slope; });
}

Tensor tanh(Tape& t, const Tensor& a) {
  return unary_op(
      t, a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(Tape& t, const Tensor& a) {
  return unary_op(
      t, a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor softplus(Tape& t, const Tensor& a) {
  // log1p(exp(x)) with the large-x branch to avoid overflow
  return unary_op(
      t, a,
      [](double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); },
      [](double x, double) { return 1.0 / (1.0 + std::exp(-x)); });
}

Tensor elementwise_pow(Tape& t, const Tensor& a, int n) {
  if (n < 1) {
    throw ArgumentError(
        "elementwise_pow: exponent must be >= 1 (constant terms are biases)");
  }
  return unary_op(
      t, a,
      [n](double x) {
        double r = 1.0;
        for (int i = 0; i < n; ++i) r *= x;
        return r;
      },
      [n](double x, double) {
        double r = 1.0;
        for (int i = 0; i < n - 1; ++i) r *= x;
        return n * r;
      });
}

Tensor clamp_min(Tape& t, const Tensor& a, double floor) {
  return unary_op(
      t, a, [floor](double x) { return x > floor ? x : floor; },
      [floor](double x, double) { return x > floor ? 1.0 : 0.0; });
}

Tensor sum(Tape& t, const Tensor& a) {
  double s = 0.0;
  for (double x : a.data()) s += x;
  Tensor out = Tensor::scalar(s);
  if (track(t, {&a})) {
    out.set_requires_grad(true);
    auto ai = a.impl(), oi = out.impl();
    t.record([ai, oi]() {
      if (oi->grad.empty()) return;
      if (ai->grad.empty()) ai->grad.assign(ai->data.size(), 0.0);
      double g = oi->grad[0];
      for (double& v : ai->grad) v += g;
    });
  }
  return out;
}

Tensor mean(Tape& t, const Tensor& a) {
  double s = 0.0;
  for (double x : a.data()) s += x;
  double inv = 1.0 / static_cast<double>(a.numel());
  Tensor out = Tensor::scalar(s * inv);
  if (track(t, {&a})) {
    out.set_requires_grad(true);
    auto ai = a.impl(), oi = out.impl();
    t.record([ai, oi, inv]() {
      if (oi->grad.empty()) return;
      if (ai->grad.empty()) ai->grad.assign(ai->data.size(), 0.0);
      double g = oi->grad[0] * inv;
      for (double& v : ai->grad) v += g;
    });
  }
  return out;
}

Tensor global_avg_pool(Tape& t, const Tensor& a) {
  const Shape& s = a.shape();
  Tensor out = Tensor::zeros({s.n, s.c, 1, 1});
  const double* pa = a.data().data();
  double* po = out.mutable_data().data();
  int64_t plane = int64_t(s.h) * s.w;
  double inv = 1.0 / static_cast<double>(plane);
  for (int64_t nc = 0; nc < int64_t(s.n) * s.c; ++nc) {
    double acc = 0.0;
    for (int64_t i = 0; i < plane; ++i) acc += pa[nc * plane + i];
    po[nc] = acc * inv;
  }
  if (track(t, {&a})) {
    out.set_requires_grad(true);
    auto ai = a.impl(), oi = out.impl();
    t.record([ai, oi, plane, inv]() {
      if (oi->grad.empty()) return;
      if (ai->grad.empty()) ai->grad.assign(ai->data.size(), 0.0);
      int64_t planes = static_cast<int64_t>(oi->data.size());
      for (int64_t nc = 0; nc < planes; ++nc) {
        double g = oi->grad[nc] * inv;
        for (int64_t i = 0; i < plane; ++i) ai->grad[nc * plane + i] += g;
      }
    });
  }
  return out;
}

Tensor global_max_pool(Tape& t, const Tensor& a) {
  const Shape& s = a.shape();
  Tensor out = Tensor::zeros({s.n, s.c, 1, 1});
  const double* pa = a.data().data();
  double* po = out.mutable_data().data();
  int64_t plane = int64_t(s.h) * s.w;
  std::vector<int64_t> arg(int64_t(s.n) * s.c);
  for (int64_t nc = 0; nc < int64_t(s.n) * s.c; ++nc) {
    int64_t best = 0;
    double bv = pa[nc * plane];
    for (int64_t i = 1; i < plane; ++i) {
      if (pa[nc * plane + i] > bv) {
        bv = pa[nc * plane + i];
        best = i;
      }
    }
    po[nc] = bv;
    arg[nc] = best;
  }
  if (track(t, {&a})) {
    out.set_requires_grad(true);
    auto ai = a.impl(), oi = out.impl();
    t.record([ai, oi, plane, arg = std::move(arg)]() {
      if (oi->grad.empty()) return;
      if (ai->grad.empty()) ai->grad.assign(ai->data.size(), 0.0);
      for (size_t nc = 0; nc < arg.size(); ++nc) {
        ai->grad[nc * plane + arg[nc]] += oi->grad[nc];
      }
    });
  }
  return out;
}

Tensor channel_mean(Tape& t, const Tensor& a) {
  const Shape& s = a.shape();
  Tensor out = Tensor::zeros({s.n, 1, s.h, s.w});
  const double* pa = a.data().data();
  double* po = out.mutable_data().data();
  int64_t plane = int64_t(s.h) * s.w;
  double inv = 1.0 / s.c;
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      const double* src = pa + (int64_t(n) * s.c + c) * plane;
      double* dst = po + int64_t(n) * plane;
      for (int64_t i = 0; i < plane; ++i) dst[i] += src[i] * inv;
    }
  }
  if (track(t, {&a})) {
    out.set_requires_grad(true);
    auto ai = a.impl(), oi = out.impl();
    int C = s.c;
    t.record([ai, oi, plane, inv, C]() {
      if (oi->grad.empty()) return;
      if (ai->grad.empty()) ai->grad.assign(ai->data.size(), 0.0);
      int64_t nplanes = static_cast<int64_t>(oi->data.size()) / plane;
      for (int64_t n = 0; n < nplanes; ++n) {
        const double* g = oi->grad.data() + n * plane;
        for (int c = 0; c < C; ++c) {
          double* dst = ai->grad.data() + (n * C + c) * plane;
          for (int64_t i = 0; i < plane; ++i) dst[i] += g[i] * inv;
        }
      }
    });
  }
  return out;
}

Tensor channel_max(Tape& t, const Tensor& a) {
  const Shape& s = a.shape();
  Tensor out = Tensor::zeros({s.n, 1, s.h, s.w});
  const double* pa = a.data().data();
  double* po = out.mutable_data().data();
  int64_t plane = int64_t(s.h) * s.w;
  std::vector<int32_t> arg(int64_t(s.n) * plane);
  for (int n = 0; n < s.n; ++n) {
    for (int64_t i = 0; i < plane; ++i) {
      double bv = pa[int64_t(n) * s.c * plane + i];
      int bc = 0;
      for (int c = 1; c < s.c; ++c) {
        double v = pa[(int64_t(n) * s.c + c) * plane + i];
        if (v > bv) {
          bv = v;
          bc = c;
        }
      }
      po[int64_t(n) * plane + i] = bv;
      arg[int64_t(n) * plane + i] = bc;
    }
  }
  if (track(t, {&a})) {
    out.set_requires_grad(true);
    auto ai = a.impl(), oi = out.impl();
    int C = s.c;
    t.record([ai, oi, plane, C, arg = std::move(arg)]() {
      if (oi->grad.empty()) return;
      if (ai->grad.empty()) ai->grad.assign(ai->data.size(), 0.0);
      int64_t total = static_cast<int64_t>(oi->data.size());
      for (int64_t j = 0; j < total; ++j) {
        int64_t n = j / plane, i = j % plane;
        ai->grad[(n * C + arg[j]) * plane + i] += oi->grad[j];
      }
    });
  }
  return out;
}

Tensor reshape(Tape& t, const Tensor& a, const Shape& s) {
  if (s.numel() != a.numel()) {
    throw DimensionError("reshape: element count mismatch " +
                         to_string(a.shape()) + " -> " + to_string(s));
  }
  Tensor out = Tensor::from_vector(
      s, std::vector<double>(a.data().begin(), a.data().end()));
  if (track(t, {&a})) {
    out.set_requires_grad(true);
    auto ai = a.impl(), oi = out.impl();
    t.record([ai, oi]() {
      if (oi->grad.empty()) return;
      if (ai->grad.empty()) ai->grad.assign(ai->data.size(), 0.0);
      for (size_t i = 0; i < ai->grad.size(); ++i) {
        ai->grad[i] += oi->grad[i];
      }
    });
  }
  return out;
}

Tensor concat(Tape& t, std::span<const Tensor> parts, int axis) {
  if (parts.empty()) throw ArgumentError("concat: no inputs");
  if (axis != 1 && axis != 2) throw ArgumentError("concat: axis must be 1 or 2");
  Shape s0 = parts[0].shape();
  int total = 0;
  for (const Tensor& p : parts) {
    const Shape& s = p.shape();
    for (int i = 0; i < 4; ++i) {
      if (i != axis && s.dim(i) != s0.dim(i)) {
        throw DimensionError("concat: incompatible shapes " + to_string(s0) +
                             " vs " + to_string(s));
      }
    }
    total += s.dim(axis);
  }
  Shape os = s0;
  (axis == 1 ? os.c : os.h) = total;
  Tensor out = Tensor::zeros(os);
  // Copy block by block. Blocks are contiguous runs of `inner` elements.
  int64_t inner0 = (axis == 1) ? int64_t(s0.h) * s0.w : s0.w;
  int64_t outer = (axis == 1) ? s0.n : int64_t(s0.n) * s0.c;
  double* po = out.mutable_data().data();
  int64_t out_stride = total * inner0;
  int64_t off = 0;
  for (const Tensor& p : parts) {
    int64_t blk = p.shape().dim(axis) * inner0;
    const double* pp = p.data().data();
    for (int64_t o = 0; o < outer; ++o) {
      std::memcpy(po + o * out_stride + off, pp + o * blk,
                  blk * sizeof(double));
    }
    off += blk;
  }
  bool any = false;
  for (const Tensor& p : parts) any = any || p.requires_grad();
  if (t.recording() && any) {
    out.set_requires_grad(true);
    std::vector<std::shared_ptr<TensorImpl>> impls;
    std::vector<int64_t> blks;
    for (const Tensor& p : parts) {
      impls.push_back(p.impl());
      blks.push_back(p.shape().dim(axis) * inner0);
    }
    auto oi = out.impl();
    t.record([oi, impls, blks, outer, out_stride]() {
      if (oi->grad.empty()) return;
      int64_t off = 0;
      for (size_t k = 0; k < impls.size(); ++k) {
        auto& ai = impls[k];
        if (ai->requires_grad) {
          if (ai->grad.empty()) ai->grad.assign(ai->data.size(), 0.0);
          for (int64_t o = 0; o < outer; ++o) {
            const double* g = oi->grad.data() + o * out_stride + off;
            double* dst = ai->grad.data() + o * blks[k];
            for (int64_t i = 0; i < blks[k]; ++i) dst[i] += g[i];
          }
        }
        off += blks[k];
      }
    });
  }
  return out;
}

Tensor concat_channels(Tape& t, std::span<const Tensor> parts) {
  return concat(t, parts, 1);
}

Tensor slice_channels(Tape& t, const Tensor& a, int c0, int c1) {
  const Shape& s = a.shape();
  if (c0 < 0 || c1 > s.c || c0 >= c1) {
    throw ArgumentError("slice_channels: bad range");
  }
  Shape os{s.n, c1 - c0, s.h, s.w};
  Tensor out = Tensor::zeros(os);
  int64_t plane = int64_t(s.h) * s.w;
  const double* pa = a.data().data();
  double* po = out.mutable_data().data();
  for (int n = 0; n < s.n; ++n) {
    std::memcpy(po + int64_t(n) * os.c * plane,
                pa + (int64_t(n) * s.c + c0) * plane,
                int64_t(os.c) * plane * sizeof(double));
  }
  if (track(t, {&a})) {
    out.set_requires_grad(true);
    auto ai = a.impl(), oi = out.impl();
    int C = s.c, OC = os.c, N = s.n;
    t.record([ai, oi, plane, C, OC, N, c0]() {
      if (oi->grad.empty()) return;
      if (ai->grad.empty()) ai->grad.assign(ai->data.size(), 0.0);
      for (int n = 0; n < N; ++n) {
        const double* g = oi->grad.data() + int64_t(n) * OC * plane;
        double* dst = ai->grad.data() + (int64_t(n) * C + c0) * plane;
        for (int64_t i = 0; i < int64_t(OC) * plane; ++i) dst[i] += g[i];
      }
    });
  }
  return out;
}

Tensor slice_spatial(Tape& t, const Tensor& a, int h, int w) {
  const Shape& s = a.shape();
  if (h < 1 || w < 1 || h > s.h || w > s.w) {
    throw ArgumentError("slice_spatial: bad target dims");
  }
  if (h == s.h && w == s.w) return reshape(t, a, s);
  Shape os{s.n, s.c, h, w};
  Tensor out = Tensor::zeros(os);
  const double* pa = a.data().data();
  double* po = out.mutable_data().data();
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int y = 0; y < h; ++y) {
        const double* src = pa + s.index(n, c, y, 0);
        double* dst = po + os.index(n, c, y, 0);
        for (int x = 0; x < w; ++x) dst[x] = src[x];
      }
  if (track(t, {&a})) {
    out.set_requires_grad(true);
    auto ai = a.impl(), oi = out.impl();
    t.record([ai, oi, s, os]() {
      if (oi->grad.empty()) return;
      if (ai->grad.empty()) ai->grad.assign(ai->data.size(), 0.0);
      for (int n = 0; n < os.n; ++n)
        for (int c = 0; c < os.c; ++c)
          for (int y = 0; y < os.h; ++y) {
            const double* g = oi->grad.data() + os.index(n, c, y, 0);
            double* dst = ai->grad.data() + s.index(n, c, y, 0);
            for (int x = 0; x < os.w; ++x) dst[x] += g[x];
          }
    });
  }
  return out;
}

Tensor detach(const Tensor& a) {
  return Tensor::from_vector(
      a.shape(), std::vector<double>(a.data().begin(), a.data().end()));
}

namespace {

// out(M,N) += opX(M,K) * opY(K,N); phys layouts row-major, trans flags select
// the logical view.
void gemm_acc(const double* X, const double* Y, double* out, int M, int N,
              int K, bool tx, bool ty) {
  for (int i = 0; i < M; ++i) {
    for (int k = 0; k < K; ++k) {
      double xv = tx ? X[int64_t(k) * M + i] : X[int64_t(i) * K + k];
      if (xv == 0.0) continue;
      const double* yrow = ty ? nullptr : Y + int64_t(k) * N;
      double* orow = out + int64_t(i) * N;
      if (!ty) {
        for (int j = 0; j < N; ++j) orow[j] += xv * yrow[j];
      } else {
        for (int j = 0; j < N; ++j) orow[j] += xv * Y[int64_t(j) * K + k];
      }
    }
  }
}

}  // namespace

Tensor matmul(Tape& t, const Tensor& a, const Tensor& b, bool trans_a,
              bool trans_b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  bool a_batch1 = (sa.n == 1 && sa.c == 1);
  bool b_batch1 = (sb.n == 1 && sb.c == 1);
  if (!a_batch1 && !b_batch1 && (sa.n != sb.n || sa.c != sb.c)) {
    throw DimensionError("matmul: batch dims mismatch " + to_string(sa) +
                         " vs " + to_string(sb));
  }
  int M = trans_a ? sa.w : sa.h;
  int K = trans_a ? sa.h : sa.w;
  int Kb = trans_b ? sb.w : sb.h;
  int N = trans_b ? sb.h : sb.w;
  if (K != Kb) {
    throw DimensionError("matmul: inner dims mismatch " + to_string(sa) +
                         " vs " + to_string(sb));
  }
  int bn = a_batch1 ? sb.n : sa.n;
  int bc = a_batch1 ? sb.c : sa.c;
  Tensor out = Tensor::zeros({bn, bc, M, N});
  int64_t batches = int64_t(bn) * bc;
  int64_t astep = a_batch1 ? 0 : int64_t(sa.h) * sa.w;
  int64_t bstep = b_batch1 ? 0 : int64_t(sb.h) * sb.w;
  int64_t ostep = int64_t(M) * N;
  for (int64_t q = 0; q < batches; ++q) {
    gemm_acc(a.data().data() + q * astep, b.data().data() + q * bstep,
             out.mutable_data().data() + q * ostep, M, N, K, trans_a, trans_b);
  }
  if (track(t, {&a, &b})) {
    out.set_requires_grad(true);
    auto ai = a.impl(), bi = b.impl(), oi = out.impl();
    bool na = a.requires_grad(), nb = b.requires_grad();
    t.record([ai, bi, oi, M, N, K, trans_a, trans_b, batches, astep, bstep,
              ostep, na, nb]() {
      if (oi->grad.empty()) return;
      if (na && ai->grad.empty()) ai->grad.assign(ai->data.size(), 0.0);
      if (nb && bi->grad.empty()) bi->grad.assign(bi->data.size(), 0.0);
      for (int64_t q = 0; q < batches; ++q) {
        const double* gC = oi->grad.data() + q * ostep;
        const double* A = ai->data.data() + q * astep;
        const double* B = bi->data.data() + q * bstep;
        if (na) {
          double* gA = ai->grad.data() + q * astep;
          if (!trans_a) {
            // dA(M,K) += dC * opB^T
            gemm_acc(gC, B, gA, M, K, N, false, !trans_b);
          } else {
            // A is physically (K,M): dA += opB * dC^T
            gemm_acc(B, gC, gA, K, M, N, trans_b, true);
          }
        }
        if (nb) {
          double* gB = bi->grad.data() + q * bstep;
          if (!trans_b) {
            // dB(K,N) += opA^T * dC
            gemm_acc(A, gC, gB, K, N, M, !trans_a, false);
          } else {
            // B is physically (N,K): dB += dC^T * opA
            gemm_acc(gC, A, gB, N, K, M, true, trans_a);
          }
        }
      }
    });
  }
  return out;
}

Tensor l1_distance(Tape& t, const Tensor& a, const Tensor& b, Reduction r) {
  if (!(a.shape() == b.shape())) {
    throw DimensionError("l1_distance: shape mismatch " + to_string(a.shape()) +
                         " vs " + to_string(b.shape()));
  }
  double acc = 0.0;
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  int64_t n = a.numel();
  for (int64_t i = 0; i < n; ++i) acc += std::fabs(pa[i] - pb[i]);
  double scale = (r == Reduction::kMean) ? 1.0 / static_cast<double>(n) : 1.0;
  Tensor out = Tensor::scalar(acc * scale);
  if (track(t, {&a, &b})) {
    out.set_requires_grad(true);
    auto ai = a.impl(), bi = b.impl(), oi = out.impl();
    bool na = a.requires_grad(), nb = b.requires_grad();
    t.record([ai, bi, oi, scale, na, nb]() {
      if (oi->grad.empty()) return;
      double g = oi->grad[0] * scale;
      if (na && ai->grad.empty()) ai->grad.assign(ai->data.size(), 0.0);
      if (nb && bi->grad.empty()) bi->grad.assign(bi->data.size(), 0.0);
      for (size_t i = 0; i < ai->data.size(); ++i) {
        double d = ai->data[i] - bi->data[i];
        double s = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
        if (na) ai->grad[i] += g * s;
        if (nb) bi->grad[i] -= g * s;
      }
    });
  }
  return out;
}

Tensor l2_normalize(Tape& t, const Tensor& a, double eps) {
  const Shape& s = a.shape();
  int64_t per = int64_t(s.c) * s.h * s.w;
  Tensor out = Tensor::zeros(s);
  std::vector<double> norms(s.n);
  const double* pa = a.data().data();
  double* po = out.mutable_data().data();
  for (int n = 0; n < s.n; ++n) {
    double ss = 0.0;
    for (int64_t i = 0; i < per; ++i) {
      double v = pa[n * per + i];
      ss += v * v;
    }
    double nm = std::sqrt(ss);
    if (nm < eps) nm = eps;
    norms[n] = nm;
    for (int64_t i = 0; i < per; ++i) po[n * per + i] = pa[n * per + i] / nm;
  }
  if (track(t, {&a})) {
    out.set_requires_grad(true);
    auto ai = a.impl(), oi = out.impl();
    t.record([ai, oi, per, norms = std::move(norms)]() {
      if (oi->grad.empty()) return;
      if (ai->grad.empty()) ai->grad.assign(ai->data.size(), 0.0);
      int64_t N = static_cast<int64_t>(norms.size());
      for (int64_t n = 0; n < N; ++n) {
        const double* g = oi->grad.data() + n * per;
        const double* y = oi->data.data() + n * per;
        double dot = 0.0;
        for (int64_t i = 0; i < per; ++i) dot += g[i] * y[i];
        double inv = 1.0 / norms[n];
        double* ga = ai->grad.data() + n * per;
        for (int64_t i = 0; i < per; ++i) {
          ga[i] += (g[i] - y[i] * dot) * inv;
        }
      }
    });
  }
  return out;
}

double normal_cdf(double x) {
  // Phi(x) = erfc(-x / sqrt(2)) / 2; erfc keeps precision in the tails.
  return 0.5 * std::erfc(-x * 0.70710678118654752440);
}

namespace {
inline double normal_pdf(double x) {
  return 0.39894228040143267794 * std::exp(-0.5 * x * x);
}
}  // namespace

Tensor gaussian_likelihood(Tape& t, const Tensor& y, const Tensor& mu,
                           const Tensor& sigma, double sigma_floor,
                           double p_floor) {
  if (!(y.shape() == mu.shape()) || !(y.shape() == sigma.shape())) {
    throw DimensionError("gaussian_likelihood: shape mismatch");
  }
  const Shape& s = y.shape();
  Tensor out = Tensor::zeros(s);
  int64_t n = s.numel();
  const double* py = y.data().data();
  const double* pm = mu.data().data();
  const double* ps = sigma.data().data();
  double* po = out.mutable_data().data();
  for (int64_t i = 0; i < n; ++i) {
    double sg = ps[i] > sigma_floor ? ps[i] : sigma_floor;
    double v = py[i] - pm[i];
    double p = normal_cdf((v + 0.5) / sg) - normal_cdf((v - 0.5) / sg);
    po[i] = p > p_floor ? p : p_floor;
  }
  if (track(t, {&y, &mu, &sigma})) {
    out.set_requires_grad(true);
    auto yi = y.impl(), mi = mu.impl(), si = sigma.impl(), oi = out.impl();
    bool ny = y.requires_grad(), nm = mu.requires_grad(),
         ns = sigma.requires_grad();
    t.record([yi, mi, si, oi, sigma_floor, p_floor, ny, nm, ns]() {
      if (oi->grad.empty()) return;
      if (ny && yi->grad.empty()) yi->grad.assign(yi->data.size(), 0.0);
      if (nm && mi->grad.empty()) mi->grad.assign(mi->data.size(), 0.0);
      if (ns && si->grad.empty()) si->grad.assign(si->data.size(), 0.0);
      int64_t n = static_cast<int64_t>(oi->data.size());
      for (int64_t i = 0; i < n; ++i) {
        if (oi->data[i] <= p_floor) continue;  // clamped: zero grad
        double g = oi->grad[i];
        if (g == 0.0) continue;
        bool clamped_sigma = si->data[i] <= sigma_floor;
        double sg = clamped_sigma ? sigma_floor : si->data[i];
        double v = yi->data[i] - mi->data[i];
        double a = (v + 0.5) / sg;
        double b = (v - 0.5) / sg;
        double fa = normal_pdf(a), fb = normal_pdf(b);
        double dP_dv = (fa - fb) / sg;
        if (ny) yi->grad[i] += g * dP_dv;
        if (nm) mi->grad[i] -= g * dP_dv;
        if (ns && !clamped_sigma) {
          si->grad[i] += g * (b * fb - a * fa) / sg;
        }
      }
    });
  }
  return out;
}

Tensor round_tensor(const Tensor& a) {
  Tensor out = Tensor::zeros(a.shape());
  const double* pa = a.data().data();
  double* po = out.mutable_data().data();
  int64_t n = a.numel();
  for (int64_t i = 0; i < n; ++i) po[i] = std::round(pa[i]);
  return out;
}

}  // namespace onnpic
