#include "onnpic/tensor.hpp"

#include <cmath>
#include <sstream>

namespace onnpic {

std::string to_string(const Shape& s) {
  std::ostringstream os;
  os << "(" << s.n << "," << s.c << "," << s.h << "," << s.w << ")";
  return os.str();
}

static std::shared_ptr<TensorImpl> make_impl(const Shape& s, bool rg) {
  if (s.n <= 0 || s.c <= 0 || s.h <= 0 || s.w <= 0) {
    throw ArgumentError("tensor shape must be positive, got " + to_string(s));
  }
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = s;
  impl->requires_grad = rg;
  return impl;
}

Tensor Tensor::zeros(const Shape& s, bool requires_grad) {
  Tensor t;
  t.impl_ = make_impl(s, requires_grad);
  t.impl_->data.assign(s.numel(), 0.0);
  return t;
}

Tensor Tensor::full(const Shape& s, double v, bool requires_grad) {
  Tensor t;
  t.impl_ = make_impl(s, requires_grad);
  t.impl_->data.assign(s.numel(), v);
  return t;
}

Tensor Tensor::from_vector(const Shape& s, std::vector<double> v,
                           bool requires_grad) {
  if (static_cast<int64_t>(v.size()) != s.numel()) {
    throw DimensionError("data length does not match shape " + to_string(s));
  }
  Tensor t;
  t.impl_ = make_impl(s, requires_grad);
  t.impl_->data = std::move(v);
  return t;
}

Tensor Tensor::scalar(double v) { return full({1, 1, 1, 1}, v); }

Tensor Tensor::uniform(const Shape& s, double lo, double hi, Rng& rng,
                       bool requires_grad) {
  Tensor t = zeros(s, requires_grad);
  for (double& x : t.impl_->data) x = rng.uniform(lo, hi);
  return t;
}

const Shape& Tensor::shape() const {
  if (!impl_) throw ArgumentError("use of undefined tensor");
  return impl_->shape;
}

std::span<const double> Tensor::data() const {
  if (!impl_) throw ArgumentError("use of undefined tensor");
  return impl_->data;
}

std::span<double> Tensor::mutable_data() {
  if (!impl_) throw ArgumentError("use of undefined tensor");
  return impl_->data;
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool rg) {
  if (!impl_) throw ArgumentError("use of undefined tensor");
  impl_->requires_grad = rg;
  return *this;
}

bool Tensor::has_grad() const { return impl_ && !impl_->grad.empty(); }

std::span<const double> Tensor::grad() const {
  if (!has_grad()) throw ArgumentError("tensor has no gradient buffer");
  return impl_->grad;
}

std::span<double> Tensor::grad_accum() {
  if (!impl_) throw ArgumentError("use of undefined tensor");
  if (impl_->grad.empty()) impl_->grad.assign(impl_->shape.numel(), 0.0);
  return impl_->grad;
}

void Tensor::zero_grad() {
  if (impl_ && !impl_->grad.empty()) {
    std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
  }
}

double Tensor::item() const {
  if (numel() != 1) {
    throw ArgumentError("item() requires a scalar tensor, shape is " +
                        to_string(shape()));
  }
  return impl_->data[0];
}

double Tensor::at(int in, int ic, int iy, int ix) const {
  return data()[shape().index(in, ic, iy, ix)];
}

void Tape::backward(const Tensor& loss) {
  if (!recording_) {
    throw ArgumentError("backward on a non-recording tape");
  }
  if (loss.numel() != 1) {
    throw ArgumentError("backward requires a scalar loss, shape is " +
                        to_string(loss.shape()));
  }
  loss.impl()->grad.assign(1, 1.0);
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
}

void check_finite(std::span<const double> v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) {
      throw ComputationError(std::string("non-finite value in ") + what);
    }
  }
}

}  // namespace onnpic
