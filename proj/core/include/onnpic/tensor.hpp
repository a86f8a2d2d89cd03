#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "onnpic/errors.hpp"
#include "onnpic/rng.hpp"

namespace onnpic {

// Dense rank-4 NCHW shape. Degenerate dims are expressed as 1, so vectors,
// matrices and scalars all live in the same type: a scalar is (1,1,1,1), an
// M x K matrix is (1,1,M,K), a batch of embeddings is (N,d,1,1).
struct Shape {
  int n = 0, c = 0, h = 0, w = 0;

  int64_t numel() const { return int64_t(n) * c * h * w; }
  bool operator==(const Shape&) const = default;
  int64_t index(int in, int ic, int iy, int ix) const {
    return ((int64_t(in) * c + ic) * h + iy) * w + ix;
  }
  int dim(int i) const { return i == 0 ? n : i == 1 ? c : i == 2 ? h : w; }
};

std::string to_string(const Shape& s);

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until the first backward accumulation
  bool requires_grad = false;
};

// Value-semantic handle to shared tensor storage. Tensors are written once by
// the op that creates them; afterwards only the grad buffer mutates. Parameter
// tensors are additionally updated in place by the optimizer between steps.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(const Shape& s, bool requires_grad = false);
  static Tensor full(const Shape& s, double v, bool requires_grad = false);
  static Tensor from_vector(const Shape& s, std::vector<double> v,
                            bool requires_grad = false);
  static Tensor scalar(double v);
  static Tensor uniform(const Shape& s, double lo, double hi, Rng& rng,
                        bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  int64_t numel() const { return shape().numel(); }

  std::span<const double> data() const;
  // In-place access: used for parameter init/updates and by tests. Op outputs
  // must never be mutated after creation.
  std::span<double> mutable_data();

  bool requires_grad() const;
  Tensor& set_requires_grad(bool rg);

  bool has_grad() const;
  std::span<const double> grad() const;
  // Grad buffer for accumulation, allocated (zeroed) on first use.
  std::span<double> grad_accum();
  void zero_grad();

  double item() const;  // value of a (1,1,1,1) tensor
  double at(int in, int ic, int iy, int ix) const;

  const std::shared_ptr<TensorImpl>& impl() const { return impl_; }
  bool same_storage(const Tensor& o) const { return impl_ == o.impl_; }

 private:
  std::shared_ptr<TensorImpl> impl_;
};

// Dynamic tape: ops append a backward rule as they execute; backward() replays
// the rules in reverse. Rebuilt for every forward pass. A non-recording tape
// turns the whole engine into plain eager evaluation for inference.
class Tape {
 public:
  explicit Tape(bool recording = true) : recording_(recording) {}

  bool recording() const { return recording_; }
  size_t node_count() const { return nodes_.size(); }

  void record(std::function<void()> backward_step) {
    nodes_.push_back(std::move(backward_step));
  }

  // Seeds d(loss)/d(loss) = 1 and replays all rules in reverse order.
  // Gradients accumulate additively across fan-out.
  void backward(const Tensor& loss);

  void clear() { nodes_.clear(); }

 private:
  bool recording_;
  std::vector<std::function<void()>> nodes_;
};

void check_finite(std::span<const double> v, const char* what);

}  // namespace onnpic
