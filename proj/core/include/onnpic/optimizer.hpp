#pragma once

#include <utility>
#include <vector>

#include "onnpic/tensor.hpp"

namespace onnpic {

// Adam with the field-default moment constants. State is kept per parameter
// in registration order; steps are single-threaded and deterministic.
class AdamOptimizer {
 public:
  explicit AdamOptimizer(std::vector<std::pair<std::string, Tensor>> params,
                         double lr = 1e-4, double beta1 = 0.9,
                         double beta2 = 0.999, double eps = 1e-8);

  void zero_grad();
  void step();
  int64_t steps_taken() const { return t_; }
  double learning_rate() const { return lr_; }

 private:
  std::vector<std::pair<std::string, Tensor>> params_;
  std::vector<std::vector<double>> m_, v_;
  double lr_, beta1_, beta2_, eps_;
  int64_t t_ = 0;
};

}  // namespace onnpic
