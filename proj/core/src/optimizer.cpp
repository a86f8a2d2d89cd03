#include "onnpic/optimizer.hpp"

#include <cmath>

namespace onnpic {

AdamOptimizer::AdamOptimizer(
    std::vector<std::pair<std::string, Tensor>> params, double lr,
    double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2),
      eps_(eps) {
  m_.resize(params_.size());
  v_.resize(params_.size());
  for (size_t i = 0; i < params_.size(); ++i) {
    m_[i].assign(params_[i].second.numel(), 0.0);
    v_[i].assign(params_[i].second.numel(), 0.0);
  }
}

void AdamOptimizer::zero_grad() {
  for (auto& [name, p] : params_) p.zero_grad();
}

void AdamOptimizer::step() {
  ++t_;
  double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i].second;
    if (!p.has_grad()) continue;  // parameter untouched this step
    auto g = p.grad();
    auto w = p.mutable_data();
    auto& m = m_[i];
    auto& v = v_[i];
    for (size_t j = 0; j < m.size(); ++j) {
      m[j] = beta1_ * m[j] + (1.0 - beta1_) * g[j];
      v[j] = beta2_ * v[j] + (1.0 - beta2_) * g[j] * g[j];
      double mhat = m[j] / bc1;
      double vhat = v[j] / bc2;
      w[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

}  // namespace onnpic
