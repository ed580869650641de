#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "canforge/layers.hpp"
#include "canforge/tensor.hpp"

namespace canforge {

/// Adam with bias correction over a fixed parameter list. First/second
/// moment tensors mirror the parameter order, so state serializes alongside
/// the parameters.
template <typename T>
class Adam {
 public:
  Adam(std::vector<ParamRef<T>> params, double lr, double beta1, double beta2, double eps = 1e-8)
      : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    if (lr <= 0) throw std::invalid_argument("Adam: lr must be positive");
    if (beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1)
      throw std::invalid_argument("Adam: betas must lie in [0,1)");
    for (auto& p : params_) {
      m_.emplace_back(p.value->shape());
      v_.emplace_back(p.value->shape());
    }
  }

  void step() {
    ++t_;
    const T c1 = static_cast<T>(1.0 - std::pow(beta1_, t_));
    const T c2 = static_cast<T>(1.0 - std::pow(beta2_, t_));
    const T b1 = static_cast<T>(beta1_), b2 = static_cast<T>(beta2_);
    const T lr = static_cast<T>(lr_), eps = static_cast<T>(eps_);
    for (size_t i = 0; i < params_.size(); ++i) {
      Tensor<T>& theta = *params_[i].value;
      const Tensor<T>& g = *params_[i].grad;
      Tensor<T>& m = m_[i];
      Tensor<T>& v = v_[i];
      for (int64_t j = 0; j < theta.size(); ++j) {
        m[j] = b1 * m[j] + (T(1) - b1) * g[j];
        v[j] = b2 * v[j] + (T(1) - b2) * g[j] * g[j];
        const T mhat = m[j] / c1;
        const T vhat = v[j] / c2;
        theta[j] -= lr * mhat / (std::sqrt(vhat) + eps);
      }
    }
  }

  void zero_grads() {
    for (auto& p : params_) p.grad->zero();
  }

  int64_t step_count() const { return t_; }
  void set_step_count(int64_t t) { t_ = t; }

  /// Moment tensors named after their parameters, for checkpointing.
  std::vector<ParamRef<T>> named_state() {
    std::vector<ParamRef<T>> out;
    for (size_t i = 0; i < params_.size(); ++i) {
      out.push_back({"m." + params_[i].name, &m_[i], nullptr});
      out.push_back({"v." + params_[i].name, &v_[i], nullptr});
    }
    return out;
  }

  double lr() const { return lr_; }

 private:
  std::vector<ParamRef<T>> params_;
  std::vector<Tensor<T>> m_, v_;
  double lr_, beta1_, beta2_, eps_;
  int64_t t_ = 0;
};

}  // namespace canforge
