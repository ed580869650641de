#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "canforge/tensor.hpp"

namespace canforge {

/// Probabilities are clamped to [kLossEps, 1 - kLossEps] before any log, so
/// every loss below is finite for all inputs including exact 0/1.
inline constexpr double kLossEps = 1e-7;

namespace detail {

template <typename T>
inline T clamp_prob(T p) {
  const T lo = static_cast<T>(kLossEps), hi = static_cast<T>(1.0 - kLossEps);
  return p < lo ? lo : (p > hi ? hi : p);
}

template <typename T>
inline bool clamped(T p) {
  return p < static_cast<T>(kLossEps) || p > static_cast<T>(1.0 - kLossEps);
}

}  // namespace detail

/// -mean(log p) over real-image probabilities.
template <typename T>
T bce_real(const Tensor<T>& probs) {
  double acc = 0;
  for (int64_t i = 0; i < probs.size(); ++i) acc -= std::log(static_cast<double>(detail::clamp_prob(probs[i])));
  return static_cast<T>(acc / static_cast<double>(probs.size()));
}

template <typename T>
Tensor<T> bce_real_grad(const Tensor<T>& probs) {
  Tensor<T> g(probs.shape());
  const T inv_n = T(1) / static_cast<T>(probs.size());
  for (int64_t i = 0; i < probs.size(); ++i)
    g[i] = detail::clamped(probs[i]) ? T(0) : -inv_n / probs[i];
  return g;
}

/// -mean(log(1 - p)) over fake-image probabilities.
template <typename T>
T bce_fake(const Tensor<T>& probs) {
  double acc = 0;
  for (int64_t i = 0; i < probs.size(); ++i)
    acc -= std::log(1.0 - static_cast<double>(detail::clamp_prob(probs[i])));
  return static_cast<T>(acc / static_cast<double>(probs.size()));
}

template <typename T>
Tensor<T> bce_fake_grad(const Tensor<T>& probs) {
  Tensor<T> g(probs.shape());
  const T inv_n = T(1) / static_cast<T>(probs.size());
  for (int64_t i = 0; i < probs.size(); ++i)
    g[i] = detail::clamped(probs[i]) ? T(0) : inv_n / (T(1) - probs[i]);
  return g;
}

/// Non-saturating generator objective: -mean(log p) on fake samples.
template <typename T>
T g_adversarial_loss(const Tensor<T>& fake_probs) {
  return bce_real(fake_probs);
}

template <typename T>
Tensor<T> g_adversarial_loss_grad(const Tensor<T>& fake_probs) {
  return bce_real_grad(fake_probs);
}

/// The literal minimax generator term, mean(log(1 - p)); kept for
/// completeness, the trainer uses the non-saturating form.
template <typename T>
T g_adversarial_loss_saturating(const Tensor<T>& fake_probs) {
  return -bce_fake(fake_probs);
}

/// -mean(log p[label]) over real images; the discriminator's style term.
template <typename T>
T d_style_loss(const Tensor<T>& style_probs, const std::vector<int>& labels) {
  const int64_t n = style_probs.dim(0), k = style_probs.dim(1);
  if (static_cast<int64_t>(labels.size()) != n)
    throw std::invalid_argument("d_style_loss: label count mismatch");
  double acc = 0;
  for (int64_t i = 0; i < n; ++i) {
    const int lab = labels[static_cast<size_t>(i)];
    if (lab < 0 || lab >= k) throw std::out_of_range("d_style_loss: label " + std::to_string(lab) + " out of range");
    acc -= std::log(static_cast<double>(detail::clamp_prob(style_probs[i * k + lab])));
  }
  return static_cast<T>(acc / static_cast<double>(n));
}

template <typename T>
Tensor<T> d_style_loss_grad(const Tensor<T>& style_probs, const std::vector<int>& labels) {
  const int64_t n = style_probs.dim(0), k = style_probs.dim(1);
  Tensor<T> g(style_probs.shape());
  const T inv_n = T(1) / static_cast<T>(n);
  for (int64_t i = 0; i < n; ++i) {
    const int lab = labels[static_cast<size_t>(i)];
    const T p = style_probs[i * k + lab];
    if (!detail::clamped(p)) g[i * k + lab] = -inv_n / p;
  }
  return g;
}

/// Fake-image cross-entropy against the uniform target:
/// mean_n sum_k -[(1/K) log p_k + (1 - 1/K) log(1 - p_k)].
/// Minimized exactly at the uniform row, where it equals
/// ln K + (K-1) ln(K/(K-1)).
template <typename T>
T style_ambiguity_loss(const Tensor<T>& style_probs) {
  const int64_t n = style_probs.dim(0), k = style_probs.dim(1);
  const double w = 1.0 / static_cast<double>(k);
  double acc = 0;
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t j = 0; j < k; ++j) {
      const double p = static_cast<double>(detail::clamp_prob(style_probs[i * k + j]));
      acc -= w * std::log(p) + (1.0 - w) * std::log(1.0 - p);
    }
  }
  return static_cast<T>(acc / static_cast<double>(n));
}

template <typename T>
Tensor<T> style_ambiguity_loss_grad(const Tensor<T>& style_probs) {
  const int64_t n = style_probs.dim(0), k = style_probs.dim(1);
  const T w = T(1) / static_cast<T>(k);
  const T inv_n = T(1) / static_cast<T>(n);
  Tensor<T> g(style_probs.shape());
  for (int64_t i = 0; i < n * k; ++i) {
    const T p = style_probs[i];
    if (detail::clamped(p)) continue;
    g[i] = inv_n * (-w / p + (T(1) - w) / (T(1) - p));
  }
  return g;
}

/// Closed-form minimum of the ambiguity term, attained at the uniform row.
inline double style_ambiguity_minimum(int k) {
  const double kd = static_cast<double>(k);
  return std::log(kd) + (kd - 1.0) * std::log(kd / (kd - 1.0));
}

/// Generator objective for can/ccan: adversarial + ambiguity, unit weights.
template <typename T>
T can_generator_loss(const Tensor<T>& fake_real_probs, const Tensor<T>& fake_style_probs) {
  return g_adversarial_loss(fake_real_probs) + style_ambiguity_loss(fake_style_probs);
}

/// Discriminator objective for can/ccan: bce_real + bce_fake + style term,
/// the style term over real images only.
template <typename T>
T can_discriminator_loss(const Tensor<T>& real_probs, const Tensor<T>& fake_probs,
                         const Tensor<T>& real_style_probs, const std::vector<int>& labels) {
  return bce_real(real_probs) + bce_fake(fake_probs) + d_style_loss(real_style_probs, labels);
}

}  // namespace canforge
