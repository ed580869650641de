#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

// End-to-end gradient verification: analytic backprop of each variant's
// discriminator and generator objectives on reduced networks (K=4, 8x8
// images) against central finite differences in double precision.

#include <random>

#include "canforge/losses.hpp"
#include "canforge/models.hpp"

#include "oracles.hpp"

using namespace canforge;

namespace {

Tensor<double> randn_d(std::vector<int64_t> shape, uint64_t seed, double stddev = 1.0) {
  Tensor<double> t(std::move(shape));
  std::mt19937_64 eng(seed);
  std::normal_distribution<double> d(0.0, stddev);
  for (int64_t i = 0; i < t.size(); ++i) t[i] = d(eng);
  return t;
}

std::vector<int> random_labels(int n, int k, uint64_t seed) {
  std::mt19937_64 eng(seed);
  std::uniform_int_distribution<int> d(0, k - 1);
  std::vector<int> out(static_cast<size_t>(n));
  for (auto& l : out) l = d(eng);
  return out;
}

int64_t total_params(std::vector<ParamRef<double>> params) {
  int64_t n = 0;
  for (auto& p : params) n += p.value->size();
  return n;
}

/// Discriminator objective as implemented by the trainer's D step: real
/// batch + fixed fake batch, style term on real images only.
void check_d_loss(Variant variant, uint64_t seed) {
  const ModelSpec spec = oracle::tiny_spec(variant);
  Discriminator<double> disc(spec);
  disc.init(seed);
  const bool styled = spec.has_style_head();
  const bool conditional = variant == Variant::kCcan;
  const int n = 5;

  const Tensor<double> real = randn_d({n, 3, 8, 8}, seed + 1, 0.5);
  const Tensor<double> fake = randn_d({n, 3, 8, 8}, seed + 2, 0.5);
  const std::vector<int> real_labels = random_labels(n, spec.num_styles, seed + 3);
  const std::vector<int> fake_labels = random_labels(n, spec.num_styles, seed + 4);

  auto loss = [&]() {
    DiscOutput<double> ro =
        disc.forward(real, conditional ? real_labels : std::vector<int>{}, true, styled);
    DiscOutput<double> fo =
        disc.forward(fake, conditional ? fake_labels : std::vector<int>{}, true, false);
    double v = bce_real(ro.real_prob) + bce_fake(fo.real_prob);
    if (styled) v += d_style_loss(ro.style_probs, real_labels);
    return v;
  };

  auto params = disc.named_params();
  CHECK(total_params(params) <= 50000);
  for (auto& p : params) p.grad->zero();
  {
    DiscOutput<double> ro =
        disc.forward(real, conditional ? real_labels : std::vector<int>{}, true, styled);
    Tensor<double> g_real = bce_real_grad(ro.real_prob);
    Tensor<double> g_style;
    if (styled) g_style = d_style_loss_grad(ro.style_probs, real_labels);
    disc.backward(g_real, g_style, false, true);

    DiscOutput<double> fo =
        disc.forward(fake, conditional ? fake_labels : std::vector<int>{}, true, false);
    Tensor<double> g_fake = bce_fake_grad(fo.real_prob);
    disc.backward(g_fake, {}, false, true);
  }

  const auto top = oracle::largest_grad_entries(params, 100);
  const auto res = oracle::finite_difference_check(params, loss, top, 1e-4);
  INFO("variant " << to_string(variant) << " d-loss max rel err " << res.max_rel_err
                  << " (analytic " << res.analytic_at_max << ", numeric " << res.numeric_at_max << ")");
  CHECK(res.max_rel_err < 1e-3);
}

/// Generator objective: fakes through a frozen discriminator, adversarial
/// (+ ambiguity) terms, gradients w.r.t. generator parameters (and the ccan
/// label embedding).
void check_g_loss(Variant variant, uint64_t seed) {
  const ModelSpec spec = oracle::tiny_spec(variant);
  Generator<double> gen(spec);
  Discriminator<double> disc(spec);
  gen.init(seed);
  disc.init(seed + 100);
  const bool styled = spec.has_style_head();
  const bool conditional = variant == Variant::kCcan;
  const int n = 5;

  const Tensor<double> z = randn_d({n, spec.latent_dim}, seed + 5);
  const std::vector<int> labels = random_labels(n, spec.num_styles, seed + 6);

  auto loss = [&]() {
    Tensor<double> fake = gen.forward(z, conditional ? labels : std::vector<int>{}, true);
    DiscOutput<double> out =
        disc.forward(fake, conditional ? labels : std::vector<int>{}, true, styled);
    double v = g_adversarial_loss(out.real_prob);
    if (styled) v += style_ambiguity_loss(out.style_probs);
    return v;
  };

  auto params = gen.named_params();
  CHECK(total_params(params) <= 50000);
  for (auto& p : params) p.grad->zero();
  {
    Tensor<double> fake = gen.forward(z, conditional ? labels : std::vector<int>{}, true);
    DiscOutput<double> out =
        disc.forward(fake, conditional ? labels : std::vector<int>{}, true, styled);
    Tensor<double> g_real = g_adversarial_loss_grad(out.real_prob);
    Tensor<double> g_style;
    if (styled) g_style = style_ambiguity_loss_grad(out.style_probs);
    Tensor<double> g_img = disc.backward(g_real, g_style, true, false);
    gen.backward(g_img);
  }

  const auto top = oracle::largest_grad_entries(params, 100);
  const auto res = oracle::finite_difference_check(params, loss, top, 1e-4);
  INFO("variant " << to_string(variant) << " g-loss max rel err " << res.max_rel_err
                  << " (analytic " << res.analytic_at_max << ", numeric " << res.numeric_at_max << ")");
  CHECK(res.max_rel_err < 1e-3);
}

}  // namespace

TEST_CASE("dcgan losses: analytic gradients match finite differences") {
  check_d_loss(Variant::kDcgan, 1001);
  check_g_loss(Variant::kDcgan, 1002);
}

TEST_CASE("can losses: analytic gradients match finite differences") {
  check_d_loss(Variant::kCan, 2001);
  check_g_loss(Variant::kCan, 2002);
}

TEST_CASE("ccan losses: analytic gradients match finite differences") {
  check_d_loss(Variant::kCcan, 3001);
  check_g_loss(Variant::kCcan, 3002);
}
