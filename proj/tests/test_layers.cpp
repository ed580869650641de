#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "canforge/layers.hpp"

#include "oracles.hpp"

using namespace canforge;

namespace {

Tensor<double> randn(std::vector<int64_t> shape, uint64_t seed, double stddev = 1.0) {
  Tensor<double> t(std::move(shape));
  std::mt19937_64 eng(seed);
  std::normal_distribution<double> d(0.0, stddev);
  for (int64_t i = 0; i < t.size(); ++i) t[i] = d(eng);
  return t;
}

/// Direct 7-loop convolution, the reference for the GEMM path.
Tensor<double> conv2d_naive(const Tensor<double>& x, const Tensor<double>& w, int stride, int pad) {
  const int64_t N = x.dim(0), IC = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int64_t OC = w.dim(0), K = w.dim(2);
  const int64_t OH = (H + 2 * pad - K) / stride + 1;
  const int64_t OW = (W + 2 * pad - K) / stride + 1;
  Tensor<double> y({N, OC, OH, OW});
  for (int64_t n = 0; n < N; ++n)
    for (int64_t oc = 0; oc < OC; ++oc)
      for (int64_t oh = 0; oh < OH; ++oh)
        for (int64_t ow = 0; ow < OW; ++ow) {
          double acc = 0;
          for (int64_t ic = 0; ic < IC; ++ic)
            for (int64_t ki = 0; ki < K; ++ki)
              for (int64_t kj = 0; kj < K; ++kj) {
                const int64_t ih = oh * stride - pad + ki;
                const int64_t iw = ow * stride - pad + kj;
                if (ih < 0 || ih >= H || iw < 0 || iw >= W) continue;
                acc += x.at(n, ic, ih, iw) * w[((oc * IC + ic) * K + ki) * K + kj];
              }
          y.at(n, oc, oh, ow) = acc;
        }
  return y;
}

/// Direct transposed convolution: scatter each input position through the
/// kernel.
Tensor<double> convT2d_naive(const Tensor<double>& x, const Tensor<double>& w, int stride, int pad) {
  const int64_t N = x.dim(0), IC = x.dim(1), IH = x.dim(2), IW = x.dim(3);
  const int64_t OC = w.dim(1), K = w.dim(2);
  const int64_t OH = (IH - 1) * stride - 2 * pad + K;
  const int64_t OW = (IW - 1) * stride - 2 * pad + K;
  Tensor<double> y({N, OC, OH, OW});
  for (int64_t n = 0; n < N; ++n)
    for (int64_t ic = 0; ic < IC; ++ic)
      for (int64_t ih = 0; ih < IH; ++ih)
        for (int64_t iw = 0; iw < IW; ++iw)
          for (int64_t oc = 0; oc < OC; ++oc)
            for (int64_t ki = 0; ki < K; ++ki)
              for (int64_t kj = 0; kj < K; ++kj) {
                const int64_t oh = ih * stride - pad + ki;
                const int64_t ow = iw * stride - pad + kj;
                if (oh < 0 || oh >= OH || ow < 0 || ow >= OW) continue;
                y.at(n, oc, oh, ow) += x.at(n, ic, ih, iw) * w[((ic * OC + oc) * K + ki) * K + kj];
              }
  return y;
}

/// Checks dL/dinput and dL/dparams of a layer against central differences,
/// with L a fixed random projection of the output.
void check_layer_gradients(Layer<double>& layer, const Tensor<double>& x,
                           uint64_t seed = 0xC0FFEE, double tol = 1e-7) {
  Tensor<double> y = layer.forward(x, true);
  const Tensor<double> w = randn(y.shape(), seed);
  auto loss = [&]() {
    Tensor<double> out = layer.forward(x, true);
    double acc = 0;
    for (int64_t i = 0; i < out.size(); ++i) acc += out[i] * w[i];
    return acc;
  };

  for (auto& p : layer.params()) p.grad->zero();
  y = layer.forward(x, true);
  Tensor<double> dx = layer.backward(w, true, true);

  const double h = 1e-5;
  // input gradient
  Tensor<double> xm = x;
  std::mt19937_64 pick(seed ^ 0xabc);
  auto some_indices = [&](int64_t size) {
    std::vector<int64_t> idx;
    std::uniform_int_distribution<int64_t> d(0, size - 1);
    for (int i = 0; i < 25; ++i) idx.push_back(d(pick));
    return idx;
  };
  for (int64_t j : some_indices(x.size())) {
    const double saved = xm[j];
    xm[j] = saved + h;
    Tensor<double> up = layer.forward(xm, true);
    double lu = 0;
    for (int64_t i = 0; i < up.size(); ++i) lu += up[i] * w[i];
    xm[j] = saved - h;
    Tensor<double> dn = layer.forward(xm, true);
    double ld = 0;
    for (int64_t i = 0; i < dn.size(); ++i) ld += dn[i] * w[i];
    xm[j] = saved;
    const double num = (lu - ld) / (2 * h);
    CHECK(dx[j] == doctest::Approx(num).epsilon(tol * 100).scale(1.0));
  }
  // parameter gradients (re-run backward to restore caches on x)
  layer.forward(x, true);
  for (auto& p : layer.params()) p.grad->zero();
  layer.backward(w, true, true);
  for (auto& p : layer.params()) {
    for (int64_t j : some_indices(p.value->size())) {
      const double saved = (*p.value)[j];
      (*p.value)[j] = saved + h;
      const double lu = loss();
      (*p.value)[j] = saved - h;
      const double ld = loss();
      (*p.value)[j] = saved;
      const double num = (lu - ld) / (2 * h);
      CHECK((*p.grad)[j] == doctest::Approx(num).epsilon(tol * 100).scale(1.0));
    }
  }
}

void fill_params(Layer<double>& layer, uint64_t seed) {
  std::mt19937_64 eng(seed);
  std::normal_distribution<double> d(0.0, 0.3);
  for (auto& p : layer.params())
    for (int64_t i = 0; i < p.value->size(); ++i) (*p.value)[i] = d(eng);
}

}  // namespace

TEST_CASE("conv2d matches the direct convolution") {
  Conv2d<double> conv(3, 5, 4, 2, 1);
  fill_params(conv, 1);
  const Tensor<double> x = randn({2, 3, 8, 8}, 2);
  const Tensor<double> y = conv.forward(x, true);
  const Tensor<double>& w = *conv.params()[0].value;
  const Tensor<double> ref = conv2d_naive(x, w, 2, 1);
  REQUIRE(y.shape() == ref.shape());
  for (int64_t i = 0; i < y.size(); ++i) CHECK(y[i] == doctest::Approx(ref[i]).epsilon(1e-10));

  // stride-1 no-pad variant (the real/fake head geometry)
  Conv2d<double> head(5, 1, 4, 1, 0);
  fill_params(head, 3);
  const Tensor<double> t = randn({2, 5, 4, 4}, 4);
  const Tensor<double> hy = head.forward(t, true);
  const Tensor<double> href = conv2d_naive(t, *head.params()[0].value, 1, 0);
  CHECK(hy.dim(2) == 1);
  for (int64_t i = 0; i < hy.size(); ++i) CHECK(hy[i] == doctest::Approx(href[i]).epsilon(1e-10));
}

TEST_CASE("conv_transpose2d matches the direct scatter") {
  ConvTranspose2d<double> deconv(4, 3, 4, 2, 1);
  fill_params(deconv, 5);
  const Tensor<double> x = randn({2, 4, 4, 4}, 6);
  const Tensor<double> y = deconv.forward(x, true);
  const Tensor<double> ref = convT2d_naive(x, *deconv.params()[0].value, 2, 1);
  REQUIRE(y.shape() == ref.shape());
  CHECK(y.dim(2) == 8);
  for (int64_t i = 0; i < y.size(); ++i) CHECK(y[i] == doctest::Approx(ref[i]).epsilon(1e-10));

  // The 1x1 -> 4x4 projection layer (stride 1, no pad).
  ConvTranspose2d<double> proj(7, 6, 4, 1, 0);
  fill_params(proj, 7);
  const Tensor<double> z = randn({3, 7, 1, 1}, 8);
  const Tensor<double> py = proj.forward(z, true);
  const Tensor<double> pref = convT2d_naive(z, *proj.params()[0].value, 1, 0);
  CHECK(py.dim(2) == 4);
  for (int64_t i = 0; i < py.size(); ++i) CHECK(py[i] == doctest::Approx(pref[i]).epsilon(1e-10));
}

TEST_CASE("layer gradients match finite differences") {
  SUBCASE("conv2d") {
    Conv2d<double> l(3, 4, 4, 2, 1);
    fill_params(l, 11);
    check_layer_gradients(l, randn({2, 3, 8, 8}, 12));
  }
  SUBCASE("conv_transpose2d") {
    ConvTranspose2d<double> l(4, 3, 4, 2, 1);
    fill_params(l, 13);
    check_layer_gradients(l, randn({2, 4, 4, 4}, 14));
  }
  SUBCASE("batchnorm") {
    BatchNorm2d<double> l(5);
    std::mt19937_64 eng(15);
    std::normal_distribution<double> d(0.3, 0.8);
    for (auto& p : l.params())
      if (p.name == "weight")
        for (int64_t i = 0; i < p.value->size(); ++i) (*p.value)[i] = d(eng);
    check_layer_gradients(l, randn({3, 5, 4, 4}, 16));
  }
  SUBCASE("linear") {
    Linear<double> l(10, 7);
    fill_params(l, 17);
    check_layer_gradients(l, randn({4, 10}, 18));
  }
  SUBCASE("softmax") {
    Softmax<double> l;
    check_layer_gradients(l, randn({4, 6}, 19));
  }
  SUBCASE("activations") {
    ReLU<double> r;
    check_layer_gradients(r, randn({2, 3, 4, 4}, 20));
    LeakyReLU<double> lr(0.2);
    check_layer_gradients(lr, randn({2, 3, 4, 4}, 21));
    Tanh<double> t;
    check_layer_gradients(t, randn({2, 3, 4, 4}, 22));
    Sigmoid<double> s;
    check_layer_gradients(s, randn({2, 3, 4, 4}, 23));
  }
}

TEST_CASE("batchnorm normalizes batch statistics and tracks running stats") {
  BatchNorm2d<double> bn(2);
  const Tensor<double> x = randn({8, 2, 4, 4}, 30, 2.5);
  const Tensor<double> y = bn.forward(x, true);
  for (int64_t c = 0; c < 2; ++c) {
    double mean = 0, var = 0;
    for (int64_t n = 0; n < 8; ++n)
      for (int64_t i = 0; i < 16; ++i) mean += y[(n * 2 + c) * 16 + i];
    mean /= 8 * 16;
    for (int64_t n = 0; n < 8; ++n)
      for (int64_t i = 0; i < 16; ++i) {
        const double d = y[(n * 2 + c) * 16 + i] - mean;
        var += d * d;
      }
    var /= 8 * 16;
    CHECK(mean == doctest::Approx(0.0).epsilon(1e-10).scale(1.0));
    CHECK(var == doctest::Approx(1.0).epsilon(1e-3));
  }

  // Eval mode uses the running estimates: with momentum 0.1 after one batch,
  // the output is not batch-normalized but is finite and deterministic.
  const Tensor<double> ye1 = bn.forward(x, false);
  const Tensor<double> ye2 = bn.forward(x, false);
  for (int64_t i = 0; i < ye1.size(); ++i) CHECK(ye1[i] == ye2[i]);
}

TEST_CASE("sigmoid and tanh outputs stay in range") {
  Sigmoid<double> s;
  Tanh<double> t;
  const Tensor<double> x = randn({1, 1, 8, 8}, 31, 4.0);
  const Tensor<double> ys = s.forward(x, true);
  const Tensor<double> yt = t.forward(x, true);
  for (int64_t i = 0; i < x.size(); ++i) {
    CHECK(ys[i] > 0.0);
    CHECK(ys[i] < 1.0);
    CHECK(yt[i] > -1.0);
    CHECK(yt[i] < 1.0);
  }
}

TEST_CASE("softmax rows lie on the simplex") {
  Softmax<double> sm;
  const Tensor<double> y = sm.forward(randn({7, 24}, 32, 3.0), true);
  for (int64_t n = 0; n < 7; ++n) {
    double sum = 0;
    for (int64_t k = 0; k < 24; ++k) {
      CHECK(y[n * 24 + k] >= 0.0);
      sum += y[n * 24 + k];
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
}
