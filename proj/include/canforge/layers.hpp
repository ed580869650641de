#pragma once

#include <Eigen/Core>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "canforge/tensor.hpp"

namespace canforge {

template <typename T>
struct ParamRef {
  std::string name;
  Tensor<T>* value;
  Tensor<T>* grad;  // null for buffers
};

template <typename T>
using MatMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <typename T>
using ConstMatMap = Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

namespace detail {

/// Gather conv patches of `img` [C,H,W] into `col` [C*k*k, total_cols],
/// writing the column range [col_off, col_off + OH*OW). Out-of-image taps
/// (zero padding) become zeros.
template <typename T>
void im2col(const T* img, int C, int H, int W, int k, int stride, int pad,
            T* col, int64_t total_cols, int64_t col_off) {
  const int OH = (H + 2 * pad - k) / stride + 1;
  const int OW = (W + 2 * pad - k) / stride + 1;
  for (int c = 0; c < C; ++c) {
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj) {
        const int64_t row = (static_cast<int64_t>(c) * k + ki) * k + kj;
        T* dst = col + row * total_cols + col_off;
        const T* src_plane = img + static_cast<int64_t>(c) * H * W;
        for (int oh = 0; oh < OH; ++oh) {
          const int ih = oh * stride - pad + ki;
          if (ih < 0 || ih >= H) {
            for (int ow = 0; ow < OW; ++ow) *dst++ = T(0);
            continue;
          }
          const T* src_row = src_plane + static_cast<int64_t>(ih) * W;
          for (int ow = 0; ow < OW; ++ow) {
            const int iw = ow * stride - pad + kj;
            *dst++ = (iw < 0 || iw >= W) ? T(0) : src_row[iw];
          }
        }
      }
    }
  }
}

/// Scatter-add the inverse of im2col: accumulate `col` columns back into
/// `img` [C,H,W]. `img` must be pre-zeroed by the caller when appropriate.
template <typename T>
void col2im(const T* col, int C, int H, int W, int k, int stride, int pad,
            T* img, int64_t total_cols, int64_t col_off) {
  const int OH = (H + 2 * pad - k) / stride + 1;
  const int OW = (W + 2 * pad - k) / stride + 1;
  for (int c = 0; c < C; ++c) {
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj) {
        const int64_t row = (static_cast<int64_t>(c) * k + ki) * k + kj;
        const T* src = col + row * total_cols + col_off;
        T* dst_plane = img + static_cast<int64_t>(c) * H * W;
        for (int oh = 0; oh < OH; ++oh) {
          const int ih = oh * stride - pad + ki;
          if (ih < 0 || ih >= H) {
            src += OW;
            continue;
          }
          T* dst_row = dst_plane + static_cast<int64_t>(ih) * W;
          for (int ow = 0; ow < OW; ++ow) {
            const int iw = ow * stride - pad + kj;
            if (iw >= 0 && iw < W) dst_row[iw] += src[ow];
          }
          src += OW;
        }
      }
    }
  }
}

}  // namespace detail

/// Base class for differentiable layers. forward() caches whatever the
/// matching backward() needs; backward() returns the input gradient (empty
/// when not requested) and accumulates parameter gradients.
template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor<T> forward(const Tensor<T>& x, bool training) = 0;
  virtual Tensor<T> backward(const Tensor<T>& gy, bool want_input_grad, bool accum_param_grads) = 0;
  virtual std::string kind() const = 0;
  virtual std::vector<ParamRef<T>> params() { return {}; }
  virtual std::vector<ParamRef<T>> buffers() { return {}; }
  virtual std::vector<int64_t> output_shape(const std::vector<int64_t>& in) const = 0;
};

template <typename T>
class Conv2d final : public Layer<T> {
 public:
  Conv2d(int in_ch, int out_ch, int kernel, int stride, int pad)
      : in_ch_(in_ch), out_ch_(out_ch), k_(kernel), stride_(stride), pad_(pad),
        weight_({out_ch, in_ch, kernel, kernel}), wgrad_({out_ch, in_ch, kernel, kernel}) {}

  Tensor<T> forward(const Tensor<T>& x, bool) override {
    const int64_t N = x.dim(0);
    if (x.dim(1) != in_ch_) throw std::invalid_argument("Conv2d: channel mismatch " + x.shape_str());
    const int H = static_cast<int>(x.dim(2)), W = static_cast<int>(x.dim(3));
    const int OH = (H + 2 * pad_ - k_) / stride_ + 1;
    const int OW = (W + 2 * pad_ - k_) / stride_ + 1;
    x_ = x;
    const int64_t cols = N * OH * OW, ohw = static_cast<int64_t>(OH) * OW;
    const int64_t ckk = static_cast<int64_t>(in_ch_) * k_ * k_;
    col_.assign(static_cast<size_t>(ckk * cols), T(0));
    for (int64_t n = 0; n < N; ++n)
      detail::im2col(x.data() + n * in_ch_ * H * W, in_ch_, H, W, k_, stride_, pad_,
                     col_.data(), cols, n * ohw);

    Tensor<T> y({N, out_ch_, OH, OW});
    y2_.assign(static_cast<size_t>(out_ch_) * cols, T(0));
    ConstMatMap<T> Wm(weight_.data(), out_ch_, ckk);
    ConstMatMap<T> Cm(col_.data(), ckk, cols);
    MatMap<T>(y2_.data(), out_ch_, cols).noalias() = Wm * Cm;
    for (int64_t n = 0; n < N; ++n)
      for (int64_t oc = 0; oc < out_ch_; ++oc)
        std::copy_n(y2_.data() + oc * cols + n * ohw, ohw, y.data() + (n * out_ch_ + oc) * ohw);
    return y;
  }

  Tensor<T> backward(const Tensor<T>& gy, bool want_input_grad, bool accum_param_grads) override {
    const int64_t N = gy.dim(0);
    const int OH = static_cast<int>(gy.dim(2)), OW = static_cast<int>(gy.dim(3));
    const int H = static_cast<int>(x_.dim(2)), W = static_cast<int>(x_.dim(3));
    const int64_t cols = N * OH * OW, ohw = static_cast<int64_t>(OH) * OW;
    const int64_t ckk = static_cast<int64_t>(in_ch_) * k_ * k_;

    gy2_.assign(static_cast<size_t>(out_ch_) * cols, T(0));
    for (int64_t n = 0; n < N; ++n)
      for (int64_t oc = 0; oc < out_ch_; ++oc)
        std::copy_n(gy.data() + (n * out_ch_ + oc) * ohw, ohw, gy2_.data() + oc * cols + n * ohw);
    ConstMatMap<T> Gm(gy2_.data(), out_ch_, cols);

    if (accum_param_grads) {
      // col_ still holds the forward patches for the cached input.
      ConstMatMap<T> Cm(col_.data(), ckk, cols);
      MatMap<T>(wgrad_.data(), out_ch_, ckk).noalias() += Gm * Cm.transpose();
    }
    Tensor<T> dx;
    if (want_input_grad) {
      dcol_.assign(static_cast<size_t>(ckk * cols), T(0));
      ConstMatMap<T> Wm(weight_.data(), out_ch_, ckk);
      MatMap<T>(dcol_.data(), ckk, cols).noalias() = Wm.transpose() * Gm;
      dx = Tensor<T>({N, in_ch_, H, W});
      for (int64_t n = 0; n < N; ++n)
        detail::col2im(dcol_.data(), in_ch_, H, W, k_, stride_, pad_,
                       dx.data() + n * in_ch_ * H * W, cols, n * ohw);
    }
    return dx;
  }

  std::string kind() const override { return "Conv2d"; }
  std::vector<ParamRef<T>> params() override { return {{"weight", &weight_, &wgrad_}}; }
  std::vector<int64_t> output_shape(const std::vector<int64_t>& in) const override {
    const int64_t OH = (in[2] + 2 * pad_ - k_) / stride_ + 1;
    const int64_t OW = (in[3] + 2 * pad_ - k_) / stride_ + 1;
    return {in[0], out_ch_, OH, OW};
  }

 private:
  int64_t in_ch_, out_ch_;
  int k_, stride_, pad_;
  Tensor<T> weight_, wgrad_;
  Tensor<T> x_;
  std::vector<T> col_, dcol_, y2_, gy2_;
};

template <typename T>
class ConvTranspose2d final : public Layer<T> {
 public:
  ConvTranspose2d(int in_ch, int out_ch, int kernel, int stride, int pad)
      : in_ch_(in_ch), out_ch_(out_ch), k_(kernel), stride_(stride), pad_(pad),
        weight_({in_ch, out_ch, kernel, kernel}), wgrad_({in_ch, out_ch, kernel, kernel}) {}

  Tensor<T> forward(const Tensor<T>& x, bool) override {
    const int64_t N = x.dim(0);
    if (x.dim(1) != in_ch_) throw std::invalid_argument("ConvTranspose2d: channel mismatch " + x.shape_str());
    const int IH = static_cast<int>(x.dim(2)), IW = static_cast<int>(x.dim(3));
    const int OH = (IH - 1) * stride_ - 2 * pad_ + k_;
    const int OW = (IW - 1) * stride_ - 2 * pad_ + k_;
    x_ = x;
    const int64_t cols = N * IH * IW, ihw = static_cast<int64_t>(IH) * IW;
    const int64_t okk = static_cast<int64_t>(out_ch_) * k_ * k_;

    // xmat[ic, n*IHW + p] = x[n, ic, p]
    xmat_.assign(static_cast<size_t>(in_ch_) * cols, T(0));
    for (int64_t n = 0; n < N; ++n)
      for (int64_t ic = 0; ic < in_ch_; ++ic)
        std::copy_n(x.data() + (n * in_ch_ + ic) * ihw, ihw, xmat_.data() + ic * cols + n * ihw);

    tmp_.assign(static_cast<size_t>(okk * cols), T(0));
    ConstMatMap<T> Wm(weight_.data(), in_ch_, okk);
    ConstMatMap<T> Xm(xmat_.data(), in_ch_, cols);
    MatMap<T>(tmp_.data(), okk, cols).noalias() = Wm.transpose() * Xm;

    Tensor<T> y({N, out_ch_, OH, OW});
    for (int64_t n = 0; n < N; ++n)
      detail::col2im(tmp_.data(), static_cast<int>(out_ch_), OH, OW, k_, stride_, pad_,
                     y.data() + n * out_ch_ * OH * OW, cols, n * ihw);
    return y;
  }

  Tensor<T> backward(const Tensor<T>& gy, bool want_input_grad, bool accum_param_grads) override {
    const int64_t N = gy.dim(0);
    const int OH = static_cast<int>(gy.dim(2)), OW = static_cast<int>(gy.dim(3));
    const int IH = static_cast<int>(x_.dim(2)), IW = static_cast<int>(x_.dim(3));
    const int64_t cols = N * IH * IW, ihw = static_cast<int64_t>(IH) * IW;
    const int64_t okk = static_cast<int64_t>(out_ch_) * k_ * k_;

    gcol_.assign(static_cast<size_t>(okk * cols), T(0));
    for (int64_t n = 0; n < N; ++n)
      detail::im2col(gy.data() + n * out_ch_ * OH * OW, static_cast<int>(out_ch_), OH, OW,
                     k_, stride_, pad_, gcol_.data(), cols, n * ihw);
    ConstMatMap<T> Gc(gcol_.data(), okk, cols);

    if (accum_param_grads) {
      ConstMatMap<T> Xm(xmat_.data(), in_ch_, cols);
      MatMap<T>(wgrad_.data(), in_ch_, okk).noalias() += Xm * Gc.transpose();
    }
    Tensor<T> dx;
    if (want_input_grad) {
      dxmat_.assign(static_cast<size_t>(in_ch_) * cols, T(0));
      ConstMatMap<T> Wm(weight_.data(), in_ch_, okk);
      MatMap<T>(dxmat_.data(), in_ch_, cols).noalias() = Wm * Gc;
      dx = Tensor<T>({N, in_ch_, IH, IW});
      for (int64_t n = 0; n < N; ++n)
        for (int64_t ic = 0; ic < in_ch_; ++ic)
          std::copy_n(dxmat_.data() + ic * cols + n * ihw, ihw, dx.data() + (n * in_ch_ + ic) * ihw);
    }
    return dx;
  }

  std::string kind() const override { return "ConvTranspose2d"; }
  std::vector<ParamRef<T>> params() override { return {{"weight", &weight_, &wgrad_}}; }
  std::vector<int64_t> output_shape(const std::vector<int64_t>& in) const override {
    const int64_t OH = (in[2] - 1) * stride_ - 2 * pad_ + k_;
    const int64_t OW = (in[3] - 1) * stride_ - 2 * pad_ + k_;
    return {in[0], out_ch_, OH, OW};
  }

 private:
  int64_t in_ch_, out_ch_;
  int k_, stride_, pad_;
  Tensor<T> weight_, wgrad_;
  Tensor<T> x_;
  std::vector<T> xmat_, tmp_, gcol_, dxmat_;
};

template <typename T>
class BatchNorm2d final : public Layer<T> {
 public:
  explicit BatchNorm2d(int channels, double eps = 1e-5, double momentum = 0.1)
      : ch_(channels), eps_(eps), momentum_(momentum),
        gamma_(Tensor<T>::full({channels}, T(1))), beta_({channels}),
        ggrad_({channels}), bgrad_({channels}),
        running_mean_({channels}), running_var_(Tensor<T>::full({channels}, T(1))) {}

  Tensor<T> forward(const Tensor<T>& x, bool training) override {
    const int64_t N = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
    if (C != ch_) throw std::invalid_argument("BatchNorm2d: channel mismatch");
    Tensor<T> y(x.shape());
    trained_forward_ = training;
    if (training) {
      const int64_t M = N * HW;
      xhat_ = Tensor<T>(x.shape());
      invstd_.assign(static_cast<size_t>(C), T(0));
      for (int64_t c = 0; c < C; ++c) {
        double sum = 0;
        for (int64_t n = 0; n < N; ++n) {
          const T* p = x.data() + (n * C + c) * HW;
          for (int64_t i = 0; i < HW; ++i) sum += static_cast<double>(p[i]);
        }
        const double mean = sum / static_cast<double>(M);
        double sq = 0;
        for (int64_t n = 0; n < N; ++n) {
          const T* p = x.data() + (n * C + c) * HW;
          for (int64_t i = 0; i < HW; ++i) {
            const double d = static_cast<double>(p[i]) - mean;
            sq += d * d;
          }
        }
        const double var = sq / static_cast<double>(M);
        const double invstd = 1.0 / std::sqrt(var + eps_);
        invstd_[static_cast<size_t>(c)] = static_cast<T>(invstd);
        const T m = static_cast<T>(mean), is = static_cast<T>(invstd);
        const T g = gamma_[c], b = beta_[c];
        for (int64_t n = 0; n < N; ++n) {
          const T* p = x.data() + (n * C + c) * HW;
          T* xh = xhat_.data() + (n * C + c) * HW;
          T* py = y.data() + (n * C + c) * HW;
          for (int64_t i = 0; i < HW; ++i) {
            xh[i] = (p[i] - m) * is;
            py[i] = g * xh[i] + b;
          }
        }
        // Unbiased variance feeds the running estimate, matching the usual
        // train/eval convention.
        const double var_unbiased = M > 1 ? var * static_cast<double>(M) / static_cast<double>(M - 1) : var;
        running_mean_[c] = static_cast<T>((1.0 - momentum_) * static_cast<double>(running_mean_[c]) + momentum_ * mean);
        running_var_[c] = static_cast<T>((1.0 - momentum_) * static_cast<double>(running_var_[c]) + momentum_ * var_unbiased);
      }
    } else {
      for (int64_t c = 0; c < C; ++c) {
        const T is = static_cast<T>(1.0 / std::sqrt(static_cast<double>(running_var_[c]) + eps_));
        const T m = running_mean_[c], g = gamma_[c], b = beta_[c];
        for (int64_t n = 0; n < N; ++n) {
          const T* p = x.data() + (n * C + c) * HW;
          T* py = y.data() + (n * C + c) * HW;
          for (int64_t i = 0; i < HW; ++i) py[i] = g * (p[i] - m) * is + b;
        }
      }
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& gy, bool want_input_grad, bool accum_param_grads) override {
    if (!trained_forward_) throw std::logic_error("BatchNorm2d: backward requires a training-mode forward");
    const int64_t N = gy.dim(0), C = gy.dim(1), HW = gy.dim(2) * gy.dim(3);
    const int64_t M = N * HW;
    Tensor<T> dx;
    if (want_input_grad) dx = Tensor<T>(gy.shape());
    for (int64_t c = 0; c < C; ++c) {
      double sum_gy = 0, sum_gy_xhat = 0;
      for (int64_t n = 0; n < N; ++n) {
        const T* g = gy.data() + (n * C + c) * HW;
        const T* xh = xhat_.data() + (n * C + c) * HW;
        for (int64_t i = 0; i < HW; ++i) {
          sum_gy += static_cast<double>(g[i]);
          sum_gy_xhat += static_cast<double>(g[i]) * static_cast<double>(xh[i]);
        }
      }
      if (accum_param_grads) {
        ggrad_[c] += static_cast<T>(sum_gy_xhat);
        bgrad_[c] += static_cast<T>(sum_gy);
      }
      if (want_input_grad) {
        const T scale = gamma_[c] * invstd_[static_cast<size_t>(c)] / static_cast<T>(M);
        const T mg = static_cast<T>(sum_gy), mgx = static_cast<T>(sum_gy_xhat);
        for (int64_t n = 0; n < N; ++n) {
          const T* g = gy.data() + (n * C + c) * HW;
          const T* xh = xhat_.data() + (n * C + c) * HW;
          T* d = dx.data() + (n * C + c) * HW;
          for (int64_t i = 0; i < HW; ++i)
            d[i] = scale * (static_cast<T>(M) * g[i] - mg - xh[i] * mgx);
        }
      }
    }
    return dx;
  }

  std::string kind() const override { return "BatchNorm2d"; }
  std::vector<ParamRef<T>> params() override {
    return {{"weight", &gamma_, &ggrad_}, {"bias", &beta_, &bgrad_}};
  }
  std::vector<ParamRef<T>> buffers() override {
    return {{"running_mean", &running_mean_, nullptr}, {"running_var", &running_var_, nullptr}};
  }
  std::vector<int64_t> output_shape(const std::vector<int64_t>& in) const override { return in; }

 private:
  int64_t ch_;
  double eps_, momentum_;
  Tensor<T> gamma_, beta_, ggrad_, bgrad_;
  Tensor<T> running_mean_, running_var_;
  Tensor<T> xhat_;
  std::vector<T> invstd_;
  bool trained_forward_ = false;
};

template <typename T>
class ReLU final : public Layer<T> {
 public:
  Tensor<T> forward(const Tensor<T>& x, bool) override {
    y_ = Tensor<T>(x.shape());
    for (int64_t i = 0; i < x.size(); ++i) y_[i] = x[i] > T(0) ? x[i] : T(0);
    return y_;
  }
  Tensor<T> backward(const Tensor<T>& gy, bool want_input_grad, bool) override {
    if (!want_input_grad) return {};
    Tensor<T> dx(gy.shape());
    for (int64_t i = 0; i < gy.size(); ++i) dx[i] = y_[i] > T(0) ? gy[i] : T(0);
    return dx;
  }
  std::string kind() const override { return "ReLU"; }
  std::vector<int64_t> output_shape(const std::vector<int64_t>& in) const override { return in; }

 private:
  Tensor<T> y_;
};

template <typename T>
class LeakyReLU final : public Layer<T> {
 public:
  explicit LeakyReLU(T slope = T(0.2)) : slope_(slope) {}
  Tensor<T> forward(const Tensor<T>& x, bool) override {
    x_ = x;
    Tensor<T> y(x.shape());
    for (int64_t i = 0; i < x.size(); ++i) y[i] = x[i] > T(0) ? x[i] : slope_ * x[i];
    return y;
  }
  Tensor<T> backward(const Tensor<T>& gy, bool want_input_grad, bool) override {
    if (!want_input_grad) return {};
    Tensor<T> dx(gy.shape());
    for (int64_t i = 0; i < gy.size(); ++i) dx[i] = x_[i] > T(0) ? gy[i] : slope_ * gy[i];
    return dx;
  }
  std::string kind() const override { return "LeakyReLU"; }
  std::vector<int64_t> output_shape(const std::vector<int64_t>& in) const override { return in; }

 private:
  T slope_;
  Tensor<T> x_;
};

template <typename T>
class Tanh final : public Layer<T> {
 public:
  Tensor<T> forward(const Tensor<T>& x, bool) override {
    y_ = Tensor<T>(x.shape());
    for (int64_t i = 0; i < x.size(); ++i) y_[i] = std::tanh(x[i]);
    return y_;
  }
  Tensor<T> backward(const Tensor<T>& gy, bool want_input_grad, bool) override {
    if (!want_input_grad) return {};
    Tensor<T> dx(gy.shape());
    for (int64_t i = 0; i < gy.size(); ++i) dx[i] = gy[i] * (T(1) - y_[i] * y_[i]);
    return dx;
  }
  std::string kind() const override { return "Tanh"; }
  std::vector<int64_t> output_shape(const std::vector<int64_t>& in) const override { return in; }

 private:
  Tensor<T> y_;
};

template <typename T>
class Sigmoid final : public Layer<T> {
 public:
  Tensor<T> forward(const Tensor<T>& x, bool) override {
    y_ = Tensor<T>(x.shape());
    for (int64_t i = 0; i < x.size(); ++i) y_[i] = T(1) / (T(1) + std::exp(-x[i]));
    return y_;
  }
  Tensor<T> backward(const Tensor<T>& gy, bool want_input_grad, bool) override {
    if (!want_input_grad) return {};
    Tensor<T> dx(gy.shape());
    for (int64_t i = 0; i < gy.size(); ++i) dx[i] = gy[i] * y_[i] * (T(1) - y_[i]);
    return dx;
  }
  std::string kind() const override { return "Sigmoid"; }
  std::vector<int64_t> output_shape(const std::vector<int64_t>& in) const override { return in; }

 private:
  Tensor<T> y_;
};

/// Row-wise softmax over the last dimension of an [N, K] input.
template <typename T>
class Softmax final : public Layer<T> {
 public:
  Tensor<T> forward(const Tensor<T>& x, bool) override {
    const int64_t N = x.dim(0), K = x.dim(1);
    y_ = Tensor<T>(x.shape());
    for (int64_t n = 0; n < N; ++n) {
      const T* row = x.data() + n * K;
      T* out = y_.data() + n * K;
      T mx = row[0];
      for (int64_t k = 1; k < K; ++k) mx = std::max(mx, row[k]);
      double denom = 0;
      for (int64_t k = 0; k < K; ++k) {
        out[k] = std::exp(row[k] - mx);
        denom += static_cast<double>(out[k]);
      }
      for (int64_t k = 0; k < K; ++k) out[k] = static_cast<T>(static_cast<double>(out[k]) / denom);
    }
    return y_;
  }
  Tensor<T> backward(const Tensor<T>& gy, bool want_input_grad, bool) override {
    if (!want_input_grad) return {};
    const int64_t N = gy.dim(0), K = gy.dim(1);
    Tensor<T> dx(gy.shape());
    for (int64_t n = 0; n < N; ++n) {
      const T* g = gy.data() + n * K;
      const T* y = y_.data() + n * K;
      double dot = 0;
      for (int64_t k = 0; k < K; ++k) dot += static_cast<double>(g[k]) * static_cast<double>(y[k]);
      for (int64_t k = 0; k < K; ++k) dx[n * K + k] = y[k] * (g[k] - static_cast<T>(dot));
    }
    return dx;
  }
  std::string kind() const override { return "Softmax"; }
  std::vector<int64_t> output_shape(const std::vector<int64_t>& in) const override { return in; }

 private:
  Tensor<T> y_;
};

template <typename T>
class Linear final : public Layer<T> {
 public:
  Linear(int in_features, int out_features)
      : in_(in_features), out_(out_features),
        weight_({out_features, in_features}), bias_({out_features}),
        wgrad_({out_features, in_features}), bgrad_({out_features}) {}

  Tensor<T> forward(const Tensor<T>& x, bool) override {
    const int64_t N = x.dim(0);
    if (x.dim(1) != in_) throw std::invalid_argument("Linear: feature mismatch " + x.shape_str());
    x_ = x;
    Tensor<T> y({N, out_});
    ConstMatMap<T> X(x.data(), N, in_);
    ConstMatMap<T> W(weight_.data(), out_, in_);
    MatMap<T> Y(y.data(), N, out_);
    Y.noalias() = X * W.transpose();
    for (int64_t n = 0; n < N; ++n)
      for (int64_t o = 0; o < out_; ++o) y[n * out_ + o] += bias_[o];
    return y;
  }

  Tensor<T> backward(const Tensor<T>& gy, bool want_input_grad, bool accum_param_grads) override {
    const int64_t N = gy.dim(0);
    ConstMatMap<T> G(gy.data(), N, out_);
    if (accum_param_grads) {
      ConstMatMap<T> X(x_.data(), N, in_);
      MatMap<T>(wgrad_.data(), out_, in_).noalias() += G.transpose() * X;
      for (int64_t n = 0; n < N; ++n)
        for (int64_t o = 0; o < out_; ++o) bgrad_[o] += gy[n * out_ + o];
    }
    Tensor<T> dx;
    if (want_input_grad) {
      dx = Tensor<T>({N, in_});
      ConstMatMap<T> W(weight_.data(), out_, in_);
      MatMap<T>(dx.data(), N, in_).noalias() = G * W;
    }
    return dx;
  }

  std::string kind() const override { return "Linear"; }
  std::vector<ParamRef<T>> params() override {
    return {{"weight", &weight_, &wgrad_}, {"bias", &bias_, &bgrad_}};
  }
  std::vector<int64_t> output_shape(const std::vector<int64_t>& in) const override { return {in[0], out_}; }

 private:
  int64_t in_, out_;
  Tensor<T> weight_, bias_, wgrad_, bgrad_;
  Tensor<T> x_;
};

template <typename T>
class Flatten final : public Layer<T> {
 public:
  Tensor<T> forward(const Tensor<T>& x, bool) override {
    in_shape_ = x.shape();
    return x.reshaped({x.dim(0), x.size() / x.dim(0)});
  }
  Tensor<T> backward(const Tensor<T>& gy, bool want_input_grad, bool) override {
    if (!want_input_grad) return {};
    return gy.reshaped(in_shape_);
  }
  std::string kind() const override { return "Flatten"; }
  std::vector<int64_t> output_shape(const std::vector<int64_t>& in) const override {
    int64_t f = 1;
    for (size_t i = 1; i < in.size(); ++i) f *= in[i];
    return {in[0], f};
  }

 private:
  std::vector<int64_t> in_shape_;
};

/// Learned label-embedding table. Not a Layer: inputs are integer labels and
/// the models wire its output into their tensors explicitly.
template <typename T>
class Embedding {
 public:
  Embedding(int num_embeddings, int dim)
      : num_(num_embeddings), dim_(dim), table_({num_embeddings, dim}), grad_({num_embeddings, dim}) {}

  Tensor<T> forward(const std::vector<int>& labels) const {
    Tensor<T> out({static_cast<int64_t>(labels.size()), dim_});
    for (size_t n = 0; n < labels.size(); ++n) {
      const int lab = labels[n];
      if (lab < 0 || lab >= num_) throw std::out_of_range("Embedding: label " + std::to_string(lab) + " out of range [0," + std::to_string(num_) + ")");
      std::copy_n(table_.data() + static_cast<int64_t>(lab) * dim_, dim_, out.data() + static_cast<int64_t>(n) * dim_);
    }
    return out;
  }

  void backward(const std::vector<int>& labels, const Tensor<T>& gy) {
    for (size_t n = 0; n < labels.size(); ++n) {
      T* g = grad_.data() + static_cast<int64_t>(labels[n]) * dim_;
      const T* src = gy.data() + static_cast<int64_t>(n) * dim_;
      for (int64_t d = 0; d < dim_; ++d) g[d] += src[d];
    }
  }

  int64_t num() const { return num_; }
  int64_t dim() const { return dim_; }
  std::vector<ParamRef<T>> params() { return {{"weight", &table_, &grad_}}; }

 private:
  int64_t num_, dim_;
  Tensor<T> table_, grad_;
};

template <typename T>
class Sequential {
 public:
  Sequential() = default;

  template <typename L, typename... Args>
  L& emplace(Args&&... args) {
    auto layer = std::make_unique<L>(std::forward<Args>(args)...);
    L& ref = *layer;
    layers_.push_back(std::move(layer));
    return ref;
  }

  Tensor<T> forward(const Tensor<T>& x, bool training) {
    Tensor<T> cur = x;
    for (auto& l : layers_) cur = l->forward(cur, training);
    return cur;
  }

  Tensor<T> backward(const Tensor<T>& gy, bool want_input_grad, bool accum_param_grads) {
    Tensor<T> cur = gy;
    for (size_t i = layers_.size(); i-- > 0;) {
      const bool need = want_input_grad || i > 0;
      cur = layers_[i]->backward(cur, need, accum_param_grads);
    }
    return cur;
  }

  size_t size() const { return layers_.size(); }
  Layer<T>& layer(size_t i) { return *layers_[i]; }
  const Layer<T>& layer(size_t i) const { return *layers_[i]; }

  std::vector<ParamRef<T>> params() {
    std::vector<ParamRef<T>> out;
    for (auto& l : layers_)
      for (auto& p : l->params()) out.push_back(p);
    return out;
  }

 private:
  std::vector<std::unique_ptr<Layer<T>>> layers_;
};

}  // namespace canforge
