#pragma once

#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "canforge/layers.hpp"
#include "canforge/model_spec.hpp"
#include "canforge/rng.hpp"
#include "canforge/tensor.hpp"

namespace canforge {

struct CensusRow {
  std::string name;          // e.g. "ConvTranspose2d-1"
  std::vector<int64_t> shape;  // output shape with -1 batch placeholder
  int64_t param_count = 0;
};

struct ParameterCensus {
  std::vector<CensusRow> rows;
  int64_t total = 0;
};

namespace detail {

template <typename T>
inline int64_t layer_param_count(Layer<T>& l) {
  int64_t n = 0;
  for (auto& p : l.params()) n += p.value->size();
  return n;
}

/// Census rows for a sequential chain, numbering layers from `index`.
template <typename T>
inline void census_sequential(Sequential<T>& net, std::vector<int64_t> shape, int& index,
                              ParameterCensus& out) {
  for (size_t i = 0; i < net.size(); ++i) {
    auto& l = net.layer(i);
    shape = l.output_shape(shape);
    const int64_t count = layer_param_count(l);
    out.rows.push_back({l.kind() + "-" + std::to_string(index++), shape, count});
    out.total += count;
  }
}

template <typename T>
inline void init_sequential(Sequential<T>& net, std::mt19937_64& eng) {
  for (size_t i = 0; i < net.size(); ++i) {
    auto& l = net.layer(i);
    const std::string kind = l.kind();
    for (auto& p : l.params()) {
      if (kind == "BatchNorm2d") {
        if (p.name == "weight")
          rng::fill_normal(*p.value, eng, 1.0, 0.02);
        else
          p.value->zero();
      } else if (p.name == "bias") {
        p.value->zero();
      } else {
        rng::fill_normal(*p.value, eng, 0.0, 0.02);
      }
    }
    for (auto& b : l.buffers()) {
      if (b.name == "running_var")
        b.value->fill(T(1));
      else
        b.value->zero();
    }
  }
}

inline int upsample_stages(int image_size) {
  int stages = 0;
  for (int s = 4; s < image_size; s *= 2) ++stages;
  return stages;  // deconvs after the 4x4 projection / stride-2 convs before it
}

template <typename T>
inline void prefix_params(std::vector<ParamRef<T>>& out, const std::string& prefix,
                          std::vector<ParamRef<T>> items) {
  for (auto& p : items) {
    p.name = prefix + p.name;
    out.push_back(std::move(p));
  }
}

}  // namespace detail

template <typename T>
struct DiscOutput {
  Tensor<T> real_prob;    // [N], strictly inside (0,1)
  Tensor<T> style_probs;  // [N, K] rows on the simplex; empty when unused
};

/// Generator: latent vector (optionally concatenated with a label embedding)
/// projected to 4x4 spatial resolution, then stride-2 transposed convolutions
/// up to image_size, tanh output in (-1,1).
template <typename T>
class Generator {
 public:
  explicit Generator(const ModelSpec& spec) : spec_(spec) {
    spec.validate();
    if (spec.variant == Variant::kCcan)
      embed_.emplace(spec.num_styles, spec.g_label_embed_dim);
    const int stages = detail::upsample_stages(spec.image_size);
    const int top = spec.base_channels << (stages - 1);
    in_dim_ = spec.latent_dim + spec.g_label_embed_dim;

    net_.template emplace<ConvTranspose2d<T>>(in_dim_, top, 4, 1, 0);
    net_.template emplace<BatchNorm2d<T>>(top);
    net_.template emplace<ReLU<T>>();
    int ch = top;
    for (int s = 1; s < stages; ++s) {
      net_.template emplace<ConvTranspose2d<T>>(ch, ch / 2, 4, 2, 1);
      net_.template emplace<BatchNorm2d<T>>(ch / 2);
      net_.template emplace<ReLU<T>>();
      ch /= 2;
    }
    net_.template emplace<ConvTranspose2d<T>>(ch, 3, 4, 2, 1);
    net_.template emplace<Tanh<T>>();
  }

  /// z: [N, latent_dim]; labels required (and only allowed) for ccan.
  Tensor<T> forward(const Tensor<T>& z, const std::vector<int>& labels, bool training) {
    const int64_t n = z.dim(0);
    if (z.dim(1) != spec_.latent_dim)
      throw std::invalid_argument("Generator: latent size mismatch " + z.shape_str());
    Tensor<T> x;
    if (embed_) {
      if (static_cast<int64_t>(labels.size()) != n)
        throw std::invalid_argument("Generator: ccan requires one style label per sample");
      labels_ = labels;
      const Tensor<T> e = embed_->forward(labels);
      x = Tensor<T>({n, in_dim_, 1, 1});
      for (int64_t i = 0; i < n; ++i) {
        std::copy_n(z.data() + i * spec_.latent_dim, spec_.latent_dim, x.data() + i * in_dim_);
        std::copy_n(e.data() + i * spec_.g_label_embed_dim, spec_.g_label_embed_dim,
                    x.data() + i * in_dim_ + spec_.latent_dim);
      }
    } else {
      if (!labels.empty())
        throw std::invalid_argument("Generator: style labels are only valid for ccan");
      x = z.reshaped({n, in_dim_, 1, 1});
    }
    return net_.forward(x, training);
  }

  /// Accumulates parameter gradients (and the label-embedding gradient for
  /// ccan) from an output gradient.
  void backward(const Tensor<T>& gy) {
    Tensor<T> gx = net_.backward(gy, embed_.has_value(), true);
    if (embed_) {
      const int64_t n = gx.dim(0);
      Tensor<T> ge({n, spec_.g_label_embed_dim});
      for (int64_t i = 0; i < n; ++i)
        std::copy_n(gx.data() + i * in_dim_ + spec_.latent_dim, spec_.g_label_embed_dim,
                    ge.data() + i * spec_.g_label_embed_dim);
      embed_->backward(labels_, ge);
    }
  }

  /// The learned 100-dim label embedding (ccan); what gets concatenated
  /// after z.
  std::vector<T> embed_label(int style) const {
    if (!embed_) throw std::logic_error("embed_label: generator has no label embedding (not ccan)");
    const Tensor<T> e = embed_->forward({style});
    return std::vector<T>(e.data(), e.data() + e.size());
  }

  std::vector<ParamRef<T>> named_params() {
    std::vector<ParamRef<T>> out;
    if (embed_) detail::prefix_params(out, "embed.", embed_->params());
    for (size_t i = 0; i < net_.size(); ++i)
      detail::prefix_params(out, "net." + std::to_string(i) + ".", net_.layer(i).params());
    return out;
  }

  std::vector<ParamRef<T>> named_buffers() {
    std::vector<ParamRef<T>> out;
    for (size_t i = 0; i < net_.size(); ++i)
      detail::prefix_params(out, "net." + std::to_string(i) + ".", net_.layer(i).buffers());
    return out;
  }

  ParameterCensus census() {
    ParameterCensus out;
    int index = 1;
    if (embed_) {
      out.rows.push_back({"Embedding-" + std::to_string(index++),
                          {-1, spec_.g_label_embed_dim}, embed_->num() * embed_->dim()});
      out.total += embed_->num() * embed_->dim();
    }
    detail::census_sequential(net_, {-1, in_dim_, 1, 1}, index, out);
    return out;
  }

  void init(uint64_t seed) {
    std::mt19937_64 eng(seed);
    if (embed_)
      for (auto& p : embed_->params()) rng::fill_normal(*p.value, eng, 0.0, 1.0);
    detail::init_sequential(net_, eng);
  }

  void zero_grads() {
    for (auto& p : named_params()) p.grad->zero();
  }

  const ModelSpec& spec() const { return spec_; }

 private:
  ModelSpec spec_;
  int64_t in_dim_;
  std::optional<Embedding<T>> embed_;
  Sequential<T> net_;
  std::vector<int> labels_;
};

/// Discriminator: shared convolutional trunk ending at 4x4 features, a
/// sigmoid real/fake head, and for can/ccan a softmax style head. ccan
/// concatenates broadcast label-embedding planes onto the input image.
template <typename T>
class Discriminator {
 public:
  explicit Discriminator(const ModelSpec& spec) : spec_(spec) {
    spec.validate();
    if (spec.variant == Variant::kCcan)
      embed_.emplace(spec.num_styles, spec.d_label_embed_dim);
    const int stages = detail::upsample_stages(spec.image_size);
    in_ch_ = 3 + spec.d_label_embed_dim;

    trunk_.template emplace<Conv2d<T>>(in_ch_, spec.base_channels, 4, 2, 1);
    trunk_.template emplace<LeakyReLU<T>>(T(0.2));
    int ch = spec.base_channels;
    for (int s = 1; s < stages; ++s) {
      trunk_.template emplace<Conv2d<T>>(ch, ch * 2, 4, 2, 1);
      trunk_.template emplace<BatchNorm2d<T>>(ch * 2);
      trunk_.template emplace<LeakyReLU<T>>(T(0.2));
      ch *= 2;
    }
    trunk_out_ch_ = ch;

    real_head_.template emplace<Conv2d<T>>(ch, 1, 4, 1, 0);
    real_head_.template emplace<Sigmoid<T>>();

    if (spec.has_style_head()) {
      style_head_.template emplace<Flatten<T>>();
      style_head_.template emplace<Linear<T>>(ch * 16, spec.style_hidden1);
      style_head_.template emplace<LeakyReLU<T>>(T(0.2));
      style_head_.template emplace<Linear<T>>(spec.style_hidden1, spec.style_hidden2);
      style_head_.template emplace<LeakyReLU<T>>(T(0.2));
      style_head_.template emplace<Linear<T>>(spec.style_hidden2, spec.num_styles);
      style_head_.template emplace<Softmax<T>>();
    }
  }

  DiscOutput<T> forward(const Tensor<T>& img, const std::vector<int>& labels, bool training,
                        bool want_style) {
    const int64_t n = img.dim(0);
    if (img.dim(1) != 3) throw std::invalid_argument("Discriminator: expected 3-channel input");
    Tensor<T> x;
    if (embed_) {
      if (static_cast<int64_t>(labels.size()) != n)
        throw std::invalid_argument("Discriminator: ccan requires one style label per sample");
      labels_ = labels;
      x = embed_input(img, labels);
    } else {
      if (!labels.empty() && spec_.variant == Variant::kDcgan)
        labels_.clear();
      x = img;
    }
    const Tensor<T> t = trunk_.forward(x, training);
    DiscOutput<T> out;
    Tensor<T> r = real_head_.forward(t, training);
    out.real_prob = r.reshaped({n});
    style_active_ = want_style && spec_.has_style_head();
    if (style_active_) out.style_probs = style_head_.forward(t, training);
    return out;
  }

  /// g_real: [N] gradient on real_prob; g_style: [N,K] gradient on
  /// style_probs (empty when the style head was not evaluated). Returns the
  /// gradient on the input image when requested.
  Tensor<T> backward(const Tensor<T>& g_real, const Tensor<T>& g_style, bool want_input_grad,
                     bool accum_param_grads) {
    const int64_t n = g_real.dim(0);
    Tensor<T> gt = real_head_.backward(g_real.reshaped({n, 1, 1, 1}), true, accum_param_grads);
    if (!g_style.empty()) {
      if (!style_active_) throw std::logic_error("Discriminator: style gradient without style forward");
      Tensor<T> gs = style_head_.backward(g_style, true, accum_param_grads);
      for (int64_t i = 0; i < gt.size(); ++i) gt[i] += gs[i];
    }
    const bool need_input = want_input_grad || (embed_.has_value() && accum_param_grads);
    Tensor<T> gx = trunk_.backward(gt, need_input, accum_param_grads);
    if (!embed_) return want_input_grad ? gx : Tensor<T>{};

    const int64_t s = spec_.image_size, hw = s * s;
    if (accum_param_grads) {
      Tensor<T> ge({n, spec_.d_label_embed_dim});
      for (int64_t i = 0; i < n; ++i)
        for (int64_t c = 0; c < spec_.d_label_embed_dim; ++c) {
          double acc = 0;
          const T* p = gx.data() + ((i * in_ch_) + 3 + c) * hw;
          for (int64_t j = 0; j < hw; ++j) acc += static_cast<double>(p[j]);
          ge[i * spec_.d_label_embed_dim + c] = static_cast<T>(acc);
        }
      embed_->backward(labels_, ge);
    }
    if (!want_input_grad) return {};
    Tensor<T> gimg({n, 3, s, s});
    for (int64_t i = 0; i < n; ++i)
      std::copy_n(gx.data() + i * in_ch_ * hw, 3 * hw, gimg.data() + i * 3 * hw);
    return gimg;
  }

  /// Broadcast label-embedding planes concatenated after the RGB channels.
  Tensor<T> embed_input(const Tensor<T>& img, const std::vector<int>& labels) const {
    const int64_t n = img.dim(0), s = img.dim(2), hw = s * s;
    const Tensor<T> e = embed_->forward(labels);
    Tensor<T> x({n, in_ch_, s, s});
    for (int64_t i = 0; i < n; ++i) {
      std::copy_n(img.data() + i * 3 * hw, 3 * hw, x.data() + i * in_ch_ * hw);
      for (int64_t c = 0; c < spec_.d_label_embed_dim; ++c) {
        T* plane = x.data() + (i * in_ch_ + 3 + c) * hw;
        std::fill_n(plane, hw, e[i * spec_.d_label_embed_dim + c]);
      }
    }
    return x;
  }

  /// The broadcast embedding planes for one style: [d_label_embed_dim, S, S].
  Tensor<T> embed_label_planes(int style) const {
    if (!embed_) throw std::logic_error("embed_label_planes: discriminator has no label embedding (not ccan)");
    const Tensor<T> e = embed_->forward({style});
    const int64_t s = spec_.image_size;
    Tensor<T> planes({spec_.d_label_embed_dim, s, s});
    for (int64_t c = 0; c < spec_.d_label_embed_dim; ++c)
      std::fill_n(planes.data() + c * s * s, s * s, e[c]);
    return planes;
  }

  std::vector<ParamRef<T>> named_params() {
    std::vector<ParamRef<T>> out;
    if (embed_) detail::prefix_params(out, "embed.", embed_->params());
    for (size_t i = 0; i < trunk_.size(); ++i)
      detail::prefix_params(out, "trunk." + std::to_string(i) + ".", trunk_.layer(i).params());
    for (size_t i = 0; i < real_head_.size(); ++i)
      detail::prefix_params(out, "real_head." + std::to_string(i) + ".", real_head_.layer(i).params());
    for (size_t i = 0; i < style_head_.size(); ++i)
      detail::prefix_params(out, "style_head." + std::to_string(i) + ".", style_head_.layer(i).params());
    return out;
  }

  std::vector<ParamRef<T>> named_buffers() {
    std::vector<ParamRef<T>> out;
    for (size_t i = 0; i < trunk_.size(); ++i)
      detail::prefix_params(out, "trunk." + std::to_string(i) + ".", trunk_.layer(i).buffers());
    return out;
  }

  ParameterCensus census() {
    ParameterCensus out;
    int index = 1;
    if (embed_) {
      out.rows.push_back({"Embedding-" + std::to_string(index++),
                          {-1, spec_.d_label_embed_dim}, embed_->num() * embed_->dim()});
      out.total += embed_->num() * embed_->dim();
    }
    const int64_t s = spec_.image_size;
    std::vector<int64_t> in{-1, in_ch_, s, s};
    detail::census_sequential(trunk_, in, index, out);
    std::vector<int64_t> t{-1, trunk_out_ch_, 4, 4};
    detail::census_sequential(real_head_, t, index, out);
    if (spec_.has_style_head()) detail::census_sequential(style_head_, t, index, out);
    return out;
  }

  void init(uint64_t seed) {
    std::mt19937_64 eng(seed);
    if (embed_)
      for (auto& p : embed_->params()) rng::fill_normal(*p.value, eng, 0.0, 1.0);
    detail::init_sequential(trunk_, eng);
    detail::init_sequential(real_head_, eng);
    detail::init_sequential(style_head_, eng);
  }

  void zero_grads() {
    for (auto& p : named_params()) p.grad->zero();
  }

  const ModelSpec& spec() const { return spec_; }

 private:
  ModelSpec spec_;
  int64_t in_ch_;
  int64_t trunk_out_ch_;
  std::optional<Embedding<T>> embed_;
  Sequential<T> trunk_, real_head_, style_head_;
  std::vector<int> labels_;
  bool style_active_ = false;
};

template <typename T>
Generator<T> build_generator(const ModelSpec& spec) {
  return Generator<T>(spec);
}

template <typename T>
Discriminator<T> build_discriminator(const ModelSpec& spec) {
  return Discriminator<T>(spec);
}

template <typename T>
ParameterCensus parameter_census(Generator<T>& g) { return g.census(); }

template <typename T>
ParameterCensus parameter_census(Discriminator<T>& d) { return d.census(); }

template <typename T>
void init_parameters(Generator<T>& g, uint64_t seed) { g.init(seed); }

template <typename T>
void init_parameters(Discriminator<T>& d, uint64_t seed) { d.init(seed); }

}  // namespace canforge
