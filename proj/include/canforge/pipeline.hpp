#pragma once

#include <algorithm>
#include <array>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

#include "canforge/image_io.hpp"
#include "canforge/manifest.hpp"
#include "canforge/rng.hpp"
#include "canforge/tensor.hpp"

namespace canforge {

struct CropRect {
  int top, left, height, width;
};

/// The five 0.9-scale crop windows, fixed order [TL, TR, BL, BR, C].
/// Dimensions use floor(0.9*h) computed exactly in integer arithmetic.
inline std::array<CropRect, 5> five_crop_rects(int h, int w) {
  const int ch = (9 * h) / 10;
  const int cw = (9 * w) / 10;
  const int bottom = h - ch, right = w - cw;
  return {{{0, 0, ch, cw},
           {0, right, ch, cw},
           {bottom, 0, ch, cw},
           {bottom, right, ch, cw},
           {bottom / 2, right / 2, ch, cw}}};
}

inline RawImage crop(const RawImage& img, const CropRect& r) {
  RawImage out;
  out.height = r.height;
  out.width = r.width;
  out.pixels.resize(static_cast<size_t>(r.height) * r.width * 3);
  for (int y = 0; y < r.height; ++y) {
    const uint8_t* src = img.pixels.data() + (static_cast<size_t>(r.top + y) * img.width + r.left) * 3;
    std::copy_n(src, static_cast<size_t>(r.width) * 3, out.pixels.data() + static_cast<size_t>(y) * r.width * 3);
  }
  return out;
}

inline std::array<RawImage, 5> five_crop(const RawImage& img) {
  if (img.height < 2 || img.width < 2) throw std::invalid_argument("five_crop: image too small");
  const auto rects = five_crop_rects(img.height, img.width);
  return {crop(img, rects[0]), crop(img, rects[1]), crop(img, rects[2]), crop(img, rects[3]),
          crop(img, rects[4])};
}

/// Map [0,255] bytes to [-1,1] reals, CHW layout: v/127.5 - 1.
template <typename T>
Tensor<T> normalize(const RawImage& img) {
  Tensor<T> out({3, img.height, img.width});
  const int64_t hw = static_cast<int64_t>(img.height) * img.width;
  for (int64_t p = 0; p < hw; ++p)
    for (int64_t c = 0; c < 3; ++c)
      out[c * hw + p] = static_cast<T>(img.pixels[static_cast<size_t>(p * 3 + c)]) / T(127.5) - T(1);
  return out;
}

/// Inverse of normalize up to integer rounding: (v+1)*127.5, rounded and
/// clamped to [0,255].
template <typename T>
RawImage denormalize(const Tensor<T>& chw) {
  RawImage out;
  out.height = static_cast<int>(chw.dim(1));
  out.width = static_cast<int>(chw.dim(2));
  const int64_t hw = static_cast<int64_t>(out.height) * out.width;
  out.pixels.resize(static_cast<size_t>(hw) * 3);
  for (int64_t p = 0; p < hw; ++p)
    for (int64_t c = 0; c < 3; ++c) {
      const double v = (static_cast<double>(chw[c * hw + p]) + 1.0) * 127.5;
      out.pixels[static_cast<size_t>(p * 3 + c)] =
          static_cast<uint8_t>(std::clamp(std::lround(v), 0L, 255L));
    }
  return out;
}

/// Bilinear resample of a CHW tensor to `size` x `size`, half-pixel centers.
template <typename T>
Tensor<T> resize_bilinear(const Tensor<T>& src, int size) {
  const int64_t C = src.dim(0);
  const int h = static_cast<int>(src.dim(1)), w = static_cast<int>(src.dim(2));
  if (h < 1 || w < 1) throw std::invalid_argument("resize: empty input");
  Tensor<T> out({C, size, size});

  struct Tap {
    int lo, hi;
    T frac;
  };
  auto taps = [](int in_size, int out_size) {
    std::vector<Tap> t(static_cast<size_t>(out_size));
    const double scale = static_cast<double>(in_size) / out_size;
    for (int i = 0; i < out_size; ++i) {
      double s = (i + 0.5) * scale - 0.5;
      s = std::clamp(s, 0.0, static_cast<double>(in_size - 1));
      const int lo = static_cast<int>(s);
      t[static_cast<size_t>(i)] = {lo, std::min(lo + 1, in_size - 1), static_cast<T>(s - lo)};
    }
    return t;
  };
  const auto ty = taps(h, size), tx = taps(w, size);

  const int64_t src_hw = static_cast<int64_t>(h) * w;
  const int64_t dst_hw = static_cast<int64_t>(size) * size;
  for (int64_t c = 0; c < C; ++c) {
    const T* plane = src.data() + c * src_hw;
    T* dst = out.data() + c * dst_hw;
    for (int y = 0; y < size; ++y) {
      const Tap& py = ty[static_cast<size_t>(y)];
      const T* r0 = plane + static_cast<int64_t>(py.lo) * w;
      const T* r1 = plane + static_cast<int64_t>(py.hi) * w;
      for (int x = 0; x < size; ++x) {
        const Tap& px = tx[static_cast<size_t>(x)];
        const T top = r0[px.lo] + px.frac * (r0[px.hi] - r0[px.lo]);
        const T bot = r1[px.lo] + px.frac * (r1[px.hi] - r1[px.lo]);
        *dst++ = top + py.frac * (bot - top);
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> resize_to_64(const Tensor<T>& src) {
  return resize_bilinear(src, 64);
}

struct Batch {
  Tensor<float> images;       // [N, 3, image_size, image_size]
  std::vector<int> styles;    // [N]
  std::vector<int64_t> items; // [N], entry_index * 5 + crop_id
};

/// One epoch of shuffled mini-batches over all (entry, crop) pairs: five
/// crops per manifest entry, permuted by an RNG keyed on (seed, epoch).
/// Per item: decode -> normalize -> crop -> resize. The final partial batch
/// is yielded.
class BatchStream {
 public:
  BatchStream(const DatasetManifest& manifest, int batch_size, uint64_t seed, int epoch,
              int image_size = 64)
      : manifest_(&manifest), batch_size_(batch_size), image_size_(image_size) {
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    order_.resize(manifest.entries.size() * 5);
    for (size_t i = 0; i < order_.size(); ++i) order_[i] = i;
    auto eng = rng::engine(seed, "shuffle", static_cast<uint64_t>(epoch));
    std::shuffle(order_.begin(), order_.end(), eng);
  }

  int64_t total_samples() const { return static_cast<int64_t>(order_.size()); }

  std::optional<Batch> next() {
    if (cursor_ >= order_.size()) return std::nullopt;
    const size_t n = std::min(static_cast<size_t>(batch_size_), order_.size() - cursor_);
    Batch batch;
    batch.images = Tensor<float>({static_cast<int64_t>(n), 3, image_size_, image_size_});
    batch.styles.resize(n);
    batch.items.resize(n);
    const int64_t chw = 3LL * image_size_ * image_size_;
    for (size_t i = 0; i < n; ++i) {
      const size_t item = order_[cursor_ + i];
      const auto& entry = manifest_->entries[item / 5];
      const int crop_id = static_cast<int>(item % 5);
      auto img = decode_image(entry.file);
      if (!img)
        throw std::runtime_error("failed to decode " + entry.file.string() +
                                 " (file changed since manifest load?)");
      const Tensor<float> full = normalize<float>(*img);
      const auto rect = five_crop_rects(img->height, img->width)[static_cast<size_t>(crop_id)];
      Tensor<float> cropped({3, rect.height, rect.width});
      const int64_t src_hw = static_cast<int64_t>(img->height) * img->width;
      for (int64_t c = 0; c < 3; ++c)
        for (int y = 0; y < rect.height; ++y)
          std::copy_n(full.data() + c * src_hw + static_cast<int64_t>(rect.top + y) * img->width + rect.left,
                      rect.width,
                      cropped.data() + (c * rect.height + y) * rect.width);
      const Tensor<float> resized = resize_bilinear(cropped, image_size_);
      std::copy_n(resized.data(), chw, batch.images.data() + static_cast<int64_t>(i) * chw);
      batch.styles[i] = entry.style;
      batch.items[i] = static_cast<int64_t>(item);
    }
    cursor_ += n;
    return batch;
  }

 private:
  const DatasetManifest* manifest_;
  int batch_size_;
  int64_t image_size_;
  std::vector<size_t> order_;
  size_t cursor_ = 0;
};

}  // namespace canforge
