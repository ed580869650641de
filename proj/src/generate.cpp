#include "canforge/generate.hpp"

#include <random>
#include <stdexcept>

#include "canforge/pipeline.hpp"
#include "canforge/rng.hpp"

namespace canforge {

Generator<float> restore_generator(const Checkpoint& ckpt) {
  Generator<float> gen(ckpt.spec);
  auto restore = [&](std::vector<ParamRef<float>> refs) {
    for (auto& r : refs) {
      const auto it = ckpt.tensors.find("g." + r.name);
      if (it == ckpt.tensors.end())
        throw std::runtime_error("checkpoint is missing generator tensor 'g." + r.name + "'");
      *r.value = it->second;
    }
  };
  restore(gen.named_params());
  restore(gen.named_buffers());
  return gen;
}

std::vector<RawImage> generate(const Checkpoint& ckpt, const GenerationRequest& request) {
  if (request.count < 1) throw std::invalid_argument("generate: count must be >= 1");
  if (request.grid) {
    const auto [rows, cols] = *request.grid;
    if (rows < 1 || cols < 1 || rows * cols != request.count)
      throw std::invalid_argument("generate: grid " + std::to_string(rows) + "x" +
                                  std::to_string(cols) + " does not match count " +
                                  std::to_string(request.count));
  }
  const bool conditional = ckpt.spec.variant == Variant::kCcan;
  if (!request.styles.empty() && !conditional)
    throw std::invalid_argument("generate: style labels require a ccan checkpoint (got " +
                                to_string(ckpt.spec.variant) + ")");
  if (conditional && request.styles.empty())
    throw std::invalid_argument("generate: ccan checkpoints require at least one --style");
  if (request.styles.size() > 1) {
    if (!request.grid || request.grid->first != static_cast<int>(request.styles.size()))
      throw std::invalid_argument("generate: " + std::to_string(request.styles.size()) +
                                  " styles need a grid with one row per style");
  }
  for (int s : request.styles)
    if (s < 0 || s >= ckpt.spec.num_styles)
      throw std::out_of_range("generate: style index " + std::to_string(s) + " out of range [0," +
                              std::to_string(ckpt.spec.num_styles) + ")");

  Generator<float> gen = restore_generator(ckpt);
  auto eng = rng::engine(request.seed, "generate");
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<int> labels;
  if (conditional) {
    labels.resize(static_cast<size_t>(request.count));
    const int cols = request.grid ? request.grid->second : request.count;
    for (int i = 0; i < request.count; ++i) {
      const size_t row = request.styles.size() > 1 ? static_cast<size_t>(i / cols) : 0;
      labels[static_cast<size_t>(i)] = request.styles[row];
    }
  }

  std::vector<RawImage> out;
  out.reserve(static_cast<size_t>(request.count));
  const int chunk = 64;
  const int64_t latent = ckpt.spec.latent_dim;
  for (int start = 0; start < request.count; start += chunk) {
    const int n = std::min(chunk, request.count - start);
    Tensor<float> z({n, latent});
    for (int64_t i = 0; i < z.size(); ++i) z[i] = static_cast<float>(normal(eng));
    std::vector<int> batch_labels;
    if (conditional)
      batch_labels.assign(labels.begin() + start, labels.begin() + start + n);
    Tensor<float> imgs = gen.forward(z, batch_labels, false);
    const int64_t chw = imgs.size() / n;
    for (int i = 0; i < n; ++i) {
      Tensor<float> one({3, imgs.dim(2), imgs.dim(3)},
                        std::vector<float>(imgs.data() + i * chw, imgs.data() + (i + 1) * chw));
      out.push_back(denormalize(one));
    }
  }
  return out;
}

std::vector<RawImage> generate(const GenerationRequest& request) {
  return generate(load_checkpoint(request.checkpoint), request);
}

RawImage make_collage(const std::vector<RawImage>& images, int rows, int cols) {
  if (rows < 1 || cols < 1 || static_cast<size_t>(rows) * cols != images.size())
    throw std::invalid_argument("make_collage: " + std::to_string(images.size()) +
                                " images do not fill a " + std::to_string(rows) + "x" +
                                std::to_string(cols) + " grid");
  const int th = images[0].height, tw = images[0].width;
  for (const auto& img : images)
    if (img.height != th || img.width != tw)
      throw std::invalid_argument("make_collage: tiles must share one size");

  constexpr int kBorder = 2;
  RawImage canvas;
  canvas.height = rows * th + (rows + 1) * kBorder;
  canvas.width = cols * tw + (cols + 1) * kBorder;
  canvas.pixels.assign(static_cast<size_t>(canvas.height) * canvas.width * 3, 0);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const RawImage& tile = images[static_cast<size_t>(r) * cols + c];
      const int y0 = kBorder + r * (th + kBorder);
      const int x0 = kBorder + c * (tw + kBorder);
      for (int y = 0; y < th; ++y)
        std::copy_n(tile.pixels.data() + static_cast<size_t>(y) * tw * 3,
                    static_cast<size_t>(tw) * 3,
                    canvas.pixels.data() + (static_cast<size_t>(y0 + y) * canvas.width + x0) * 3);
    }
  }
  return canvas;
}

}  // namespace canforge
