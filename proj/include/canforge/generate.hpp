#pragma once

#include <filesystem>
#include <optional>
#include <utility>
#include <vector>

#include "canforge/checkpoint.hpp"
#include "canforge/image_io.hpp"
#include "canforge/models.hpp"

namespace canforge {

struct GenerationRequest {
  std::filesystem::path checkpoint;
  int count = 1;
  uint64_t seed = 0;
  /// Style indices: empty for unconditional variants; one entry applies to
  /// every sample; multiple entries lay out one style per collage row and
  /// require a grid with matching row count. Styles require a ccan
  /// checkpoint.
  std::vector<int> styles;
  std::optional<std::pair<int, int>> grid;  // rows x cols; count must equal rows*cols
};

/// Restore the generator from a checkpoint and sample `count` images from
/// seed-determined noise. Identical (checkpoint, seed, styles) give
/// identical bytes.
std::vector<RawImage> generate(const GenerationRequest& request);

/// Same, but with an already-loaded checkpoint.
std::vector<RawImage> generate(const Checkpoint& ckpt, const GenerationRequest& request);

/// Row-major grid of equal-size tiles with 2-pixel black separators on all
/// sides: output is rows*th + (rows+1)*2 pixels tall.
RawImage make_collage(const std::vector<RawImage>& images, int rows, int cols);

/// Restore just the generator (weights + batchnorm statistics) from a
/// checkpoint, ready for eval-mode sampling.
Generator<float> restore_generator(const Checkpoint& ckpt);

}  // namespace canforge
