#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

namespace canforge {

/// Decoded 8-bit RGB image, interleaved HWC storage.
struct RawImage {
  int height = 0;
  int width = 0;
  static constexpr int channels = 3;
  std::vector<uint8_t> pixels;  // height * width * 3

  uint8_t& at(int y, int x, int c) { return pixels[static_cast<size_t>((y * width + x) * 3 + c)]; }
  uint8_t at(int y, int x, int c) const { return pixels[static_cast<size_t>((y * width + x) * 3 + c)]; }
};

/// Decode a PNG or JPEG file (detected by magic bytes) to 8-bit RGB.
/// Returns nullopt on any decode failure, including truncated data.
std::optional<RawImage> decode_image(const std::filesystem::path& file);

void write_png(const std::filesystem::path& file, const RawImage& img);
void write_jpeg(const std::filesystem::path& file, const RawImage& img, int quality = 92);

/// Raw PNG bytes of an image; used where byte-level comparisons are needed.
std::vector<uint8_t> encode_png(const RawImage& img);

}  // namespace canforge
