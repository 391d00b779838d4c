// Copyright 2026 The Relight Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace relight {

/// Interleaved RGB image with values in [0, 1], row-major from the top-left.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<float> data;

  Image() = default;
  Image(int w, int h, float fill = 0.0f) : width(w), height(h), data(std::size_t(w) * h * 3, fill) {}

  float& at(int x, int y, int c) { return data[(std::size_t(y) * width + x) * 3 + c]; }
  float at(int x, int y, int c) const { return data[(std::size_t(y) * width + x) * 3 + c]; }
  std::size_t pixel_count() const { return std::size_t(width) * height; }
  bool same_shape(const Image& o) const { return width == o.width && height == o.height; }

  /// Rounds every value to the nearest multiple of 1/255 after clamping.
  void quantize();
};

/// Single-channel image in [0, 1], used for diagnostics.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<float> data;
};

/// 8-bit RGB PNG. Throws InputError on I/O failure.
void write_png(const std::filesystem::path& path, const Image& image);
/// Accepts 8- or 16-bit gray/RGB/RGBA PNGs; alpha is dropped.
Image read_png(const std::filesystem::path& path);
/// 16-bit grayscale PNG.
void write_png16(const std::filesystem::path& path, const GrayImage& image);
GrayImage read_png16(const std::filesystem::path& path);

}  // namespace relight
