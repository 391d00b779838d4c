// Copyright 2026 The Relight Authors
// SPDX-License-Identifier: Apache-2.0

#include "relight/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <memory>
#include <string>

#include "relight/errors.hpp"

namespace relight {

void Image::quantize() {
  for (float& v : data) v = std::round(std::clamp(v, 0.0f, 1.0f) * 255.0f) / 255.0f;
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw InputError("cannot open '" + path.string() + "'");
  return f;
}

void write_rows(const std::filesystem::path& path, int width, int height, int bit_depth,
                int color_type, std::vector<png_bytep>& rows) {
  FilePtr f = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) throw InputError("libpng initialization failed");
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw InputError("failed writing '" + path.string() + "'");
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, width, height, bit_depth, color_type, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

struct Decoded {
  int width = 0, height = 0, channels = 0, bit_depth = 0;
  std::vector<std::uint8_t> bytes;
};

Decoded read_rows(const std::filesystem::path& path) {
  FilePtr f = open_file(path, "rb");
  png_byte sig[8];
  if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw InputError("'" + path.string() + "' is not a PNG file");
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) throw InputError("libpng initialization failed");
  Decoded d;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw InputError("failed reading '" + path.string() + "'");
  }
  png_init_io(png, f.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_swap(png);  // 16-bit samples as host little-endian
  png_read_update_info(png, info);
  d.width = static_cast<int>(png_get_image_width(png, info));
  d.height = static_cast<int>(png_get_image_height(png, info));
  d.channels = png_get_channels(png, info);
  d.bit_depth = png_get_bit_depth(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  d.bytes.resize(stride * d.height);
  std::vector<png_bytep> rows(d.height);
  for (int y = 0; y < d.height; ++y) rows[y] = d.bytes.data() + stride * y;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return d;
}

float sample_value(const Decoded& d, std::size_t index) {
  if (d.bit_depth == 16) {
    std::uint16_t v;
    std::memcpy(&v, d.bytes.data() + 2 * index, 2);
    return v / 65535.0f;
  }
  return d.bytes[index] / 255.0f;
}

}  // namespace

void write_png(const std::filesystem::path& path, const Image& image) {
  std::vector<std::uint8_t> bytes(image.data.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    bytes[i] = static_cast<std::uint8_t>(std::lround(std::clamp(image.data[i], 0.0f, 1.0f) * 255.0f));
  }
  std::vector<png_bytep> rows(image.height);
  for (int y = 0; y < image.height; ++y) rows[y] = bytes.data() + std::size_t(y) * image.width * 3;
  write_rows(path, image.width, image.height, 8, PNG_COLOR_TYPE_RGB, rows);
}

Image read_png(const std::filesystem::path& path) {
  const Decoded d = read_rows(path);
  Image img(d.width, d.height);
  for (int y = 0; y < d.height; ++y) {
    for (int x = 0; x < d.width; ++x) {
      const std::size_t base = (std::size_t(y) * d.width + x) * d.channels;
      for (int c = 0; c < 3; ++c) {
        const int src = d.channels >= 3 ? c : 0;
        img.at(x, y, c) = sample_value(d, base + src);
      }
    }
  }
  return img;
}

void write_png16(const std::filesystem::path& path, const GrayImage& image) {
  std::vector<std::uint8_t> bytes(image.data.size() * 2);
  for (std::size_t i = 0; i < image.data.size(); ++i) {
    const auto v = static_cast<std::uint16_t>(std::lround(std::clamp(image.data[i], 0.0f, 1.0f) * 65535.0f));
    bytes[2 * i] = static_cast<std::uint8_t>(v >> 8);  // PNG is big-endian
    bytes[2 * i + 1] = static_cast<std::uint8_t>(v & 0xff);
  }
  std::vector<png_bytep> rows(image.height);
  for (int y = 0; y < image.height; ++y) rows[y] = bytes.data() + std::size_t(y) * image.width * 2;
  write_rows(path, image.width, image.height, 16, PNG_COLOR_TYPE_GRAY, rows);
}

GrayImage read_png16(const std::filesystem::path& path) {
  const Decoded d = read_rows(path);
  GrayImage g;
  g.width = d.width;
  g.height = d.height;
  g.data.resize(std::size_t(d.width) * d.height);
  for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] = sample_value(d, i * d.channels);
  return g;
}

}  // namespace relight
