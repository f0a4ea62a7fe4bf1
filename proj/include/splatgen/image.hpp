// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <png.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "splatgen/errors.hpp"

namespace splatgen {

/// Row-major image with values in [0, 1]; 1 (mask/gray) or 3 (RGB) channels.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<double> data;

  Image() = default;
  Image(int w, int h, int c, double fill = 0.0)
      : width(w), height(h), channels(c),
        data(static_cast<std::size_t>(w) * h * c, fill) {}

  double& at(int y, int x, int c = 0) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  double at(int y, int x, int c = 0) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
};

namespace detail {
struct PngReadCloser {
  png_structp png = nullptr;
  png_infop info = nullptr;
  std::FILE* fp = nullptr;
  ~PngReadCloser() {
    if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    if (fp) std::fclose(fp);
  }
};
struct PngWriteCloser {
  png_structp png = nullptr;
  png_infop info = nullptr;
  std::FILE* fp = nullptr;
  ~PngWriteCloser() {
    if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
    if (fp) std::fclose(fp);
  }
};
}  // namespace detail

inline Image read_png(const std::string& path) {
  detail::PngReadCloser ctx;
  ctx.fp = std::fopen(path.c_str(), "rb");
  if (!ctx.fp) throw IoError("read_png: cannot open '" + path + "'");
  unsigned char sig[8];
  if (std::fread(sig, 1, 8, ctx.fp) != 8 || png_sig_cmp(sig, 0, 8))
    throw FormatError("read_png: not a PNG file: '" + path + "'");
  ctx.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  ctx.info = png_create_info_struct(ctx.png);
  if (!ctx.png || !ctx.info) throw IoError("read_png: libpng init failed");
  if (setjmp(png_jmpbuf(ctx.png))) throw FormatError("read_png: decode failed: '" + path + "'");
  png_init_io(ctx.png, ctx.fp);
  png_set_sig_bytes(ctx.png, 8);
  png_read_info(ctx.png, ctx.info);

  const png_uint_32 w = png_get_image_width(ctx.png, ctx.info);
  const png_uint_32 h = png_get_image_height(ctx.png, ctx.info);
  const int color = png_get_color_type(ctx.png, ctx.info);
  const int depth = png_get_bit_depth(ctx.png, ctx.info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(ctx.png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(ctx.png);
  if (depth == 16) png_set_strip_16(ctx.png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(ctx.png);
  png_read_update_info(ctx.png, ctx.info);

  const int ch = png_get_channels(ctx.png, ctx.info);
  if (ch != 1 && ch != 3) throw FormatError("read_png: unsupported channel count");
  std::vector<unsigned char> rowbuf(static_cast<std::size_t>(w) * ch);
  Image img(static_cast<int>(w), static_cast<int>(h), ch);
  for (png_uint_32 y = 0; y < h; ++y) {
    png_read_row(ctx.png, rowbuf.data(), nullptr);
    for (std::size_t i = 0; i < rowbuf.size(); ++i)
      img.data[static_cast<std::size_t>(y) * rowbuf.size() + i] = rowbuf[i] / 255.0;
  }
  return img;
}

inline void write_png(const Image& img, const std::string& path) {
  if (img.channels != 1 && img.channels != 3)
    throw InvalidArgument("write_png: image must have 1 or 3 channels");
  detail::PngWriteCloser ctx;
  ctx.fp = std::fopen(path.c_str(), "wb");
  if (!ctx.fp) throw IoError("write_png: cannot open '" + path + "' for writing");
  ctx.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  ctx.info = png_create_info_struct(ctx.png);
  if (!ctx.png || !ctx.info) throw IoError("write_png: libpng init failed");
  if (setjmp(png_jmpbuf(ctx.png))) throw IoError("write_png: encode failed: '" + path + "'");
  png_init_io(ctx.png, ctx.fp);
  png_set_compression_level(ctx.png, 6);
  png_set_IHDR(ctx.png, ctx.info, static_cast<png_uint_32>(img.width),
               static_cast<png_uint_32>(img.height), 8,
               img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(ctx.png, ctx.info);
  std::vector<unsigned char> rowbuf(static_cast<std::size_t>(img.width) * img.channels);
  for (int y = 0; y < img.height; ++y) {
    for (std::size_t i = 0; i < rowbuf.size(); ++i) {
      const double v = img.data[static_cast<std::size_t>(y) * rowbuf.size() + i];
      rowbuf[i] = static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
    }
    png_write_row(ctx.png, rowbuf.data());
  }
  png_write_end(ctx.png, nullptr);
}

}  // namespace splatgen
