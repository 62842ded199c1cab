// Copyright (c) 2026 The echoone Authors
// SPDX-License-Identifier: Apache-2.0

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>

#include "echoone/core/errors.hpp"
#include "echoone/core/image.hpp"

namespace echoone {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

GrayImage read_png_gray(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw DataError("cannot open " + path);

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw DataError("libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw DataError("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("failed to decode " + path);
  }

  png_init_io(png, fp.get());
  png_read_info(png, info);

  png_uint_32 w = png_get_image_width(png, info);
  png_uint_32 h = png_get_image_height(png, info);
  int color = png_get_color_type(png, info);
  int depth = png_get_bit_depth(png, info);

  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (depth == 16) png_set_strip_16(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA ||
      color == PNG_COLOR_TYPE_PALETTE)
    png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  png_read_update_info(png, info);

  GrayImage img(static_cast<int>(h), static_cast<int>(w));
  std::vector<png_bytep> rows(h);
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = img.pix.data() + static_cast<size_t>(y) * w;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

void write_png_gray(const std::string& path, const GrayImage& img) {
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw DataError("cannot write " + path);

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw DataError("libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw DataError("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError("failed to encode " + path);
  }

  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.w), static_cast<png_uint_32>(img.h), 8,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_bytep> rows(static_cast<size_t>(img.h));
  for (int y = 0; y < img.h; ++y)
    rows[static_cast<size_t>(y)] =
        const_cast<png_bytep>(img.pix.data() + static_cast<size_t>(y) * img.w);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

void write_png_rgb(const std::string& path, const RgbImage& img) {
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw DataError("cannot write " + path);

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw DataError("libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw DataError("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError("failed to encode " + path);
  }

  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.w), static_cast<png_uint_32>(img.h), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_bytep> rows(static_cast<size_t>(img.h));
  for (int y = 0; y < img.h; ++y)
    rows[static_cast<size_t>(y)] =
        const_cast<png_bytep>(img.pix.data() + static_cast<size_t>(y) * img.w * 3);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

namespace {

struct AxisSample {
  int i0, i1;
  double f;
};

AxisSample sample_axis(int in, int out, int o) {
  double s = (o + 0.5) * (static_cast<double>(in) / out) - 0.5;
  if (s < 0) s = 0;
  if (s > in - 1) s = in - 1;
  int lo = static_cast<int>(std::floor(s));
  return {lo, lo + 1 < in ? lo + 1 : lo, s - lo};
}

}  // namespace

GrayImage resize_bilinear_u8(const GrayImage& img, int ho, int wo) {
  if (img.h == ho && img.w == wo) return img;
  GrayImage out(ho, wo);
  for (int oy = 0; oy < ho; ++oy) {
    AxisSample ys = sample_axis(img.h, ho, oy);
    for (int ox = 0; ox < wo; ++ox) {
      AxisSample xs = sample_axis(img.w, wo, ox);
      double v = (1 - ys.f) * ((1 - xs.f) * img.at(ys.i0, xs.i0) + xs.f * img.at(ys.i0, xs.i1)) +
                 ys.f * ((1 - xs.f) * img.at(ys.i1, xs.i0) + xs.f * img.at(ys.i1, xs.i1));
      double r = std::floor(v + 0.5);
      out.at(oy, ox) = static_cast<std::uint8_t>(r < 0 ? 0 : (r > 255 ? 255 : r));
    }
  }
  return out;
}

GrayImage resize_nearest_u8(const GrayImage& img, int ho, int wo) {
  if (img.h == ho && img.w == wo) return img;
  GrayImage out(ho, wo);
  for (int oy = 0; oy < ho; ++oy) {
    double sy = (oy + 0.5) * (static_cast<double>(img.h) / ho) - 0.5;
    int iy = static_cast<int>(std::floor(sy + 0.5));
    if (iy < 0) iy = 0;
    if (iy > img.h - 1) iy = img.h - 1;
    for (int ox = 0; ox < wo; ++ox) {
      double sx = (ox + 0.5) * (static_cast<double>(img.w) / wo) - 0.5;
      int ix = static_cast<int>(std::floor(sx + 0.5));
      if (ix < 0) ix = 0;
      if (ix > img.w - 1) ix = img.w - 1;
      out.at(oy, ox) = img.at(iy, ix);
    }
  }
  return out;
}

}  // namespace echoone
