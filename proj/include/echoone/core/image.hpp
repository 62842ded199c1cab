// Copyright (c) 2026 The echoone Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "echoone/core/tensor.hpp"

namespace echoone {

/// 8-bit single-channel image, row-major.
struct GrayImage {
  int h = 0;
  int w = 0;
  std::vector<std::uint8_t> pix;

  GrayImage() = default;
  GrayImage(int h_, int w_, std::uint8_t fill = 0)
      : h(h_), w(w_), pix(static_cast<size_t>(h_) * static_cast<size_t>(w_), fill) {}

  std::uint8_t& at(int y, int x) { return pix[static_cast<size_t>(y) * w + x]; }
  std::uint8_t at(int y, int x) const { return pix[static_cast<size_t>(y) * w + x]; }
  size_t size() const { return pix.size(); }
};

/// 8-bit RGB image, row-major interleaved.
struct RgbImage {
  int h = 0;
  int w = 0;
  std::vector<std::uint8_t> pix;

  RgbImage() = default;
  RgbImage(int h_, int w_) : h(h_), w(w_), pix(static_cast<size_t>(h_) * w_ * 3, 0) {}

  std::uint8_t& at(int y, int x, int c) {
    return pix[(static_cast<size_t>(y) * w + x) * 3 + static_cast<size_t>(c)];
  }
};

/// Reads any PNG as 8-bit grayscale (palette/RGB/16-bit inputs are converted).
GrayImage read_png_gray(const std::string& path);

void write_png_gray(const std::string& path, const GrayImage& img);

void write_png_rgb(const std::string& path, const RgbImage& img);

/// Bilinear resample with half-pixel centers; for intensity images.
GrayImage resize_bilinear_u8(const GrayImage& img, int ho, int wo);

/// Nearest-neighbor resample with half-pixel centers; for label masks.
GrayImage resize_nearest_u8(const GrayImage& img, int ho, int wo);

/// (H,W) float tensor in [0,1].
template <typename T>
Tensor<T> image_to_tensor(const GrayImage& img) {
  Tensor<T> t(Shape{img.h, img.w});
  for (size_t i = 0; i < img.pix.size(); ++i)
    t[static_cast<Eigen::Index>(i)] = static_cast<T>(img.pix[i]) / T(255);
  return t;
}

}  // namespace echoone
