// Copyright (c) 2026 The echoone Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>

#include "echoone/core/image.hpp"
#include "echoone/core/ops.hpp"
#include "echoone/core/rng.hpp"

namespace echoone {

struct AugmentParams {
  double prob = 0.5;  // independent per transform
  double rot_deg = 15;
  double scale_lo = 0.9, scale_hi = 1.1;
  double contrast_lo = 0.8, contrast_hi = 1.2;
  double gamma_lo = 0.8, gamma_hi = 1.2;
};

struct AugmentPlan {
  bool rotate = false, rescale = false, contrast = false, gamma = false;
  double angle_deg = 0, scale_f = 1, contrast_f = 1, gamma_g = 1;
};

/// Draws flags and magnitudes in a fixed order. Magnitudes are consumed from
/// the stream even for disabled transforms, so the draw count per sample is
/// constant and checkpoints resume on the same stream position.
inline AugmentPlan draw_augment_plan(Rng& rng, const AugmentParams& p) {
  AugmentPlan plan;
  plan.rotate = rng.bernoulli(p.prob);
  plan.angle_deg = rng.uniform(-p.rot_deg, p.rot_deg);
  plan.rescale = rng.bernoulli(p.prob);
  plan.scale_f = rng.uniform(p.scale_lo, p.scale_hi);
  plan.contrast = rng.bernoulli(p.prob);
  plan.contrast_f = rng.uniform(p.contrast_lo, p.contrast_hi);
  plan.gamma = rng.bernoulli(p.prob);
  plan.gamma_g = rng.uniform(p.gamma_lo, p.gamma_hi);
  if (!plan.rotate) plan.angle_deg = 0;
  if (!plan.rescale) plan.scale_f = 1;
  if (!plan.contrast) plan.contrast_f = 1;
  if (!plan.gamma) plan.gamma_g = 1;
  return plan;
}

/// Applies the plan in place at the native resolution. Rotation and scaling
/// share one inverse-mapped resample around the image center (bilinear for
/// the image, nearest for the mask, zero fill outside); contrast pivots the
/// intensities around 0.5 and gamma exponentiates, both clamped to [0,1].
inline void apply_augment(Tensor<float>& img01, GrayImage& mask, const AugmentPlan& plan) {
  const int h = img01.dim(0), w = img01.dim(1);
  if (plan.rotate || plan.rescale) {
    const double th = plan.angle_deg * 3.14159265358979323846 / 180.0;
    const double cs = std::cos(th), sn = std::sin(th);
    const double inv_s = 1.0 / plan.scale_f;
    const double cy = (h - 1) / 2.0, cx = (w - 1) / 2.0;
    Tensor<float> src = img01;
    GrayImage msrc = mask;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double dy = y - cy, dx = x - cx;
        // inverse map: rotate by -th, then unscale
        const double sy = (sn * dx + cs * dy) * inv_s + cy;
        const double sx = (cs * dx - sn * dy) * inv_s + cx;
        float val = 0;
        if (sy >= 0 && sy <= h - 1 && sx >= 0 && sx <= w - 1) {
          const int y0 = static_cast<int>(std::floor(sy));
          const int x0 = static_cast<int>(std::floor(sx));
          const int y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
          const float fy = static_cast<float>(sy - y0), fx = static_cast<float>(sx - x0);
          val = (1 - fy) * ((1 - fx) * src.at(y0, x0) + fx * src.at(y0, x1)) +
                fy * ((1 - fx) * src.at(y1, x0) + fx * src.at(y1, x1));
        }
        img01.at(y, x) = val;
        std::uint8_t lab = 0;
        const long ry = std::lround(sy), rx = std::lround(sx);
        if (ry >= 0 && ry < h && rx >= 0 && rx < w)
          lab = msrc.at(static_cast<int>(ry), static_cast<int>(rx));
        mask.at(y, x) = lab;
      }
  }
  if (plan.contrast) {
    const float f = static_cast<float>(plan.contrast_f);
    img01.array() = ((img01.array() - 0.5f) * f + 0.5f).cwiseMax(0.0f).cwiseMin(1.0f);
  }
  if (plan.gamma) {
    const float g = static_cast<float>(plan.gamma_g);
    img01.array() = img01.array().cwiseMax(0.0f).pow(g).cwiseMin(1.0f);
  }
}

/// Plain bilinear resample of a (H,W) tensor, sharing the model's resize
/// kernel so training-time and inference-time resampling agree exactly.
inline Tensor<float> resize_tensor_bilinear(const Tensor<float>& img, int ho, int wo) {
  if (img.dim(0) == ho && img.dim(1) == wo) return img;
  Var<float> leaf = make_leaf<float>(img.reshaped(Shape{1, img.dim(0), img.dim(1)}));
  return bilinear_resize(leaf, ho, wo)->value.reshaped(Shape{ho, wo});
}

/// Nearest-neighbor resample of a label mask held as GrayImage.
inline GrayImage resize_mask_nearest(const GrayImage& m, int ho, int wo) {
  if (m.h == ho && m.w == wo) return m;
  return resize_nearest_u8(m, ho, wo);
}

}  // namespace echoone
