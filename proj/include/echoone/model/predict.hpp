// Copyright (c) 2026 The echoone Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "echoone/atlas/atlas.hpp"
#include "echoone/atlas/encoder.hpp"
#include "echoone/model/segmodel.hpp"

namespace echoone {

/// Everything needed to run prompted inference. atlas/encoder may be null,
/// in which case the model decodes with its no-prompt embedding.
struct PredictContext {
  const SegModel<float>* model = nullptr;
  const PriorAtlas* atlas = nullptr;
  const LatentEncoder* encoder = nullptr;

  bool prompted() const {
    return atlas != nullptr && encoder != nullptr && model->has_unet() &&
           model->config().pcmask;
  }
};

/// Composes the image's prior stack from its latent similarity weights.
/// img01 is (H,W) at any resolution; it is resampled for the encoder here.
inline Tensor<float> image_prior(const PredictContext& ctx, const Tensor<float>& img01) {
  const int es = ctx.encoder->config().input_size;
  Tensor<float> small = img01;
  if (img01.dim(0) != es || img01.dim(1) != es) {
    Var<float> leaf = make_leaf<float>(img01.reshaped(Shape{1, img01.dim(0), img01.dim(1)}));
    small = bilinear_resize(leaf, es, es)->value.reshaped(Shape{es, es});
  }
  Tensor<float> w = similarity_weights(ctx.encoder->encode(small), ctx.atlas->prototypes);
  return compose_prior(w, ctx.atlas->center_masks);
}

/// Per-structure probabilities (S, input, input) for an image already at the
/// model's input resolution.
inline Tensor<float> predict_probs(const PredictContext& ctx, const Tensor<float>& img01) {
  if (ctx.prompted()) {
    Tensor<float> prior = image_prior(ctx, img01);
    return sigmoid(ctx.model->forward(img01, &prior).logits)->value;
  }
  return sigmoid(ctx.model->forward(img01, nullptr).logits)->value;
}

/// Binary 0/1 masks, one per structure, thresholded at 0.5.
inline std::vector<GrayImage> predict_masks(const PredictContext& ctx,
                                            const Tensor<float>& img01) {
  Tensor<float> probs = predict_probs(ctx, img01);
  const int s = probs.dim(0), h = probs.dim(1), w = probs.dim(2);
  std::vector<GrayImage> out;
  for (int c = 0; c < s; ++c) {
    GrayImage m(h, w);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) m.at(y, x) = probs.at(c, y, x) > 0.5f ? 1 : 0;
    out.push_back(std::move(m));
  }
  return out;
}

/// Single label map: the highest-probability structure among those above
/// 0.5, background where none clears the threshold.
inline GrayImage predict_labels(const PredictContext& ctx, const Tensor<float>& img01) {
  Tensor<float> probs = predict_probs(ctx, img01);
  const int s = probs.dim(0), h = probs.dim(1), w = probs.dim(2);
  GrayImage out(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      int best = 0;
      float bp = 0.5f;
      for (int c = 0; c < s; ++c)
        if (probs.at(c, y, x) > bp) {
          bp = probs.at(c, y, x);
          best = c + 1;
        }
      out.at(y, x) = static_cast<std::uint8_t>(best);
    }
  return out;
}

}  // namespace echoone
