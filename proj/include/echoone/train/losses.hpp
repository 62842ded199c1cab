// Copyright (c) 2026 The echoone Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "echoone/core/image.hpp"
#include "echoone/pcmask/pcmask.hpp"

namespace echoone {

/// Segmentation objective on decoder logits: dice_w * soft dice on the
/// sigmoid probabilities + bce_w * mean BCE straight on the logits.
template <typename T>
Var<T> seg_loss(const Var<T>& logits, const Tensor<T>& target, T dice_w, T bce_w) {
  Var<T> dl = dice_prob_loss(sigmoid(logits), target, T(1e-6));
  Var<T> bl = bce_with_logits_mean(logits, target);
  return add(scale(dl, dice_w), scale(bl, bce_w));
}

/// Label mask -> one-hot structure stack (S,H,W); label s+1 fills channel s.
template <typename T>
Tensor<T> one_hot_mask(const GrayImage& mask, int num_structures) {
  Tensor<T> t(Shape{num_structures, mask.h, mask.w});
  const Eigen::Index plane = static_cast<Eigen::Index>(mask.h) * mask.w;
  for (size_t i = 0; i < mask.pix.size(); ++i) {
    const int lab = mask.pix[i];
    if (lab >= 1 && lab <= num_structures)
      t[(lab - 1) * plane + static_cast<Eigen::Index>(i)] = T(1);
  }
  return t;
}

}  // namespace echoone
