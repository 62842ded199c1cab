// Copyright (c) 2026 The echoone Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "echoone/core/nn.hpp"

namespace echoone {

/// Cosine similarity between a latent vector (D) and every prototype row of
/// (K, D), accumulated in double. Values are clamped to [-1, 1] to absorb
/// rounding. A zero latent or zero prototype has no direction: ZeroVector.
template <typename T>
Tensor<T> similarity_weights(const Tensor<T>& latent, const Tensor<T>& prototypes) {
  if (latent.rank() != 1 || prototypes.rank() != 2 ||
      prototypes.dim(1) != latent.dim(0))
    throw ShapeMismatch("similarity_weights: latent " + shape_str(latent.shape()) +
                        " vs prototypes " + shape_str(prototypes.shape()));
  const int k = prototypes.dim(0);
  const int d = latent.dim(0);
  double norm_l = 0;
  for (int j = 0; j < d; ++j)
    norm_l += static_cast<double>(latent[j]) * static_cast<double>(latent[j]);
  norm_l = std::sqrt(norm_l);
  if (norm_l == 0) throw ZeroVector("latent vector has zero norm");
  Tensor<T> out(Shape{k});
  for (int c = 0; c < k; ++c) {
    double dot = 0, norm_p = 0;
    for (int j = 0; j < d; ++j) {
      const double p = static_cast<double>(prototypes.at(c, j));
      dot += p * static_cast<double>(latent[j]);
      norm_p += p * p;
    }
    norm_p = std::sqrt(norm_p);
    if (norm_p == 0) throw ZeroVector("prototype " + std::to_string(c) + " has zero norm");
    out[c] = static_cast<T>(std::clamp(dot / (norm_l * norm_p), -1.0, 1.0));
  }
  return out;
}

/// Stacks every cluster's mean masks scaled by its similarity weight:
/// weights (K), center_masks (K,S,H,W) -> (K*S,H,W). Channel k*S+s holds
/// w[k] * m[k][s]. This is plain data, not part of any gradient graph.
template <typename T>
Tensor<T> compose_prior(const Tensor<T>& weights, const Tensor<T>& center_masks) {
  if (weights.rank() != 1 || center_masks.rank() != 4 ||
      center_masks.dim(0) != weights.dim(0))
    throw ShapeMismatch("compose_prior: weights " + shape_str(weights.shape()) +
                        " vs masks " + shape_str(center_masks.shape()));
  const int k = center_masks.dim(0), s = center_masks.dim(1);
  const int h = center_masks.dim(2), w = center_masks.dim(3);
  Tensor<T> out(Shape{k * s, h, w});
  const Eigen::Index plane = static_cast<Eigen::Index>(h) * w;
  for (int c = 0; c < k; ++c)
    out.array().segment(c * s * plane, s * plane) =
        center_masks.array().segment(c * s * plane, s * plane) * weights[c];
  return out;
}

/// Small U-Net refining a composed prior into per-structure probability maps
/// (sigmoid outputs):
///   in -> 16 -> 32 -> 64 -> 64 at /1, /2, /4, /8 resolution, then mirrored
///   decoding with skip concatenation and a 1x1 sigmoid head.
template <typename T>
class PromptUnet {
 public:
  PromptUnet() = default;
  PromptUnet(ParamStore<T>& ps, const std::string& prefix, const std::string& group,
             int in_channels, int num_structures)
      : in_channels_(in_channels), num_structures_(num_structures) {
    e0_ = Conv2dLayer<T>(ps, prefix + ".e0", group, in_channels, 16, 3, 1, 1);
    e1_ = Conv2dLayer<T>(ps, prefix + ".e1", group, 16, 32, 3, 2, 1);
    e2_ = Conv2dLayer<T>(ps, prefix + ".e2", group, 32, 64, 3, 2, 1);
    e3_ = Conv2dLayer<T>(ps, prefix + ".e3", group, 64, 64, 3, 2, 1);
    d2_ = Conv2dLayer<T>(ps, prefix + ".d2", group, 128, 64, 3, 1, 1);
    d1_ = Conv2dLayer<T>(ps, prefix + ".d1", group, 96, 32, 3, 1, 1);
    d0_ = Conv2dLayer<T>(ps, prefix + ".d0", group, 48, 16, 3, 1, 1);
    head_ = Conv2dLayer<T>(ps, prefix + ".head", group, 16, num_structures, 1, 1, 0);
  }

  int in_channels() const { return in_channels_; }
  int num_structures() const { return num_structures_; }

  /// (in_channels,H,W) -> (num_structures,H,W) probabilities.
  Var<T> operator()(const Var<T>& x) const {
    Var<T> e0 = relu(e0_(x));
    Var<T> e1 = relu(e1_(e0));
    Var<T> e2 = relu(e2_(e1));
    Var<T> e3 = relu(e3_(e2));
    Var<T> d2 = relu(d2_(cat(up_to(e3, e2), e2)));
    Var<T> d1 = relu(d1_(cat(up_to(d2, e1), e1)));
    Var<T> d0 = relu(d0_(cat(up_to(d1, e0), e0)));
    return sigmoid(head_(d0));
  }

 private:
  static Var<T> up_to(const Var<T>& x, const Var<T>& like) {
    return bilinear_resize(x, like->value.dim(1), like->value.dim(2));
  }
  static Var<T> cat(const Var<T>& a, const Var<T>& b) {
    return concat_dim0(std::vector<Var<T>>{a, b});
  }

  int in_channels_ = 0, num_structures_ = 0;
  Conv2dLayer<T> e0_, e1_, e2_, e3_, d2_, d1_, d0_, head_;
};

/// Soft dice loss on probabilities: 1 - mean_c (2*sum(p*t)+eps)/(sum p+sum t+eps).
/// Both-empty channels score 1 (zero loss contribution) thanks to eps.
template <typename T>
Var<T> dice_prob_loss(const Var<T>& probs, const Tensor<T>& target, T eps) {
  require_same_shape(probs->value, target, "dice_prob_loss");
  Var<T> t = make_leaf<T>(target);
  Var<T> inter = sum_leading(mul(probs, t));
  Var<T> denom = add(sum_leading(probs), sum_leading(t));
  Var<T> dice = div_elem(add_scalar(scale(inter, T(2)), eps), add_scalar(denom, eps));
  return add_scalar(scale(mean_all(dice), T(-1)), T(1));
}

/// Prior-refinement objective: dice_w * soft dice + bce_w * mean BCE, both on
/// the U-Net's probability maps.
template <typename T>
Var<T> pcm_loss(const Var<T>& probs, const Tensor<T>& target, T dice_w, T bce_w) {
  Var<T> dl = dice_prob_loss(probs, target, T(1e-6));
  Var<T> bl = bce_prob_mean(probs, target, T(1e-7));
  return add(scale(dl, dice_w), scale(bl, bce_w));
}

}  // namespace echoone
