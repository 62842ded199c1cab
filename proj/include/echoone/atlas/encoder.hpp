// Copyright (c) 2026 The echoone Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include "echoone/core/archive.hpp"
#include "echoone/core/image.hpp"
#include "echoone/core/nn.hpp"
#include "echoone/harmonize/manifest.hpp"
#include "echoone/train/adam.hpp"

namespace echoone {

struct EncoderConfig {
  int input_size = 64;
  int base_width = 8;        // stage widths are w, 2w, 4w
  int blocks_per_stage = 1;
  std::uint64_t seed = 0;
};

/// Residual convolutional plane classifier. The latent space is the
/// global-average-pooled feature in front of the classification head
/// (embed_dim = 4 * base_width).
class LatentEncoder {
 public:
  LatentEncoder(EncoderConfig cfg, std::vector<Plane> classes);

  int embed_dim() const { return cfg_.base_width * 4; }
  const EncoderConfig& config() const { return cfg_; }
  const std::vector<Plane>& classes() const { return classes_; }
  ParamStore<float>& params() { return params_; }
  const ParamStore<float>& params() const { return params_; }

  /// (1,H,W) -> (1, embed_dim) pooled features, differentiable.
  Var<float> features(const Var<float>& x) const;

  /// (1, embed_dim) -> (1, num_classes) logits.
  Var<float> head(const Var<float>& feats) const { return head_(feats); }

  /// Latent vector for an image already at input_size, in [0,1].
  /// Throws ShapeError on any other resolution.
  Tensor<float> encode(const Tensor<float>& img01) const;
  Tensor<float> encode(const GrayImage& img) const;

  struct TrainStats {
    std::vector<double> loss_per_epoch;
    double train_accuracy = 0;
  };

  /// Cross-entropy training on the records' plane tags. Images are resized
  /// to input_size here. Throws InsufficientData if any class has no
  /// examples. epochs == 0 leaves the random initialization untouched.
  TrainStats train(const std::vector<ManifestRecord>& records, int epochs, float lr,
                   int batch_size, std::uint64_t seed);

  void save(const std::string& path, const std::string& runconfig_hash) const;
  static LatentEncoder load(const std::string& path);

  static constexpr const char* kTag = "ECHOONE-ENCODER-v1";

 private:
  EncoderConfig cfg_;
  std::vector<Plane> classes_;
  ParamStore<float> params_;
  Conv2dLayer<float> stem_;
  std::vector<ResBlock<float>> blocks_;
  Linear<float> head_;
};

inline LatentEncoder::LatentEncoder(EncoderConfig cfg, std::vector<Plane> classes)
    : cfg_(cfg), classes_(std::move(classes)), params_(cfg.seed) {
  if (classes_.empty()) throw Error("encoder needs at least one plane class");
  const int w = cfg_.base_width;
  stem_ = Conv2dLayer<float>(params_, "encoder.stem", "encoder", 1, w, 3, 1, 1);
  const int widths[3] = {w, 2 * w, 4 * w};
  int cin = w;
  for (int stage = 0; stage < 3; ++stage) {
    for (int b = 0; b < cfg_.blocks_per_stage; ++b) {
      const int cout = widths[stage];
      const int stride = b == 0 ? 2 : 1;
      const std::string prefix =
          "encoder.s" + std::to_string(stage) + ".b" + std::to_string(b);
      blocks_.emplace_back(params_, prefix, "encoder", cin, cout, stride);
      cin = cout;
    }
  }
  head_ = Linear<float>(params_, "encoder.head", "encoder", embed_dim(),
                        static_cast<int>(classes_.size()));
}

inline Var<float> LatentEncoder::features(const Var<float>& x) const {
  Var<float> h = relu(stem_(x));
  for (const auto& blk : blocks_) h = blk(h);
  const float inv_area = 1.0f / static_cast<float>(h->value.dim(1) * h->value.dim(2));
  return reshape(scale(sum_leading(h), inv_area), Shape{1, embed_dim()});
}

inline Tensor<float> LatentEncoder::encode(const Tensor<float>& img01) const {
  if (img01.rank() != 2 || img01.dim(0) != cfg_.input_size || img01.dim(1) != cfg_.input_size)
    throw ShapeError("encoder expects " + std::to_string(cfg_.input_size) + "x" +
                     std::to_string(cfg_.input_size) + ", got " + shape_str(img01.shape()));
  Var<float> x = make_leaf<float>(img01.reshaped(Shape{1, cfg_.input_size, cfg_.input_size}));
  return features(x)->value.reshaped(Shape{embed_dim()});
}

inline Tensor<float> LatentEncoder::encode(const GrayImage& img) const {
  return encode(image_to_tensor<float>(img));
}

inline LatentEncoder::TrainStats LatentEncoder::train(
    const std::vector<ManifestRecord>& records, int epochs, float lr, int batch_size,
    std::uint64_t seed) {
  if (records.empty()) throw InsufficientData("empty training manifest");
  std::vector<int> labels;
  std::vector<Tensor<float>> images;
  std::vector<long> class_counts(classes_.size(), 0);
  for (const auto& r : records) {
    int cls = -1;
    for (size_t c = 0; c < classes_.size(); ++c)
      if (classes_[c] == r.plane) cls = static_cast<int>(c);
    if (cls < 0) throw DataError("plane " + plane_to_string(r.plane) + " not in class set");
    ++class_counts[static_cast<size_t>(cls)];
    labels.push_back(cls);
    GrayImage img = resize_bilinear_u8(read_png_gray(r.image_path), cfg_.input_size,
                                       cfg_.input_size);
    images.push_back(image_to_tensor<float>(img).reshaped(
        Shape{1, cfg_.input_size, cfg_.input_size}));
  }
  for (size_t c = 0; c < classes_.size(); ++c)
    if (class_counts[c] == 0)
      throw InsufficientData("plane " + plane_to_string(classes_[c]) +
                             " has no training examples");

  TrainStats stats;
  Adam<float> opt(params_, lr);
  Rng rng(seed);
  std::vector<int> order(records.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < epochs; ++epoch) {
    rng.shuffle(order.begin(), order.end());
    double epoch_loss = 0;
    long nb = 0;
    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(batch_size)) {
      const size_t end = std::min(order.size(), start + static_cast<size_t>(batch_size));
      params_.zero_grads();
      Var<float> total;
      for (size_t i = start; i < end; ++i) {
        const int idx = order[i];
        Var<float> x = make_leaf<float>(images[static_cast<size_t>(idx)]);
        Var<float> loss =
            cross_entropy_logits(head_(features(x)), labels[static_cast<size_t>(idx)]);
        total = total ? add(total, loss) : loss;
      }
      total = scale(total, 1.0f / static_cast<float>(end - start));
      backward(total);
      opt.step();
      epoch_loss += static_cast<double>(total->value[0]);
      ++nb;
    }
    stats.loss_per_epoch.push_back(epoch_loss / static_cast<double>(nb));
  }

  long correct = 0;
  for (size_t i = 0; i < images.size(); ++i) {
    Var<float> x = make_leaf<float>(images[i]);
    Var<float> out = head_(features(x));
    const Tensor<float>& lg = out->value;
    int arg = 0;
    for (int c = 1; c < static_cast<int>(classes_.size()); ++c)
      if (lg[c] > lg[arg]) arg = c;
    correct += arg == labels[i];
  }
  stats.train_accuracy = static_cast<double>(correct) / static_cast<double>(images.size());
  return stats;
}

inline void LatentEncoder::save(const std::string& path,
                                const std::string& runconfig_hash) const {
  Archive ar(kTag);
  ar.meta()["input_size"] = cfg_.input_size;
  ar.meta()["base_width"] = cfg_.base_width;
  ar.meta()["blocks_per_stage"] = cfg_.blocks_per_stage;
  ar.meta()["seed"] = cfg_.seed;
  Json cls = Json::array();
  for (Plane p : classes_) cls.push_back(plane_to_string(p));
  ar.meta()["classes"] = cls;
  ar.meta()["runconfig"] = runconfig_hash;
  for (const auto& [name, t] : params_.named_values()) ar.add_f32(name, t);
  ar.save(path);
}

inline LatentEncoder LatentEncoder::load(const std::string& path) {
  Archive ar = Archive::load_expect(path, kTag);
  EncoderConfig cfg;
  cfg.input_size = ar.meta().at("input_size").get<int>();
  cfg.base_width = ar.meta().at("base_width").get<int>();
  cfg.blocks_per_stage = ar.meta().at("blocks_per_stage").get<int>();
  cfg.seed = ar.meta().at("seed").get<std::uint64_t>();
  std::vector<Plane> classes;
  for (const auto& s : ar.meta().at("classes"))
    classes.push_back(plane_from_string(s.get<std::string>()));
  LatentEncoder enc(cfg, std::move(classes));
  std::map<std::string, Tensor<float>> values;
  for (const auto& [name, blob] : ar.blobs()) values.emplace(name, blob.as_f32());
  enc.params_.load_values(values);
  return enc;
}

}  // namespace echoone
