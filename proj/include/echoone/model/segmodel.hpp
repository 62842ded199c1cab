// Copyright (c) 2026 The echoone Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "echoone/core/archive.hpp"
#include "echoone/core/nn.hpp"
#include "echoone/pcmask/pcmask.hpp"

namespace echoone {

struct ModelConfig {
  int input_size = 256;
  int patch_size = 16;
  int embed_dim = 64;
  int encoder_depth = 6;
  int num_heads = 4;
  int num_decoder_blocks = 5;
  int num_structures = 3;
  std::vector<int> cnn_widths = {16, 32, 32, 32};
  bool lffa = true;
  bool pcmask = true;
  std::uint64_t seed = 0;
};

inline Json model_config_to_json(const ModelConfig& c) {
  Json j;
  j["input_size"] = c.input_size;
  j["patch_size"] = c.patch_size;
  j["embed_dim"] = c.embed_dim;
  j["encoder_depth"] = c.encoder_depth;
  j["num_heads"] = c.num_heads;
  j["num_decoder_blocks"] = c.num_decoder_blocks;
  j["num_structures"] = c.num_structures;
  j["cnn_widths"] = c.cnn_widths;
  j["lffa"] = c.lffa;
  j["pcmask"] = c.pcmask;
  j["seed"] = c.seed;
  return j;
}

inline ModelConfig model_config_from_json(const Json& j) {
  ModelConfig c;
  c.input_size = j.at("input_size").get<int>();
  c.patch_size = j.at("patch_size").get<int>();
  c.embed_dim = j.at("embed_dim").get<int>();
  c.encoder_depth = j.at("encoder_depth").get<int>();
  c.num_heads = j.at("num_heads").get<int>();
  c.num_decoder_blocks = j.at("num_decoder_blocks").get<int>();
  c.num_structures = j.at("num_structures").get<int>();
  c.cnn_widths = j.at("cnn_widths").get<std::vector<int>>();
  c.lffa = j.at("lffa").get<bool>();
  c.pcmask = j.at("pcmask").get<bool>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

/// Prompt-conditioned segmentation model.
///
/// A patch-token transformer encoder runs next to a small convolutional
/// branch; the branch leaks into the token stream through zero-gated
/// cross attention at four depths, and (when fusion is enabled) into the
/// two-way decoder by concatenating branch tokens onto the decoder keys in
/// front of the last four blocks. A dense prompt, refined from the shape
/// prior by PromptUnet, is added onto the keys before decoding; without a
/// prompt a learned no-prompt embedding takes its place.
template <typename T>
class SegModel {
 public:
  struct Forward {
    Var<T> logits;     // (num_structures, input, input)
    Var<T> pcm_probs;  // prompt U-Net output, null when unprompted
  };

  SegModel(ModelConfig cfg, int unet_in_channels)
      : cfg_(cfg), unet_in_(unet_in_channels), params_(cfg.seed) {
    if (cfg_.input_size % cfg_.patch_size != 0)
      throw ShapeError("input size not divisible by patch size");
    if (cfg_.patch_size < 2 || (cfg_.patch_size & (cfg_.patch_size - 1)) != 0)
      throw ShapeError("patch size must be a power of two >= 2");
    if (cfg_.embed_dim % cfg_.num_heads != 0)
      throw ShapeError("embed dim not divisible by head count");
    if (cfg_.embed_dim % 4 != 0) throw ShapeError("embed dim must be divisible by 4");
    if (cfg_.cnn_widths.size() != 4) throw ShapeError("branch expects four widths");
    if (cfg_.input_size % 16 != 0)
      throw ShapeError("input size must be divisible by 16 for the branch");
    grid_ = cfg_.input_size / cfg_.patch_size;
    n_tokens_ = grid_ * grid_;
    const int d = cfg_.embed_dim;
    const int s = cfg_.num_structures;

    patch_ = Conv2dLayer<T>(params_, "enc.patch", "pretrained", 1, d, cfg_.patch_size,
                            cfg_.patch_size, 0);
    pos_ = params_.add("enc.pos", "pretrained", Shape{n_tokens_, d}, Init::kNormal,
                       T(0.02));
    for (int i = 0; i < cfg_.encoder_depth; ++i) {
      const std::string p = "enc.b" + std::to_string(i);
      EncBlock b;
      b.ln1 = LayerNormLayer<T>(params_, p + ".ln1", "pretrained", d);
      b.attn = Mha<T>(params_, p + ".attn", "pretrained", d, d, d, cfg_.num_heads);
      b.ln2 = LayerNormLayer<T>(params_, p + ".ln2", "pretrained", d);
      b.fc1 = Linear<T>(params_, p + ".mlp.fc1", "pretrained", d, 4 * d);
      b.fc2 = Linear<T>(params_, p + ".mlp.fc2", "pretrained", 4 * d, d);
      enc_blocks_.push_back(std::move(b));
    }
    enc_ln_ = LayerNormLayer<T>(params_, "enc.ln", "pretrained", d);

    const auto& cw = cfg_.cnn_widths;
    stem1_ = Conv2dLayer<T>(params_, "branch.stem.c1", "branch", 1, cw[0], 3, 2, 1);
    stem2_ = Conv2dLayer<T>(params_, "branch.stem.c2", "branch", cw[0], cw[0], 3, 2, 1);
    rbs_.emplace_back(params_, "branch.rb1", "branch", cw[0], cw[0], 1);
    rbs_.emplace_back(params_, "branch.rb2", "branch", cw[0], cw[1], 2);
    rbs_.emplace_back(params_, "branch.rb3", "branch", cw[1], cw[2], 2);
    rbs_.emplace_back(params_, "branch.rb4", "branch", cw[2], cw[3], 1);

    for (int k = 1; k <= 4; ++k) {
      const std::string p = "tap" + std::to_string(k);
      Tap t;
      t.after_block = (cfg_.encoder_depth * k + 3) / 4;  // ceil(depth*k/4), 1-indexed
      t.proj = Linear<T>(params_, p + ".proj", "branch", cw[static_cast<size_t>(k - 1)], d);
      t.attn = Mha<T>(params_, p + ".attn", "branch", d, d, d, 1);
      t.gate = params_.add(p + ".gate", "branch", Shape{1}, Init::kZero);
      taps_.push_back(std::move(t));
    }

    // Dense prompt embedder: one stride-2 conv per halving down to the token
    // grid, then a 1x1 onto the embedding width.
    int levels = 0;
    for (int ps = cfg_.patch_size; ps > 1; ps >>= 1) ++levels;
    int cin = s;
    for (int i = 0; i < levels; ++i) {
      const int cout = 8 << i;
      em_convs_.emplace_back(params_, "dec.em.s" + std::to_string(i), "pretrained", cin,
                             cout, 3, 2, 1);
      cin = cout;
    }
    em_out_ = Conv2dLayer<T>(params_, "dec.em.out", "pretrained", cin, d, 1, 1, 0);
    no_mask_ = params_.add("dec.no_mask", "pretrained", Shape{d}, Init::kNormal, T(0.02));
    mask_tokens_ = params_.add("dec.mask_tokens", "head", Shape{s + 1, d}, Init::kNormal,
                               T(0.02));

    for (int i = 0; i < cfg_.num_decoder_blocks; ++i) {
      const std::string grp = i < 2 ? "pretrained" : "decoder_new";
      const std::string p = "dec.b" + std::to_string(i);
      DecBlock b;
      b.qpe = params_.add(p + ".qpe", grp, Shape{s + 1, d}, Init::kNormal, T(0.02));
      b.kpe = params_.add(p + ".kpe", grp, Shape{n_tokens_, d}, Init::kNormal, T(0.02));
      b.self_attn = Mha<T>(params_, p + ".self", grp, d, d, d, cfg_.num_heads);
      b.cross_qk = Mha<T>(params_, p + ".cross_qk", grp, d, d, d, cfg_.num_heads);
      b.cross_kq = Mha<T>(params_, p + ".cross_kq", grp, d, d, d, cfg_.num_heads);
      b.ln1 = LayerNormLayer<T>(params_, p + ".ln1", grp, d);
      b.ln2 = LayerNormLayer<T>(params_, p + ".ln2", grp, d);
      b.ln3 = LayerNormLayer<T>(params_, p + ".ln3", grp, d);
      b.ln4 = LayerNormLayer<T>(params_, p + ".ln4", grp, d);
      b.fc1 = Linear<T>(params_, p + ".mlp.fc1", grp, d, 4 * d);
      b.fc2 = Linear<T>(params_, p + ".mlp.fc2", grp, 4 * d, d);
      dec_blocks_.push_back(std::move(b));
    }

    if (cfg_.lffa) {
      for (int j = 0; j < 4; ++j) {
        fusion_.emplace_back(params_, "lffa.f" + std::to_string(j), "lffa",
                             cw[static_cast<size_t>(j)] + d, d);
        init_fusion_identity_on_keys(fusion_.back(), cw[static_cast<size_t>(j)], d);
      }
    }

    up1_ = Conv2dLayer<T>(params_, "head.up1", "head", d, d / 2, 3, 1, 1);
    up2_ = Conv2dLayer<T>(params_, "head.up2", "head", d / 2, d / 4, 3, 1, 1);
    for (int i = 0; i < s; ++i) {
      const std::string p = "head.hyper" + std::to_string(i);
      Hyper h;
      h.fc1 = Linear<T>(params_, p + ".fc1", "head", d, d);
      h.fc2 = Linear<T>(params_, p + ".fc2", "head", d, d / 4);
      hypers_.push_back(std::move(h));
    }

    if (unet_in_ > 0) {
      unet_ = PromptUnet<T>(params_, "pcm", "pcm", unet_in_, s);
      if (!cfg_.pcmask) params_.set_trainable("pcm", false);
    }
  }

  const ModelConfig& config() const { return cfg_; }
  int unet_in_channels() const { return unet_in_; }
  int grid() const { return grid_; }
  ParamStore<T>& params() { return params_; }
  const ParamStore<T>& params() const { return params_; }
  bool has_unet() const { return unet_in_ > 0; }
  const PromptUnet<T>& unet() const { return unet_; }

  /// Branch features at /4, /8, /16, /16 of the input resolution.
  std::vector<Var<T>> cnn_features(const Var<T>& x) const {
    std::vector<Var<T>> feats;
    Var<T> h = relu(stem2_(relu(stem1_(x))));
    for (const auto& rb : rbs_) {
      h = rb(h);
      feats.push_back(h);
    }
    return feats;
  }

  /// Patch tokens through the transformer, with zero-gated branch taps.
  Var<T> encode(const Var<T>& x, const std::vector<Var<T>>& feats) const {
    Var<T> tok = add(chw_to_tokens(patch_(x)), pos_);
    std::vector<Var<T>> kv;
    for (size_t k = 0; k < taps_.size(); ++k)
      kv.push_back(taps_[k].proj(to_tokens(feats[k])));
    for (size_t i = 0; i < enc_blocks_.size(); ++i) {
      const EncBlock& b = enc_blocks_[i];
      Var<T> h = b.ln1(tok);
      tok = add(tok, b.attn(h, h, h));
      tok = add(tok, b.fc2(gelu(b.fc1(b.ln2(tok)))));
      for (size_t k = 0; k < taps_.size(); ++k)
        if (taps_[k].after_block == static_cast<int>(i) + 1)
          tok = add(tok, scale_by(taps_[k].attn(tok, kv[k], kv[k]), taps_[k].gate));
    }
    return enc_ln_(tok);
  }

  /// Prompt probabilities (S,h,w) -> dense key offsets (n_tokens, d).
  /// The prompt is detached: the decoder never backpropagates into the
  /// prompt U-Net, which learns from its own refinement loss alone.
  Var<T> embed_prompt(const Var<T>& probs) const {
    Var<T> p = detach(probs);
    if (p->value.dim(1) != cfg_.input_size || p->value.dim(2) != cfg_.input_size)
      p = bilinear_resize(p, cfg_.input_size, cfg_.input_size);
    for (const auto& c : em_convs_) p = gelu(c(p));
    return chw_to_tokens(em_out_(p));
  }

  Var<T> embed_no_prompt() const {
    Var<T> zeros = make_leaf<T>(Tensor<T>(Shape{n_tokens_, cfg_.embed_dim}));
    return add_rowbias(zeros, no_mask_);
  }

  /// Two-way decoding to per-structure logits at the input resolution.
  Var<T> decode(const Var<T>& tokens, const Var<T>& dense,
                const std::vector<Var<T>>& feats) const {
    Var<T> q = mask_tokens_;
    Var<T> k = add(tokens, dense);
    const int nb = cfg_.num_decoder_blocks;
    const int fused_start = nb > 4 ? nb - 4 : 0;
    for (int i = 0; i < nb; ++i) {
      if (cfg_.lffa && i >= fused_start && i - fused_start < 4) {
        const int j = i - fused_start;
        Var<T> ct = to_tokens(feats[static_cast<size_t>(j)]);
        k = fusion_[static_cast<size_t>(j)](concat_cols(std::vector<Var<T>>{ct, k}));
      }
      const DecBlock& b = dec_blocks_[static_cast<size_t>(i)];
      Var<T> qp = add(q, b.qpe);
      q = b.ln1(add(q, b.self_attn(qp, qp, q)));
      qp = add(q, b.qpe);
      Var<T> kp = add(k, b.kpe);
      q = b.ln2(add(q, b.cross_qk(qp, kp, k)));
      q = b.ln3(add(q, b.fc2(gelu(b.fc1(q)))));
      qp = add(q, b.qpe);
      k = b.ln4(add(k, b.cross_kq(kp, qp, q)));
    }

    Var<T> x = tokens_to_chw(k, grid_, grid_);
    x = gelu(up1_(bilinear_resize(x, 2 * grid_, 2 * grid_)));
    x = gelu(up2_(bilinear_resize(x, 4 * grid_, 4 * grid_)));
    Var<T> flat = chw_to_tokens(x);  // (16*grid^2, d/4)
    std::vector<Var<T>> maps;
    for (int s = 0; s < cfg_.num_structures; ++s) {
      const Hyper& h = hypers_[static_cast<size_t>(s)];
      Var<T> w = h.fc2(gelu(h.fc1(slice_dim0(q, s, 1))));  // (1, d/4)
      maps.push_back(reshape(matmul_nt(flat, w), Shape{1, 4 * grid_, 4 * grid_}));
    }
    Var<T> logits = concat_dim0(maps);
    if (4 * grid_ != cfg_.input_size)
      logits = bilinear_resize(logits, cfg_.input_size, cfg_.input_size);
    return logits;
  }

  /// End-to-end forward. `prior` is the composed prior stack (unet_in, h, w)
  /// or nullptr for unprompted decoding. The prompt path also requires the
  /// model to have been built with a U-Net and prompting enabled.
  Forward forward(const Tensor<T>& image01, const Tensor<T>* prior) const {
    if (image01.rank() != 2 || image01.dim(0) != cfg_.input_size ||
        image01.dim(1) != cfg_.input_size)
      throw ShapeError("model expects " + std::to_string(cfg_.input_size) + "x" +
                       std::to_string(cfg_.input_size) + " input, got " +
                       shape_str(image01.shape()));
    Var<T> x = make_leaf<T>(
        image01.reshaped(Shape{1, cfg_.input_size, cfg_.input_size}));
    std::vector<Var<T>> feats = cnn_features(x);
    Var<T> tokens = encode(x, feats);
    Forward out;
    Var<T> dense;
    if (prior != nullptr && has_unet() && cfg_.pcmask) {
      if (prior->rank() != 3 || prior->dim(0) != unet_in_)
        throw ShapeMismatch("prior stack expects " + std::to_string(unet_in_) +
                            " channels, got " + shape_str(prior->shape()));
      out.pcm_probs = unet_(make_leaf<T>(*prior));
      dense = embed_prompt(out.pcm_probs);
    } else {
      dense = embed_no_prompt();
    }
    out.logits = decode(tokens, dense, feats);
    return out;
  }

 private:
  struct EncBlock {
    LayerNormLayer<T> ln1, ln2;
    Mha<T> attn;
    Linear<T> fc1, fc2;
  };
  struct Tap {
    int after_block = 0;
    Linear<T> proj;
    Mha<T> attn;
    Var<T> gate;
  };
  struct DecBlock {
    Var<T> qpe, kpe;
    Mha<T> self_attn, cross_qk, cross_kq;
    LayerNormLayer<T> ln1, ln2, ln3, ln4;
    Linear<T> fc1, fc2;
  };
  struct Hyper {
    Linear<T> fc1, fc2;
  };

  /// Branch feature (c,hf,wf) -> tokens (n_tokens, c) on the patch grid.
  Var<T> to_tokens(const Var<T>& f) const {
    Var<T> g = f;
    if (f->value.dim(1) != grid_ || f->value.dim(2) != grid_)
      g = bilinear_resize(f, grid_, grid_);
    return chw_to_tokens(g);
  }

  /// Fusion starts as a projection that returns the key block unchanged:
  /// W = [0; I], b = 0, so enabling fusion does not move the initial output.
  static void init_fusion_identity_on_keys(Linear<T>& f, int c, int d) {
    f.w->value.array().setZero();
    for (int r = 0; r < d; ++r) f.w->value.at(c + r, r) = T(1);
    f.b->value.array().setZero();
  }

  ModelConfig cfg_;
  int unet_in_ = 0;
  int grid_ = 0, n_tokens_ = 0;
  ParamStore<T> params_;

  Conv2dLayer<T> patch_;
  Var<T> pos_;
  std::vector<EncBlock> enc_blocks_;
  LayerNormLayer<T> enc_ln_;

  Conv2dLayer<T> stem1_, stem2_;
  std::vector<ResBlock<T>> rbs_;
  std::vector<Tap> taps_;

  std::vector<Conv2dLayer<T>> em_convs_;
  Conv2dLayer<T> em_out_;
  Var<T> no_mask_, mask_tokens_;
  std::vector<DecBlock> dec_blocks_;
  std::vector<Linear<T>> fusion_;
  Conv2dLayer<T> up1_, up2_;
  std::vector<Hyper> hypers_;

  PromptUnet<T> unet_;
};

}  // namespace echoone
