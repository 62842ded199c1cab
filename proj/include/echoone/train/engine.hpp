// Copyright (c) 2026 The echoone Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "echoone/metrics/metrics.hpp"
#include "echoone/model/bundle.hpp"
#include "echoone/model/predict.hpp"
#include "echoone/train/adam.hpp"
#include "echoone/train/augment.hpp"
#include "echoone/train/losses.hpp"

namespace echoone {

inline constexpr const char* kCheckpointTag = "ECHOONE-CKPT-v1";

struct TrainSettings {
  int epochs = 100;
  float lr = 1e-4f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float lambda_pcm = 0.5f;
  float dice_w = 0.8f;
  float bce_w = 0.2f;
  int batch_size = 8;
  std::uint64_t seed = 0;
  bool freeze_pretrained = false;
  bool cosine_lr = false;
  AugmentParams aug;
  int val_every = 1;
  double target_val_mdice = 0;  // 0 disables early stopping
  int checkpoint_every = 1;
};

struct RunResult {
  int epochs_run = 0;
  double best_val_mdice = -1;
  int best_epoch = 0;
  int epochs_to_target = -1;  // -1: target disabled or never reached
};

/// Single-threaded deterministic training loop. Given the same inputs, seed
/// and settings, the parameter bits after epoch N are identical whether the
/// run was continuous or checkpoint-resumed anywhere before N.
class Trainer {
 public:
  Trainer(SegModel<float>& model, const PriorAtlas* atlas, const LatentEncoder* encoder,
          TrainSettings st, const std::vector<ManifestRecord>& train_recs,
          const std::vector<ManifestRecord>& val_recs)
      : model_(model), atlas_(atlas), encoder_(encoder), st_(st),
        opt_(model.params(), st.lr, st.beta1, st.beta2), rng_(st.seed) {
    if (train_recs.empty()) throw InsufficientData("no training records");
    load_items(train_recs, train_);
    load_items(val_recs.empty() ? train_recs : val_recs, val_);
    if (st_.freeze_pretrained) model_.params().set_trainable("pretrained", false);
    ctx_ = PredictContext{&model_, atlas_, encoder_};
    if (ctx_.prompted() && atlas_->num_structures != model_.config().num_structures)
      throw ShapeMismatch("atlas structure count differs from model");
  }

  RunResult run(const std::string& out_dir, BundleInfo info,
                const std::string& resume_ckpt = "") {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    const std::string log_path = (fs::path(out_dir) / "log.jsonl").string();
    const std::string ckpt_path = (fs::path(out_dir) / "ckpt.bin").string();
    const std::string bundle_path = (fs::path(out_dir) / "bundle.bin").string();

    int start_epoch = 1;
    RunResult res;
    if (!resume_ckpt.empty()) {
      start_epoch = load_checkpoint(resume_ckpt, info.runconfig, res) + 1;
      res.epochs_run = start_epoch - 1;
    }
    std::ofstream log(log_path, resume_ckpt.empty() ? std::ios::trunc : std::ios::app);
    if (!log) throw DataError("cannot open " + log_path);

    for (int epoch = start_epoch; epoch <= st_.epochs; ++epoch) {
      if (st_.cosine_lr) {
        const double u = st_.epochs > 1
                             ? static_cast<double>(epoch - 1) / (st_.epochs - 1)
                             : 0.0;
        opt_.set_lr(static_cast<float>(st_.lr * 0.5 * (1.0 + std::cos(3.14159265358979323846 * u))));
      }
      EpochStats es = run_epoch();
      res.epochs_run = epoch;

      Json line;
      line["epoch"] = epoch;
      line["l_seg"] = es.l_seg;
      line["l_pcm"] = es.l_pcm;
      line["l_total"] = es.l_total;
      const bool do_val = epoch % st_.val_every == 0 || epoch == st_.epochs;
      double vmd = -1;
      if (do_val) {
        vmd = validate();
        line["val_mdice"] = vmd;
      } else {
        line["val_mdice"] = nullptr;
      }
      log << line.dump() << "\n";
      log.flush();

      if (do_val && vmd > res.best_val_mdice) {
        res.best_val_mdice = vmd;
        res.best_epoch = epoch;
        info.epochs_trained = epoch;
        info.best_val_mdice = vmd;
        save_bundle(bundle_path, model_, info);
      }
      const bool reached = st_.target_val_mdice > 0 && do_val && vmd >= st_.target_val_mdice;
      if (reached && res.epochs_to_target < 0) res.epochs_to_target = epoch;
      if (epoch % st_.checkpoint_every == 0 || epoch == st_.epochs || reached)
        save_checkpoint(ckpt_path, info.runconfig, epoch, res);
      if (reached) break;
    }
    return res;
  }

  /// Mean over held-out images of the structure-averaged dice between
  /// thresholded predictions and ground truth at the model resolution.
  double validate() const {
    const int in = model_.config().input_size;
    const int s = model_.config().num_structures;
    double total = 0;
    for (const auto& item : val_) {
      Tensor<float> x = resize_tensor_bilinear(item.img, in, in);
      GrayImage gt = resize_mask_nearest(item.mask, in, in);
      std::vector<GrayImage> pred = predict_masks(ctx_, x);
      double d = 0;
      for (int c = 0; c < s; ++c) {
        GrayImage gts(in, in);
        for (int i = 0; i < in * in; ++i)
          gts.pix[static_cast<size_t>(i)] = gt.pix[static_cast<size_t>(i)] == c + 1;
        d += dice(pred[static_cast<size_t>(c)], gts);
      }
      total += d / s;
    }
    return total / static_cast<double>(val_.size());
  }

  long step_count() const { return opt_.step_count(); }

 private:
  struct Item {
    Tensor<float> img;  // native resolution, [0,1]
    GrayImage mask;
  };
  struct EpochStats {
    double l_seg = 0, l_pcm = 0, l_total = 0;
  };

  void load_items(const std::vector<ManifestRecord>& recs, std::vector<Item>& out) {
    for (const auto& r : recs) {
      Item it;
      it.img = image_to_tensor<float>(read_png_gray(r.image_path));
      it.mask = read_png_gray(r.mask_path);
      if (it.mask.h != it.img.dim(0) || it.mask.w != it.img.dim(1))
        throw ShapeMismatch("mask resolution differs from image: " + r.mask_path);
      out.push_back(std::move(it));
    }
  }

  EpochStats run_epoch() {
    const int in = model_.config().input_size;
    const int s = model_.config().num_structures;
    const bool prompted = ctx_.prompted();
    const bool train_pcm = prompted && st_.lambda_pcm > 0;
    std::vector<int> order(train_.size());
    std::iota(order.begin(), order.end(), 0);
    rng_.shuffle(order.begin(), order.end());

    EpochStats es;
    for (size_t start = 0; start < order.size();
         start += static_cast<size_t>(st_.batch_size)) {
      const size_t end =
          std::min(order.size(), start + static_cast<size_t>(st_.batch_size));
      model_.params().zero_grads();
      Var<float> batch_loss;
      for (size_t i = start; i < end; ++i) {
        const Item& item = train_[static_cast<size_t>(order[i])];
        Tensor<float> img = item.img;
        GrayImage mask = item.mask;
        AugmentPlan plan = draw_augment_plan(rng_, st_.aug);
        apply_augment(img, mask, plan);

        Tensor<float> x = resize_tensor_bilinear(img, in, in);
        Tensor<float> seg_t = one_hot_mask<float>(resize_mask_nearest(mask, in, in), s);

        Tensor<float> prior;
        if (prompted) prior = image_prior(ctx_, img);
        SegModel<float>::Forward fwd = model_.forward(x, prompted ? &prior : nullptr);

        Var<float> ls = seg_loss(fwd.logits, seg_t, st_.dice_w, st_.bce_w);
        Var<float> sample = ls;
        double lp_val = 0;
        if (prompted && fwd.pcm_probs) {
          const int ms = fwd.pcm_probs->value.dim(1);
          Tensor<float> pcm_t =
              one_hot_mask<float>(resize_mask_nearest(mask, ms, ms), s);
          Var<float> lp = pcm_loss(fwd.pcm_probs, pcm_t, st_.dice_w, st_.bce_w);
          lp_val = static_cast<double>(lp->value[0]);
          if (train_pcm) sample = add(ls, scale(lp, st_.lambda_pcm));
        }
        es.l_seg += static_cast<double>(ls->value[0]);
        es.l_pcm += lp_val;
        es.l_total += static_cast<double>(sample->value[0]);
        batch_loss = batch_loss ? add(batch_loss, sample) : sample;
      }
      batch_loss = scale(batch_loss, 1.0f / static_cast<float>(end - start));
      if (!std::isfinite(batch_loss->value[0]))
        throw NumericalFailure("non-finite loss at optimizer step " +
                               std::to_string(opt_.step_count() + 1));
      backward(batch_loss);
      opt_.step();
    }
    const double n = static_cast<double>(train_.size());
    es.l_seg /= n;
    es.l_pcm /= n;
    es.l_total /= n;
    return es;
  }

  void save_checkpoint(const std::string& path, const std::string& runconfig, int epoch,
                       const RunResult& res) const {
    Archive ar(kCheckpointTag);
    ar.meta()["epoch"] = epoch;
    ar.meta()["adam_t"] = opt_.step_count();
    ar.meta()["rng_state"] = rng_.state();
    ar.meta()["best_val_mdice"] = res.best_val_mdice;
    ar.meta()["best_epoch"] = res.best_epoch;
    ar.meta()["epochs_to_target"] = res.epochs_to_target;
    ar.meta()["runconfig"] = runconfig;
    for (const auto& [name, t] : model_.params().named_values()) ar.add_f32(name, t);
    for (const auto& [name, t] : opt_.state()) ar.add_f32(name, t);
    ar.save(path);
  }

  /// Returns the last completed epoch.
  int load_checkpoint(const std::string& path, const std::string& runconfig,
                      RunResult& res) {
    Archive ar = Archive::load_expect(path, kCheckpointTag);
    if (ar.meta().at("runconfig").get<std::string>() != runconfig)
      throw DataError("checkpoint was written by a different run configuration");
    std::map<std::string, Tensor<float>> params, moments;
    for (const auto& [name, blob] : ar.blobs()) {
      if (name.rfind("m.", 0) == 0 || name.rfind("v.", 0) == 0)
        moments.emplace(name, blob.as_f32());
      else
        params.emplace(name, blob.as_f32());
    }
    model_.params().load_values(params);
    opt_.load_state(moments, ar.meta().at("adam_t").get<long>());
    rng_.set_state(ar.meta().at("rng_state").get<std::uint64_t>());
    res.best_val_mdice = ar.meta().at("best_val_mdice").get<double>();
    res.best_epoch = ar.meta().at("best_epoch").get<int>();
    res.epochs_to_target = ar.meta().at("epochs_to_target").get<int>();
    return ar.meta().at("epoch").get<int>();
  }

  SegModel<float>& model_;
  const PriorAtlas* atlas_;
  const LatentEncoder* encoder_;
  TrainSettings st_;
  Adam<float> opt_;
  Rng rng_;
  PredictContext ctx_;
  std::vector<Item> train_, val_;
};

}  // namespace echoone
