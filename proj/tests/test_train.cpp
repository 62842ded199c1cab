// Copyright (c) 2026 The echoone Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <echoone/core/hash.hpp>
#include <echoone/metrics/metrics.hpp>
#include <echoone/train/augment.hpp>
#include <echoone/train/engine.hpp>

#include "support/synthetic.hpp"

using namespace echoone;
namespace fs = std::filesystem;
namespace ts = echoone::testsupport;

namespace {

fs::path temp_dir(const char* name) {
  fs::path dir = fs::temp_directory_path() / "echoone_train" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

ModelConfig tiny_cfg(std::uint64_t seed = 11) {
  ModelConfig c;
  c.input_size = 32;
  c.patch_size = 8;
  c.embed_dim = 16;
  c.encoder_depth = 2;
  c.num_heads = 2;
  c.num_decoder_blocks = 5;
  c.num_structures = 3;
  c.cnn_widths = {4, 8, 8, 8};
  c.seed = seed;
  return c;
}

std::vector<ManifestRecord> toy_records(const fs::path& dir, int per_plane,
                                        std::uint64_t seed = 9) {
  ts::ToyOptions opt;
  opt.size = 32;
  opt.seed = seed;
  return ts::write_unified_records(dir.string(), per_plane, opt);
}

TrainSettings fast_settings(int epochs, std::uint64_t seed = 5) {
  TrainSettings st;
  st.epochs = epochs;
  st.lr = 1e-3f;
  st.batch_size = 4;
  st.seed = seed;
  return st;
}

BundleInfo info_for(const SegModel<float>& model, const std::string& runconfig) {
  BundleInfo info;
  info.config = model.config();
  info.unet_in_channels = model.unet_in_channels();
  info.runconfig = runconfig;
  return info;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<Json> read_log(const fs::path& p) {
  std::ifstream in(p);
  std::vector<Json> lines;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) lines.push_back(Json::parse(line));
  return lines;
}

}  // namespace

TEST_CASE("augment plans consume a fixed stream budget") {
  AugmentParams always;
  always.prob = 1.0;
  AugmentParams never;
  never.prob = 0.0;

  Rng a(42), b(42);
  for (int i = 0; i < 50; ++i) {
    AugmentPlan pa = draw_augment_plan(a, always);
    AugmentPlan pb = draw_augment_plan(b, never);
    // Same number of draws regardless of which transforms fire.
    CHECK(a.state() == b.state());

    CHECK(pa.rotate);
    CHECK(pa.rescale);
    CHECK(pa.contrast);
    CHECK(pa.gamma);
    CHECK(std::abs(pa.angle_deg) <= always.rot_deg);
    CHECK(pa.scale_f >= always.scale_lo);
    CHECK(pa.scale_f <= always.scale_hi);

    // Disabled transforms read as exact no-ops.
    CHECK(!pb.rotate);
    CHECK(pb.angle_deg == 0);
    CHECK(pb.scale_f == 1);
    CHECK(pb.contrast_f == 1);
    CHECK(pb.gamma_g == 1);
  }

  // Identical seeds and params give identical plans.
  Rng c(7), d(7);
  AugmentParams p;
  for (int i = 0; i < 20; ++i) {
    AugmentPlan pc = draw_augment_plan(c, p);
    AugmentPlan pd = draw_augment_plan(d, p);
    CHECK(pc.rotate == pd.rotate);
    CHECK(pc.angle_deg == pd.angle_deg);
    CHECK(pc.scale_f == pd.scale_f);
    CHECK(pc.contrast_f == pd.contrast_f);
    CHECK(pc.gamma_g == pd.gamma_g);
  }
}

TEST_CASE("apply_augment transforms image and mask coherently") {
  Rng rng(12);
  const int n = 8;
  Tensor<float> img(Shape{n, n});
  GrayImage mask(n, n);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      img.at(y, x) = static_cast<float>(rng.uniform());
      mask.at(y, x) = static_cast<std::uint8_t>((y * n + x) % 4);
    }

  // Neutral plan: bit-identical passthrough.
  {
    Tensor<float> i2 = img;
    GrayImage m2 = mask;
    apply_augment(i2, m2, AugmentPlan{});
    for (Eigen::Index i = 0; i < img.size(); ++i) CHECK(i2[i] == img[i]);
    CHECK(m2.pix == mask.pix);
  }

  // Resampling with neutral magnitudes maps the grid onto itself exactly.
  {
    Tensor<float> i2 = img;
    GrayImage m2 = mask;
    AugmentPlan plan;
    plan.rotate = true;
    plan.angle_deg = 0;
    plan.scale_f = 1;
    apply_augment(i2, m2, plan);
    for (Eigen::Index i = 0; i < img.size(); ++i) CHECK(i2[i] == img[i]);
    CHECK(m2.pix == mask.pix);
  }

  // A half turn flips the mask across both axes.
  {
    Tensor<float> i2 = img;
    GrayImage m2 = mask;
    AugmentPlan plan;
    plan.rotate = true;
    plan.angle_deg = 180;
    apply_augment(i2, m2, plan);
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x)
        CHECK(m2.at(y, x) == mask.at(n - 1 - y, n - 1 - x));
    // Border pixels map 4e-16 outside the grid and read the zero fill, so
    // the bilinear comparison only holds on the interior.
    for (int y = 1; y < n - 1; ++y)
      for (int x = 1; x < n - 1; ++x)
        CHECK(i2.at(y, x) ==
              doctest::Approx(img.at(n - 1 - y, n - 1 - x)).epsilon(1e-4));
  }

  // Contrast pivots around 0.5 and clamps; the mask is untouched.
  {
    Tensor<float> i2 = img;
    GrayImage m2 = mask;
    AugmentPlan plan;
    plan.contrast = true;
    plan.contrast_f = 1.7;
    apply_augment(i2, m2, plan);
    for (Eigen::Index i = 0; i < img.size(); ++i) {
      const float expect =
          std::min(1.0f, std::max(0.0f, (img[i] - 0.5f) * 1.7f + 0.5f));
      CHECK(i2[i] == doctest::Approx(expect).epsilon(1e-6));
    }
    CHECK(m2.pix == mask.pix);
  }

  // Gamma exponentiates intensities in place.
  {
    Tensor<float> i2 = img;
    GrayImage m2 = mask;
    AugmentPlan plan;
    plan.gamma = true;
    plan.gamma_g = 0.8;
    apply_augment(i2, m2, plan);
    for (Eigen::Index i = 0; i < img.size(); ++i)
      CHECK(i2[i] == doctest::Approx(std::pow(img[i], 0.8f)).epsilon(1e-5));
    CHECK(m2.pix == mask.pix);
  }

  // Upscaling keeps the exact center pixel in place.
  {
    Tensor<float> i2 = img;
    GrayImage m2 = mask;
    AugmentPlan plan;
    plan.rescale = true;
    plan.scale_f = 2.0;
    apply_augment(i2, m2, plan);
    // n=8: center sits between pixels; map a known corner-ish probe instead.
    // Pixel (cy,cx)=(3.5,3.5): source of (3,3) is (3.25,3.25).
    const float expect = 0.75f * (0.75f * img.at(3, 3) + 0.25f * img.at(3, 4)) +
                         0.25f * (0.75f * img.at(4, 3) + 0.25f * img.at(4, 4));
    CHECK(i2.at(3, 3) == doctest::Approx(expect).epsilon(1e-5));
  }
}

TEST_CASE("training runs are bitwise reproducible") {
  fs::path data = temp_dir("repro_data");
  std::vector<ManifestRecord> recs = toy_records(data, 2);  // 8 images
  fs::path out_a = temp_dir("repro_a");
  fs::path out_b = temp_dir("repro_b");

  RunResult ra, rb;
  SegModel<float> model_a(tiny_cfg(), 0);
  SegModel<float> model_b(tiny_cfg(), 0);
  {
    Trainer t(model_a, nullptr, nullptr, fast_settings(2), recs, recs);
    ra = t.run(out_a.string(), info_for(model_a, "rc0"));
  }
  {
    Trainer t(model_b, nullptr, nullptr, fast_settings(2), recs, recs);
    rb = t.run(out_b.string(), info_for(model_b, "rc0"));
  }

  CHECK(ra.epochs_run == 2);
  CHECK(ra.epochs_run == rb.epochs_run);
  CHECK(ra.best_val_mdice == rb.best_val_mdice);
  CHECK(ra.best_epoch == rb.best_epoch);

  auto va = model_a.params().named_values();
  auto vb = model_b.params().named_values();
  REQUIRE(va.size() == vb.size());
  for (const auto& [name, t] : va) {
    const Tensor<float>& u = vb.at(name);
    for (Eigen::Index i = 0; i < t.size(); ++i) CHECK(u[i] == t[i]);
  }

  CHECK(slurp(out_a / "log.jsonl") == slurp(out_b / "log.jsonl"));
  CHECK(file_hash_hex((out_a / "bundle.bin").string()) ==
        file_hash_hex((out_b / "bundle.bin").string()));
  CHECK(file_hash_hex((out_a / "ckpt.bin").string()) ==
        file_hash_hex((out_b / "ckpt.bin").string()));

  // The saved bundle records the best validation epoch it was written at.
  LoadedBundle lb = load_bundle((out_a / "bundle.bin").string());
  CHECK(lb.info.epochs_trained == ra.best_epoch);
  CHECK(lb.info.best_val_mdice == ra.best_val_mdice);
}

TEST_CASE("checkpoint resume matches the continuous run bit for bit") {
  fs::path data = temp_dir("resume_data");
  std::vector<ManifestRecord> recs = toy_records(data, 2);
  fs::path out_a = temp_dir("resume_a");
  fs::path out_b = temp_dir("resume_b");

  // Continuous four epochs.
  SegModel<float> model_a(tiny_cfg(), 0);
  RunResult ra;
  {
    Trainer t(model_a, nullptr, nullptr, fast_settings(4), recs, recs);
    ra = t.run(out_a.string(), info_for(model_a, "rc1"));
  }

  // Two epochs, then a fresh process picks up the checkpoint.
  {
    SegModel<float> model(tiny_cfg(), 0);
    Trainer t(model, nullptr, nullptr, fast_settings(2), recs, recs);
    t.run(out_b.string(), info_for(model, "rc1"));
  }
  SegModel<float> model_b(tiny_cfg(), 0);
  RunResult rb;
  {
    Trainer t(model_b, nullptr, nullptr, fast_settings(4), recs, recs);
    rb = t.run(out_b.string(), info_for(model_b, "rc1"),
               (out_b / "ckpt.bin").string());
  }

  CHECK(rb.epochs_run == 4);
  CHECK(rb.best_val_mdice == ra.best_val_mdice);
  CHECK(rb.best_epoch == ra.best_epoch);

  auto va = model_a.params().named_values();
  auto vb = model_b.params().named_values();
  for (const auto& [name, t] : va) {
    const Tensor<float>& u = vb.at(name);
    for (Eigen::Index i = 0; i < t.size(); ++i) CHECK(u[i] == t[i]);
  }

  CHECK(slurp(out_a / "log.jsonl") == slurp(out_b / "log.jsonl"));
  CHECK(file_hash_hex((out_a / "ckpt.bin").string()) ==
        file_hash_hex((out_b / "ckpt.bin").string()));
  CHECK(file_hash_hex((out_a / "bundle.bin").string()) ==
        file_hash_hex((out_b / "bundle.bin").string()));

  // A checkpoint from a different run configuration is refused.
  SegModel<float> model_c(tiny_cfg(), 0);
  Trainer t(model_c, nullptr, nullptr, fast_settings(4), recs, recs);
  CHECK_THROWS_AS(t.run(temp_dir("resume_c").string(), info_for(model_c, "other"),
                        (out_b / "ckpt.bin").string()),
                  DataError);
}

TEST_CASE("epoch log carries the full loss breakdown") {
  fs::path data = temp_dir("log_data");
  std::vector<ManifestRecord> recs = toy_records(data, 1);  // 4 images
  fs::path out = temp_dir("log_out");

  SegModel<float> model(tiny_cfg(), 0);
  TrainSettings st = fast_settings(3);
  st.val_every = 2;
  Trainer t(model, nullptr, nullptr, st, recs, recs);
  t.run(out.string(), info_for(model, "rc2"));

  std::vector<Json> lines = read_log(out / "log.jsonl");
  REQUIRE(lines.size() == 3);
  for (size_t i = 0; i < lines.size(); ++i) {
    const Json& l = lines[i];
    CHECK(l.at("epoch").get<int>() == static_cast<int>(i) + 1);
    CHECK(l.at("l_seg").get<double>() > 0);
    CHECK(l.at("l_pcm").get<double>() == 0);  // no prompt path configured
    CHECK(l.at("l_total").get<double>() == l.at("l_seg").get<double>());
  }
  CHECK(lines[0].at("val_mdice").is_null());    // epoch 1: skipped
  CHECK(lines[1].at("val_mdice").is_number());  // epoch 2: val_every
  CHECK(lines[2].at("val_mdice").is_number());  // epoch 3: final epoch
}

TEST_CASE("prompted training logs and trains the refinement loss") {
  fs::path data = temp_dir("prompt_data");
  std::vector<ManifestRecord> recs = toy_records(data, 1);
  fs::path out = temp_dir("prompt_out");

  EncoderConfig ec;
  ec.input_size = 16;
  ec.base_width = 4;
  ec.seed = 3;
  LatentEncoder encoder(
      ec, {Plane::k2CH, Plane::k3CH, Plane::k4CH, Plane::kPSAX});

  Rng rng(20);
  PriorAtlas atlas;
  atlas.k = 2;
  atlas.embed_dim = encoder.embed_dim();
  atlas.num_structures = 3;
  atlas.mask_size = 16;
  atlas.prototypes = Tensor<float>(Shape{2, encoder.embed_dim()});
  for (Eigen::Index i = 0; i < atlas.prototypes.size(); ++i)
    atlas.prototypes[i] = static_cast<float>(rng.uniform(0.1, 1.0));
  atlas.center_masks = Tensor<float>(Shape{2, 3, 16, 16});
  for (Eigen::Index i = 0; i < atlas.center_masks.size(); ++i)
    atlas.center_masks[i] = static_cast<float>(rng.uniform(0.0, 1.0));

  SegModel<float> model(tiny_cfg(), 6);
  Trainer t(model, &atlas, &encoder, fast_settings(2), recs, recs);
  RunResult res = t.run(out.string(), info_for(model, "rc3"));
  CHECK(res.epochs_run == 2);

  std::vector<Json> lines = read_log(out / "log.jsonl");
  REQUIRE(lines.size() == 2);
  for (const Json& l : lines) {
    CHECK(l.at("l_pcm").get<double>() > 0);
    // Totals are accumulated in float on the tape, so compare at float grain.
    CHECK(l.at("l_total").get<double>() ==
          doctest::Approx(l.at("l_seg").get<double>() +
                          0.5 * l.at("l_pcm").get<double>())
              .epsilon(1e-5));
  }

  // Structure-count disagreement between atlas and model is refused up front.
  PriorAtlas bad = atlas;
  bad.num_structures = 2;
  SegModel<float> m2(tiny_cfg(), 6);
  CHECK_THROWS_AS(Trainer(m2, &bad, &encoder, fast_settings(1), recs, recs),
                  ShapeMismatch);
}

TEST_CASE("validation reproduces the documented dice average") {
  fs::path data = temp_dir("val_data");
  std::vector<ManifestRecord> recs = toy_records(data, 1);
  SegModel<float> model(tiny_cfg(), 0);
  Trainer t(model, nullptr, nullptr, fast_settings(1), recs, recs);

  PredictContext ctx;
  ctx.model = &model;
  double expect = 0;
  const int in = model.config().input_size;
  for (const auto& r : recs) {
    Tensor<float> img = image_to_tensor<float>(read_png_gray(r.image_path));
    GrayImage gt = read_png_gray(r.mask_path);
    std::vector<GrayImage> pred =
        predict_masks(ctx, resize_tensor_bilinear(img, in, in));
    GrayImage gtr = resize_mask_nearest(gt, in, in);
    double d = 0;
    for (int c = 0; c < 3; ++c) {
      GrayImage b(in, in);
      for (size_t i = 0; i < b.pix.size(); ++i) b.pix[i] = gtr.pix[i] == c + 1;
      d += dice(pred[static_cast<size_t>(c)], b);
    }
    expect += d / 3;
  }
  expect /= static_cast<double>(recs.size());
  CHECK(t.validate() == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("trainer rejects unusable inputs") {
  fs::path data = temp_dir("reject_data");
  std::vector<ManifestRecord> recs = toy_records(data, 1);

  SegModel<float> model(tiny_cfg(), 0);
  CHECK_THROWS_AS(Trainer(model, nullptr, nullptr, fast_settings(1), {}, recs),
                  InsufficientData);

  // Mask resolution must match the image it annotates.
  fs::path bad = temp_dir("reject_badmask");
  GrayImage img(32, 32, 100);
  GrayImage small_mask(16, 16, 1);
  ManifestRecord r;
  r.image_path = (bad / "2CH_0.png").string();
  r.mask_path = (bad / "2CH_0_mask.png").string();
  r.plane = Plane::k2CH;
  r.subject_id = "s0";
  r.dataset_id = "toy";
  write_png_gray(r.image_path, img);
  write_png_gray(r.mask_path, small_mask);
  CHECK_THROWS_AS(Trainer(model, nullptr, nullptr, fast_settings(1), {r}, {r}),
                  ShapeMismatch);
}

TEST_CASE("freeze flag pins the pretrained group") {
  fs::path data = temp_dir("freeze_data");
  std::vector<ManifestRecord> recs = toy_records(data, 1);
  SegModel<float> model(tiny_cfg(), 0);
  TrainSettings st = fast_settings(1);
  st.freeze_pretrained = true;
  Trainer t(model, nullptr, nullptr, st, recs, recs);

  auto frozen = model.params().named_values();
  for (const auto& e : model.params().entries())
    CHECK(e.var->requires_grad == (e.group != "pretrained"));

  // After an epoch of optimization the frozen tensors are untouched.
  t.run(temp_dir("freeze_out").string(), info_for(model, "rc4"));
  for (const auto& e : model.params().entries()) {
    if (e.group != "pretrained") continue;
    const Tensor<float>& before = frozen.at(e.name);
    for (Eigen::Index i = 0; i < before.size(); ++i)
      CHECK(e.var->value[i] == before[i]);
  }
}

TEST_CASE("early stopping honors the validation target") {
  fs::path data = temp_dir("stop_data");
  std::vector<ManifestRecord> recs = toy_records(data, 1);
  fs::path out = temp_dir("stop_out");

  SegModel<float> model(tiny_cfg(), 0);
  TrainSettings st = fast_settings(60);
  st.lr = 3e-3f;
  st.target_val_mdice = 1e-12;  // any nonzero overlap satisfies this
  Trainer t(model, nullptr, nullptr, st, recs, recs);
  RunResult res = t.run(out.string(), info_for(model, "rc5"));

  // A fresh model may predict all-background for a few epochs (dice 0), so
  // the guarantee is that the loop halts the epoch the target is first met.
  CHECK(res.epochs_to_target >= 1);
  CHECK(res.epochs_run == res.epochs_to_target);
  CHECK(res.epochs_run < st.epochs);
  std::vector<Json> lines = read_log(out / "log.jsonl");
  REQUIRE(static_cast<int>(lines.size()) == res.epochs_run);
  CHECK(lines.back().at("val_mdice").get<double>() >= st.target_val_mdice);
  CHECK(fs::exists(out / "bundle.bin"));
  CHECK(fs::exists(out / "ckpt.bin"));
}

TEST_CASE("non-finite losses abort with a numerical failure") {
  fs::path data = temp_dir("nan_data");
  std::vector<ManifestRecord> recs = toy_records(data, 1);
  SegModel<float> model(tiny_cfg(), 0);
  Trainer t(model, nullptr, nullptr, fast_settings(1), recs, recs);

  for (const auto& e : model.params().entries())
    if (e.name == "enc.patch.w")
      e.var->value[0] = std::numeric_limits<float>::infinity();
  CHECK_THROWS_AS(t.run(temp_dir("nan_out").string(), info_for(model, "rc6")),
                  NumericalFailure);
}
