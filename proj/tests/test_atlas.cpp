// Copyright (c) 2026 The echoone Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>
#include <vector>

#include <echoone/atlas/atlas.hpp>
#include <echoone/atlas/encoder.hpp>
#include <echoone/atlas/kmeans.hpp>
#include <echoone/core/hash.hpp>

#include "support/synthetic.hpp"

using namespace echoone;
namespace fs = std::filesystem;
namespace ts = echoone::testsupport;

namespace {

fs::path temp_dir(const char* name) {
  fs::path dir = fs::temp_directory_path() / "echoone_atlas" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

MatX<double> three_blobs(int per_blob, Rng& rng) {
  const double centers[3][2] = {{0, 0}, {10, 0}, {0, 10}};
  MatX<double> pts(3 * per_blob, 2);
  for (int b = 0; b < 3; ++b)
    for (int i = 0; i < per_blob; ++i) {
      pts(b * per_blob + i, 0) = centers[b][0] + rng.normal() * 0.3;
      pts(b * per_blob + i, 1) = centers[b][1] + rng.normal() * 0.3;
    }
  return pts;
}

}  // namespace

TEST_CASE("kmeans recovers well-separated blobs") {
  Rng rng(101);
  MatX<double> pts = three_blobs(12, rng);
  Rng krng(5);
  KmeansResult res = kmeans(pts, 3, krng);

  // Every blob lands in exactly one cluster and the clusters differ.
  std::set<int> blob_clusters;
  for (int b = 0; b < 3; ++b) {
    const int c0 = res.assignments[static_cast<size_t>(b * 12)];
    for (int i = 1; i < 12; ++i)
      CHECK(res.assignments[static_cast<size_t>(b * 12 + i)] == c0);
    blob_clusters.insert(c0);
  }
  CHECK(blob_clusters.size() == 3);

  // The refinement objective never increases.
  for (size_t i = 1; i < res.objective_per_iter.size(); ++i)
    CHECK(res.objective_per_iter[i] <= res.objective_per_iter[i - 1] + 1e-12);

  // Assignments are the nearest centroid.
  for (int p = 0; p < pts.rows(); ++p) {
    double best = std::numeric_limits<double>::infinity();
    int arg = -1;
    for (int c = 0; c < 3; ++c) {
      const double d = (pts.row(p) - res.centroids.row(c)).squaredNorm();
      if (d < best) {
        best = d;
        arg = c;
      }
    }
    CHECK(res.assignments[static_cast<size_t>(p)] == arg);
  }
}

TEST_CASE("kmeans is deterministic in the rng and validates inputs") {
  Rng rng(7);
  MatX<double> pts = three_blobs(5, rng);
  Rng a(3), b(3);
  KmeansResult r1 = kmeans(pts, 4, a);
  KmeansResult r2 = kmeans(pts, 4, b);
  CHECK(r1.objective == r2.objective);
  CHECK(r1.assignments == r2.assignments);
  CHECK((r1.centroids - r2.centroids).cwiseAbs().maxCoeff() == 0.0);

  Rng c(1);
  CHECK_THROWS_AS(kmeans(pts, 0, c), Error);
  CHECK_THROWS_AS(kmeans(pts, static_cast<int>(pts.rows()) + 1, c), InsufficientData);
}

TEST_CASE("kmeans refuses coincident points that cannot fill k clusters") {
  MatX<double> pts = MatX<double>::Zero(6, 2);
  Rng rng(2);
  CHECK_THROWS_AS(kmeans(pts, 2, rng), EmptyCluster);
}

TEST_CASE("encoder features and encode agree on shape and reject bad input") {
  EncoderConfig cfg;
  cfg.input_size = 32;
  cfg.base_width = 4;
  cfg.seed = 9;
  LatentEncoder enc(cfg, {Plane::k2CH, Plane::kPSAX});
  CHECK(enc.embed_dim() == 16);

  Tensor<float> img(Shape{32, 32});
  img.array().setConstant(0.5f);
  Tensor<float> z = enc.encode(img);
  CHECK(z.shape() == Shape{16});

  Tensor<float> wrong(Shape{16, 16});
  CHECK_THROWS_AS(enc.encode(wrong), ShapeError);
}

TEST_CASE("encoder training separates the toy planes") {
  const fs::path dir = temp_dir("enc_train");
  ts::ToyOptions opt;
  opt.seed = 77;
  auto records = ts::write_unified_records(dir.string(), 6, opt);  // 24 images

  EncoderConfig cfg;
  cfg.input_size = 64;
  cfg.base_width = 8;
  cfg.seed = 1;
  LatentEncoder enc(cfg, {Plane::k2CH, Plane::k3CH, Plane::k4CH, Plane::kPSAX});
  auto stats = enc.train(records, 60, 0.003f, 8, 42);

  REQUIRE(stats.loss_per_epoch.size() == 60);
  CHECK(stats.loss_per_epoch.back() < stats.loss_per_epoch.front() * 0.5);
  CHECK(stats.train_accuracy >= 0.9);
}

TEST_CASE("encoder training validates the class coverage") {
  const fs::path dir = temp_dir("enc_cov");
  ts::ToyOptions opt;
  opt.planes = {Plane::k2CH};
  auto records = ts::write_unified_records(dir.string(), 3, opt);

  EncoderConfig cfg;
  cfg.input_size = 64;
  cfg.base_width = 4;

  // A record whose plane is outside the class set is an input error.
  LatentEncoder only_psax(cfg, {Plane::kPSAX});
  CHECK_THROWS_AS(only_psax.train(records, 1, 0.01f, 4, 0), DataError);

  // A declared class with no examples cannot be learned.
  LatentEncoder two(cfg, {Plane::k2CH, Plane::kPSAX});
  CHECK_THROWS_AS(two.train(records, 1, 0.01f, 4, 0), InsufficientData);

  LatentEncoder one(cfg, {Plane::k2CH});
  CHECK_THROWS_AS(one.train({}, 1, 0.01f, 4, 0), InsufficientData);
}

TEST_CASE("encoder archive round-trip reproduces the latents bit for bit") {
  const fs::path dir = temp_dir("enc_io");
  EncoderConfig cfg;
  cfg.input_size = 32;
  cfg.base_width = 4;
  cfg.blocks_per_stage = 1;
  cfg.seed = 123;
  LatentEncoder enc(cfg, {Plane::k2CH, Plane::k4CH, Plane::kPSAX});

  const std::string path = (dir / "enc.bin").string();
  enc.save(path, "cafe0123cafe0123");

  LatentEncoder back = LatentEncoder::load(path);
  CHECK(back.config().input_size == 32);
  CHECK(back.config().base_width == 4);
  CHECK(back.config().seed == 123);
  REQUIRE(back.classes().size() == 3);
  CHECK(back.classes()[1] == Plane::k4CH);

  Rng rng(4);
  Tensor<float> img(Shape{32, 32});
  for (Eigen::Index i = 0; i < img.size(); ++i)
    img[i] = static_cast<float>(rng.uniform());
  Tensor<float> z1 = enc.encode(img);
  Tensor<float> z2 = back.encode(img);
  REQUIRE(z1.size() == z2.size());
  for (Eigen::Index i = 0; i < z1.size(); ++i) CHECK(z1[i] == z2[i]);

  // Saving the loaded copy reproduces the file byte for byte.
  const std::string path2 = (dir / "enc2.bin").string();
  back.save(path2, "cafe0123cafe0123");
  CHECK(file_hash_hex(path) == file_hash_hex(path2));
}

TEST_CASE("build_atlas clusters toy planes and averages their masks") {
  const fs::path dir = temp_dir("atlas_build");
  ts::ToyOptions opt;
  opt.seed = 31;
  auto records = ts::write_unified_records(dir.string(), 5, opt);  // 20 images

  EncoderConfig cfg;
  cfg.input_size = 64;
  cfg.base_width = 8;
  cfg.seed = 2;
  LatentEncoder enc(cfg, {Plane::k2CH, Plane::k3CH, Plane::k4CH, Plane::kPSAX});
  enc.train(records, 60, 0.003f, 8, 7);

  AtlasBuildResult res = build_atlas(records, enc, 0, 3, 32, 11);
  PriorAtlas& atlas = res.atlas;
  CHECK(atlas.k == 4);  // k=0 resolves to the distinct plane count
  CHECK(atlas.embed_dim == enc.embed_dim());
  CHECK(atlas.num_structures == 3);
  CHECK(atlas.mask_size == 32);
  CHECK(atlas.prototypes.shape() == Shape{4, enc.embed_dim()});
  CHECK(atlas.center_masks.shape() == Shape{4, 3, 32, 32});
  REQUIRE(atlas.assignments.size() == records.size());
  REQUIRE(atlas.image_ids.size() == records.size());
  CHECK(atlas.image_ids[0] == "s0/2CH_0");

  // Occupancies are averages of indicators: within [0,1], and each cluster's
  // center mask matches a direct recomputation from its members.
  for (Eigen::Index i = 0; i < atlas.center_masks.size(); ++i) {
    CHECK(atlas.center_masks[i] >= 0.0f);
    CHECK(atlas.center_masks[i] <= 1.0f);
  }
  for (int c = 0; c < atlas.k; ++c) {
    Tensor<float> want(Shape{3, 32, 32});
    want.array().setZero();
    long members = 0;
    for (size_t i = 0; i < records.size(); ++i) {
      if (atlas.assignments[i] != c) continue;
      ++members;
      GrayImage m = resize_nearest_u8(read_png_gray(records[i].mask_path), 32, 32);
      for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x)
          if (m.at(y, x) >= 1 && m.at(y, x) <= 3) want.at(m.at(y, x) - 1, y, x) += 1.0f;
    }
    REQUIRE(members > 0);
    for (Eigen::Index i = 0; i < want.size(); ++i) {
      const float got = atlas.center_masks[static_cast<Eigen::Index>(c) * want.size() + i];
      CHECK(got == doctest::Approx(want[i] / static_cast<float>(members)).epsilon(1e-6));
    }
  }

  // With a trained encoder the clusters align with planes.
  for (int c = 0; c < 4; ++c) {
    std::set<Plane> planes_in_cluster;
    for (size_t i = 0; i < records.size(); ++i)
      if (atlas.assignments[i] == c) planes_in_cluster.insert(res.planes[i]);
    CHECK(planes_in_cluster.size() == 1);
  }
}

TEST_CASE("atlas archive round-trip and shape validation") {
  const fs::path dir = temp_dir("atlas_io");
  PriorAtlas atlas;
  atlas.k = 2;
  atlas.embed_dim = 3;
  atlas.num_structures = 2;
  atlas.mask_size = 4;
  atlas.prototypes = Tensor<float>(Shape{2, 3});
  for (Eigen::Index i = 0; i < 6; ++i) atlas.prototypes[i] = static_cast<float>(i);
  atlas.center_masks = Tensor<float>(Shape{2, 2, 4, 4});
  atlas.center_masks.array().setConstant(0.5f);
  atlas.assignments = {0, 1, 1};
  atlas.image_ids = {"s0/a", "s0/b", "s1/a"};
  atlas.encoder_hash = "0123456789abcdef";
  atlas.runconfig = "fedcba9876543210";

  const std::string path = (dir / "atlas.bin").string();
  atlas.save(path);
  PriorAtlas back = PriorAtlas::load(path);
  CHECK(back.k == 2);
  CHECK(back.embed_dim == 3);
  CHECK(back.num_structures == 2);
  CHECK(back.mask_size == 4);
  CHECK(back.prototypes.shape() == Shape{2, 3});
  CHECK(back.prototypes[5] == 5.0f);
  CHECK(back.center_masks[0] == 0.5f);
  CHECK(back.assignments == std::vector<std::int32_t>{0, 1, 1});
  CHECK(back.image_ids[2] == "s1/a");
  CHECK(back.encoder_hash == "0123456789abcdef");
  CHECK(back.runconfig == "fedcba9876543210");

  // Re-saving the loaded atlas is byte-identical.
  const std::string path2 = (dir / "atlas2.bin").string();
  back.save(path2);
  CHECK(file_hash_hex(path) == file_hash_hex(path2));

  // Metadata that disagrees with blob shapes is rejected.
  Archive ar = Archive::load(path);
  ar.meta()["embed_dim"] = 7;
  const std::string bad = (dir / "bad.bin").string();
  ar.save(bad);
  CHECK_THROWS_AS(PriorAtlas::load(bad), DataError);

  // Wrong container tag is rejected.
  Archive other("ECHOONE-MODEL-v1");
  other.save((dir / "other.bin").string());
  CHECK_THROWS_AS(PriorAtlas::load((dir / "other.bin").string()), DataError);
}

TEST_CASE("build_atlas rejects empty input and oversized k") {
  const fs::path dir = temp_dir("atlas_bad");
  ts::ToyOptions opt;
  auto records = ts::write_unified_records(dir.string(), 1, opt);  // 4 images

  EncoderConfig cfg;
  cfg.input_size = 64;
  cfg.base_width = 4;
  LatentEncoder enc(cfg, {Plane::k2CH, Plane::k3CH, Plane::k4CH, Plane::kPSAX});

  CHECK_THROWS_AS(build_atlas({}, enc, 2, 3, 16, 0), InsufficientData);
  CHECK_THROWS_AS(build_atlas(records, enc, 5, 3, 16, 0), InsufficientData);
}
