// Copyright (c) 2026 The echoone Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "echoone/atlas/encoder.hpp"
#include "echoone/atlas/kmeans.hpp"
#include "echoone/core/archive.hpp"
#include "echoone/core/image.hpp"
#include "echoone/harmonize/manifest.hpp"

namespace echoone {

/// Clustered shape prior: one latent prototype per cluster plus the mean
/// per-structure occupancy mask of the cluster's members.
struct PriorAtlas {
  int k = 0;
  int embed_dim = 0;
  int num_structures = 0;
  int mask_size = 0;
  Tensor<float> prototypes;    // (k, embed_dim)
  Tensor<float> center_masks;  // (k, num_structures, mask_size, mask_size)
  std::vector<std::int32_t> assignments;  // per training image, cluster index
  std::vector<std::string> image_ids;     // parallel to assignments
  std::string encoder_hash;               // file hash of the encoder archive
  std::string runconfig;

  static constexpr const char* kTag = "PRIOR-ATLAS-v1";

  void save(const std::string& path) const {
    Archive ar(kTag);
    ar.meta()["k"] = k;
    ar.meta()["embed_dim"] = embed_dim;
    ar.meta()["num_structures"] = num_structures;
    ar.meta()["mask_size"] = mask_size;
    ar.meta()["encoder_hash"] = encoder_hash;
    ar.meta()["runconfig"] = runconfig;
    Json ids = Json::array();
    for (const auto& s : image_ids) ids.push_back(s);
    ar.meta()["image_ids"] = ids;
    ar.add_f32("prototypes", prototypes);
    ar.add_f32("center_masks", center_masks);
    ar.add_i32("assignments", assignments,
               Shape{static_cast<int>(assignments.size())});
    ar.save(path);
  }

  static PriorAtlas load(const std::string& path) {
    Archive ar = Archive::load_expect(path, kTag);
    PriorAtlas a;
    a.k = ar.meta().at("k").get<int>();
    a.embed_dim = ar.meta().at("embed_dim").get<int>();
    a.num_structures = ar.meta().at("num_structures").get<int>();
    a.mask_size = ar.meta().at("mask_size").get<int>();
    a.encoder_hash = ar.meta().at("encoder_hash").get<std::string>();
    a.runconfig = ar.meta().at("runconfig").get<std::string>();
    for (const auto& s : ar.meta().at("image_ids"))
      a.image_ids.push_back(s.get<std::string>());
    a.prototypes = ar.blob("prototypes").as_f32();
    a.center_masks = ar.blob("center_masks").as_f32();
    a.assignments = ar.blob("assignments").as_i32();
    if (a.prototypes.shape() != Shape{a.k, a.embed_dim} ||
        a.center_masks.shape() != Shape{a.k, a.num_structures, a.mask_size, a.mask_size})
      throw DataError("atlas blob shapes disagree with metadata");
    return a;
  }
};

struct AtlasBuildResult {
  PriorAtlas atlas;
  KmeansResult clustering;
  std::vector<Plane> planes;  // per clustered image, for reporting
};

/// Encodes every record, clusters the latents, and averages the one-hot
/// masks per cluster. k == 0 picks one cluster per distinct plane present.
inline AtlasBuildResult build_atlas(const std::vector<ManifestRecord>& records,
                                    const LatentEncoder& encoder, int k,
                                    int num_structures, int mask_size,
                                    std::uint64_t seed) {
  if (records.empty()) throw InsufficientData("empty manifest for atlas construction");
  const int n = static_cast<int>(records.size());
  const int d = encoder.embed_dim();

  AtlasBuildResult out;
  MatX<double> latents(n, d);
  for (int i = 0; i < n; ++i) {
    GrayImage img = resize_bilinear_u8(read_png_gray(records[static_cast<size_t>(i)].image_path),
                                       encoder.config().input_size,
                                       encoder.config().input_size);
    Tensor<float> z = encoder.encode(img);
    for (int j = 0; j < d; ++j) latents(i, j) = static_cast<double>(z[j]);
    out.planes.push_back(records[static_cast<size_t>(i)].plane);
  }

  if (k == 0) {
    bool seen[kNumPlanes] = {false, false, false, false};
    for (Plane p : out.planes) seen[static_cast<int>(p)] = true;
    for (bool s : seen) k += s;
  }

  Rng rng(seed);
  out.clustering = kmeans(latents, k, rng);

  PriorAtlas& atlas = out.atlas;
  atlas.k = k;
  atlas.embed_dim = d;
  atlas.num_structures = num_structures;
  atlas.mask_size = mask_size;
  atlas.prototypes = Tensor<float>(Shape{k, d});
  for (int c = 0; c < k; ++c)
    for (int j = 0; j < d; ++j)
      atlas.prototypes.at(c, j) = static_cast<float>(out.clustering.centroids(c, j));

  atlas.center_masks = Tensor<float>(Shape{k, num_structures, mask_size, mask_size});
  atlas.center_masks.array().setZero();
  std::vector<long> counts(static_cast<size_t>(k), 0);
  for (int i = 0; i < n; ++i) {
    const auto& rec = records[static_cast<size_t>(i)];
    GrayImage mask = resize_nearest_u8(read_png_gray(rec.mask_path), mask_size, mask_size);
    const int c = out.clustering.assignments[static_cast<size_t>(i)];
    ++counts[static_cast<size_t>(c)];
    for (int y = 0; y < mask_size; ++y)
      for (int x = 0; x < mask_size; ++x) {
        const int lab = mask.at(y, x);
        if (lab >= 1 && lab <= num_structures)
          atlas.center_masks.at(c, lab - 1, y, x) += 1.0f;
      }
    atlas.assignments.push_back(c);
    atlas.image_ids.push_back(
        rec.subject_id + "/" +
        std::filesystem::path(rec.image_path).stem().string());
  }
  for (int c = 0; c < k; ++c) {
    // A cluster can only be empty if the reseed logic failed, which kmeans
    // already turns into EmptyCluster; guard anyway.
    if (counts[static_cast<size_t>(c)] == 0) throw EmptyCluster("atlas cluster is empty");
    const float inv = 1.0f / static_cast<float>(counts[static_cast<size_t>(c)]);
    for (int s = 0; s < num_structures; ++s)
      for (int y = 0; y < mask_size; ++y)
        for (int x = 0; x < mask_size; ++x) atlas.center_masks.at(c, s, y, x) *= inv;
  }
  return out;
}

}  // namespace echoone
