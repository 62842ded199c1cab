// Copyright (c) 2026 The echoone Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "echoone/model/segmodel.hpp"

namespace echoone {

inline constexpr const char* kModelTag = "ECHOONE-MODEL-v1";

struct BundleInfo {
  ModelConfig config;
  int unet_in_channels = 0;
  std::string atlas_hash;  // file hash of the atlas archive used in training
  std::string runconfig;
  int epochs_trained = 0;
  double best_val_mdice = 0;
};

inline void save_bundle(const std::string& path, const SegModel<float>& model,
                        const BundleInfo& info) {
  Archive ar(kModelTag);
  ar.meta()["config"] = model_config_to_json(info.config);
  ar.meta()["unet_in_channels"] = info.unet_in_channels;
  ar.meta()["atlas_hash"] = info.atlas_hash;
  ar.meta()["runconfig"] = info.runconfig;
  ar.meta()["epochs_trained"] = info.epochs_trained;
  ar.meta()["best_val_mdice"] = info.best_val_mdice;
  for (const auto& [name, t] : model.params().named_values()) ar.add_f32(name, t);
  ar.save(path);
}

struct LoadedBundle {
  SegModel<float> model;
  BundleInfo info;
};

inline LoadedBundle load_bundle(const std::string& path) {
  Archive ar = Archive::load_expect(path, kModelTag);
  BundleInfo info;
  info.config = model_config_from_json(ar.meta().at("config"));
  info.unet_in_channels = ar.meta().at("unet_in_channels").get<int>();
  info.atlas_hash = ar.meta().at("atlas_hash").get<std::string>();
  info.runconfig = ar.meta().at("runconfig").get<std::string>();
  info.epochs_trained = ar.meta().at("epochs_trained").get<int>();
  info.best_val_mdice = ar.meta().at("best_val_mdice").get<double>();
  SegModel<float> model(info.config, info.unet_in_channels);
  std::map<std::string, Tensor<float>> values;
  for (const auto& [name, blob] : ar.blobs()) values.emplace(name, blob.as_f32());
  model.params().load_values(values);
  return LoadedBundle{std::move(model), std::move(info)};
}

}  // namespace echoone
