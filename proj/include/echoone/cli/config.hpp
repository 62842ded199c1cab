// Copyright (c) 2026 The echoone Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "echoone/atlas/encoder.hpp"
#include "echoone/model/segmodel.hpp"
#include "echoone/train/engine.hpp"

namespace echoone {

/// Flat dotted-key configuration with a strict schema. Values are stored in
/// canonical text form, so the hash of a configuration depends only on its
/// meaning, not on how the file spelled it.
struct RunConfig {
  std::map<std::string, std::string> values;
  std::string hash;  // fnv1a64 hex of the canonical "key=value" lines

  int get_int(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  const std::string& get_str(const std::string& key) const;

  ModelConfig model_config() const;
  EncoderConfig encoder_config() const;
  TrainSettings train_settings() const;
};

/// Loads `key = value` lines (empty path: defaults only), applies dotted-key
/// overrides and the ablation/seed flags, validates against the schema,
/// canonicalizes and hashes. Unknown keys, malformed lines and values that
/// do not parse as the schema type all raise DataError.
RunConfig parse_run_config(const std::string& path,
                           const std::vector<std::string>& overrides,
                           std::optional<std::uint64_t> seed_override, bool no_lffa,
                           bool no_pcmask);

/// The full schema as key -> canonical default, for documentation and tests.
const std::map<std::string, std::string>& run_config_defaults();

}  // namespace echoone
