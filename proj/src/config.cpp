// Copyright (c) 2026 The echoone Authors
// SPDX-License-Identifier: Apache-2.0

#include "echoone/cli/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "echoone/core/hash.hpp"
#include "echoone/metrics/report.hpp"

namespace echoone {
namespace {

enum class Kind { kInt, kU64, kDouble, kBool, kString };

struct SchemaEntry {
  const char* key;
  Kind kind;
  const char* def;
  const char* allowed = nullptr;  // '|'-separated enum for kString, optional
};

// Everything configurable lives here; parse_run_config rejects any key that
// does not appear in this table.
const SchemaEntry kSchema[] = {
    {"data.root", Kind::kString, ""},
    {"data.split_seed", Kind::kU64, "0"},
    {"model.input_size", Kind::kInt, "256"},
    {"model.patch_size", Kind::kInt, "16"},
    {"model.embed_dim", Kind::kInt, "64"},
    {"model.encoder_depth", Kind::kInt, "6"},
    {"model.num_heads", Kind::kInt, "4"},
    {"model.num_decoder_blocks", Kind::kInt, "5"},
    {"model.num_structures", Kind::kInt, "3"},
    {"model.cnn_widths", Kind::kString, "16,32,32,32"},
    {"model.lffa", Kind::kBool, "true"},
    {"model.pcmask", Kind::kBool, "true"},
    {"model.seed", Kind::kU64, "0"},
    {"atlas.k", Kind::kInt, "0"},
    {"atlas.seed", Kind::kU64, "0"},
    {"atlas.input_size", Kind::kInt, "64"},
    {"atlas.base_width", Kind::kInt, "8"},
    {"atlas.blocks_per_stage", Kind::kInt, "1"},
    {"atlas.num_planes", Kind::kInt, "4"},
    {"atlas.encoder_epochs", Kind::kInt, "20"},
    {"atlas.encoder_lr", Kind::kDouble, "0.001"},
    {"atlas.encoder_batch", Kind::kInt, "16"},
    {"atlas.mask_size", Kind::kInt, "0"},
    {"train.epochs", Kind::kInt, "100"},
    {"train.lr", Kind::kDouble, "1e-04"},
    {"train.beta1", Kind::kDouble, "0.9"},
    {"train.beta2", Kind::kDouble, "0.999"},
    {"train.lambda", Kind::kDouble, "0.5"},
    {"train.dice_weight", Kind::kDouble, "0.8"},
    {"train.bce_weight", Kind::kDouble, "0.2"},
    {"train.aug_prob", Kind::kDouble, "0.5"},
    {"train.batch_size", Kind::kInt, "8"},
    {"train.seed", Kind::kU64, "0"},
    {"train.freeze_pretrained", Kind::kBool, "false"},
    {"train.lr_schedule", Kind::kString, "constant", "constant|cosine"},
    {"train.rot_deg", Kind::kDouble, "15"},
    {"train.scale_lo", Kind::kDouble, "0.9"},
    {"train.scale_hi", Kind::kDouble, "1.1"},
    {"train.contrast_lo", Kind::kDouble, "0.8"},
    {"train.contrast_hi", Kind::kDouble, "1.2"},
    {"train.gamma_lo", Kind::kDouble, "0.8"},
    {"train.gamma_hi", Kind::kDouble, "1.2"},
    {"train.val_every", Kind::kInt, "1"},
    {"train.target_val_mdice", Kind::kDouble, "0"},
    {"train.checkpoint_every", Kind::kInt, "1"},
    {"eval.split", Kind::kString, "test", "train|val|test"},
    {"infer.overlay", Kind::kBool, "false"},
};

const SchemaEntry* find_entry(const std::string& key) {
  for (const auto& e : kSchema)
    if (key == e.key) return &e;
  return nullptr;
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

/// Round-trips a raw value through its schema type, yielding the canonical
/// spelling (so "1e-4" and "0.0001" produce the same hash).
std::string canonicalize(const SchemaEntry& e, const std::string& raw) {
  const std::string v = trim(raw);
  switch (e.kind) {
    case Kind::kInt: {
      int out = 0;
      auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
      if (ec != std::errc() || p != v.data() + v.size())
        throw DataError(std::string(e.key) + ": not an integer: '" + v + "'");
      return std::to_string(out);
    }
    case Kind::kU64: {
      std::uint64_t out = 0;
      auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
      if (ec != std::errc() || p != v.data() + v.size())
        throw DataError(std::string(e.key) + ": not an unsigned integer: '" + v + "'");
      return std::to_string(out);
    }
    case Kind::kDouble: {
      try {
        size_t used = 0;
        double out = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return format_double(out);
      } catch (const std::exception&) {
        throw DataError(std::string(e.key) + ": not a number: '" + v + "'");
      }
    }
    case Kind::kBool: {
      if (v == "true" || v == "1" || v == "yes") return "true";
      if (v == "false" || v == "0" || v == "no") return "false";
      throw DataError(std::string(e.key) + ": not a boolean: '" + v + "'");
    }
    case Kind::kString: {
      if (e.allowed) {
        std::string opts(e.allowed);
        bool ok = false;
        size_t pos = 0;
        while (pos <= opts.size()) {
          size_t bar = opts.find('|', pos);
          std::string opt = opts.substr(pos, bar == std::string::npos ? bar : bar - pos);
          if (v == opt) ok = true;
          if (bar == std::string::npos) break;
          pos = bar + 1;
        }
        if (!ok)
          throw DataError(std::string(e.key) + ": '" + v + "' not one of " + opts);
      }
      return v;
    }
  }
  throw DataError("unreachable");
}

}  // namespace

const std::map<std::string, std::string>& run_config_defaults() {
  static const std::map<std::string, std::string> defaults = [] {
    std::map<std::string, std::string> m;
    for (const auto& e : kSchema) m[e.key] = e.def;
    return m;
  }();
  return defaults;
}

RunConfig parse_run_config(const std::string& path,
                           const std::vector<std::string>& overrides,
                           std::optional<std::uint64_t> seed_override, bool no_lffa,
                           bool no_pcmask) {
  std::map<std::string, std::string> raw = run_config_defaults();

  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read config file: " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      std::string t = trim(line);
      if (t.empty() || t[0] == '#') continue;
      size_t eq = t.find('=');
      if (eq == std::string::npos)
        throw DataError(path + ":" + std::to_string(lineno) + ": expected key = value");
      std::string key = trim(t.substr(0, eq));
      if (!find_entry(key))
        throw DataError(path + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
      raw[key] = trim(t.substr(eq + 1));
    }
  }

  for (const std::string& ov : overrides) {
    size_t eq = ov.find('=');
    if (eq == std::string::npos)
      throw DataError("override must be key=value: '" + ov + "'");
    std::string key = trim(ov.substr(0, eq));
    if (!find_entry(key)) throw DataError("unknown config key '" + key + "'");
    raw[key] = trim(ov.substr(eq + 1));
  }

  if (seed_override) {
    const std::string s = std::to_string(*seed_override);
    raw["data.split_seed"] = s;
    raw["model.seed"] = s;
    raw["atlas.seed"] = s;
    raw["train.seed"] = s;
  }
  if (no_lffa) raw["model.lffa"] = "false";
  if (no_pcmask) raw["model.pcmask"] = "false";

  RunConfig cfg;
  for (const auto& e : kSchema) cfg.values[e.key] = canonicalize(e, raw.at(e.key));
  // cfg.values is a std::map, so the hashed text is key-sorted.
  std::string canon;
  for (const auto& [k, v] : cfg.values) canon += k + "=" + v + "\n";
  cfg.hash = hash_hex(fnv1a64(canon));
  return cfg;
}

const std::string& RunConfig::get_str(const std::string& key) const {
  auto it = values.find(key);
  if (it == values.end()) throw DataError("unknown config key '" + key + "'");
  return it->second;
}

int RunConfig::get_int(const std::string& key) const {
  return std::stoi(get_str(key));
}

std::uint64_t RunConfig::get_u64(const std::string& key) const {
  return std::stoull(get_str(key));
}

double RunConfig::get_double(const std::string& key) const {
  return std::stod(get_str(key));
}

bool RunConfig::get_bool(const std::string& key) const {
  return get_str(key) == "true";
}

ModelConfig RunConfig::model_config() const {
  ModelConfig m;
  m.input_size = get_int("model.input_size");
  m.patch_size = get_int("model.patch_size");
  m.embed_dim = get_int("model.embed_dim");
  m.encoder_depth = get_int("model.encoder_depth");
  m.num_heads = get_int("model.num_heads");
  m.num_decoder_blocks = get_int("model.num_decoder_blocks");
  m.num_structures = get_int("model.num_structures");
  m.cnn_widths.clear();
  std::stringstream ss(get_str("model.cnn_widths"));
  std::string part;
  while (std::getline(ss, part, ',')) {
    try {
      m.cnn_widths.push_back(std::stoi(trim(part)));
    } catch (const std::exception&) {
      throw DataError("model.cnn_widths: not an integer list");
    }
  }
  if (m.cnn_widths.size() != 4)
    throw DataError("model.cnn_widths: expected exactly four widths");
  m.lffa = get_bool("model.lffa");
  m.pcmask = get_bool("model.pcmask");
  m.seed = get_u64("model.seed");
  return m;
}

EncoderConfig RunConfig::encoder_config() const {
  EncoderConfig e;
  e.input_size = get_int("atlas.input_size");
  e.base_width = get_int("atlas.base_width");
  e.blocks_per_stage = get_int("atlas.blocks_per_stage");
  e.seed = get_u64("atlas.seed");
  return e;
}

TrainSettings RunConfig::train_settings() const {
  TrainSettings t;
  t.epochs = get_int("train.epochs");
  t.lr = static_cast<float>(get_double("train.lr"));
  t.beta1 = static_cast<float>(get_double("train.beta1"));
  t.beta2 = static_cast<float>(get_double("train.beta2"));
  t.lambda_pcm = static_cast<float>(get_double("train.lambda"));
  t.dice_w = static_cast<float>(get_double("train.dice_weight"));
  t.bce_w = static_cast<float>(get_double("train.bce_weight"));
  t.batch_size = get_int("train.batch_size");
  t.seed = get_u64("train.seed");
  t.freeze_pretrained = get_bool("train.freeze_pretrained");
  t.cosine_lr = get_str("train.lr_schedule") == "cosine";
  t.aug.prob = get_double("train.aug_prob");
  t.aug.rot_deg = get_double("train.rot_deg");
  t.aug.scale_lo = get_double("train.scale_lo");
  t.aug.scale_hi = get_double("train.scale_hi");
  t.aug.contrast_lo = get_double("train.contrast_lo");
  t.aug.contrast_hi = get_double("train.contrast_hi");
  t.aug.gamma_lo = get_double("train.gamma_lo");
  t.aug.gamma_hi = get_double("train.gamma_hi");
  t.val_every = get_int("train.val_every");
  t.target_val_mdice = get_double("train.target_val_mdice");
  t.checkpoint_every = get_int("train.checkpoint_every");
  return t;
}

}  // namespace echoone
