// Copyright (c) 2026 The echoone Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "echoone/core/tensor.hpp"

namespace echoone {

using Json = nlohmann::ordered_json;

/// Tagged binary container: a tag string, a JSON metadata document, and an
/// ordered set of named typed blobs. Writing the same content always produces
/// the same bytes.
class Archive {
 public:
  enum class Dtype : std::uint8_t { kF32 = 0, kF64 = 1, kI32 = 2, kU8 = 3, kU64 = 4 };

  struct Blob {
    Dtype dtype = Dtype::kF32;
    Shape shape;
    std::vector<char> raw;

    Tensor<float> as_f32() const;
    Tensor<double> as_f64() const;
    std::vector<std::int32_t> as_i32() const;
    std::vector<std::uint8_t> as_u8() const;
    std::vector<std::uint64_t> as_u64() const;
  };

  Archive() = default;
  explicit Archive(std::string tag) : tag_(std::move(tag)) {}

  const std::string& tag() const { return tag_; }
  Json& meta() { return meta_; }
  const Json& meta() const { return meta_; }

  void add_f32(const std::string& name, const Tensor<float>& t);
  void add_f64(const std::string& name, const Tensor<double>& t);
  void add_i32(const std::string& name, const std::vector<std::int32_t>& v, Shape shape = {});
  void add_u8(const std::string& name, const std::vector<std::uint8_t>& v, Shape shape = {});
  void add_u64(const std::string& name, const std::vector<std::uint64_t>& v);

  bool has(const std::string& name) const { return blobs_.count(name) > 0; }
  const Blob& blob(const std::string& name) const;
  const std::map<std::string, Blob>& blobs() const { return blobs_; }

  void save(const std::string& path) const;

  /// Loads and checks the container magic; tag is whatever was stored.
  static Archive load(const std::string& path);

  /// Loads and fails with DataError unless the stored tag matches.
  static Archive load_expect(const std::string& path, const std::string& tag);

 private:
  std::string tag_;
  Json meta_ = Json::object();
  std::map<std::string, Blob> blobs_;
};

}  // namespace echoone
