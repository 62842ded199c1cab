// Copyright (c) 2026 The echoone Authors
// SPDX-License-Identifier: Apache-2.0

#include "echoone/core/archive.hpp"

#include <cstring>
#include <fstream>

#include "echoone/core/errors.hpp"

namespace echoone {

namespace {

constexpr char kMagic[4] = {'E', 'K', 'A', 'R'};

size_t dtype_size(Archive::Dtype d) {
  switch (d) {
    case Archive::Dtype::kF32:
      return 4;
    case Archive::Dtype::kF64:
      return 8;
    case Archive::Dtype::kI32:
      return 4;
    case Archive::Dtype::kU8:
      return 1;
    case Archive::Dtype::kU64:
      return 8;
  }
  return 0;
}

void put_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), 8);
}

std::uint32_t get_u32(std::istream& is) {
  std::uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 4);
  return v;
}

std::uint64_t get_u64(std::istream& is) {
  std::uint64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 8);
  return v;
}

std::string get_str(std::istream& is, std::uint32_t len) {
  std::string s(len, '\0');
  is.read(s.data(), len);
  return s;
}

template <typename T>
std::vector<char> to_raw(const T* data, size_t n) {
  std::vector<char> raw(n * sizeof(T));
  std::memcpy(raw.data(), data, raw.size());
  return raw;
}

}  // namespace

Tensor<float> Archive::Blob::as_f32() const {
  if (dtype != Dtype::kF32) throw DataError("blob is not f32");
  Tensor<float> t(shape.empty() ? Shape{static_cast<int>(raw.size() / 4)} : shape);
  std::memcpy(t.data(), raw.data(), raw.size());
  return t;
}

Tensor<double> Archive::Blob::as_f64() const {
  if (dtype != Dtype::kF64) throw DataError("blob is not f64");
  Tensor<double> t(shape.empty() ? Shape{static_cast<int>(raw.size() / 8)} : shape);
  std::memcpy(t.data(), raw.data(), raw.size());
  return t;
}

std::vector<std::int32_t> Archive::Blob::as_i32() const {
  if (dtype != Dtype::kI32) throw DataError("blob is not i32");
  std::vector<std::int32_t> v(raw.size() / 4);
  std::memcpy(v.data(), raw.data(), raw.size());
  return v;
}

std::vector<std::uint8_t> Archive::Blob::as_u8() const {
  if (dtype != Dtype::kU8) throw DataError("blob is not u8");
  std::vector<std::uint8_t> v(raw.size());
  std::memcpy(v.data(), raw.data(), raw.size());
  return v;
}

std::vector<std::uint64_t> Archive::Blob::as_u64() const {
  if (dtype != Dtype::kU64) throw DataError("blob is not u64");
  std::vector<std::uint64_t> v(raw.size() / 8);
  std::memcpy(v.data(), raw.data(), raw.size());
  return v;
}

void Archive::add_f32(const std::string& name, const Tensor<float>& t) {
  blobs_[name] = Blob{Dtype::kF32, t.shape(), to_raw(t.data(), static_cast<size_t>(t.size()))};
}

void Archive::add_f64(const std::string& name, const Tensor<double>& t) {
  blobs_[name] = Blob{Dtype::kF64, t.shape(), to_raw(t.data(), static_cast<size_t>(t.size()))};
}

void Archive::add_i32(const std::string& name, const std::vector<std::int32_t>& v, Shape shape) {
  if (shape.empty()) shape = Shape{static_cast<int>(v.size())};
  blobs_[name] = Blob{Dtype::kI32, std::move(shape), to_raw(v.data(), v.size())};
}

void Archive::add_u8(const std::string& name, const std::vector<std::uint8_t>& v, Shape shape) {
  if (shape.empty()) shape = Shape{static_cast<int>(v.size())};
  blobs_[name] = Blob{Dtype::kU8, std::move(shape), to_raw(v.data(), v.size())};
}

void Archive::add_u64(const std::string& name, const std::vector<std::uint64_t>& v) {
  blobs_[name] = Blob{Dtype::kU64, Shape{static_cast<int>(v.size())}, to_raw(v.data(), v.size())};
}

const Archive::Blob& Archive::blob(const std::string& name) const {
  auto it = blobs_.find(name);
  if (it == blobs_.end()) throw DataError("archive has no blob named " + name);
  return it->second;
}

void Archive::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot write " + path);
  os.write(kMagic, 4);
  put_u32(os, static_cast<std::uint32_t>(tag_.size()));
  os.write(tag_.data(), static_cast<std::streamsize>(tag_.size()));
  const std::string meta = meta_.dump();
  put_u32(os, static_cast<std::uint32_t>(meta.size()));
  os.write(meta.data(), static_cast<std::streamsize>(meta.size()));
  put_u32(os, static_cast<std::uint32_t>(blobs_.size()));
  for (const auto& [name, blob] : blobs_) {
    put_u32(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    os.put(static_cast<char>(blob.dtype));
    put_u32(os, static_cast<std::uint32_t>(blob.shape.size()));
    for (int d : blob.shape) put_u32(os, static_cast<std::uint32_t>(d));
    put_u64(os, blob.raw.size());
    os.write(blob.raw.data(), static_cast<std::streamsize>(blob.raw.size()));
  }
  if (!os) throw DataError("short write to " + path);
}

Archive Archive::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw DataError(path + " is not an archive");
  Archive a;
  a.tag_ = get_str(is, get_u32(is));
  const std::string meta = get_str(is, get_u32(is));
  a.meta_ = Json::parse(meta, nullptr, false);
  if (a.meta_.is_discarded()) throw DataError(path + " has corrupt metadata");
  const std::uint32_t n = get_u32(is);
  for (std::uint32_t i = 0; i < n; ++i) {
    std::string name = get_str(is, get_u32(is));
    Blob b;
    b.dtype = static_cast<Dtype>(is.get());
    const std::uint32_t rank = get_u32(is);
    b.shape.resize(rank);
    for (std::uint32_t r = 0; r < rank; ++r) b.shape[r] = static_cast<int>(get_u32(is));
    const std::uint64_t len = get_u64(is);
    b.raw.resize(len);
    is.read(b.raw.data(), static_cast<std::streamsize>(len));
    if (!is) throw DataError(path + " is truncated");
    if (dtype_size(b.dtype) == 0 || len % dtype_size(b.dtype) != 0)
      throw DataError(path + " has a corrupt blob: " + name);
    a.blobs_.emplace(std::move(name), std::move(b));
  }
  return a;
}

Archive Archive::load_expect(const std::string& path, const std::string& tag) {
  Archive a = load(path);
  if (a.tag() != tag)
    throw DataError(path + ": expected tag " + tag + ", found " + a.tag());
  return a;
}

}  // namespace echoone
