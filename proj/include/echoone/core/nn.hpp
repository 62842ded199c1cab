// Copyright (c) 2026 The echoone Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "echoone/core/hash.hpp"
#include "echoone/core/ops.hpp"
#include "echoone/core/rng.hpp"

namespace echoone {

enum class Init { kZero, kOne, kNormal };

/// Ordered registry of named trainable tensors.
///
/// Each parameter is initialized from an RNG seeded by fnv1a64(name) ^ seed,
/// so its initial bits depend only on its name, shape and the master seed,
/// never on registration order or on which other parameters exist. Disabling
/// an optional model branch therefore leaves every remaining parameter's
/// initialization untouched.
template <typename T>
class ParamStore {
 public:
  struct Entry {
    std::string name;
    std::string group;
    Var<T> var;
  };

  explicit ParamStore(std::uint64_t seed = 0) : seed_(seed) {}

  Var<T> add(const std::string& name, const std::string& group, Shape shape,
             Init init, T std_dev = T(0)) {
    if (index_.count(name)) throw Error("duplicate parameter: " + name);
    Tensor<T> t(shape);
    switch (init) {
      case Init::kZero:
        t.array().setZero();
        break;
      case Init::kOne:
        t.array().setOnes();
        break;
      case Init::kNormal: {
        Rng rng(fnv1a64(name) ^ seed_);
        for (Eigen::Index i = 0; i < t.size(); ++i)
          t[i] = static_cast<T>(rng.normal()) * std_dev;
        break;
      }
    }
    Var<T> v = make_leaf<T>(std::move(t), true);
    index_[name] = static_cast<int>(entries_.size());
    entries_.push_back(Entry{name, group, v});
    return v;
  }

  Var<T> get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw Error("unknown parameter: " + name);
    return entries_[static_cast<size_t>(it->second)].var;
  }

  bool has(const std::string& name) const { return index_.count(name) > 0; }
  const std::vector<Entry>& entries() const { return entries_; }

  Eigen::Index total_size() const {
    Eigen::Index n = 0;
    for (const auto& e : entries_) n += e.var->value.size();
    return n;
  }

  void zero_grads() {
    for (auto& e : entries_) e.var->zero_grad();
  }

  void set_trainable(const std::string& group, bool trainable) {
    for (auto& e : entries_)
      if (e.group == group) e.var->requires_grad = trainable;
  }

  /// Name -> value map in registration order (std::map sorts by name).
  std::map<std::string, Tensor<T>> named_values() const {
    std::map<std::string, Tensor<T>> out;
    for (const auto& e : entries_) out.emplace(e.name, e.var->value);
    return out;
  }

  /// Overwrites parameter values from a name -> tensor map; every parameter
  /// must be present with a matching element count.
  void load_values(const std::map<std::string, Tensor<T>>& values) {
    for (auto& e : entries_) {
      auto it = values.find(e.name);
      if (it == values.end()) throw DataError("missing parameter in archive: " + e.name);
      if (it->second.size() != e.var->value.size())
        throw ShapeMismatch("parameter " + e.name + " expects " +
                            shape_str(e.var->value.shape()) + ", archive has " +
                            shape_str(it->second.shape()));
      e.var->value.array() = it->second.array();
    }
  }

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::vector<Entry> entries_;
  std::unordered_map<std::string, int> index_;
};

// ---------------------------------------------------------------------------
// Layers
// ---------------------------------------------------------------------------

template <typename T>
struct Linear {
  Var<T> w, b;

  Linear() = default;
  Linear(ParamStore<T>& ps, const std::string& prefix, const std::string& group,
         int in, int out) {
    const T std_dev = std::sqrt(T(2) / static_cast<T>(in + out));
    w = ps.add(prefix + ".w", group, Shape{in, out}, Init::kNormal, std_dev);
    b = ps.add(prefix + ".b", group, Shape{out}, Init::kZero);
  }

  Var<T> operator()(const Var<T>& x) const { return add_rowbias(matmul(x, w), b); }
};

template <typename T>
struct Conv2dLayer {
  Var<T> w, b;
  int stride = 1, pad = 0;

  Conv2dLayer() = default;
  Conv2dLayer(ParamStore<T>& ps, const std::string& prefix, const std::string& group,
              int cin, int cout, int k, int stride_, int pad_)
      : stride(stride_), pad(pad_) {
    const T std_dev = std::sqrt(T(2) / static_cast<T>(cin * k * k));
    w = ps.add(prefix + ".w", group, Shape{cout, cin, k, k}, Init::kNormal, std_dev);
    b = ps.add(prefix + ".b", group, Shape{cout}, Init::kZero);
  }

  Var<T> operator()(const Var<T>& x) const { return conv2d(x, w, b, stride, pad); }
};

/// conv3(stride) -> relu -> conv3 -> + skip -> relu, with a 1x1 projection
/// on the skip whenever stride or channel count changes.
template <typename T>
struct ResBlock {
  Conv2dLayer<T> conv1, conv2, skip;
  bool has_skip = false;

  ResBlock() = default;
  ResBlock(ParamStore<T>& ps, const std::string& prefix, const std::string& group,
           int cin, int cout, int stride) {
    conv1 = Conv2dLayer<T>(ps, prefix + ".conv1", group, cin, cout, 3, stride, 1);
    conv2 = Conv2dLayer<T>(ps, prefix + ".conv2", group, cout, cout, 3, 1, 1);
    has_skip = stride != 1 || cin != cout;
    if (has_skip)
      skip = Conv2dLayer<T>(ps, prefix + ".skip", group, cin, cout, 1, stride, 0);
  }

  Var<T> operator()(const Var<T>& x) const {
    Var<T> y = conv2(relu(conv1(x)));
    return relu(add(y, has_skip ? skip(x) : x));
  }
};

template <typename T>
struct LayerNormLayer {
  Var<T> gamma, beta;

  LayerNormLayer() = default;
  LayerNormLayer(ParamStore<T>& ps, const std::string& prefix, const std::string& group,
                 int dim) {
    gamma = ps.add(prefix + ".gamma", group, Shape{dim}, Init::kOne);
    beta = ps.add(prefix + ".beta", group, Shape{dim}, Init::kZero);
  }

  Var<T> operator()(const Var<T>& x) const { return layer_norm(x, gamma, beta); }
};

/// Multi-head attention. Queries, keys and values are projected to
/// `internal` columns, split across `heads`, recombined, and projected back
/// to the query width.
template <typename T>
struct Mha {
  Linear<T> wq, wk, wv, wo;
  int heads = 1, internal = 0;

  Mha() = default;
  Mha(ParamStore<T>& ps, const std::string& prefix, const std::string& group,
      int dim_q, int dim_kv, int internal_, int heads_)
      : heads(heads_), internal(internal_) {
    if (internal % heads != 0) throw Error("attention width not divisible by heads");
    wq = Linear<T>(ps, prefix + ".q", group, dim_q, internal);
    wk = Linear<T>(ps, prefix + ".k", group, dim_kv, internal);
    wv = Linear<T>(ps, prefix + ".v", group, dim_kv, internal);
    wo = Linear<T>(ps, prefix + ".out", group, internal, dim_q);
  }

  Var<T> operator()(const Var<T>& q, const Var<T>& k, const Var<T>& v) const {
    Var<T> qp = wq(q), kp = wk(k), vp = wv(v);
    const int dh = internal / heads;
    const T inv_sqrt_dh = T(1) / std::sqrt(static_cast<T>(dh));
    std::vector<Var<T>> outs;
    outs.reserve(static_cast<size_t>(heads));
    for (int hIdx = 0; hIdx < heads; ++hIdx) {
      Var<T> qh = slice_cols(qp, hIdx * dh, dh);
      Var<T> kh = slice_cols(kp, hIdx * dh, dh);
      Var<T> vh = slice_cols(vp, hIdx * dh, dh);
      Var<T> attn = softmax_rows(scale(matmul_nt(qh, kh), inv_sqrt_dh));
      outs.push_back(matmul(attn, vh));
    }
    return wo(heads == 1 ? outs[0] : concat_cols(outs));
  }
};

}  // namespace echoone
