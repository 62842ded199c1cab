// Copyright (c) 2026 The echoone Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "echoone/core/errors.hpp"

namespace echoone {

template <typename T>
using ArrayX = Eigen::Array<T, Eigen::Dynamic, 1>;

template <typename T>
using MatX = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
using VecX = Eigen::Matrix<T, Eigen::Dynamic, 1>;

using Shape = std::vector<int>;

inline Eigen::Index shape_numel(const Shape& s) {
  Eigen::Index n = 1;
  for (int d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::string out = "(";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + ")";
}

/// Dense row-major n-d array over a contiguous Eigen buffer. Value semantics
/// throughout; views are taken with Eigen::Map where matrix algebra is needed.
template <typename T>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape) : shape_(std::move(shape)), data_(shape_numel(shape_)) {
    data_.setZero();
  }

  Tensor(Shape shape, ArrayX<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_numel(shape_))
      throw ShapeError("tensor data length does not match shape " + shape_str(shape_));
  }

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }

  static Tensor full(Shape shape, T v) {
    Tensor t(std::move(shape));
    t.data_.setConstant(v);
    return t;
  }

  static Tensor from(Shape shape, std::initializer_list<T> vals) {
    Tensor t(std::move(shape));
    if (static_cast<Eigen::Index>(vals.size()) != t.size())
      throw ShapeError("initializer length mismatch");
    Eigen::Index i = 0;
    for (T v : vals) t.data_[i++] = v;
    return t;
  }

  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  Eigen::Index size() const { return data_.size(); }
  bool empty() const { return data_.size() == 0; }

  ArrayX<T>& array() { return data_; }
  const ArrayX<T>& array() const { return data_; }
  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  T& operator[](Eigen::Index i) { return data_[i]; }
  T operator[](Eigen::Index i) const { return data_[i]; }

  T& at(int i, int j) { return data_[static_cast<Eigen::Index>(i) * dim(1) + j]; }
  T at(int i, int j) const { return data_[static_cast<Eigen::Index>(i) * dim(1) + j]; }

  T& at(int i, int j, int k) {
    return data_[(static_cast<Eigen::Index>(i) * dim(1) + j) * dim(2) + k];
  }
  T at(int i, int j, int k) const {
    return data_[(static_cast<Eigen::Index>(i) * dim(1) + j) * dim(2) + k];
  }

  T& at(int i, int j, int k, int l) {
    return data_[((static_cast<Eigen::Index>(i) * dim(1) + j) * dim(2) + k) * dim(3) + l];
  }
  T at(int i, int j, int k, int l) const {
    return data_[((static_cast<Eigen::Index>(i) * dim(1) + j) * dim(2) + k) * dim(3) + l];
  }

  /// Matrix view (rows x cols) over the contiguous buffer.
  Eigen::Map<MatX<T>> mat(Eigen::Index rows, Eigen::Index cols) {
    return Eigen::Map<MatX<T>>(data_.data(), rows, cols);
  }
  Eigen::Map<const MatX<T>> mat(Eigen::Index rows, Eigen::Index cols) const {
    return Eigen::Map<const MatX<T>>(data_.data(), rows, cols);
  }

  /// 2-d view using the tensor's own shape, collapsing trailing dims into cols.
  Eigen::Map<MatX<T>> mat2d() {
    return mat(dim(0), size() / dim(0));
  }
  Eigen::Map<const MatX<T>> mat2d() const {
    return mat(dim(0), size() / dim(0));
  }

  Tensor reshaped(Shape shape) const {
    if (shape_numel(shape) != size())
      throw ShapeError("reshape " + shape_str(shape_) + " -> " + shape_str(shape) +
                       " changes element count");
    return Tensor(std::move(shape), data_);
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(shape_);
    out.array() = data_.template cast<U>();
    return out;
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

 private:
  Shape shape_;
  ArrayX<T> data_;
};

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* what) {
  if (!a.same_shape(b))
    throw ShapeMismatch(std::string(what) + ": " + shape_str(a.shape()) + " vs " +
                        shape_str(b.shape()));
}

}  // namespace echoone
