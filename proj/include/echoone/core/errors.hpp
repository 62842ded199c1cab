// Copyright (c) 2026 The echoone Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace echoone {

/// Base class for all pipeline errors so callers can catch one type.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct UnknownLabel : Error {
  int label;
  explicit UnknownLabel(int raw, const std::string& ctx = "")
      : Error("unknown source label " + std::to_string(raw) +
              (ctx.empty() ? "" : " (" + ctx + ")")),
        label(raw) {}
};

struct DegenerateShape : Error {
  explicit DegenerateShape(const std::string& msg) : Error(msg) {}
};

struct EmptyCavity : Error {
  explicit EmptyCavity(const std::string& msg) : Error(msg) {}
};

struct LayoutError : Error {
  explicit LayoutError(const std::string& msg) : Error(msg) {}
};

struct InsufficientData : Error {
  explicit InsufficientData(const std::string& msg) : Error(msg) {}
};

struct EmptyCluster : Error {
  explicit EmptyCluster(const std::string& msg) : Error(msg) {}
};

struct ShapeError : Error {
  explicit ShapeError(const std::string& msg) : Error(msg) {}
};

struct ShapeMismatch : Error {
  explicit ShapeMismatch(const std::string& msg) : Error(msg) {}
};

struct ZeroVector : Error {
  explicit ZeroVector(const std::string& msg) : Error(msg) {}
};

struct DataError : Error {
  explicit DataError(const std::string& msg) : Error(msg) {}
};

struct HashMismatch : Error {
  explicit HashMismatch(const std::string& msg) : Error(msg) {}
};

/// Non-finite loss or activations during optimization; maps to exit code 3.
struct NumericalFailure : Error {
  explicit NumericalFailure(const std::string& msg) : Error(msg) {}
};

}  // namespace echoone
