// Copyright (c) 2026 The echoone Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "echoone/core/errors.hpp"

namespace echoone {

/// Echocardiographic view. The three short-axis levels (PSAX-B/M/A) are
/// treated as one PSAX class.
enum class Plane { k2CH = 0, k3CH = 1, k4CH = 2, kPSAX = 3 };

constexpr int kNumPlanes = 4;

inline std::string plane_to_string(Plane p) {
  switch (p) {
    case Plane::k2CH:
      return "2CH";
    case Plane::k3CH:
      return "3CH";
    case Plane::k4CH:
      return "4CH";
    case Plane::kPSAX:
      return "PSAX";
  }
  return "?";
}

inline Plane plane_from_string(const std::string& s) {
  if (s == "2CH") return Plane::k2CH;
  if (s == "3CH") return Plane::k3CH;
  if (s == "4CH") return Plane::k4CH;
  if (s == "PSAX" || s == "PSAX-B" || s == "PSAX-M" || s == "PSAX-A") return Plane::kPSAX;
  throw DataError("unknown plane tag: " + s);
}

inline bool is_apical(Plane p) { return p != Plane::kPSAX; }

}  // namespace echoone
