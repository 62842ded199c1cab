// Copyright (c) 2026 The echoone Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "echoone/core/image.hpp"

namespace echoone {

/// Minimal MetaImage (.mhd + raw payload) reader for 2-d single-channel
/// images: MET_UCHAR passes through, MET_SHORT/MET_USHORT are clamped to
/// 0..255. 3-d headers are accepted when the third dimension is 1.
/// Compressed or big-endian payloads raise DataError.
GrayImage read_mhd_gray(const std::string& path);

}  // namespace echoone
