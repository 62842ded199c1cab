// Copyright (c) 2026 The echoone Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <unordered_map>

#include "echoone/core/image.hpp"

namespace echoone {

/// Source-label to unified-label mapping. Unified labels: 0 background,
/// 1 LV, 2 LV cavity, 3 myocardium. Source label 0 maps to 0 unless the
/// table says otherwise.
struct RemapTable {
  std::string name;
  std::unordered_map<int, int> entries;

  bool covers(int src) const { return src == 0 || entries.count(src) > 0; }
  int apply(int src) const;
};

/// Parses `src_label=unified_label` lines; '#' starts a comment.
RemapTable parse_remap_table(const std::string& path);

RemapTable identity_remap_table();

/// Per-pixel application of the table. Throws UnknownLabel on any source
/// value the table does not cover.
GrayImage remap_mask(const GrayImage& raw, const RemapTable& table);

}  // namespace echoone
