// Copyright (c) 2026 The echoone Authors
// SPDX-License-Identifier: Apache-2.0

#include "echoone/harmonize/remap.hpp"

#include <fstream>

#include "echoone/core/errors.hpp"

namespace echoone {

int RemapTable::apply(int src) const {
  auto it = entries.find(src);
  if (it != entries.end()) return it->second;
  if (src == 0) return 0;
  throw UnknownLabel(src);
}

RemapTable parse_remap_table(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open remap table " + path);
  RemapTable table;
  table.name = path;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    auto last = line.find_last_not_of(" \t\r");
    line = line.substr(first, last - first + 1);
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw DataError(path + ":" + std::to_string(lineno) + ": expected src=dst");
    int src = 0, dst = 0;
    try {
      src = std::stoi(line.substr(0, eq));
      dst = std::stoi(line.substr(eq + 1));
    } catch (const std::exception&) {
      throw DataError(path + ":" + std::to_string(lineno) + ": labels must be integers");
    }
    if (dst < 0 || dst > 3)
      throw DataError(path + ":" + std::to_string(lineno) +
                      ": unified labels are 0..3, got " + std::to_string(dst));
    table.entries[src] = dst;
  }
  return table;
}

RemapTable identity_remap_table() {
  RemapTable t;
  t.name = "identity";
  for (int i = 0; i < 4; ++i) t.entries[i] = i;
  return t;
}

GrayImage remap_mask(const GrayImage& raw, const RemapTable& table) {
  GrayImage out(raw.h, raw.w);
  // One lookup per distinct value via a 256-slot cache; -1 means unseen.
  int cache[256];
  for (int& c : cache) c = -1;
  for (size_t i = 0; i < raw.pix.size(); ++i) {
    int v = raw.pix[i];
    if (cache[v] < 0) cache[v] = table.apply(v);
    out.pix[i] = static_cast<std::uint8_t>(cache[v]);
  }
  return out;
}

}  // namespace echoone
