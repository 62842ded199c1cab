// Copyright (c) 2026 The echoone Authors
// SPDX-License-Identifier: Apache-2.0

#include "echoone/harmonize/mhd_io.hpp"

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <vector>

#include "echoone/core/errors.hpp"

namespace echoone {
namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

GrayImage read_mhd_gray(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    size_t eq = line.find('=');
    if (eq == std::string::npos) continue;
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }

  auto get = [&](const std::string& key) -> std::string {
    auto it = kv.find(key);
    return it == kv.end() ? "" : it->second;
  };

  if (!get("CompressedData").empty() && get("CompressedData") != "False")
    throw DataError(path + ": compressed payloads are not supported");
  if (!get("BinaryDataByteOrderMSB").empty() && get("BinaryDataByteOrderMSB") != "False")
    throw DataError(path + ": big-endian payloads are not supported");
  if (!get("ElementNumberOfChannels").empty() && get("ElementNumberOfChannels") != "1")
    throw DataError(path + ": multi-channel payloads are not supported");

  std::vector<long> dims;
  {
    std::stringstream ss(get("DimSize"));
    long d;
    while (ss >> d) dims.push_back(d);
  }
  if (dims.size() == 3 && dims[2] == 1) dims.pop_back();
  if (dims.size() != 2 || dims[0] <= 0 || dims[1] <= 0)
    throw DataError(path + ": expected a 2-d image, DimSize '" + get("DimSize") + "'");
  const long w = dims[0], h = dims[1];  // MetaImage orders fastest axis first

  const std::string etype = get("ElementType");
  int bytes = 0;
  if (etype == "MET_UCHAR")
    bytes = 1;
  else if (etype == "MET_SHORT" || etype == "MET_USHORT")
    bytes = 2;
  else
    throw DataError(path + ": unsupported ElementType '" + etype + "'");

  std::string data_file = get("ElementDataFile");
  if (data_file.empty() || data_file == "LIST" || data_file == "LOCAL")
    throw DataError(path + ": unsupported ElementDataFile '" + data_file + "'");
  std::filesystem::path data_path = std::filesystem::path(path).parent_path() / data_file;

  std::ifstream raw(data_path, std::ios::binary);
  if (!raw) throw DataError("cannot open " + data_path.string());
  long header_skip = 0;
  if (!get("HeaderSize").empty()) header_skip = std::stol(get("HeaderSize"));
  if (header_skip > 0) raw.seekg(header_skip, std::ios::beg);

  const size_t n = static_cast<size_t>(w) * static_cast<size_t>(h);
  GrayImage img(static_cast<int>(h), static_cast<int>(w));
  if (bytes == 1) {
    raw.read(reinterpret_cast<char*>(img.pix.data()), static_cast<std::streamsize>(n));
    if (static_cast<size_t>(raw.gcount()) != n)
      throw DataError(data_path.string() + ": truncated payload");
  } else {
    std::vector<std::int16_t> buf(n);
    raw.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n * 2));
    if (static_cast<size_t>(raw.gcount()) != n * 2)
      throw DataError(data_path.string() + ": truncated payload");
    const bool is_unsigned = etype == "MET_USHORT";
    for (size_t i = 0; i < n; ++i) {
      long v = is_unsigned ? static_cast<long>(static_cast<std::uint16_t>(buf[i]))
                           : static_cast<long>(buf[i]);
      img.pix[i] = static_cast<std::uint8_t>(std::clamp(v, 0L, 255L));
    }
  }
  return img;
}

}  // namespace echoone
