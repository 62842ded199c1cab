// Copyright (c) 2026 The echoone Authors
// SPDX-License-Identifier: Apache-2.0

#include "echoone/harmonize/manifest.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "echoone/core/hash.hpp"
#include "echoone/core/rng.hpp"

namespace fs = std::filesystem;

namespace echoone {

namespace {

Plane plane_from_frame(const std::string& frame, const std::string& context) {
  auto us = frame.find('_');
  if (us == std::string::npos)
    throw LayoutError(context + ": frame name must be <PLANE>_<id>, got " + frame);
  try {
    return plane_from_string(frame.substr(0, us));
  } catch (const DataError&) {
    throw LayoutError(context + ": unknown plane prefix in " + frame);
  }
}

std::string relativize(const std::string& path, const fs::path& base) {
  std::error_code ec;
  fs::path rel = fs::relative(path, base, ec);
  if (ec || rel.empty()) return path;
  const std::string s = rel.string();
  // Paths escaping far above the manifest dir stay absolute for readability.
  if (s.rfind("../../../", 0) == 0) return path;
  return s;
}

}  // namespace

std::vector<DatasetItem> scan_dataset(const std::string& root) {
  if (!fs::is_directory(root)) throw LayoutError(root + " is not a directory");
  const std::string dataset_id = fs::path(root).filename().string();
  std::vector<DatasetItem> items;
  std::vector<fs::path> subjects;
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_directory()) subjects.push_back(e.path());
    else if (e.path().filename() != "remap.cfg")
      throw LayoutError(root + ": unexpected file " + e.path().filename().string());
  }
  std::sort(subjects.begin(), subjects.end());
  if (subjects.empty()) throw LayoutError(root + " contains no subject directories");
  for (const auto& subj : subjects) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(subj))
      if (e.is_regular_file()) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    bool any = false;
    for (const auto& f : files) {
      if (f.extension() != ".png") continue;
      const std::string stem = f.stem().string();
      if (stem.size() > 5 && stem.substr(stem.size() - 5) == "_mask") continue;
      fs::path mask = f.parent_path() / (stem + "_mask.png");
      if (!fs::exists(mask))
        throw LayoutError(subj.string() + ": " + f.filename().string() + " has no " +
                          mask.filename().string());
      DatasetItem item;
      item.image_path = f.string();
      item.mask_path = mask.string();
      item.frame = stem;
      item.plane = plane_from_frame(stem, subj.string());
      item.subject_id = subj.filename().string();
      item.dataset_id = dataset_id;
      items.push_back(std::move(item));
      any = true;
    }
    if (!any) throw LayoutError(subj.string() + " contains no image frames");
  }
  return items;
}

void split_subjects(std::vector<std::string> subjects, std::uint64_t split_seed,
                    std::vector<std::string>& train, std::vector<std::string>& val,
                    std::vector<std::string>& test) {
  std::sort(subjects.begin(), subjects.end());
  std::string joined;
  for (const auto& s : subjects) {
    joined += s;
    joined += '\n';
  }
  Rng rng(split_seed ^ fnv1a64(joined));
  rng.shuffle(subjects.begin(), subjects.end());
  const int n = static_cast<int>(subjects.size());
  const int n_val = static_cast<int>(n * 0.1 + 0.5);
  const int n_test = n_val;
  train.clear();
  val.clear();
  test.clear();
  for (int i = 0; i < n; ++i) {
    if (i < n_val) val.push_back(subjects[static_cast<size_t>(i)]);
    else if (i < n_val + n_test) test.push_back(subjects[static_cast<size_t>(i)]);
    else train.push_back(subjects[static_cast<size_t>(i)]);
  }
}

ManifestSet build_manifest(const std::string& dataset_root, const RemapTable& table,
                           std::uint64_t split_seed) {
  std::vector<DatasetItem> items = scan_dataset(dataset_root);

  std::set<std::string> subject_set;
  for (const auto& it : items) subject_set.insert(it.subject_id);
  std::vector<std::string> train_s, val_s, test_s;
  split_subjects({subject_set.begin(), subject_set.end()}, split_seed, train_s, val_s, test_s);
  std::set<std::string> val_set(val_s.begin(), val_s.end());
  std::set<std::string> test_set(test_s.begin(), test_s.end());

  ManifestSet out;
  for (const auto& it : items) {
    // Validation pass: every mask must fully remap.
    try {
      remap_mask(read_png_gray(it.mask_path), table);
    } catch (const UnknownLabel& e) {
      throw UnknownLabel(e.label, it.mask_path);
    }
    ManifestRecord rec{it.image_path, it.mask_path, it.plane, it.subject_id, it.dataset_id};
    if (val_set.count(it.subject_id)) out.val.push_back(std::move(rec));
    else if (test_set.count(it.subject_id)) out.test.push_back(std::move(rec));
    else out.train.push_back(std::move(rec));
  }
  return out;
}

namespace {

void write_one(const fs::path& path, const std::vector<ManifestRecord>& recs,
               const std::string& runconfig_hash) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot write " + path.string());
  os << "# ECHOONE-MANIFEST-v1 runconfig=" << runconfig_hash << "\n";
  const fs::path base = path.parent_path();
  for (const auto& r : recs) {
    os << relativize(r.image_path, base) << '\t' << relativize(r.mask_path, base) << '\t'
       << plane_to_string(r.plane) << '\t' << r.subject_id << '\t' << r.dataset_id << '\n';
  }
  if (!os) throw DataError("short write to " + path.string());
}

}  // namespace

void write_manifests(const std::string& dir, const ManifestSet& set,
                     const std::string& runconfig_hash) {
  fs::create_directories(dir);
  write_one(fs::path(dir) / "train.tsv", set.train, runconfig_hash);
  write_one(fs::path(dir) / "val.tsv", set.val, runconfig_hash);
  write_one(fs::path(dir) / "test.tsv", set.test, runconfig_hash);
}

std::vector<ManifestRecord> read_manifest(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open manifest " + path);
  const fs::path base = fs::path(path).parent_path();
  auto resolve = [&](const std::string& p) {
    return fs::path(p).is_absolute() ? p : (base / p).lexically_normal().string();
  };
  std::vector<ManifestRecord> recs;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cols;
    size_t pos = 0;
    while (true) {
      size_t tab = line.find('\t', pos);
      cols.push_back(line.substr(pos, tab == std::string::npos ? tab : tab - pos));
      if (tab == std::string::npos) break;
      pos = tab + 1;
    }
    if (cols.size() != 5)
      throw DataError(path + ":" + std::to_string(lineno) + ": expected 5 tab-separated fields");
    ManifestRecord r;
    r.image_path = resolve(cols[0]);
    r.mask_path = resolve(cols[1]);
    r.plane = plane_from_string(cols[2]);
    r.subject_id = cols[3];
    r.dataset_id = cols[4];
    recs.push_back(std::move(r));
  }
  return recs;
}

}  // namespace echoone
