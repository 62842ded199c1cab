// Copyright (c) 2026 The echoone Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "echoone/harmonize/remap.hpp"
#include "echoone/plane.hpp"

namespace echoone {

struct ManifestRecord {
  std::string image_path;
  std::string mask_path;
  Plane plane = Plane::k2CH;
  std::string subject_id;
  std::string dataset_id;
};

struct ManifestSet {
  std::vector<ManifestRecord> train, val, test;
};

/// One image/mask pair found on disk.
struct DatasetItem {
  std::string image_path;
  std::string mask_path;
  std::string frame;  // file stem without the _mask suffix
  Plane plane = Plane::k2CH;
  std::string subject_id;
  std::string dataset_id;
};

/// Scans `<root>/<subject_id>/<frame>.png` + `<frame>_mask.png`. The frame
/// name must start with a plane tag followed by '_' (PSAX-B/M/A collapse to
/// PSAX). dataset_id is the root's basename. Items come back sorted by
/// (subject_id, frame). Throws LayoutError on malformed layouts.
std::vector<DatasetItem> scan_dataset(const std::string& root);

/// Splits subjects 80/10/10 and validates every mask through the table.
/// The subject assignment depends only on the subject-id set and split_seed.
/// Record paths point at the original files; no files are written.
ManifestSet build_manifest(const std::string& dataset_root, const RemapTable& table,
                           std::uint64_t split_seed);

/// Deterministic subject split used by build_manifest: returns subjects in
/// shuffled order with the leading n_val assigned to val and the following
/// n_test to test.
void split_subjects(std::vector<std::string> subjects, std::uint64_t split_seed,
                    std::vector<std::string>& train, std::vector<std::string>& val,
                    std::vector<std::string>& test);

/// Writes train.tsv / val.tsv / test.tsv. Records are stored with paths
/// relative to `dir` when possible; a leading comment line carries the
/// format name and the producing run-config hash.
void write_manifests(const std::string& dir, const ManifestSet& set,
                     const std::string& runconfig_hash);

/// Reads one manifest file; relative paths are resolved against the
/// manifest's directory.
std::vector<ManifestRecord> read_manifest(const std::string& path);

}  // namespace echoone
