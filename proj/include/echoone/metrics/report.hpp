// Copyright (c) 2026 The echoone Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "echoone/core/archive.hpp"
#include "echoone/harmonize/manifest.hpp"
#include "echoone/metrics/metrics.hpp"

namespace echoone {

struct Aggregate {
  std::string grouping;
  double mdice = 0;
  double miou = 0;
  std::optional<double> mhd95;
  long n = 0;
  long hd95_excluded = 0;
};

/// Groupings emitted, in order: plane:<P> (pooled over records),
/// plane_dataset_equal:<P> (mean of per-dataset means, the headline),
/// dataset:<D>, structure_plane:<s>/<P>. Undefined HD95 records are excluded
/// from mHD95 means and counted in hd95_excluded.
std::vector<Aggregate> aggregate_records(const std::vector<MetricRecord>& records);

struct EvalReport {
  std::vector<MetricRecord> records;
  std::vector<Aggregate> aggregates;
};

/// Predicts per-structure binary masks (S images, values 0/1) for one input
/// image at the evaluation grid.
using Predictor =
    std::function<std::vector<GrayImage>(const ManifestRecord&, const GrayImage&)>;

/// Loads every manifest record, resamples image (bilinear) and ground truth
/// (nearest) to eval_size, and scores the predictor's masks against the
/// ground truth. One record per (image, structure).
EvalReport evaluate(const std::vector<ManifestRecord>& records, int num_structures,
                    int eval_size, const Predictor& predictor);

void write_report_json(const std::string& path, const EvalReport& report, const Json& meta);
void write_report_csv(const std::string& path, const std::vector<Aggregate>& aggregates);

/// Plane-wise table (dataset-equal rows) for terminal output.
std::string format_plane_table(const std::vector<Aggregate>& aggregates);

/// Shortest round-trip decimal text for a double (locale-independent).
std::string format_double(double v);

}  // namespace echoone
