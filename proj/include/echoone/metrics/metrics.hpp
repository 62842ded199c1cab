// Copyright (c) 2026 The echoone Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "echoone/core/image.hpp"
#include "echoone/plane.hpp"

namespace echoone {

/// Dice coefficient on binary masks; 1.0 when both are empty.
double dice(const GrayImage& pred, const GrayImage& target);

/// Intersection over union on binary masks; 1.0 when both are empty.
double iou(const GrayImage& pred, const GrayImage& target);

/// 95th percentile (linear interpolation) of the combined pred-to-target and
/// target-to-pred boundary nearest-neighbor Euclidean distances. Boundaries
/// are foreground pixels with at least one 4-neighbor background pixel.
/// nullopt when either mask is empty.
std::optional<double> hd95(const GrayImage& pred, const GrayImage& target);

/// Foreground pixels with a 4-neighbor outside the region (image border
/// counts as background).
std::vector<std::pair<int, int>> boundary_pixels(const GrayImage& mask);

struct MetricRecord {
  std::string image_id;
  std::string dataset_id;
  Plane plane = Plane::k2CH;
  int structure = 1;  // unified label 1..3
  double dice = 0;
  double iou = 0;
  std::optional<double> hd95;
};

/// Per-structure records for one image: pred and gt are unified label masks.
std::vector<MetricRecord> score_image(const GrayImage& pred_labels,
                                      const GrayImage& gt_labels, int num_structures,
                                      const std::string& image_id,
                                      const std::string& dataset_id, Plane plane);

}  // namespace echoone
