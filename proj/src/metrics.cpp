// Copyright (c) 2026 The echoone Authors
// SPDX-License-Identifier: Apache-2.0

#include "echoone/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "echoone/core/errors.hpp"

namespace echoone {

namespace {

void require_same(const GrayImage& a, const GrayImage& b) {
  if (a.h != b.h || a.w != b.w)
    throw ShapeMismatch("mask shapes differ: " + std::to_string(a.h) + "x" +
                        std::to_string(a.w) + " vs " + std::to_string(b.h) + "x" +
                        std::to_string(b.w));
}

struct Counts {
  long inter = 0, np = 0, nt = 0;
};

Counts overlap_counts(const GrayImage& pred, const GrayImage& target) {
  Counts c;
  for (size_t i = 0; i < pred.pix.size(); ++i) {
    const bool p = pred.pix[i] != 0, t = target.pix[i] != 0;
    c.inter += p && t;
    c.np += p;
    c.nt += t;
  }
  return c;
}

/// Directed nearest-boundary distances from each point of `from`.
void directed_distances(const std::vector<std::pair<int, int>>& from,
                        const std::vector<std::pair<int, int>>& to,
                        std::vector<double>& out) {
  for (const auto& [y, x] : from) {
    long best = std::numeric_limits<long>::max();
    for (const auto& [ty, tx] : to) {
      const long dy = y - ty, dx = x - tx;
      best = std::min(best, dy * dy + dx * dx);
    }
    out.push_back(std::sqrt(static_cast<double>(best)));
  }
}

}  // namespace

double dice(const GrayImage& pred, const GrayImage& target) {
  require_same(pred, target);
  const Counts c = overlap_counts(pred, target);
  if (c.np + c.nt == 0) return 1.0;
  return 2.0 * static_cast<double>(c.inter) / static_cast<double>(c.np + c.nt);
}

double iou(const GrayImage& pred, const GrayImage& target) {
  require_same(pred, target);
  const Counts c = overlap_counts(pred, target);
  const long uni = c.np + c.nt - c.inter;
  if (uni == 0) return 1.0;
  return static_cast<double>(c.inter) / static_cast<double>(uni);
}

std::vector<std::pair<int, int>> boundary_pixels(const GrayImage& mask) {
  std::vector<std::pair<int, int>> out;
  for (int y = 0; y < mask.h; ++y) {
    for (int x = 0; x < mask.w; ++x) {
      if (mask.at(y, x) == 0) continue;
      const bool edge = y == 0 || y == mask.h - 1 || x == 0 || x == mask.w - 1 ||
                        mask.at(y - 1, x) == 0 || mask.at(y + 1, x) == 0 ||
                        mask.at(y, x - 1) == 0 || mask.at(y, x + 1) == 0;
      if (edge) out.emplace_back(y, x);
    }
  }
  return out;
}

std::optional<double> hd95(const GrayImage& pred, const GrayImage& target) {
  require_same(pred, target);
  const auto bp = boundary_pixels(pred);
  const auto bt = boundary_pixels(target);
  if (bp.empty() || bt.empty()) return std::nullopt;
  std::vector<double> dists;
  dists.reserve(bp.size() + bt.size());
  directed_distances(bp, bt, dists);
  directed_distances(bt, bp, dists);
  std::sort(dists.begin(), dists.end());
  const double pos = 0.95 * static_cast<double>(dists.size() - 1);
  const size_t lo = static_cast<size_t>(pos);
  const double frac = pos - static_cast<double>(lo);
  if (lo + 1 >= dists.size()) return dists.back();
  return dists[lo] * (1.0 - frac) + dists[lo + 1] * frac;
}

std::vector<MetricRecord> score_image(const GrayImage& pred_labels,
                                      const GrayImage& gt_labels, int num_structures,
                                      const std::string& image_id,
                                      const std::string& dataset_id, Plane plane) {
  require_same(pred_labels, gt_labels);
  std::vector<MetricRecord> out;
  out.reserve(static_cast<size_t>(num_structures));
  GrayImage p(pred_labels.h, pred_labels.w), t(gt_labels.h, gt_labels.w);
  for (int s = 1; s <= num_structures; ++s) {
    for (size_t i = 0; i < p.pix.size(); ++i) {
      p.pix[i] = pred_labels.pix[i] == s;
      t.pix[i] = gt_labels.pix[i] == s;
    }
    MetricRecord r;
    r.image_id = image_id;
    r.dataset_id = dataset_id;
    r.plane = plane;
    r.structure = s;
    r.dice = dice(p, t);
    r.iou = iou(p, t);
    r.hd95 = hd95(p, t);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace echoone
