// Copyright (c) 2026 The echoone Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <limits>
#include <numeric>
#include <vector>

#include "echoone/core/errors.hpp"
#include "echoone/core/rng.hpp"
#include "echoone/core/tensor.hpp"

namespace echoone {

struct KmeansResult {
  MatX<double> centroids;           // (k, dim)
  std::vector<int> assignments;     // per point
  std::vector<double> objective_per_iter;
  double objective = 0;
  int reseeds = 0;
};

namespace detail {

inline double sq_dist(const MatX<double>& pts, int p, const MatX<double>& cents, int c) {
  return (pts.row(p) - cents.row(c)).squaredNorm();
}

/// One Lloyd run from the given initial centroids. Returns false if an empty
/// cluster survives the reseed budget.
inline bool lloyd(const MatX<double>& pts, MatX<double>& cents, KmeansResult& out,
                  int max_iters) {
  const int n = static_cast<int>(pts.rows());
  const int k = static_cast<int>(cents.rows());
  std::vector<int> assign(static_cast<size_t>(n), -1);
  out.objective_per_iter.clear();
  out.reseeds = 0;
  for (int iter = 0; iter < max_iters; ++iter) {
    bool changed = false;
    double obj = 0;
    for (int p = 0; p < n; ++p) {
      int best = 0;
      double bd = sq_dist(pts, p, cents, 0);
      for (int c = 1; c < k; ++c) {
        const double d = sq_dist(pts, p, cents, c);
        if (d < bd) {
          bd = d;
          best = c;
        }
      }
      obj += bd;
      if (assign[static_cast<size_t>(p)] != best) {
        assign[static_cast<size_t>(p)] = best;
        changed = true;
      }
    }
    out.objective_per_iter.push_back(obj);
    if (!changed) break;

    MatX<double> sums = MatX<double>::Zero(k, pts.cols());
    std::vector<int> counts(static_cast<size_t>(k), 0);
    for (int p = 0; p < n; ++p) {
      sums.row(assign[static_cast<size_t>(p)]) += pts.row(p);
      ++counts[static_cast<size_t>(assign[static_cast<size_t>(p)])];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<size_t>(c)] > 0) {
        cents.row(c) = sums.row(c) / counts[static_cast<size_t>(c)];
        continue;
      }
      if (out.reseeds >= 3) return false;
      ++out.reseeds;
      // Reseed from the point farthest from its assigned centroid.
      int far_p = 0;
      double far_d = -1;
      for (int p = 0; p < n; ++p) {
        const double d = sq_dist(pts, p, cents, assign[static_cast<size_t>(p)]);
        if (d > far_d) {
          far_d = d;
          far_p = p;
        }
      }
      if (far_d <= 0) return false;  // all points coincide with centroids
      cents.row(c) = pts.row(far_p);
    }
  }
  out.assignments = std::move(assign);
  out.objective = out.objective_per_iter.back();
  return true;
}

}  // namespace detail

/// Lloyd clustering with squared Euclidean distance: `restarts` random
/// initializations (distinct points), up to max_iters refinement iterations
/// each, best final objective kept. Nearest-centroid ties take the lowest
/// index; empty clusters are reseeded from the globally farthest point at
/// most 3 times per restart. Deterministic given the RNG state.
inline KmeansResult kmeans(const MatX<double>& points, int k, Rng& rng, int restarts = 10,
                           int max_iters = 100) {
  const int n = static_cast<int>(points.rows());
  if (k < 1) throw Error("cluster count must be >= 1");
  if (n < k)
    throw InsufficientData("clustering needs at least " + std::to_string(k) + " points, got " +
                           std::to_string(n));
  KmeansResult best;
  bool have = false;
  std::vector<int> idx(static_cast<size_t>(n));
  for (int r = 0; r < restarts; ++r) {
    std::iota(idx.begin(), idx.end(), 0);
    rng.shuffle(idx.begin(), idx.end());
    MatX<double> cents(k, points.cols());
    for (int c = 0; c < k; ++c) cents.row(c) = points.row(idx[static_cast<size_t>(c)]);
    KmeansResult run;
    if (!detail::lloyd(points, cents, run, max_iters)) continue;
    run.centroids = std::move(cents);
    if (!have || run.objective < best.objective) {
      best = std::move(run);
      have = true;
    }
  }
  if (!have)
    throw EmptyCluster("no clustering with " + std::to_string(k) +
                       " nonempty clusters found after reseeding");
  return best;
}

}  // namespace echoone
