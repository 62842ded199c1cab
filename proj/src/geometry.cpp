// Copyright (c) 2026 The echoone Authors
// SPDX-License-Identifier: Apache-2.0

#include "echoone/harmonize/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

namespace echoone {

namespace {

constexpr int kDy4[] = {-1, 1, 0, 0};
constexpr int kDx4[] = {0, 0, -1, 1};
constexpr int kDy8[] = {-1, -1, -1, 0, 0, 1, 1, 1};
constexpr int kDx8[] = {-1, 0, 1, -1, 1, -1, 0, 1};

int count_nonzero(const GrayImage& img) {
  int n = 0;
  for (auto v : img.pix) n += v != 0;
  return n;
}

/// Neighbors p2..p9 clockwise from north, as in the Zhang-Suen paper.
void zs_neighbors(const GrayImage& img, int y, int x, int p[8]) {
  auto at = [&](int yy, int xx) -> int {
    return (yy >= 0 && yy < img.h && xx >= 0 && xx < img.w) ? (img.at(yy, xx) != 0) : 0;
  };
  p[0] = at(y - 1, x);
  p[1] = at(y - 1, x + 1);
  p[2] = at(y, x + 1);
  p[3] = at(y + 1, x + 1);
  p[4] = at(y + 1, x);
  p[5] = at(y + 1, x - 1);
  p[6] = at(y, x - 1);
  p[7] = at(y - 1, x - 1);
}

int eight_neighbor_count(const GrayImage& img, int y, int x) {
  int n = 0;
  for (int k = 0; k < 8; ++k) {
    int yy = y + kDy8[k], xx = x + kDx8[k];
    if (yy >= 0 && yy < img.h && xx >= 0 && xx < img.w && img.at(yy, xx) != 0) ++n;
  }
  return n;
}

std::vector<Pixel> skeleton_endpoints(const GrayImage& skel) {
  std::vector<Pixel> eps;
  for (int y = 0; y < skel.h; ++y)
    for (int x = 0; x < skel.w; ++x)
      if (skel.at(y, x) != 0 && eight_neighbor_count(skel, y, x) == 1)
        eps.push_back({y, x});
  return eps;
}

/// Picks the lexicographically ordered pair with maximal squared distance;
/// distance ties break toward the lexicographically smallest pair.
std::pair<Pixel, Pixel> farthest_pair(const std::vector<Pixel>& pts) {
  long best = -1;
  std::pair<Pixel, Pixel> out{pts[0], pts[0]};
  for (size_t i = 0; i < pts.size(); ++i) {
    for (size_t j = i + 1; j < pts.size(); ++j) {
      long dy = pts[i].y - pts[j].y, dx = pts[i].x - pts[j].x;
      long d = dy * dy + dx * dx;
      if (d > best) {
        best = d;
        out = pts[i] < pts[j] ? std::make_pair(pts[i], pts[j]) : std::make_pair(pts[j], pts[i]);
      }
    }
  }
  return out;
}

GrayImage largest_component(const GrayImage& bin) {
  std::vector<int> labels = connected_components(bin, 4);
  int nlab = 0;
  for (int l : labels) nlab = std::max(nlab, l + 1);
  if (nlab == 0) return GrayImage(bin.h, bin.w);
  std::vector<int> counts(static_cast<size_t>(nlab), 0);
  for (int l : labels)
    if (l >= 0) ++counts[static_cast<size_t>(l)];
  int best = 0;
  for (int l = 1; l < nlab; ++l)
    if (counts[static_cast<size_t>(l)] > counts[static_cast<size_t>(best)]) best = l;
  GrayImage out(bin.h, bin.w);
  for (size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == best) out.pix[i] = 1;
  return out;
}

/// Chord between the band-skeleton endpoints; used to provisionally seal the
/// basal opening of an apical band.
std::vector<Pixel> provisional_chord(const GrayImage& myo) {
  GrayImage skel = skeletonize(myo);
  std::vector<Pixel> eps = skeleton_endpoints(skel);
  if (eps.size() < 2) throw DegenerateShape("band has no open ends");
  auto [a, b] = farthest_pair(eps);
  return bresenham(a, b);
}

GrayImage cavity_region(const GrayImage& myo, Plane plane, const std::vector<Pixel>* chord) {
  GrayImage blocked = myo;
  for (auto& v : blocked.pix) v = v ? 1 : 0;
  if (is_apical(plane)) {
    for (const Pixel& p : *chord)
      if (p.y >= 0 && p.y < blocked.h && p.x >= 0 && p.x < blocked.w) blocked.at(p.y, p.x) = 1;
  }
  GrayImage enclosed = enclosed_background(blocked);
  if (is_apical(plane)) {
    // Chord pixels are walls above, but they are not cavity.
    for (const Pixel& p : *chord)
      if (p.y >= 0 && p.y < enclosed.h && p.x >= 0 && p.x < enclosed.w) enclosed.at(p.y, p.x) = 0;
  } else {
    for (size_t i = 0; i < enclosed.pix.size(); ++i)
      if (myo.pix[i]) enclosed.pix[i] = 0;
  }
  return largest_component(enclosed);
}

}  // namespace

std::vector<int> connected_components(const GrayImage& bin, int connectivity) {
  const int* dy = connectivity == 8 ? kDy8 : kDy4;
  const int* dx = connectivity == 8 ? kDx8 : kDx4;
  const int nd = connectivity == 8 ? 8 : 4;
  std::vector<int> labels(bin.size(), -1);
  int next = 0;
  std::deque<Pixel> queue;
  for (int y = 0; y < bin.h; ++y) {
    for (int x = 0; x < bin.w; ++x) {
      if (bin.at(y, x) == 0 || labels[static_cast<size_t>(y) * bin.w + x] >= 0) continue;
      labels[static_cast<size_t>(y) * bin.w + x] = next;
      queue.push_back({y, x});
      while (!queue.empty()) {
        Pixel p = queue.front();
        queue.pop_front();
        for (int k = 0; k < nd; ++k) {
          int yy = p.y + dy[k], xx = p.x + dx[k];
          if (yy < 0 || yy >= bin.h || xx < 0 || xx >= bin.w) continue;
          size_t idx = static_cast<size_t>(yy) * bin.w + xx;
          if (bin.pix[idx] != 0 && labels[idx] < 0) {
            labels[idx] = next;
            queue.push_back({yy, xx});
          }
        }
      }
      ++next;
    }
  }
  return labels;
}

GrayImage skeletonize(const GrayImage& bin) {
  GrayImage img(bin.h, bin.w);
  for (size_t i = 0; i < bin.pix.size(); ++i) img.pix[i] = bin.pix[i] ? 1 : 0;
  bool changed = true;
  std::vector<Pixel> kill;
  while (changed) {
    changed = false;
    for (int pass = 0; pass < 2; ++pass) {
      kill.clear();
      for (int y = 0; y < img.h; ++y) {
        for (int x = 0; x < img.w; ++x) {
          if (img.at(y, x) == 0) continue;
          int p[8];
          zs_neighbors(img, y, x, p);
          int b = p[0] + p[1] + p[2] + p[3] + p[4] + p[5] + p[6] + p[7];
          if (b < 2 || b > 6) continue;
          int a = 0;
          for (int k = 0; k < 8; ++k)
            if (p[k] == 0 && p[(k + 1) % 8] == 1) ++a;
          if (a != 1) continue;
          // pass 0: P2*P4*P6 and P4*P6*P8; pass 1: P2*P4*P8 and P2*P6*P8.
          bool c1 = pass == 0 ? (p[0] * p[2] * p[4]) == 0 : (p[0] * p[2] * p[6]) == 0;
          bool c2 = pass == 0 ? (p[2] * p[4] * p[6]) == 0 : (p[0] * p[4] * p[6]) == 0;
          if (c1 && c2) kill.push_back({y, x});
        }
      }
      for (const Pixel& q : kill) img.at(q.y, q.x) = 0;
      changed = changed || !kill.empty();
    }
  }
  return img;
}

std::vector<Pixel> bresenham(Pixel a, Pixel b) {
  std::vector<Pixel> out;
  int dx = std::abs(b.x - a.x), dy = -std::abs(b.y - a.y);
  int sx = a.x < b.x ? 1 : -1, sy = a.y < b.y ? 1 : -1;
  int err = dx + dy;
  int x = a.x, y = a.y;
  while (true) {
    out.push_back({y, x});
    if (x == b.x && y == b.y) break;
    int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y += sy;
    }
  }
  return out;
}

GrayImage enclosed_background(const GrayImage& blocked) {
  GrayImage reach(blocked.h, blocked.w);
  std::deque<Pixel> queue;
  auto push = [&](int y, int x) {
    if (blocked.at(y, x) == 0 && reach.at(y, x) == 0) {
      reach.at(y, x) = 1;
      queue.push_back({y, x});
    }
  };
  for (int x = 0; x < blocked.w; ++x) {
    push(0, x);
    push(blocked.h - 1, x);
  }
  for (int y = 0; y < blocked.h; ++y) {
    push(y, 0);
    push(y, blocked.w - 1);
  }
  while (!queue.empty()) {
    Pixel p = queue.front();
    queue.pop_front();
    for (int k = 0; k < 4; ++k) {
      int yy = p.y + kDy4[k], xx = p.x + kDx4[k];
      if (yy >= 0 && yy < blocked.h && xx >= 0 && xx < blocked.w) push(yy, xx);
    }
  }
  GrayImage out(blocked.h, blocked.w);
  for (size_t i = 0; i < out.pix.size(); ++i)
    out.pix[i] = (blocked.pix[i] == 0 && reach.pix[i] == 0) ? 1 : 0;
  return out;
}

GrayImage inner_contour(const GrayImage& myo, Plane plane) {
  if (count_nonzero(myo) == 0) throw DegenerateShape("empty myocardium mask");
  GrayImage cavity;
  if (is_apical(plane)) {
    std::vector<Pixel> chord = provisional_chord(myo);
    cavity = cavity_region(myo, plane, &chord);
  } else {
    cavity = cavity_region(myo, plane, nullptr);
  }
  if (count_nonzero(cavity) == 0) throw DegenerateShape("band encloses no cavity");
  GrayImage out(myo.h, myo.w);
  for (int y = 0; y < myo.h; ++y) {
    for (int x = 0; x < myo.w; ++x) {
      if (myo.at(y, x) == 0) continue;
      for (int k = 0; k < 4; ++k) {
        int yy = y + kDy4[k], xx = x + kDx4[k];
        if (yy >= 0 && yy < myo.h && xx >= 0 && xx < myo.w && cavity.at(yy, xx) != 0) {
          out.at(y, x) = 1;
          break;
        }
      }
    }
  }
  return out;
}

std::pair<Pixel, Pixel> detect_basal_landmarks(const GrayImage& myo, Plane plane) {
  if (!is_apical(plane)) throw DegenerateShape("landmarks are defined for apical planes only");
  GrayImage lining = inner_contour(myo, plane);
  GrayImage thin = skeletonize(lining);
  std::vector<Pixel> eps = skeleton_endpoints(thin);
  if (eps.size() < 2) throw DegenerateShape("inner contour is closed");
  return farthest_pair(eps);
}

GrayImage fill_cavity(const GrayImage& myo, Plane plane) {
  if (count_nonzero(myo) == 0) throw DegenerateShape("empty myocardium mask");
  GrayImage cavity;
  if (is_apical(plane)) {
    auto [a, b] = detect_basal_landmarks(myo, plane);
    std::vector<Pixel> chord = bresenham(a, b);
    cavity = cavity_region(myo, plane, &chord);
  } else {
    cavity = cavity_region(myo, plane, nullptr);
  }
  if (count_nonzero(cavity) == 0) throw EmptyCavity("band encloses no cavity");
  return cavity;
}

}  // namespace echoone
