// Copyright (c) 2026 The echoone Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <utility>
#include <vector>

#include "echoone/core/image.hpp"
#include "echoone/plane.hpp"

namespace echoone {

struct Pixel {
  int y = 0;
  int x = 0;

  bool operator==(const Pixel& o) const { return y == o.y && x == o.x; }
  bool operator<(const Pixel& o) const { return y != o.y ? y < o.y : x < o.x; }
};

/// Connected-component labels for nonzero pixels; zero pixels get -1.
/// Labels are assigned in raster-scan order starting at 0.
/// connectivity is 4 or 8.
std::vector<int> connected_components(const GrayImage& bin, int connectivity);

/// Zhang-Suen thinning of a binary image to a 1-pixel-wide skeleton.
GrayImage skeletonize(const GrayImage& bin);

/// Integer line rasterization, endpoints included.
std::vector<Pixel> bresenham(Pixel a, Pixel b);

/// Background pixels (4-connected) not reachable from the image border when
/// `blocked` pixels are treated as walls. Returns a 0/1 image.
GrayImage enclosed_background(const GrayImage& blocked);

/// The lining of the myocardium band facing the cavity: band pixels
/// 4-adjacent to the enclosed cavity region. For apical planes the open end
/// is provisionally sealed with a chord between the band-skeleton endpoints
/// so the cavity side can be told apart from the outside.
GrayImage inner_contour(const GrayImage& myo, Plane plane);

/// Basal endpoints of the inner contour, ordered lexicographically by (y,x).
/// Apical planes only.
std::pair<Pixel, Pixel> detect_basal_landmarks(const GrayImage& myo, Plane plane);

/// The cavity region enclosed by the myocardium band. Apical planes close the
/// basal opening with the straight landmark chord; chord pixels stay
/// background. PSAX takes the largest enclosed background component of the
/// annulus. Returns a 0/1 image disjoint from the band.
GrayImage fill_cavity(const GrayImage& myo, Plane plane);

}  // namespace echoone
