// Copyright 2026 The Relight Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "relight/geometry.hpp"

namespace relight {

/// Band of a sphere around `center`: polar angle theta measured from +z,
/// azimuth phi from +x toward +y. Angles in radians.
struct SphericalRegion {
  double theta_min = 0.0;
  double theta_max = 0.0;
  double phi_min = 0.0;
  double phi_max = 0.0;
  double radius = 1.0;
  Vec3 center = Vec3::Zero();

  double solid_angle() const;
  /// Throws DegenerateError for an empty region, InputError for bad ranges.
  void validate() const;
  bool intersects(const SphericalRegion& other) const;
};

struct SphericalCell {
  double theta_lo = 0.0;
  double theta_hi = 0.0;
  double phi_lo = 0.0;
  double phi_hi = 0.0;

  double solid_angle() const;
  /// The point splitting the cell into equal areas along both axes.
  double center_theta() const;
  double center_phi() const { return 0.5 * (phi_lo + phi_hi); }
};

/// Partition into `count` cells of identical solid angle: latitude rings
/// whose widths in cos(theta) are proportional to their cell counts, each
/// ring split evenly in azimuth.
std::vector<SphericalCell> equal_area_cells(const SphericalRegion& region, int count);

Vec3 cell_center_point(const SphericalRegion& region, const SphericalCell& cell);

/// Poses at the cell centers looking at `target`.
std::vector<Pose6D> equal_area_waypoints(const SphericalRegion& region, int count, const Vec3& target,
                                         const Vec3& up = Vec3::UnitZ());

/// Named regions: "wedge" (side band for cameras) and "dome" (upper cap for
/// lights). They do not intersect.
SphericalRegion region_preset(const std::string& name, double radius, const Vec3& center = Vec3::Zero());

}  // namespace relight
