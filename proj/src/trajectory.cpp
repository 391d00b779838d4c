// Copyright 2026 The Relight Authors
// SPDX-License-Identifier: Apache-2.0

#include "relight/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "relight/errors.hpp"

namespace relight {

namespace {
constexpr double kPi = std::numbers::pi;
constexpr double kDeg = kPi / 180.0;
}  // namespace

double SphericalRegion::solid_angle() const {
  return (std::cos(theta_min) - std::cos(theta_max)) * (phi_max - phi_min);
}

void SphericalRegion::validate() const {
  if (!(theta_min >= 0.0 && theta_max <= kPi + 1e-12)) throw InputError("region: theta must lie in [0, pi]");
  if (!(phi_max - phi_min <= 2.0 * kPi + 1e-12)) throw InputError("region: azimuth span exceeds 2 pi");
  if (!(theta_min < theta_max) || !(phi_min < phi_max) || !(radius > 0.0)) {
    throw DegenerateError("region has zero area");
  }
}

bool SphericalRegion::intersects(const SphericalRegion& o) const {
  const bool theta_overlap = theta_min < o.theta_max && o.theta_min < theta_max;
  if (!theta_overlap) return false;
  // Compare azimuth intervals modulo 2 pi.
  for (int k = -1; k <= 1; ++k) {
    const double shift = 2.0 * kPi * k;
    if (phi_min < o.phi_max + shift && o.phi_min + shift < phi_max) return true;
  }
  return false;
}

double SphericalCell::solid_angle() const {
  return (std::cos(theta_lo) - std::cos(theta_hi)) * (phi_hi - phi_lo);
}

double SphericalCell::center_theta() const {
  return std::acos(0.5 * (std::cos(theta_lo) + std::cos(theta_hi)));
}

std::vector<SphericalCell> equal_area_cells(const SphericalRegion& region, int count) {
  region.validate();
  if (count < 1) throw InputError("equal-area partition needs at least one cell");
  const double c0 = std::cos(region.theta_min);
  const double c1 = std::cos(region.theta_max);
  const double dtheta = region.theta_max - region.theta_min;
  const double dphi = region.phi_max - region.phi_min;
  const double mid_sin = std::max(std::sin(std::acos(0.5 * (c0 + c1))), 1e-3);

  // Rings sized so cells come out roughly square.
  int rings = static_cast<int>(std::lround(std::sqrt(count * dtheta / (dphi * mid_sin))));
  rings = std::clamp(rings, 1, count);
  std::vector<int> per_ring;
  for (; rings >= 1; --rings) {
    per_ring.assign(rings, 0);
    bool ok = true;
    long prev = 0;
    for (int i = 0; i < rings; ++i) {
      const double theta_b = region.theta_min + dtheta * (i + 1) / rings;
      const double frac = (c0 - std::cos(theta_b)) / (c0 - c1);
      const long cum = i + 1 == rings ? count : std::lround(frac * count);
      per_ring[i] = static_cast<int>(cum - prev);
      prev = cum;
      if (per_ring[i] < 1) ok = false;
    }
    if (ok) break;
  }

  std::vector<SphericalCell> cells;
  cells.reserve(count);
  int cum = 0;
  double theta_lo = region.theta_min;
  for (std::size_t i = 0; i < per_ring.size(); ++i) {
    cum += per_ring[i];
    const double theta_hi = cum == count ? region.theta_max
                                         : std::acos(c0 - (c0 - c1) * static_cast<double>(cum) / count);
    for (int k = 0; k < per_ring[i]; ++k) {
      SphericalCell cell;
      cell.theta_lo = theta_lo;
      cell.theta_hi = theta_hi;
      cell.phi_lo = region.phi_min + dphi * k / per_ring[i];
      cell.phi_hi = region.phi_min + dphi * (k + 1) / per_ring[i];
      cells.push_back(cell);
    }
    theta_lo = theta_hi;
  }
  return cells;
}

Vec3 cell_center_point(const SphericalRegion& region, const SphericalCell& cell) {
  const double th = cell.center_theta();
  const double ph = cell.center_phi();
  return region.center +
         region.radius * Vec3(std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th));
}

std::vector<Pose6D> equal_area_waypoints(const SphericalRegion& region, int count, const Vec3& target,
                                         const Vec3& up) {
  std::vector<Pose6D> poses;
  for (const SphericalCell& cell : equal_area_cells(region, count)) {
    poses.push_back(Pose6D::look_at(cell_center_point(region, cell), target, up));
  }
  return poses;
}

SphericalRegion region_preset(const std::string& name, double radius, const Vec3& center) {
  SphericalRegion r;
  r.radius = radius;
  r.center = center;
  if (name == "wedge") {
    r.theta_min = 55.0 * kDeg;
    r.theta_max = 80.0 * kDeg;
    r.phi_min = 55.0 * kDeg;
    r.phi_max = 125.0 * kDeg;
  } else if (name == "dome") {
    r.theta_min = 10.0 * kDeg;
    r.theta_max = 50.0 * kDeg;
    r.phi_min = 0.0;
    r.phi_max = 180.0 * kDeg;
  } else {
    throw InputError("unknown region preset '" + name + "' (expected wedge or dome)");
  }
  return r;
}

}  // namespace relight
