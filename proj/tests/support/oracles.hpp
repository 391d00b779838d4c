// Copyright 2026 The Relight Authors
// SPDX-License-Identifier: Apache-2.0

// Straight-line reference implementations used only by the tests.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "relight/encodings.hpp"

namespace relight::oracle {

// Associated Legendre P_l^m(x) for m >= 0 without the Condon-Shortley phase,
// by the standard three-term recurrence.
inline double legendre(int l, int m, double x) {
  double pmm = 1.0;
  const double s = std::sqrt(std::max(0.0, 1.0 - x * x));
  for (int i = 1; i <= m; ++i) pmm *= (2.0 * i - 1.0) * s;
  if (l == m) return pmm;
  double pm1 = x * (2.0 * m + 1.0) * pmm;
  if (l == m + 1) return pm1;
  double pl = 0.0;
  for (int ll = m + 2; ll <= l; ++ll) {
    pl = ((2.0 * ll - 1.0) * x * pm1 - (ll + m - 1.0) * pmm) / (ll - m);
    pmm = pm1;
    pm1 = pl;
  }
  return pl;
}

inline double factorial(int n) { return n <= 1 ? 1.0 : n * factorial(n - 1); }

inline std::array<double, 16> real_sh(double x, double y, double z) {
  std::array<double, 16> out{};
  const double theta = std::acos(std::max(-1.0, std::min(1.0, z)));
  const double phi = std::atan2(y, x);
  for (int l = 0; l < 4; ++l) {
    for (int m = -l; m <= l; ++m) {
      const int am = std::abs(m);
      const double k = std::sqrt((2 * l + 1) / (4 * std::numbers::pi) * factorial(l - am) / factorial(l + am));
      const double p = legendre(l, am, std::cos(theta));
      double v;
      if (m == 0) v = k * p;
      else if (m > 0) v = std::sqrt(2.0) * k * p * std::cos(m * phi);
      else v = std::sqrt(2.0) * k * p * std::sin(am * phi);
      out[l * l + l + m] = v;
    }
  }
  return out;
}

inline std::size_t hash_slot(const HashGridParams& p, int level, std::uint64_t ix, std::uint64_t iy,
                             std::uint64_t iz) {
  const std::uint64_t h = (ix * 1ull) ^ (iy * 2654435761ull) ^ (iz * 805459861ull);
  const std::uint64_t slot = (h & 0xFFFFFFFFull) & (p.table_size - 1);
  return (static_cast<std::size_t>(level) * p.table_size + slot) * p.features_per_level;
}

inline std::vector<double> hash_corner(const std::vector<double>& table, const HashGridParams& p, int level,
                                       std::uint64_t ix, std::uint64_t iy, std::uint64_t iz) {
  const std::size_t o = hash_slot(p, level, ix, iy, iz);
  return std::vector<double>(table.begin() + o, table.begin() + o + p.features_per_level);
}

inline std::vector<double> hash_cell_mean(const std::vector<double>& table, const HashGridParams& p, int level,
                                          std::uint64_t ix, std::uint64_t iy, std::uint64_t iz) {
  std::vector<double> mean(p.features_per_level, 0.0);
  for (int dx = 0; dx < 2; ++dx)
    for (int dy = 0; dy < 2; ++dy)
      for (int dz = 0; dz < 2; ++dz) {
        const auto c = hash_corner(table, p, level, ix + dx, iy + dy, iz + dz);
        for (int f = 0; f < p.features_per_level; ++f) mean[f] += c[f] / 8.0;
      }
  return mean;
}

inline std::vector<double> hash_encode(const std::vector<double>& table, const HashGridParams& p, const double* x) {
  std::vector<double> out;
  for (int level = 0; level < p.levels; ++level) {
    const double res = std::floor(p.base_resolution * std::pow(p.per_level_scale, level) + 1e-9);
    double fx[3];
    std::uint64_t b[3];
    for (int a = 0; a < 3; ++a) {
      const double s = x[a] * res;
      b[a] = static_cast<std::uint64_t>(std::floor(s));
      fx[a] = s - std::floor(s);
    }
    std::vector<double> acc(p.features_per_level, 0.0);
    for (int dx = 0; dx < 2; ++dx)
      for (int dy = 0; dy < 2; ++dy)
        for (int dz = 0; dz < 2; ++dz) {
          const double w = (dx ? fx[0] : 1 - fx[0]) * (dy ? fx[1] : 1 - fx[1]) * (dz ? fx[2] : 1 - fx[2]);
          const auto c = hash_corner(table, p, level, b[0] + dx, b[1] + dy, b[2] + dz);
          for (int f = 0; f < p.features_per_level; ++f) acc[f] += w * c[f];
        }
    out.insert(out.end(), acc.begin(), acc.end());
  }
  return out;
}

// Composite of one ray by the textbook product formula, no shortcuts.
struct CompositeOracle {
  std::vector<double> weights;
  std::array<double, 3> rgb{};
  double opacity = 0.0;
};

inline CompositeOracle composite(const std::vector<double>& sigma, const std::vector<double>& delta,
                                 const std::vector<std::array<double, 3>>& color, const std::vector<double>& vis) {
  CompositeOracle out;
  double trans = 1.0;
  for (std::size_t i = 0; i < sigma.size(); ++i) {
    const double alpha = 1.0 - std::exp(-sigma[i] * delta[i]);
    const double w = trans * alpha;
    out.weights.push_back(w);
    const double o = vis.empty() ? 1.0 : vis[i];
    for (int k = 0; k < 3; ++k) out.rgb[k] += w * o * color[i][k];
    trans *= 1.0 - alpha;
  }
  out.opacity = 1.0 - trans;
  return out;
}

}  // namespace relight::oracle
