// Copyright 2026 The Relight Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "relight/encodings.hpp"
#include "relight/errors.hpp"
#include "oracles.hpp"

using namespace relight;

TEST_CASE("fourier_encode layout") {
  std::array<double, 12> v{};
  auto out = fourier_encode<double>(v);
  CHECK(out.size() == 156);
  for (int i = 0; i < 12; ++i) CHECK(out[i] == 0.0);
  for (int k = 0; k < 6; ++k) {
    for (int i = 0; i < 12; ++i) {
      CHECK(out[12 + 24 * k + i] == 0.0);
      CHECK(out[12 + 24 * k + 12 + i] == 1.0);
    }
  }
  v[4] = 0.5;
  out = fourier_encode<double>(v);
  CHECK(out[4] == 0.5);
  CHECK(out[12 + 4] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(std::abs(out[24 + 4]) < 1e-15);
  std::vector<double> wrong(11, 0.0);
  CHECK_THROWS_AS(fourier_encode<double>(wrong), InputError);
}

TEST_CASE("fourier_encode is bounded outside the identity block") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int t = 0; t < 100; ++t) {
    std::array<double, 12> v;
    for (double& x : v) x = u(rng);
    const auto out = fourier_encode<double>(v);
    for (int i = 0; i < 12; ++i) CHECK(out[i] == v[i]);
    for (int i = 12; i < 156; ++i) CHECK(std::abs(out[i]) <= 1.0);
    // Matches the closed form slot by slot.
    for (int k = 0; k < 6; ++k)
      for (int i = 0; i < 12; ++i) {
        const double a = std::ldexp(std::numbers::pi, k) * v[i];
        CHECK(std::abs(out[12 + 24 * k + i] - std::sin(a)) < 1e-12);
        CHECK(std::abs(out[24 + 24 * k + i] - std::cos(a)) < 1e-12);
      }
  }
}

TEST_CASE("sh_encode constant band and pole") {
  const auto pole = sh_encode<double>(Vector3<double>(0, 0, 1));
  CHECK(pole[0] == doctest::Approx(0.28209479).epsilon(1e-8));
  CHECK(pole[2] == doctest::Approx(0.48860251).epsilon(1e-8));
  CHECK(pole[1] == 0.0);
  CHECK(pole[3] == 0.0);
  const auto other = sh_encode<double>(Vector3<double>(0.6, 0.0, 0.8));
  CHECK(other[0] == pole[0]);
  CHECK_THROWS_AS(sh_encode<double>(Vector3<double>(1, 1, 0)), InputError);
}

TEST_CASE("sh_encode matches the associated Legendre oracle") {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> n(0, 1);
  for (int t = 0; t < 100; ++t) {
    const Vector3<double> d = Vector3<double>(n(rng), n(rng), n(rng)).normalized();
    const auto got = sh_encode<double>(d);
    const auto want = oracle::real_sh(d.x(), d.y(), d.z());
    for (int i = 0; i < 16; ++i) CHECK(std::abs(got[i] - want[i]) < 1e-9);
    // Addition theorem per band.
    for (int l = 0; l < 4; ++l) {
      double s = 0.0;
      for (int m = -l; m <= l; ++m) s += got[l * l + l + m] * got[l * l + l + m];
      CHECK(std::abs(s - (2 * l + 1) / (4 * std::numbers::pi)) < 1e-9);
    }
  }
}

TEST_CASE("hash grid parameters") {
  const auto p = HashGridParams::full_profile();
  CHECK(p.levels == 16);
  CHECK(p.table_size == (1u << 19));
  CHECK(p.resolution(0) == 16);
  CHECK(p.resolution(15) == 2048);
  const auto d = HashGridParams::desk_profile();
  CHECK(d.levels == 8);
  CHECK(d.table_size == (1u << 15));
  CHECK(d.resolution(7) == 2048);
  HashGridParams bad = d;
  bad.table_size = 1000;
  CHECK_THROWS_AS(bad.validate(), InputError);
  bad = d;
  bad.per_level_scale = 1.0;
  CHECK_THROWS_AS(bad.validate(), InputError);
  bad = d;
  bad.base_resolution = 1;
  CHECK_THROWS_AS(bad.validate(), InputError);
}

namespace {

HashGridParams small_params() {
  HashGridParams p;
  p.levels = 4;
  p.features_per_level = 2;
  p.table_size = 1u << 10;
  p.base_resolution = 4;
  p.per_level_scale = 1.7;
  return p;
}

}  // namespace

TEST_CASE("hash encode: corners and midpoints against the trilinear oracle") {
  const auto p = small_params();
  HashGrid<double> grid(p);
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(-1, 1);
  for (double& v : grid.table()) v = u(rng);
  const std::vector<double> table(grid.table().begin(), grid.table().end());

  std::uniform_int_distribution<int> pick(0, 1000);
  for (int t = 0; t < 50; ++t) {
    for (int level = 0; level < p.levels; ++level) {
      const int res = p.resolution(level);
      const std::uint32_t ix = pick(rng) % res, iy = pick(rng) % res, iz = pick(rng) % res;
      // Grid corner.
      double x[3] = {double(ix) / res, double(iy) / res, double(iz) / res};
      std::vector<double> out(grid.output_dim());
      grid.encode(x, out.data());
      const auto corner = oracle::hash_corner(table, p, level, ix, iy, iz);
      for (int f = 0; f < p.features_per_level; ++f) CHECK(std::abs(out[level * 2 + f] - corner[f]) < 1e-12);
      // Cell midpoint.
      double mid[3] = {(ix + 0.5) / res, (iy + 0.5) / res, (iz + 0.5) / res};
      grid.encode(mid, out.data());
      const auto mean = oracle::hash_cell_mean(table, p, level, ix, iy, iz);
      for (int f = 0; f < p.features_per_level; ++f) CHECK(std::abs(out[level * 2 + f] - mean[f]) < 1e-6);
    }
  }
}

TEST_CASE("hash encode: general points against the trilinear oracle") {
  const auto p = small_params();
  HashGrid<double> grid(p);
  std::mt19937_64 rng(14);
  grid.initialize(rng);
  std::uniform_real_distribution<double> u(0, 1);
  const std::vector<double> table(grid.table().begin(), grid.table().end());
  for (int t = 0; t < 100; ++t) {
    double x[3] = {u(rng), u(rng), u(rng)};
    std::vector<double> out(grid.output_dim());
    grid.encode(x, out.data());
    const auto want = oracle::hash_encode(table, p, x);
    for (int i = 0; i < grid.output_dim(); ++i) CHECK(std::abs(out[i] - want[i]) < 1e-12);
  }
}

TEST_CASE("hash encode: clamping and continuity") {
  const auto p = small_params();
  HashGrid<double> grid(p);
  std::mt19937_64 rng(15);
  std::uniform_real_distribution<double> u(-1, 1);
  for (double& v : grid.table()) v = u(rng);
  std::vector<double> a(grid.output_dim()), b(grid.output_dim());
  double out_of_range[3] = {-0.2, 0.5, 1.3};
  double clamped[3] = {0.0, 0.5, 1.0};
  CHECK(grid.encode(out_of_range, a.data()));
  CHECK_FALSE(grid.encode(clamped, b.data()));
  CHECK(a == b);
  Matrix<double> xs(3, 2);
  xs << -0.2, 0.3, 0.5, 0.3, 1.3, 0.3;
  Matrix<double> feats;
  CHECK(grid.encode_batch(xs, feats) == 1);
  CHECK(feats.rows() == grid.output_dim());

  std::uniform_real_distribution<double> v(0.01, 0.99);
  for (int t = 0; t < 100; ++t) {
    double x[3] = {v(rng), v(rng), v(rng)};
    double y[3] = {x[0] + 1e-6, x[1] - 1e-6, x[2] + 1e-6};
    grid.encode(x, a.data());
    grid.encode(y, b.data());
    for (int i = 0; i < grid.output_dim(); ++i) CHECK(std::abs(a[i] - b[i]) < 1e-3);
  }
}

TEST_CASE("hash backward matches finite differences") {
  const auto p = small_params();
  HashGrid<double> grid(p);
  std::mt19937_64 rng(16);
  std::uniform_real_distribution<double> u(-1, 1), pos(0.02, 0.98);
  for (double& v : grid.table()) v = u(rng);
  Matrix<double> xs(3, 5), up(grid.output_dim(), 5);
  for (int i = 0; i < xs.size(); ++i) xs.data()[i] = pos(rng);
  for (int i = 0; i < up.size(); ++i) up.data()[i] = u(rng);
  auto loss = [&] {
    Matrix<double> f;
    grid.encode_batch(xs, f);
    return (f.array() * up.array()).sum();
  };
  std::vector<double> grad(grid.table().size(), 0.0);
  grid.backward_batch(xs, up, grad);
  int checked = 0;
  for (std::size_t i = 0; i < grad.size() && checked < 40; ++i) {
    if (grad[i] == 0.0) continue;
    const double keep = grid.table()[i];
    grid.table()[i] = keep + 1e-5;
    const double lp = loss();
    grid.table()[i] = keep - 1e-5;
    const double lm = loss();
    grid.table()[i] = keep;
    const double fd = (lp - lm) / 2e-5;
    CHECK(std::abs(fd - grad[i]) <= 1e-4 * std::max(1.0, std::abs(fd)));
    ++checked;
  }
  CHECK(checked == 40);
}
