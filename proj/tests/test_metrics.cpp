// Copyright 2026 The Relight Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "relight/errors.hpp"
#include "relight/metrics.hpp"
#include "temp_dir.hpp"

using namespace relight;

namespace {

Image random_image(int w, int h, std::mt19937_64& rng) {
  Image img(w, h);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  for (float& v : img.data) v = u(rng);
  return img;
}

// Direct per-window evaluation with explicit 2D Gaussian weights.
double ssim_oracle(const Image& a, const Image& b) {
  const int r = kSsimWindow / 2;
  double wk[kSsimWindow][kSsimWindow], norm = 0.0;
  for (int y = 0; y < kSsimWindow; ++y)
    for (int x = 0; x < kSsimWindow; ++x) norm += wk[y][x] = std::exp(-((x - r) * (x - r) + (y - r) * (y - r)) / (2 * 1.5 * 1.5));
  double total = 0.0;
  for (int c = 0; c < 3; ++c) {
    double sum = 0.0;
    int count = 0;
    for (int cy = r; cy + r < a.height; ++cy)
      for (int cx = r; cx + r < a.width; ++cx) {
        double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
        for (int y = -r; y <= r; ++y)
          for (int x = -r; x <= r; ++x) {
            const double w = wk[y + r][x + r] / norm;
            const double va = a.at(cx + x, cy + y, c), vb = b.at(cx + x, cy + y, c);
            ma += w * va;
            mb += w * vb;
            saa += w * va * va;
            sbb += w * vb * vb;
            sab += w * va * vb;
          }
        const double c1 = 1e-4, c2 = 9e-4;
        sum += (2 * ma * mb + c1) * (2 * (sab - ma * mb) + c2) /
               ((ma * ma + mb * mb + c1) * (saa - ma * ma + sbb - mb * mb + c2));
        ++count;
      }
    total += sum / count;
  }
  return total / 3.0;
}

}  // namespace

TEST_CASE("psnr closed forms") {
  // 48 of 75 channel values off by 1/8: MSE = 0.64 / 64 = 0.01.
  Image a(5, 5, 0.5f), b(5, 5, 0.5f);
  for (int i = 0; i < 48; ++i) b.data[i] = 0.625f;
  CHECK(std::abs(psnr(a, b) - 20.0) < 1e-9);
  Image c(4, 4, 0.0f), d(4, 4, 0.5f);
  CHECK(std::abs(psnr(c, d) - 10.0 * std::log10(4.0)) < 1e-9);
  Image e(4, 4, 1.0f);
  CHECK(std::abs(psnr(c, e) - 0.0) < 1e-9);
  CHECK(std::isinf(psnr(a, a)));
  CHECK(capped_psnr(psnr(a, a)) == kPsnrCap);
  CHECK(capped_psnr(31.5) == 31.5);
  CHECK_THROWS_AS(psnr(a, Image(4, 5)), InputError);
}

TEST_CASE("ssim identities and the constant-image closed form") {
  std::mt19937_64 rng(41);
  const Image a = random_image(24, 19, rng);
  CHECK(std::abs(ssim(a, a) - 1.0) < 1e-12);
  for (auto [ma, mb] : std::vector<std::pair<float, float>>{{0.25f, 0.5f}, {0.0f, 1.0f}, {0.75f, 0.125f}}) {
    const Image x(16, 16, ma), y(16, 16, mb);
    const double c1 = 1e-4;
    const double expect = (2.0 * ma * mb + c1) / (double(ma) * ma + double(mb) * mb + c1);
    CHECK(std::abs(ssim(x, y) - expect) < 1e-9);
  }
  CHECK_THROWS_AS(ssim(Image(10, 20), Image(10, 20)), InputError);
  CHECK_THROWS_AS(ssim(Image(12, 12), Image(13, 12)), InputError);
  CHECK_FALSE(ssim_available(Image(10, 40)));
  CHECK(ssim_available(Image(11, 11)));
}

TEST_CASE("ssim matches the direct window oracle") {
  std::mt19937_64 rng(42);
  for (int t = 0; t < 3; ++t) {
    const Image a = random_image(17 + t, 14 + 2 * t, rng);
    Image b = a;
    std::normal_distribution<float> g(0.0f, 0.1f);
    for (float& v : b.data) v = std::clamp(v + g(rng), 0.0f, 1.0f);
    const double s = ssim(a, b);
    CHECK(std::abs(s - ssim_oracle(a, b)) < 1e-9);
    CHECK(s < 1.0);
    CHECK(std::abs(ssim(b, a) - s) < 1e-12);  // symmetric
  }
}

TEST_CASE("metric report aggregation and files") {
  MetricReport r;
  r.split = "easy";
  r.frames = {{0, 1, 20.0, 0.5}, {1, 2, 30.0, 0.7}, {2, 0, std::numeric_limits<double>::infinity(), 1.0}};
  r.finalize();
  CHECK(r.mean_psnr == doctest::Approx((20.0 + 30.0 + 100.0) / 3.0));
  REQUIRE(r.mean_ssim);
  CHECK(*r.mean_ssim == doctest::Approx(0.7333333333));
  const auto j = to_json(r);
  CHECK(j["frame_count"] == 3);
  CHECK(j["frames"][2]["psnr"] == 100.0);
  r.frames[1].ssim.reset();
  r.finalize();
  CHECK_FALSE(r.mean_ssim);
  CHECK(to_json(r)["mean_ssim"].is_null());

  relight::testing::TempDir dir("metrics");
  write_metric_csv(dir.path() / "m.csv", r);
  std::ifstream in(dir.path() / "m.csv");
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  CHECK(header == "view_index,light_index,psnr,ssim");
  CHECK(row == "0,1,20,0.5");
}
