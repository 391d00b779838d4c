// Copyright 2026 The Relight Authors
// SPDX-License-Identifier: Apache-2.0

#include "relight/metrics.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <limits>

#include "relight/errors.hpp"

namespace relight {

namespace {

void check_shapes(const Image& a, const Image& b) {
  if (!a.same_shape(b) || a.data.size() != b.data.size()) {
    throw InputError("image shapes differ: " + std::to_string(a.width) + "x" + std::to_string(a.height) + " vs " +
                     std::to_string(b.width) + "x" + std::to_string(b.height));
  }
}

std::array<double, kSsimWindow> gaussian_window() {
  std::array<double, kSsimWindow> w{};
  double sum = 0.0;
  for (int i = 0; i < kSsimWindow; ++i) {
    const double x = i - kSsimWindow / 2;
    w[i] = std::exp(-x * x / (2.0 * 1.5 * 1.5));
    sum += w[i];
  }
  for (double& v : w) v /= sum;
  return w;
}

// Separable valid-mode filter of a single-channel plane.
std::vector<double> filter_valid(const std::vector<double>& src, int w, int h,
                                 const std::array<double, kSsimWindow>& k) {
  const int ow = w - kSsimWindow + 1, oh = h - kSsimWindow + 1;
  std::vector<double> rows(static_cast<std::size_t>(ow) * h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int i = 0; i < kSsimWindow; ++i) acc += k[i] * src[static_cast<std::size_t>(y) * w + x + i];
      rows[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  std::vector<double> out(static_cast<std::size_t>(ow) * oh);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int i = 0; i < kSsimWindow; ++i) acc += k[i] * rows[static_cast<std::size_t>(y + i) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  return out;
}

}  // namespace

double psnr(const Image& a, const Image& b) {
  check_shapes(a, b);
  if (a.data.empty()) throw InputError("psnr of empty images");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = static_cast<double>(a.data[i]) - b.data[i];
    sum += d * d;
  }
  const double mse = sum / static_cast<double>(a.data.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return -10.0 * std::log10(mse);
}

double ssim(const Image& a, const Image& b) {
  check_shapes(a, b);
  if (!ssim_available(a)) {
    throw InputError("ssim needs images of at least 11x11, got " + std::to_string(a.width) + "x" +
                     std::to_string(a.height));
  }
  constexpr double c1 = (0.01 * 0.01), c2 = (0.03 * 0.03);
  const auto k = gaussian_window();
  const int w = a.width, h = a.height;
  const std::size_t n = static_cast<std::size_t>(w) * h;
  double total = 0.0;
  for (int c = 0; c < 3; ++c) {
    std::vector<double> pa(n), pb(n), aa(n), bb(n), ab(n);
    for (std::size_t i = 0; i < n; ++i) {
      pa[i] = a.data[i * 3 + c];
      pb[i] = b.data[i * 3 + c];
      aa[i] = pa[i] * pa[i];
      bb[i] = pb[i] * pb[i];
      ab[i] = pa[i] * pb[i];
    }
    const auto mu_a = filter_valid(pa, w, h, k), mu_b = filter_valid(pb, w, h, k);
    const auto e_aa = filter_valid(aa, w, h, k), e_bb = filter_valid(bb, w, h, k), e_ab = filter_valid(ab, w, h, k);
    double sum = 0.0;
    for (std::size_t i = 0; i < mu_a.size(); ++i) {
      const double ma = mu_a[i], mb = mu_b[i];
      const double va = e_aa[i] - ma * ma, vb = e_bb[i] - mb * mb, cov = e_ab[i] - ma * mb;
      sum += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
    total += sum / static_cast<double>(mu_a.size());
  }
  return total / 3.0;
}

void MetricReport::finalize() {
  mean_psnr = 0.0;
  mean_ssim.reset();
  if (frames.empty()) return;
  double ps = 0.0, ss = 0.0;
  bool all_ssim = true;
  for (const auto& f : frames) {
    ps += capped_psnr(f.psnr);
    if (f.ssim) ss += *f.ssim;
    else all_ssim = false;
  }
  mean_psnr = ps / static_cast<double>(frames.size());
  if (all_ssim) mean_ssim = ss / static_cast<double>(frames.size());
}

nlohmann::json to_json(const MetricReport& r) {
  nlohmann::json j;
  j["split"] = r.split;
  j["frame_count"] = r.count();
  j["mean_psnr"] = r.mean_psnr;
  j["mean_ssim"] = r.mean_ssim ? nlohmann::json(*r.mean_ssim) : nlohmann::json(nullptr);
  j["frames"] = nlohmann::json::array();
  for (const auto& f : r.frames) {
    j["frames"].push_back({{"view_index", f.view},
                           {"light_index", f.light},
                           {"psnr", capped_psnr(f.psnr)},
                           {"ssim", f.ssim ? nlohmann::json(*f.ssim) : nlohmann::json(nullptr)}});
  }
  return j;
}

void write_metric_csv(const std::filesystem::path& path, const MetricReport& r) {
  std::ofstream os(path);
  if (!os) throw InputError("cannot write " + path.string());
  os.precision(10);
  os << "view_index,light_index,psnr,ssim\n";
  for (const auto& f : r.frames) {
    os << f.view << ',' << f.light << ',' << capped_psnr(f.psnr) << ',';
    if (f.ssim) os << *f.ssim;
    os << '\n';
  }
}

}  // namespace relight
