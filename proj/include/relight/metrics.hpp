// Copyright 2026 The Relight Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "relight/image.hpp"

namespace relight {

inline constexpr double kPsnrCap = 100.0;
inline constexpr int kSsimWindow = 11;

/// 10 log10(1 / MSE) over all pixels and channels; +inf for identical
/// images. Throws InputError on a shape mismatch.
double psnr(const Image& a, const Image& b);
inline double capped_psnr(double db) { return db > kPsnrCap ? kPsnrCap : db; }

/// Mean SSIM over all valid 11x11 Gaussian windows (sigma 1.5, K1 0.01,
/// K2 0.03, range 1) and channels. Throws InputError for a shape mismatch or
/// images smaller than the window.
double ssim(const Image& a, const Image& b);
inline bool ssim_available(const Image& a) { return a.width >= kSsimWindow && a.height >= kSsimWindow; }

struct FrameMetric {
  int view = 0;
  int light = 0;
  double psnr = 0.0;  // capped
  std::optional<double> ssim;
};

struct MetricReport {
  std::string split;
  std::vector<FrameMetric> frames;
  double mean_psnr = 0.0;
  std::optional<double> mean_ssim;  // absent when any frame lacked SSIM

  std::size_t count() const { return frames.size(); }
  /// Recomputes the means from `frames`.
  void finalize();
};

nlohmann::json to_json(const MetricReport& r);
void write_metric_csv(const std::filesystem::path& path, const MetricReport& r);

}  // namespace relight
