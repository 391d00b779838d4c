// Copyright 2026 The Relight Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <random>
#include <span>
#include <vector>

#include "relight/encodings.hpp"
#include "relight/geometry.hpp"

namespace relight {

/// Quadrature samples of one ray. `rgb` is interleaved (3 per sample);
/// `visibility` is empty unless the field predicts point-to-light visibility.
template <typename T>
struct RaySamples {
  std::vector<T> t;
  std::vector<T> delta;
  std::vector<T> sigma;
  std::vector<T> rgb;
  std::vector<T> visibility;

  std::size_t size() const { return t.size(); }
  bool has_visibility() const { return !visibility.empty(); }
  /// Throws InputError on inconsistent lengths, non-increasing t, delta <= 0
  /// or negative density. NaNs are tolerated here and flagged by composite.
  void validate() const;
};

template <typename T>
using RaySampleBatch = std::vector<RaySamples<T>>;

template <typename T>
struct CompositeResult {
  Vector3<T> rgb = Vector3<T>::Zero();
  std::vector<T> weights;
  T opacity = T(0);
  T depth = T(0);
  /// False when a density or color was NaN; such rays carry zero color and
  /// are excluded from the loss.
  bool valid = true;
};

template <typename T>
struct SampleGradients {
  std::vector<T> d_sigma;
  std::vector<T> d_rgb;
  std::vector<T> d_visibility;
};

// Raw-pointer kernels shared by the batch API and the trainer. `vis` may be
// null. Returns false for an invalid (NaN) ray.
template <typename T>
bool composite_kernel(int n, const T* t, const T* delta, const T* sigma, const T* rgb, const T* vis,
                      T* weights, T* out_rgb, T* opacity, T* depth);

/// Gradients of the composited color w.r.t. densities, colors and
/// visibilities for upstream gradient `g` (3 values). `d_vis` may be null.
template <typename T>
void composite_backward_kernel(int n, const T* delta, const T* sigma, const T* rgb, const T* vis,
                               const T* g, T* d_sigma, T* d_rgb, T* d_vis);

template <typename T>
CompositeResult<T> composite(const RaySamples<T>& samples);

template <typename T>
std::vector<CompositeResult<T>> composite(const RaySampleBatch<T>& batch);

template <typename T>
SampleGradients<T> composite_backward(const RaySamples<T>& samples, const Vector3<T>& d_rgb);

/// One sample per equal bin of [t_near, t_far]: the bin center, or a uniform
/// draw inside the bin when `jitter` is set.
template <typename T>
std::vector<T> stratified_samples(const Ray& ray, int n_coarse, bool jitter, std::mt19937_64& rng);

/// Inverse-CDF draws from the piecewise-constant density given by
/// `weights` over the bins around `coarse_t` (edges at midpoints, clamped to
/// [t_near, t_far]). All-zero weights fall back to uniform. With `rng` null
/// the quantiles are deterministic midpoints (i + 0.5) / n_fine.
template <typename T>
std::vector<T> hierarchical_samples(std::span<const T> coarse_t, std::span<const T> weights,
                                    T t_near, T t_far, int n_fine, std::mt19937_64* rng);

// ---------------------------------------------------------------------------
// Rendering through a field.

template <typename T>
struct FieldSamples {
  std::vector<T> sigma;
  Matrix<T> rgb;                // 3 x N
  std::vector<T> visibility;    // N, or empty
};

/// Anything that can be queried along rays. Positions and directions are in
/// world coordinates, columns are samples.
template <typename T>
class RadianceField {
 public:
  virtual ~RadianceField() = default;
  virtual void density(const Matrix<T>& xs, std::span<T> sigma) const = 0;
  virtual void shade(const Matrix<T>& xs, const Matrix<T>& dirs, const Pose6D& light,
                     FieldSamples<T>& out) const = 0;
};

struct SamplingConfig {
  int n_coarse = 128;
  int n_fine = 128;
  bool jitter = false;
};

/// Merged coarse + fine sample positions for a set of rays, flattened.
/// Ray r owns entries [offsets[r], offsets[r+1]).
template <typename T>
struct SamplePlan {
  std::vector<std::size_t> offsets;
  std::vector<T> t;
  std::vector<T> delta;
  std::size_t samples(std::size_t r) const { return offsets[r + 1] - offsets[r]; }
};

/// Coarse pass through the field's density, hierarchical resampling with
/// detached weights, merge and sort. Rays with t_far <= t_near get no
/// samples. `rng` drives jitter and fine draws; null means deterministic.
template <typename T>
SamplePlan<T> plan_samples(const RadianceField<T>& field, std::span<const Ray> rays,
                           const SamplingConfig& config, std::mt19937_64* rng);

template <typename T>
struct RenderResult {
  Vector3<T> rgb = Vector3<T>::Zero();
  T opacity = T(0);
  T depth = T(0);
  /// Weight-averaged visibility, 1 for fields without visibility.
  T mean_visibility = T(1);
  bool valid = true;
};

template <typename T>
std::vector<RenderResult<T>> render_rays(const RadianceField<T>& field, std::span<const Ray> rays,
                                         const Pose6D& light, const SamplingConfig& config,
                                         std::mt19937_64* rng = nullptr);

template <typename T>
RenderResult<T> render_ray(const RadianceField<T>& field, const Ray& ray, const Pose6D& light,
                           const SamplingConfig& config, std::mt19937_64* rng = nullptr);

/// Restricts each ray's [t_near, t_far] to its overlap with the bounds;
/// rays that miss end up with t_far == t_near.
void clip_to_bounds(std::span<Ray> rays, const SceneBounds& bounds);

}  // namespace relight
