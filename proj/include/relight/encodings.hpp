// Copyright 2026 The Relight Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "relight/aligned.hpp"

namespace relight {

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using Vector3 = Eigen::Matrix<T, 3, 1>;

// ---------------------------------------------------------------------------
// Fourier features of the flattened light pose.

inline constexpr int kFourierInputDim = 12;
inline constexpr int kFourierOctaves = 6;
inline constexpr int kFourierOutputDim = kFourierInputDim * (1 + 2 * kFourierOctaves);  // 156

/// Layout: [v, sin(2^0 pi v), cos(2^0 pi v), ..., sin(2^5 pi v), cos(2^5 pi v)],
/// each block 12 wide. Throws InputError unless `v` has 12 components.
template <typename T>
std::array<T, kFourierOutputDim> fourier_encode(std::span<const T> v);

// ---------------------------------------------------------------------------
// Real spherical harmonics up to degree 3.

inline constexpr int kShDegree = 4;
inline constexpr int kShDim = kShDegree * kShDegree;  // 16

/// Ordered by degree, then m = -l..l. No Condon-Shortley phase. Throws
/// InputError if |d| deviates from 1 by more than 1e-6.
template <typename T>
std::array<T, kShDim> sh_encode(const Vector3<T>& d);

/// Same basis without the unit-norm check. Writes 16 values to `out`.
template <typename T>
void sh_encode_unchecked(T x, T y, T z, T* out);

// ---------------------------------------------------------------------------
// Multiresolution hash encoding.

struct HashGridParams {
  int levels = 16;
  int features_per_level = 2;
  std::uint32_t table_size = 1u << 19;
  int base_resolution = 16;
  double per_level_scale = 1.3819128799677658;  // 16 -> 2048 over 16 levels

  /// Growth factor that takes `base` to `top` over `levels` levels.
  static double scale_for_top(int levels, int base, int top);
  static HashGridParams full_profile();
  /// Smaller table for CPU training: 8 levels, 2^15 entries.
  static HashGridParams desk_profile();

  void validate() const;
  int output_dim() const { return levels * features_per_level; }
  std::size_t parameter_count() const {
    return static_cast<std::size_t>(levels) * table_size * features_per_level;
  }
  int resolution(int level) const;

  bool operator==(const HashGridParams&) const = default;
};

/// Spatial hash of a grid vertex; callers mask with table_size - 1.
inline std::uint32_t hash_vertex(std::uint32_t ix, std::uint32_t iy, std::uint32_t iz) {
  return ix ^ (iy * 2654435761u) ^ (iz * 805459861u);
}

/// Learnable feature table plus the encode/backward kernels. The table is
/// laid out [level][entry][feature].
template <typename T>
class HashGrid {
 public:
  explicit HashGrid(const HashGridParams& params);

  const HashGridParams& params() const { return params_; }
  int output_dim() const { return params_.output_dim(); }

  std::span<T> table() { return table_; }
  std::span<const T> table() const { return table_; }

  /// Uniform in [-1e-4, 1e-4].
  void initialize(std::mt19937_64& rng);

  /// Encodes one point in [0,1]^3 into `out` (output_dim values). Points
  /// outside the cube are clamped; returns true when clamping happened.
  bool encode(const T* x, T* out) const;

  /// Column-wise batch version; `xs` is 3 x N, `out` is resized to
  /// output_dim x N. Returns the number of clamped points.
  std::size_t encode_batch(const Matrix<T>& xs, Matrix<T>& out) const;

  /// Accumulates d loss / d table into `grad` (same length as the table).
  void backward_batch(const Matrix<T>& xs, const Matrix<T>& d_out, std::span<T> grad) const;

  /// Table index of the first feature of vertex (ix, iy, iz) at `level`.
  std::size_t vertex_offset(int level, std::uint32_t ix, std::uint32_t iy, std::uint32_t iz) const {
    const std::uint32_t slot = hash_vertex(ix, iy, iz) & (params_.table_size - 1);
    return (static_cast<std::size_t>(level) * params_.table_size + slot) * params_.features_per_level;
  }

 private:
  template <typename Visit>
  bool visit_corners(const T* x, Visit&& visit) const;

  HashGridParams params_;
  std::vector<int> resolutions_;
  AlignedVector<T> table_;
};

}  // namespace relight
