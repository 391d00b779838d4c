// Copyright 2026 The Relight Authors
// SPDX-License-Identifier: Apache-2.0

#include "relight/encodings.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "relight/errors.hpp"

namespace relight {

template <typename T>
std::array<T, kFourierOutputDim> fourier_encode(std::span<const T> v) {
  if (v.size() != kFourierInputDim) {
    throw InputError("fourier_encode expects 12 inputs, got " + std::to_string(v.size()));
  }
  std::array<T, kFourierOutputDim> out{};
  for (int i = 0; i < kFourierInputDim; ++i) out[i] = v[i];
  T freq = std::numbers::pi_v<T>;
  for (int k = 0; k < kFourierOctaves; ++k) {
    const int sin_base = kFourierInputDim * (1 + 2 * k);
    const int cos_base = sin_base + kFourierInputDim;
    for (int i = 0; i < kFourierInputDim; ++i) {
      out[sin_base + i] = std::sin(freq * v[i]);
      out[cos_base + i] = std::cos(freq * v[i]);
    }
    freq *= T(2);
  }
  return out;
}

template <typename T>
void sh_encode_unchecked(T x, T y, T z, T* out) {
  const T xx = x * x, yy = y * y, zz = z * z;
  const T xy = x * y, yz = y * z, xz = x * z;

  out[0] = T(0.28209479177387814);

  out[1] = T(0.48860251190291992) * y;
  out[2] = T(0.48860251190291992) * z;
  out[3] = T(0.48860251190291992) * x;

  out[4] = T(1.0925484305920792) * xy;
  out[5] = T(1.0925484305920792) * yz;
  out[6] = T(0.31539156525252005) * (T(3) * zz - T(1));
  out[7] = T(1.0925484305920792) * xz;
  out[8] = T(0.54627421529603959) * (xx - yy);

  out[9] = T(0.59004358992664352) * y * (T(3) * xx - yy);
  out[10] = T(2.8906114426405538) * xy * z;
  out[11] = T(0.45704579946446572) * y * (T(5) * zz - T(1));
  out[12] = T(0.37317633259011546) * z * (T(5) * zz - T(3));
  out[13] = T(0.45704579946446572) * x * (T(5) * zz - T(1));
  out[14] = T(1.4453057213202769) * z * (xx - yy);
  out[15] = T(0.59004358992664352) * x * (xx - T(3) * yy);
}

template <typename T>
std::array<T, kShDim> sh_encode(const Vector3<T>& d) {
  const double n = static_cast<double>(d.norm());
  if (!(std::abs(n - 1.0) <= 1e-6)) {
    throw InputError("sh_encode expects a unit vector, got norm " + std::to_string(n));
  }
  std::array<T, kShDim> out{};
  sh_encode_unchecked(d.x(), d.y(), d.z(), out.data());
  return out;
}

// ---------------------------------------------------------------------------

double HashGridParams::scale_for_top(int levels, int base, int top) {
  if (levels <= 1) return 2.0;
  return std::exp(std::log(static_cast<double>(top) / base) / (levels - 1));
}

HashGridParams HashGridParams::full_profile() {
  HashGridParams p;
  p.levels = 16;
  p.features_per_level = 2;
  p.table_size = 1u << 19;
  p.base_resolution = 16;
  p.per_level_scale = scale_for_top(16, 16, 2048);
  return p;
}

HashGridParams HashGridParams::desk_profile() {
  HashGridParams p = full_profile();
  p.levels = 8;
  p.table_size = 1u << 15;
  p.per_level_scale = scale_for_top(8, 16, 2048);
  return p;
}

void HashGridParams::validate() const {
  if (levels < 1) throw InputError("hash grid needs at least one level");
  if (features_per_level < 1) throw InputError("hash grid needs at least one feature per level");
  if (table_size == 0 || (table_size & (table_size - 1)) != 0) {
    throw InputError("hash table size must be a power of two");
  }
  if (base_resolution < 2) throw InputError("hash grid base resolution must be >= 2");
  if (!(per_level_scale > 1.0)) throw InputError("hash grid per-level scale must exceed 1");
}

int HashGridParams::resolution(int level) const {
  // Guard so that e.g. 16 * 2^7 does not land on 2047.9999.
  return static_cast<int>(std::floor(base_resolution * std::pow(per_level_scale, level) + 1e-9));
}

template <typename T>
HashGrid<T>::HashGrid(const HashGridParams& params) : params_(params) {
  params_.validate();
  resolutions_.resize(params_.levels);
  for (int l = 0; l < params_.levels; ++l) resolutions_[l] = params_.resolution(l);
  table_.assign(params_.parameter_count(), T(0));
}

template <typename T>
void HashGrid<T>::initialize(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-1e-4, 1e-4);
  for (T& v : table_) v = static_cast<T>(dist(rng));
}

template <typename T>
template <typename Visit>
bool HashGrid<T>::visit_corners(const T* x, Visit&& visit) const {
  bool clamped = false;
  T p[3];
  for (int a = 0; a < 3; ++a) {
    T v = x[a];
    if (!(v >= T(0))) {
      v = T(0);
      clamped = true;
    } else if (v > T(1)) {
      v = T(1);
      clamped = true;
    }
    p[a] = v;
  }
  for (int level = 0; level < params_.levels; ++level) {
    const T res = static_cast<T>(resolutions_[level]);
    std::uint32_t base[3];
    T frac[3];
    for (int a = 0; a < 3; ++a) {
      const T s = p[a] * res;
      const T f = std::floor(s);
      base[a] = static_cast<std::uint32_t>(f);
      frac[a] = s - f;
    }
    for (int corner = 0; corner < 8; ++corner) {
      T w = T(1);
      std::uint32_t idx[3];
      for (int a = 0; a < 3; ++a) {
        const bool hi = (corner >> a) & 1;
        idx[a] = base[a] + (hi ? 1u : 0u);
        w *= hi ? frac[a] : T(1) - frac[a];
      }
      visit(level, vertex_offset(level, idx[0], idx[1], idx[2]), w);
    }
  }
  return clamped;
}

template <typename T>
bool HashGrid<T>::encode(const T* x, T* out) const {
  const int f = params_.features_per_level;
  for (int i = 0; i < output_dim(); ++i) out[i] = T(0);
  return visit_corners(x, [&](int level, std::size_t offset, T w) {
    T* dst = out + level * f;
    const T* src = table_.data() + offset;
    for (int k = 0; k < f; ++k) dst[k] += w * src[k];
  });
}

template <typename T>
std::size_t HashGrid<T>::encode_batch(const Matrix<T>& xs, Matrix<T>& out) const {
  if (xs.rows() != 3) throw InputError("hash encode expects 3 x N positions");
  out.resize(output_dim(), xs.cols());
  std::size_t clamped = 0;
  for (Eigen::Index i = 0; i < xs.cols(); ++i) {
    clamped += encode(xs.col(i).data(), out.col(i).data()) ? 1 : 0;
  }
  return clamped;
}

template <typename T>
void HashGrid<T>::backward_batch(const Matrix<T>& xs, const Matrix<T>& d_out,
                                 std::span<T> grad) const {
  if (grad.size() != table_.size()) throw InputError("hash gradient buffer has the wrong size");
  if (d_out.rows() != output_dim() || d_out.cols() != xs.cols()) {
    throw InputError("hash backward: gradient shape mismatch");
  }
  const int f = params_.features_per_level;
  for (Eigen::Index i = 0; i < xs.cols(); ++i) {
    const T* g = d_out.col(i).data();
    visit_corners(xs.col(i).data(), [&](int level, std::size_t offset, T w) {
      T* dst = grad.data() + offset;
      const T* src = g + level * f;
      for (int k = 0; k < f; ++k) dst[k] += w * src[k];
    });
  }
}

template std::array<float, kFourierOutputDim> fourier_encode<float>(std::span<const float>);
template std::array<double, kFourierOutputDim> fourier_encode<double>(std::span<const double>);
template std::array<float, kShDim> sh_encode<float>(const Vector3<float>&);
template std::array<double, kShDim> sh_encode<double>(const Vector3<double>&);
template void sh_encode_unchecked<float>(float, float, float, float*);
template void sh_encode_unchecked<double>(double, double, double, double*);
template class HashGrid<float>;
template class HashGrid<double>;

}  // namespace relight
