// Copyright 2026 The Relight Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "relight/encodings.hpp"
#include "relight/geometry.hpp"
#include "relight/neural.hpp"
#include "relight/renderer.hpp"

namespace relight {

enum class ModelVariant { kV0 = 0, kV1, kV2, kV3, kV4, kV5 };

/// What each rung of the ladder feeds into the color network.
struct VariantFlags {
  bool absolute_light = false;       // gamma(R, t) of the light pose
  bool relative_light = false;       // SH of the per-sample light direction
  bool position_skip = false;        // h(x) into the color network
  bool delayed_embedding = false;    // e joins after the first color layer
  bool visibility = false;           // separate visibility network
};

VariantFlags variant_flags(ModelVariant v);
std::string to_string(ModelVariant v);
/// Accepts "v0".."v5" in either case. Throws InputError otherwise.
ModelVariant variant_from_string(const std::string& s);

struct ModelConfig {
  ModelVariant variant = ModelVariant::kV5;
  HashGridParams hash = HashGridParams::desk_profile();
  int embedding_width = 15;
  int hidden_width = 64;
  int geo_hidden_layers = 2;
  int rgb_hidden_layers = 4;
  int vis_hidden_layers = 4;
  SceneBounds bounds;

  void validate() const;
};

MlpSpec geo_spec(const ModelConfig& c);
MlpSpec rgb_spec(const ModelConfig& c);
/// Only meaningful for V5.
MlpSpec vis_spec(const ModelConfig& c);

/// The 156-wide Fourier code of a light pose, with the translation
/// expressed relative to the scene bounds.
template <typename T>
std::array<T, kFourierOutputDim> light_pose_code(const Pose6D& light, const SceneBounds& bounds);

template <typename T>
struct ModelGradients {
  AlignedVector<T> hash;
  AlignedVector<T> geo;
  AlignedVector<T> rgb;
  AlignedVector<T> vis;

  void zero();
  void add(const ModelGradients& other);
  bool finite() const;
};

/// Per-sample network inputs, all in world space. `light_pos` is needed from
/// V2 on, `light_code` (156 x N) only for V1.
template <typename T>
struct ModelInputs {
  Matrix<T> xs;
  Matrix<T> dirs;
  Matrix<T> light_pos;
  Matrix<T> light_code;

  Eigen::Index size() const { return xs.cols(); }
};

template <typename T>
struct ModelOutputs {
  std::vector<T> sigma;
  Matrix<T> rgb;
  std::vector<T> visibility;
  /// Positions that fell outside the bounds and were clamped.
  std::size_t clamped = 0;
};

template <typename T>
struct QueryResult {
  T sigma = T(0);
  Vector3<T> rgb = Vector3<T>::Zero();
  std::optional<T> visibility;
  bool finite = true;
};

/// Hash grid + geometry network + color network (+ visibility network for
/// V5), wired per the variant.
template <typename T>
class RelightModel final : public RadianceField<T> {
 public:
  struct Cache {
    Matrix<T> xn;
    Matrix<T> features;
    std::vector<T> sigma;
    typename Mlp<T>::Cache geo;
    typename Mlp<T>::Cache rgb;
    typename Mlp<T>::Cache vis;
  };

  /// Builds and initializes all parameters from `seed`.
  RelightModel(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  ModelVariant variant() const { return config_.variant; }
  VariantFlags flags() const { return variant_flags(config_.variant); }

  HashGrid<T>& hash_grid() { return hash_; }
  const HashGrid<T>& hash_grid() const { return hash_; }
  Mlp<T>& geo() { return geo_; }
  const Mlp<T>& geo() const { return geo_; }
  Mlp<T>& rgb() { return rgb_; }
  const Mlp<T>& rgb() const { return rgb_; }
  bool has_visibility() const { return vis_.has_value(); }
  Mlp<T>& vis() { return *vis_; }
  const Mlp<T>& vis() const { return *vis_; }

  ModelGradients<T> make_gradients() const;

  /// Fills inputs for samples that all share one light.
  ModelInputs<T> make_inputs(const Matrix<T>& xs, const Matrix<T>& dirs, const Pose6D& light) const;

  void forward(const ModelInputs<T>& in, ModelOutputs<T>& out, Cache* cache = nullptr) const;

  /// Accumulates gradients for upstream d_sigma (N), d_rgb (3 x N) and
  /// d_vis (N, V5 only).
  void backward(const Cache& cache, const ModelInputs<T>& in, std::span<const T> d_sigma,
                const Matrix<T>& d_rgb, std::span<const T> d_vis, ModelGradients<T>& grads) const;

  /// Single-point query. `x` and `d` in world space, `d` unit length.
  QueryResult<T> query(const Vec3& x, const Vec3& d, const Pose6D& light) const;

  void density(const Matrix<T>& xs, std::span<T> sigma) const override;
  void shade(const Matrix<T>& xs, const Matrix<T>& dirs, const Pose6D& light,
             FieldSamples<T>& out) const override;

 private:
  Matrix<T> normalized(const Matrix<T>& xs) const;
  void assemble_rgb_input(const ModelInputs<T>& in, const Matrix<T>& features, const Matrix<T>& geo_out,
                          Matrix<T>& rgb_in, Matrix<T>& extra) const;

  ModelConfig config_;
  HashGrid<T> hash_;
  Mlp<T> geo_;
  Mlp<T> rgb_;
  std::optional<Mlp<T>> vis_;
};

/// Equivalent to constructing the model directly; mirrors the ladder
/// vocabulary used by the CLI.
template <typename T>
RelightModel<T> build_variant(ModelVariant tag, const ModelConfig& base, std::uint64_t seed);

}  // namespace relight
