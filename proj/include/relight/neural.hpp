// Copyright 2026 The Relight Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "relight/aligned.hpp"
#include "relight/encodings.hpp"

namespace relight {

enum class OutputActivation { kNone, kSigmoid, kExponential };

std::string to_string(OutputActivation a);
OutputActivation output_activation_from_string(const std::string& s);

/// Fully-connected ReLU stack. `widths` lists input, hidden layers, and
/// output. With `inject_after >= 0`, the output of hidden layer
/// `inject_after` (0-based) is concatenated with `inject_width` extra
/// features before the following affine layer.
struct MlpSpec {
  std::vector<int> widths;
  OutputActivation output_activation = OutputActivation::kNone;
  int inject_after = -1;
  int inject_width = 0;

  void validate() const;
  int input_width() const { return widths.front(); }
  int output_width() const { return widths.back(); }
  int hidden_layers() const { return static_cast<int>(widths.size()) - 2; }
  int affine_layers() const { return static_cast<int>(widths.size()) - 1; }
  /// Input width of affine layer k, including injected features.
  int layer_input_width(int k) const;
  std::size_t parameter_count() const;

  bool operator==(const MlpSpec&) const = default;
};

template <typename T>
class Mlp {
 public:
  /// Activations saved by forward() for a later backward().
  struct Cache {
    std::vector<Matrix<T>> inputs;  // input to each affine layer
    Matrix<T> output;
    std::uint64_t version = 0;
    const Mlp* owner = nullptr;
  };

  explicit Mlp(MlpSpec spec);

  const MlpSpec& spec() const { return spec_; }
  std::size_t parameter_count() const { return params_.size(); }

  std::span<const T> params() const { return params_; }
  /// Mutable access invalidates outstanding caches.
  std::span<T> mutable_params() {
    ++version_;
    return params_;
  }

  /// Glorot-uniform weights, zero biases.
  void initialize(std::mt19937_64& rng);

  /// `input` is input_width x N. `extra` must be given exactly when the spec
  /// declares an injection. When `cache` is non-null it is filled for
  /// backward().
  Matrix<T> forward(const Matrix<T>& input, const Matrix<T>* extra = nullptr,
                    Cache* cache = nullptr) const;

  /// Accumulates parameter gradients into `grad` (parameter_count values)
  /// and optionally writes input / injected-feature gradients. Throws
  /// InputError for a cache produced by another network or before the
  /// parameters last changed.
  void backward(const Cache& cache, const Matrix<T>& d_output, std::span<T> grad,
                Matrix<T>* d_input = nullptr, Matrix<T>* d_extra = nullptr) const;

  std::size_t weight_offset(int layer) const { return offsets_[layer]; }
  std::size_t bias_offset(int layer) const {
    return offsets_[layer] +
           static_cast<std::size_t>(spec_.widths[layer + 1]) * spec_.layer_input_width(layer);
  }

 private:
  MlpSpec spec_;
  std::vector<std::size_t> offsets_;
  AlignedVector<T> params_;
  std::uint64_t version_ = 1;
};

struct AdamHyper {
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
struct AdamState {
  AdamState() = default;
  AdamState(std::size_t n, AdamHyper h) : hyper(h), m(n, T(0)), v(n, T(0)) {}

  AdamHyper hyper;
  std::int64_t step = 0;
  std::int64_t skipped = 0;
  std::vector<T> m;
  std::vector<T> v;
};

/// Bias-corrected Adam update in place. A gradient containing NaN or Inf
/// leaves parameters and state untouched (except `skipped`) and returns
/// false.
template <typename T>
bool adam_step(std::span<T> params, std::span<const T> grads, AdamState<T>& state);

/// Checks every gradient group before touching any of them so that the
/// groups stay in lockstep.
template <typename T>
bool all_finite(std::span<const T> values);

}  // namespace relight
