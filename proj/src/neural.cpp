// Copyright 2026 The Relight Authors
// SPDX-License-Identifier: Apache-2.0

#include "relight/neural.hpp"

#include <cmath>

#include "relight/errors.hpp"

namespace relight {

std::string to_string(OutputActivation a) {
  switch (a) {
    case OutputActivation::kNone: return "none";
    case OutputActivation::kSigmoid: return "sigmoid";
    case OutputActivation::kExponential: return "exponential";
  }
  return "none";
}

OutputActivation output_activation_from_string(const std::string& s) {
  if (s == "none") return OutputActivation::kNone;
  if (s == "sigmoid") return OutputActivation::kSigmoid;
  if (s == "exponential") return OutputActivation::kExponential;
  throw InputError("unknown output activation '" + s + "'");
}

void MlpSpec::validate() const {
  if (widths.size() < 3) throw InputError("MLP needs at least one hidden layer");
  for (int w : widths)
    if (w < 1) throw InputError("MLP widths must be >= 1");
  if (inject_after >= 0) {
    if (inject_after >= hidden_layers()) throw InputError("MLP injection layer index out of range");
    if (inject_width < 1) throw InputError("MLP injection width must be >= 1");
  } else if (inject_width != 0) {
    throw InputError("MLP injection width given without an injection layer");
  }
}

int MlpSpec::layer_input_width(int k) const {
  return widths[k] + (inject_after >= 0 && k == inject_after + 1 ? inject_width : 0);
}

std::size_t MlpSpec::parameter_count() const {
  std::size_t n = 0;
  for (int k = 0; k < affine_layers(); ++k) {
    n += static_cast<std::size_t>(widths[k + 1]) * (layer_input_width(k) + 1);
  }
  return n;
}

template <typename T>
Mlp<T>::Mlp(MlpSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  std::size_t off = 0;
  for (int k = 0; k < spec_.affine_layers(); ++k) {
    offsets_.push_back(off);
    off += static_cast<std::size_t>(spec_.widths[k + 1]) * (spec_.layer_input_width(k) + 1);
  }
  params_.assign(off, T(0));
}

template <typename T>
void Mlp<T>::initialize(std::mt19937_64& rng) {
  ++version_;
  for (int k = 0; k < spec_.affine_layers(); ++k) {
    const int fan_in = spec_.layer_input_width(k);
    const int fan_out = spec_.widths[k + 1];
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    T* w = params_.data() + weight_offset(k);
    for (std::size_t i = 0; i < static_cast<std::size_t>(fan_in) * fan_out; ++i) {
      w[i] = static_cast<T>(dist(rng));
    }
    T* b = params_.data() + bias_offset(k);
    for (int i = 0; i < fan_out; ++i) b[i] = T(0);
  }
}

template <typename T>
Matrix<T> Mlp<T>::forward(const Matrix<T>& input, const Matrix<T>* extra, Cache* cache) const {
  using Map = Eigen::Map<const Matrix<T>>;
  using VecMap = Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>;
  if (input.rows() != spec_.input_width()) {
    throw InputError("MLP input width " + std::to_string(input.rows()) + " != expected " +
                     std::to_string(spec_.input_width()));
  }
  const bool wants_extra = spec_.inject_after >= 0;
  if (wants_extra != (extra != nullptr)) throw InputError("MLP injection features mismatch");
  if (extra && (extra->rows() != spec_.inject_width || extra->cols() != input.cols())) {
    throw InputError("MLP injection features have the wrong shape");
  }
  const Eigen::Index n = input.cols();
  const int layers = spec_.affine_layers();
  if (cache) {
    cache->inputs.resize(layers);
    cache->owner = this;
    cache->version = version_;
  }

  Matrix<T> current = input;
  for (int k = 0; k < layers; ++k) {
    const int in_w = spec_.layer_input_width(k);
    const int out_w = spec_.widths[k + 1];
    if (wants_extra && k == spec_.inject_after + 1) {
      Matrix<T> joined(in_w, n);
      joined.topRows(current.rows()) = current;
      joined.bottomRows(extra->rows()) = *extra;
      current.swap(joined);
    }
    Map w(params_.data() + weight_offset(k), out_w, in_w);
    VecMap b(params_.data() + bias_offset(k), out_w);
    Matrix<T> next(out_w, n);
    next.noalias() = w * current;
    next.colwise() += b;
    if (k + 1 < layers) {
      next = next.cwiseMax(T(0));
    } else if (spec_.output_activation == OutputActivation::kSigmoid) {
      next = (T(1) + (-next.array()).exp()).inverse().matrix();
    } else if (spec_.output_activation == OutputActivation::kExponential) {
      next = next.array().exp().matrix();
    }
    if (cache) {
      cache->inputs[k].swap(current);
    }
    current.swap(next);
  }
  if (cache) cache->output = current;
  return current;
}

template <typename T>
void Mlp<T>::backward(const Cache& cache, const Matrix<T>& d_output, std::span<T> grad,
                      Matrix<T>* d_input, Matrix<T>* d_extra) const {
  using Map = Eigen::Map<const Matrix<T>>;
  using MutMap = Eigen::Map<Matrix<T>>;
  using MutVecMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>>;
  if (cache.owner != this || cache.version != version_) {
    throw InputError("MLP backward called with a stale activation cache");
  }
  if (grad.size() != params_.size()) throw InputError("MLP gradient buffer has the wrong size");
  const int layers = spec_.affine_layers();
  if (d_output.rows() != spec_.output_width() || d_output.cols() != cache.output.cols()) {
    throw InputError("MLP output gradient shape mismatch");
  }

  Matrix<T> dz;
  switch (spec_.output_activation) {
    case OutputActivation::kNone: dz = d_output; break;
    case OutputActivation::kSigmoid:
      dz = (d_output.array() * cache.output.array() * (T(1) - cache.output.array())).matrix();
      break;
    case OutputActivation::kExponential:
      dz = (d_output.array() * cache.output.array()).matrix();
      break;
  }

  for (int k = layers - 1; k >= 0; --k) {
    const int in_w = spec_.layer_input_width(k);
    const int out_w = spec_.widths[k + 1];
    const Matrix<T>& a = cache.inputs[k];
    MutMap dw(grad.data() + weight_offset(k), out_w, in_w);
    MutVecMap db(grad.data() + bias_offset(k), out_w);
    dw.noalias() += dz * a.transpose();
    db.noalias() += dz.rowwise().sum();
    if (k == 0 && !d_input) break;
    Map w(params_.data() + weight_offset(k), out_w, in_w);
    Matrix<T> da(in_w, dz.cols());
    da.noalias() = w.transpose() * dz;
    if (k == 0) {
      *d_input = std::move(da);
      break;
    }
    const int hidden_w = spec_.widths[k];
    if (spec_.inject_after >= 0 && k == spec_.inject_after + 1) {
      if (d_extra) *d_extra = da.bottomRows(spec_.inject_width);
    }
    // ReLU mask from the post-activation values, which are the top rows of this layer's input.
    dz = (da.topRows(hidden_w).array() * (a.topRows(hidden_w).array() > T(0)).template cast<T>()).matrix();
  }
}

template <typename T>
bool all_finite(std::span<const T> values) {
  for (T v : values)
    if (!std::isfinite(v)) return false;
  return true;
}

template <typename T>
bool adam_step(std::span<T> params, std::span<const T> grads, AdamState<T>& state) {
  if (params.size() != grads.size() || state.m.size() != params.size() ||
      state.v.size() != params.size()) {
    throw InputError("adam_step: parameter, gradient and state sizes differ");
  }
  if (!all_finite(grads)) {
    ++state.skipped;
    return false;
  }
  ++state.step;
  const AdamHyper& h = state.hyper;
  const double bc1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.step));
  const T step_size = static_cast<T>(h.lr / bc1);
  const T inv_bc2_sqrt = static_cast<T>(1.0 / std::sqrt(bc2));
  const T b1 = static_cast<T>(h.beta1), b2 = static_cast<T>(h.beta2);
  const T eps = static_cast<T>(h.eps);
  T* m = state.m.data();
  T* v = state.v.data();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const T g = grads[i];
    m[i] = b1 * m[i] + (T(1) - b1) * g;
    v[i] = b2 * v[i] + (T(1) - b2) * g * g;
    params[i] -= step_size * m[i] / (std::sqrt(v[i]) * inv_bc2_sqrt + eps);
  }
  return true;
}

template class Mlp<float>;
template class Mlp<double>;
template bool adam_step<float>(std::span<float>, std::span<const float>, AdamState<float>&);
template bool adam_step<double>(std::span<double>, std::span<const double>, AdamState<double>&);
template bool all_finite<float>(std::span<const float>);
template bool all_finite<double>(std::span<const double>);

}  // namespace relight
