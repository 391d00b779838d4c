// Copyright 2026 The Relight Authors
// SPDX-License-Identifier: Apache-2.0

#include "relight/models.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "relight/errors.hpp"

namespace relight {

VariantFlags variant_flags(ModelVariant v) {
  VariantFlags f;
  const int level = static_cast<int>(v);
  f.absolute_light = level == 1;
  f.relative_light = level >= 2;
  f.position_skip = level >= 3;
  f.delayed_embedding = level >= 4;
  f.visibility = level >= 5;
  return f;
}

std::string to_string(ModelVariant v) { return "v" + std::to_string(static_cast<int>(v)); }

ModelVariant variant_from_string(const std::string& s) {
  if (s.size() == 2 && std::tolower(static_cast<unsigned char>(s[0])) == 'v' && s[1] >= '0' &&
      s[1] <= '5') {
    return static_cast<ModelVariant>(s[1] - '0');
  }
  throw InputError("unknown model variant '" + s + "' (expected v0..v5)");
}

void ModelConfig::validate() const {
  const int level = static_cast<int>(variant);
  if (level < 0 || level > 5) throw InputError("model variant out of range");
  hash.validate();
  if (embedding_width < 1 || hidden_width < 1) throw InputError("model widths must be >= 1");
  if (geo_hidden_layers < 1 || rgb_hidden_layers < 1 || vis_hidden_layers < 1) {
    throw InputError("model networks need at least one hidden layer");
  }
  if (rgb_hidden_layers < 2 && variant_flags(variant).delayed_embedding) {
    throw InputError("delayed embedding injection needs at least two color layers");
  }
  if (!(bounds.radius > 0.0)) throw InputError("scene bounds radius must be positive");
}

namespace {

std::vector<int> stack(int in, int hidden, int layers, int out) {
  std::vector<int> w{in};
  for (int i = 0; i < layers; ++i) w.push_back(hidden);
  w.push_back(out);
  return w;
}

}  // namespace

MlpSpec geo_spec(const ModelConfig& c) {
  MlpSpec s;
  s.widths = stack(c.hash.output_dim(), c.hidden_width, c.geo_hidden_layers, 1 + c.embedding_width);
  s.output_activation = OutputActivation::kNone;  // density gets exp() on its own channel
  return s;
}

MlpSpec rgb_spec(const ModelConfig& c) {
  const VariantFlags f = variant_flags(c.variant);
  int in = kShDim;
  if (!f.delayed_embedding) in += c.embedding_width;
  if (f.absolute_light) in += kFourierOutputDim;
  if (f.relative_light) in += kShDim;
  if (f.position_skip) in += c.hash.output_dim();
  MlpSpec s;
  s.widths = stack(in, c.hidden_width, c.rgb_hidden_layers, 3);
  s.output_activation = OutputActivation::kSigmoid;
  if (f.delayed_embedding) {
    s.inject_after = 0;
    s.inject_width = c.embedding_width;
  }
  return s;
}

MlpSpec vis_spec(const ModelConfig& c) {
  MlpSpec s;
  s.widths = stack(c.hash.output_dim() + kShDim, c.hidden_width, c.vis_hidden_layers, 1);
  s.output_activation = OutputActivation::kSigmoid;
  return s;
}

template <typename T>
std::array<T, kFourierOutputDim> light_pose_code(const Pose6D& light, const SceneBounds& bounds) {
  const Pose6D rel(light.rotation(), (light.translation() - bounds.center) / bounds.radius);
  const auto flat = rel.flattened();
  std::array<T, kFourierInputDim> v{};
  for (int i = 0; i < kFourierInputDim; ++i) v[i] = static_cast<T>(flat[i]);
  return fourier_encode<T>(std::span<const T>(v));
}

template <typename T>
void ModelGradients<T>::zero() {
  std::fill(hash.begin(), hash.end(), T(0));
  std::fill(geo.begin(), geo.end(), T(0));
  std::fill(rgb.begin(), rgb.end(), T(0));
  std::fill(vis.begin(), vis.end(), T(0));
}

template <typename T>
void ModelGradients<T>::add(const ModelGradients& other) {
  auto acc = [](AlignedVector<T>& a, const AlignedVector<T>& b) {
    if (a.size() != b.size()) throw InputError("gradient group size mismatch");
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  };
  acc(hash, other.hash);
  acc(geo, other.geo);
  acc(rgb, other.rgb);
  acc(vis, other.vis);
}

template <typename T>
bool ModelGradients<T>::finite() const {
  return all_finite<T>(hash) && all_finite<T>(geo) && all_finite<T>(rgb) && all_finite<T>(vis);
}

template <typename T>
RelightModel<T>::RelightModel(const ModelConfig& config, std::uint64_t seed)
    : config_(config), hash_(config.hash), geo_(geo_spec(config)), rgb_(rgb_spec(config)) {
  config_.validate();
  if (variant_flags(config_.variant).visibility) vis_.emplace(vis_spec(config_));
  std::mt19937_64 rng(seed);
  hash_.initialize(rng);
  geo_.initialize(rng);
  rgb_.initialize(rng);
  if (vis_) vis_->initialize(rng);
}

template <typename T>
ModelGradients<T> RelightModel<T>::make_gradients() const {
  ModelGradients<T> g;
  g.hash.assign(hash_.table().size(), T(0));
  g.geo.assign(geo_.parameter_count(), T(0));
  g.rgb.assign(rgb_.parameter_count(), T(0));
  if (vis_) g.vis.assign(vis_->parameter_count(), T(0));
  return g;
}

template <typename T>
Matrix<T> RelightModel<T>::normalized(const Matrix<T>& xs) const {
  const Vector3<T> c = config_.bounds.center.template cast<T>();
  const T scale = T(1) / static_cast<T>(2.0 * config_.bounds.radius);
  Matrix<T> xn = ((xs.colwise() - c) * scale).array() + T(0.5);
  return xn;
}

template <typename T>
ModelInputs<T> RelightModel<T>::make_inputs(const Matrix<T>& xs, const Matrix<T>& dirs,
                                            const Pose6D& light) const {
  ModelInputs<T> in;
  in.xs = xs;
  in.dirs = dirs;
  const Eigen::Index n = xs.cols();
  const VariantFlags f = flags();
  if (f.relative_light) {
    in.light_pos = light.translation().template cast<T>().replicate(1, n);
  }
  if (f.absolute_light) {
    const auto code = light_pose_code<T>(light, config_.bounds);
    Eigen::Map<const Eigen::Matrix<T, kFourierOutputDim, 1>> v(code.data());
    in.light_code = v.replicate(1, n);
  }
  return in;
}

template <typename T>
void RelightModel<T>::assemble_rgb_input(const ModelInputs<T>& in, const Matrix<T>& features,
                                         const Matrix<T>& geo_out, Matrix<T>& rgb_in,
                                         Matrix<T>& extra) const {
  const VariantFlags f = flags();
  const Eigen::Index n = in.size();
  const int e_w = config_.embedding_width;
  rgb_in.resize(rgb_.spec().input_width(), n);
  Eigen::Index row = 0;
  if (!f.delayed_embedding) {
    rgb_in.middleRows(row, e_w) = geo_out.bottomRows(e_w);
    row += e_w;
  } else {
    extra = geo_out.bottomRows(e_w);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    sh_encode_unchecked(in.dirs(0, i), in.dirs(1, i), in.dirs(2, i), &rgb_in(row, i));
  }
  row += kShDim;
  if (f.absolute_light) {
    if (in.light_code.rows() != kFourierOutputDim || in.light_code.cols() != n) {
      throw InputError("model inputs: missing light pose code");
    }
    rgb_in.middleRows(row, kFourierOutputDim) = in.light_code;
    row += kFourierOutputDim;
  }
  if (f.relative_light) {
    if (in.light_pos.rows() != 3 || in.light_pos.cols() != n) {
      throw InputError("model inputs: missing light positions");
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      Vector3<T> l = in.light_pos.col(i) - in.xs.col(i);
      const T len = l.norm();
      l = len > T(1e-12) ? Vector3<T>(l / len) : Vector3<T>::UnitZ();
      sh_encode_unchecked(l.x(), l.y(), l.z(), &rgb_in(row, i));
    }
    row += kShDim;
  }
  if (f.position_skip) {
    rgb_in.middleRows(row, features.rows()) = features;
    row += features.rows();
  }
}

template <typename T>
void RelightModel<T>::forward(const ModelInputs<T>& in, ModelOutputs<T>& out, Cache* cache) const {
  const Eigen::Index n = in.size();
  if (in.dirs.cols() != n) throw InputError("model inputs: direction count mismatch");
  Matrix<T> xn = normalized(in.xs);
  Matrix<T> features;
  out.clamped = hash_.encode_batch(xn, features);

  const Matrix<T> geo_out = geo_.forward(features, nullptr, cache ? &cache->geo : nullptr);
  out.sigma.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) out.sigma[i] = std::exp(geo_out(0, i));

  Matrix<T> rgb_in, extra;
  assemble_rgb_input(in, features, geo_out, rgb_in, extra);
  out.rgb = rgb_.forward(rgb_in, flags().delayed_embedding ? &extra : nullptr,
                         cache ? &cache->rgb : nullptr);

  out.visibility.clear();
  if (vis_) {
    Matrix<T> vis_in(vis_->spec().input_width(), n);
    vis_in.topRows(features.rows()) = features;
    // SH of l sits right after e / SH(d) in the color input.
    const Eigen::Index l_row = (flags().delayed_embedding ? 0 : config_.embedding_width) + kShDim;
    vis_in.bottomRows(kShDim) = rgb_in.middleRows(l_row, kShDim);
    const Matrix<T> o = vis_->forward(vis_in, nullptr, cache ? &cache->vis : nullptr);
    out.visibility.assign(o.data(), o.data() + n);
  }

  if (cache) {
    cache->xn = std::move(xn);
    cache->features = std::move(features);
    cache->sigma = out.sigma;
  }
}

template <typename T>
void RelightModel<T>::backward(const Cache& cache, const ModelInputs<T>& in,
                               std::span<const T> d_sigma, const Matrix<T>& d_rgb,
                               std::span<const T> d_vis, ModelGradients<T>& grads) const {
  const Eigen::Index n = in.size();
  const VariantFlags f = flags();
  const int e_w = config_.embedding_width;
  const int h_w = hash_.output_dim();
  if (static_cast<Eigen::Index>(d_sigma.size()) != n || d_rgb.cols() != n || d_rgb.rows() != 3) {
    throw InputError("model backward: gradient shape mismatch");
  }

  Matrix<T> d_features = Matrix<T>::Zero(h_w, n);
  Matrix<T> d_geo_out(1 + e_w, n);
  for (Eigen::Index i = 0; i < n; ++i) d_geo_out(0, i) = d_sigma[i] * cache.sigma[i];

  Matrix<T> d_rgb_in, d_extra;
  rgb_.backward(cache.rgb, d_rgb, grads.rgb, &d_rgb_in, f.delayed_embedding ? &d_extra : nullptr);
  Eigen::Index row = 0;
  if (f.delayed_embedding) {
    d_geo_out.bottomRows(e_w) = d_extra;
  } else {
    d_geo_out.bottomRows(e_w) = d_rgb_in.topRows(e_w);
    row += e_w;
  }
  row += kShDim;
  if (f.absolute_light) row += kFourierOutputDim;
  if (f.relative_light) row += kShDim;
  if (f.position_skip) d_features += d_rgb_in.middleRows(row, h_w);

  if (vis_) {
    if (static_cast<Eigen::Index>(d_vis.size()) != n) throw InputError("model backward: missing visibility gradient");
    const Matrix<T> dv = Eigen::Map<const Matrix<T>>(d_vis.data(), 1, n);
    Matrix<T> d_vis_in;
    vis_->backward(cache.vis, dv, grads.vis, &d_vis_in);
    d_features += d_vis_in.topRows(h_w);
  }

  Matrix<T> d_geo_in;
  geo_.backward(cache.geo, d_geo_out, grads.geo, &d_geo_in);
  d_features += d_geo_in;
  hash_.backward_batch(cache.xn, d_features, grads.hash);
}

template <typename T>
QueryResult<T> RelightModel<T>::query(const Vec3& x, const Vec3& d, const Pose6D& light) const {
  if (std::abs(d.norm() - 1.0) > 1e-6) throw InputError("query: direction must be unit length");
  Matrix<T> xs = x.template cast<T>();
  Matrix<T> ds = d.template cast<T>();
  ModelOutputs<T> out;
  forward(make_inputs(xs, ds, light), out);
  QueryResult<T> q;
  q.sigma = out.sigma[0];
  q.rgb = out.rgb.col(0);
  if (!out.visibility.empty()) q.visibility = out.visibility[0];
  q.finite = std::isfinite(q.sigma) && q.rgb.allFinite() &&
             (!q.visibility || std::isfinite(*q.visibility));
  return q;
}

template <typename T>
void RelightModel<T>::density(const Matrix<T>& xs, std::span<T> sigma) const {
  if (static_cast<Eigen::Index>(sigma.size()) != xs.cols()) throw InputError("density: output size mismatch");
  Matrix<T> features;
  hash_.encode_batch(normalized(xs), features);
  const Matrix<T> geo_out = geo_.forward(features);
  for (Eigen::Index i = 0; i < xs.cols(); ++i) sigma[i] = std::exp(geo_out(0, i));
}

template <typename T>
void RelightModel<T>::shade(const Matrix<T>& xs, const Matrix<T>& dirs, const Pose6D& light,
                            FieldSamples<T>& out) const {
  ModelOutputs<T> o;
  forward(make_inputs(xs, dirs, light), o);
  out.sigma = std::move(o.sigma);
  out.rgb = std::move(o.rgb);
  out.visibility = std::move(o.visibility);
}

template <typename T>
RelightModel<T> build_variant(ModelVariant tag, const ModelConfig& base, std::uint64_t seed) {
  ModelConfig c = base;
  c.variant = tag;
  return RelightModel<T>(c, seed);
}

template std::array<float, kFourierOutputDim> light_pose_code<float>(const Pose6D&, const SceneBounds&);
template std::array<double, kFourierOutputDim> light_pose_code<double>(const Pose6D&, const SceneBounds&);
template struct ModelGradients<float>;
template struct ModelGradients<double>;
template class RelightModel<float>;
template class RelightModel<double>;
template RelightModel<float> build_variant<float>(ModelVariant, const ModelConfig&, std::uint64_t);
template RelightModel<double> build_variant<double>(ModelVariant, const ModelConfig&, std::uint64_t);

}  // namespace relight
