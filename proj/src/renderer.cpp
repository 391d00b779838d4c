// Copyright 2026 The Relight Authors
// SPDX-License-Identifier: Apache-2.0

#include "relight/renderer.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "relight/errors.hpp"

namespace relight {

template <typename T>
void RaySamples<T>::validate() const {
  const std::size_t n = t.size();
  if (delta.size() != n || sigma.size() != n || rgb.size() != 3 * n) {
    throw InputError("ray samples: inconsistent array lengths");
  }
  if (!visibility.empty() && visibility.size() != n) {
    throw InputError("ray samples: visibility length mismatch");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0 && !(t[i] > t[i - 1])) throw InputError("ray samples: t must be strictly increasing");
    if (!(delta[i] > T(0))) throw InputError("ray samples: interval lengths must be positive");
    if (sigma[i] < T(0)) throw InputError("ray samples: negative density");
  }
}

template <typename T>
bool composite_kernel(int n, const T* t, const T* delta, const T* sigma, const T* rgb, const T* vis,
                      T* weights, T* out_rgb, T* opacity, T* depth) {
  T transmittance = T(1);
  T r = 0, g = 0, b = 0, d = 0;
  bool valid = true;
  for (int i = 0; i < n; ++i) {
    const T s = sigma[i];
    const T* c = rgb + 3 * i;
    if (std::isnan(s) || std::isnan(c[0]) || std::isnan(c[1]) || std::isnan(c[2]) ||
        (vis && std::isnan(vis[i]))) {
      valid = false;
      break;
    }
    const T alpha = T(1) - std::exp(-s * delta[i]);
    const T w = transmittance * alpha;
    weights[i] = w;
    const T o = vis ? vis[i] : T(1);
    r += w * o * c[0];
    g += w * o * c[1];
    b += w * o * c[2];
    d += w * t[i];
    transmittance *= T(1) - alpha;
  }
  if (!valid) {
    for (int i = 0; i < n; ++i) weights[i] = T(0);
    out_rgb[0] = out_rgb[1] = out_rgb[2] = T(0);
    *opacity = T(0);
    *depth = T(0);
    return false;
  }
  out_rgb[0] = r;
  out_rgb[1] = g;
  out_rgb[2] = b;
  *opacity = T(1) - transmittance;
  *depth = d;
  return true;
}

template <typename T>
void composite_backward_kernel(int n, const T* delta, const T* sigma, const T* rgb, const T* vis,
                               const T* g, T* d_sigma, T* d_rgb, T* d_vis) {
  // d rgb / d sigma_i = delta_i * (T_{i+1} c*_i - sum_{k>i} w_k c*_k), so
  // walk forward once for the total and peel off the prefix.
  T total = T(0);
  {
    T trans = T(1);
    for (int i = 0; i < n; ++i) {
      const T alpha = T(1) - std::exp(-sigma[i] * delta[i]);
      const T o = vis ? vis[i] : T(1);
      const T* c = rgb + 3 * i;
      total += trans * alpha * o * (g[0] * c[0] + g[1] * c[1] + g[2] * c[2]);
      trans *= T(1) - alpha;
    }
  }
  T trans = T(1);
  T prefix = T(0);
  for (int i = 0; i < n; ++i) {
    const T alpha = T(1) - std::exp(-sigma[i] * delta[i]);
    const T w = trans * alpha;
    const T o = vis ? vis[i] : T(1);
    const T* c = rgb + 3 * i;
    const T gc = g[0] * c[0] + g[1] * c[1] + g[2] * c[2];
    const T s = o * gc;
    const T next_trans = trans * (T(1) - alpha);
    prefix += w * s;
    d_sigma[i] = delta[i] * (next_trans * s - (total - prefix));
    const T wo = w * o;
    d_rgb[3 * i + 0] = wo * g[0];
    d_rgb[3 * i + 1] = wo * g[1];
    d_rgb[3 * i + 2] = wo * g[2];
    if (d_vis) d_vis[i] = w * gc;
    trans = next_trans;
  }
}

template <typename T>
CompositeResult<T> composite(const RaySamples<T>& samples) {
  samples.validate();
  CompositeResult<T> out;
  const int n = static_cast<int>(samples.size());
  out.weights.assign(n, T(0));
  out.valid = composite_kernel(n, samples.t.data(), samples.delta.data(), samples.sigma.data(),
                               samples.rgb.data(),
                               samples.has_visibility() ? samples.visibility.data() : nullptr,
                               out.weights.data(), out.rgb.data(), &out.opacity, &out.depth);
  return out;
}

template <typename T>
std::vector<CompositeResult<T>> composite(const RaySampleBatch<T>& batch) {
  std::vector<CompositeResult<T>> out;
  out.reserve(batch.size());
  for (const auto& ray : batch) out.push_back(composite(ray));
  return out;
}

template <typename T>
SampleGradients<T> composite_backward(const RaySamples<T>& samples, const Vector3<T>& d_rgb) {
  samples.validate();
  const int n = static_cast<int>(samples.size());
  SampleGradients<T> out;
  out.d_sigma.assign(n, T(0));
  out.d_rgb.assign(3 * static_cast<std::size_t>(n), T(0));
  const bool has_vis = samples.has_visibility();
  if (has_vis) out.d_visibility.assign(n, T(0));
  composite_backward_kernel(n, samples.delta.data(), samples.sigma.data(), samples.rgb.data(),
                            has_vis ? samples.visibility.data() : nullptr, d_rgb.data(),
                            out.d_sigma.data(), out.d_rgb.data(),
                            has_vis ? out.d_visibility.data() : nullptr);
  return out;
}

template <typename T>
std::vector<T> stratified_samples(const Ray& ray, int n_coarse, bool jitter, std::mt19937_64& rng) {
  if (n_coarse < 1) throw InputError("stratified_samples: need at least one sample");
  std::vector<T> t(n_coarse);
  const double width = (ray.t_far - ray.t_near) / n_coarse;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < n_coarse; ++i) {
    const double u = jitter ? unit(rng) : 0.5;
    t[i] = static_cast<T>(ray.t_near + (i + u) * width);
  }
  return t;
}

template <typename T>
std::vector<T> hierarchical_samples(std::span<const T> coarse_t, std::span<const T> weights,
                                    T t_near, T t_far, int n_fine, std::mt19937_64* rng) {
  const std::size_t n = coarse_t.size();
  if (weights.size() != n) throw InputError("hierarchical_samples: weight count mismatch");
  if (n_fine <= 0 || n == 0) return {};
  std::vector<double> edges(n + 1);
  edges[0] = t_near;
  edges[n] = t_far;
  for (std::size_t i = 1; i < n; ++i) edges[i] = 0.5 * (double(coarse_t[i - 1]) + double(coarse_t[i]));

  std::vector<double> cdf(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double w = double(weights[i]);
    if (w < 0.0 || std::isnan(w)) throw InputError("hierarchical_samples: weights must be >= 0");
    cdf[i + 1] = cdf[i] + w;
  }
  const double total = cdf[n];
  if (!(total > 0.0)) {
    // Uniform over [t_near, t_far]: equivalent to bin masses proportional to bin widths.
    for (std::size_t i = 0; i < n; ++i) cdf[i + 1] = cdf[i] + (edges[i + 1] - edges[i]);
  }
  const double norm = cdf[n];
  for (double& c : cdf) c /= norm;
  cdf[n] = 1.0;

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<T> out(n_fine);
  for (int k = 0; k < n_fine; ++k) {
    const double u = rng ? unit(*rng) : (k + 0.5) / n_fine;
    // First bin whose cumulative mass exceeds u; zero-mass bins are skipped.
    std::size_t bin = static_cast<std::size_t>(std::upper_bound(cdf.begin() + 1, cdf.end(), u) - cdf.begin()) - 1;
    bin = std::min(bin, n - 1);
    while (bin + 1 < n && cdf[bin + 1] - cdf[bin] <= 0.0) ++bin;
    const double mass = cdf[bin + 1] - cdf[bin];
    const double frac = mass > 0.0 ? std::clamp((u - cdf[bin]) / mass, 0.0, 1.0) : 0.5;
    out[k] = static_cast<T>(edges[bin] + frac * (edges[bin + 1] - edges[bin]));
  }
  return out;
}

template <typename T>
SamplePlan<T> plan_samples(const RadianceField<T>& field, std::span<const Ray> rays,
                           const SamplingConfig& config, std::mt19937_64* rng) {
  if (config.n_coarse < 1 || config.n_fine < 0) throw InputError("sampling config: bad counts");
  const std::size_t nr = rays.size();
  const int nc = config.n_coarse;
  std::mt19937_64 dummy(0);
  const bool jitter = config.jitter && rng;

  std::vector<char> active(nr);
  std::vector<T> coarse(nr * nc, T(0));
  std::size_t n_active = 0;
  for (std::size_t r = 0; r < nr; ++r) {
    active[r] = rays[r].t_far > rays[r].t_near;
    if (!active[r]) continue;
    ++n_active;
    auto t = stratified_samples<T>(rays[r], nc, jitter, jitter ? *rng : dummy);
    std::copy(t.begin(), t.end(), coarse.begin() + r * nc);
  }

  std::vector<T> sigma;
  if (config.n_fine > 0 && n_active > 0) {
    Matrix<T> xs(3, static_cast<Eigen::Index>(n_active * nc));
    Eigen::Index col = 0;
    for (std::size_t r = 0; r < nr; ++r) {
      if (!active[r]) continue;
      for (int i = 0; i < nc; ++i, ++col) {
        xs.col(col) = rays[r].at(double(coarse[r * nc + i])).template cast<T>();
      }
    }
    sigma.resize(xs.cols());
    field.density(xs, sigma);
  }

  SamplePlan<T> plan;
  plan.offsets.reserve(nr + 1);
  plan.offsets.push_back(0);
  std::vector<T> merged, delta(nc), weights(nc);
  std::size_t sigma_off = 0;
  for (std::size_t r = 0; r < nr; ++r) {
    if (!active[r]) {
      plan.offsets.push_back(plan.t.size());
      continue;
    }
    const T tn = static_cast<T>(rays[r].t_near), tf = static_cast<T>(rays[r].t_far);
    std::span<const T> ct(coarse.data() + r * nc, nc);
    merged.assign(ct.begin(), ct.end());
    if (config.n_fine > 0) {
      for (int i = 0; i < nc; ++i) delta[i] = (i + 1 < nc ? ct[i + 1] : tf) - ct[i];
      const T* s = sigma.data() + sigma_off;
      sigma_off += nc;
      // Density-only compositing; colors do not influence the weights.
      T trans = T(1);
      bool ok = true;
      for (int i = 0; i < nc; ++i) {
        if (std::isnan(s[i])) ok = false;
        const T alpha = T(1) - std::exp(-s[i] * delta[i]);
        weights[i] = ok ? trans * alpha : T(0);
        trans *= T(1) - alpha;
      }
      if (!ok) std::fill(weights.begin(), weights.end(), T(0));
      auto fine = hierarchical_samples<T>(ct, weights, tn, tf, config.n_fine, rng);
      merged.insert(merged.end(), fine.begin(), fine.end());
      std::sort(merged.begin(), merged.end());
    }
    for (std::size_t i = 0; i < merged.size(); ++i) {
      plan.t.push_back(merged[i]);
      plan.delta.push_back(std::max(T(0), (i + 1 < merged.size() ? merged[i + 1] : tf) - merged[i]));
    }
    plan.offsets.push_back(plan.t.size());
  }
  return plan;
}

template <typename T>
std::vector<RenderResult<T>> render_rays(const RadianceField<T>& field, std::span<const Ray> rays,
                                         const Pose6D& light, const SamplingConfig& config,
                                         std::mt19937_64* rng) {
  constexpr std::size_t kChunk = 256;
  std::vector<RenderResult<T>> results(rays.size());
  std::vector<T> weights;
  for (std::size_t begin = 0; begin < rays.size(); begin += kChunk) {
    const std::size_t end = std::min(rays.size(), begin + kChunk);
    std::span<const Ray> chunk = rays.subspan(begin, end - begin);
    SamplePlan<T> plan = plan_samples(field, chunk, config, rng);
    const Eigen::Index total = static_cast<Eigen::Index>(plan.t.size());
    if (total == 0) continue;
    Matrix<T> xs(3, total), dirs(3, total);
    for (std::size_t r = 0; r < chunk.size(); ++r) {
      const Vector3<T> d = chunk[r].direction.template cast<T>();
      for (std::size_t i = plan.offsets[r]; i < plan.offsets[r + 1]; ++i) {
        xs.col(i) = chunk[r].at(double(plan.t[i])).template cast<T>();
        dirs.col(i) = d;
      }
    }
    FieldSamples<T> fs;
    field.shade(xs, dirs, light, fs);
    const bool has_vis = !fs.visibility.empty();
    for (std::size_t r = 0; r < chunk.size(); ++r) {
      const std::size_t off = plan.offsets[r];
      const int n = static_cast<int>(plan.samples(r));
      RenderResult<T>& out = results[begin + r];
      if (n == 0) continue;
      weights.assign(n, T(0));
      out.valid = composite_kernel(n, plan.t.data() + off, plan.delta.data() + off,
                                   fs.sigma.data() + off, fs.rgb.col(off).data(),
                                   has_vis ? fs.visibility.data() + off : nullptr, weights.data(),
                                   out.rgb.data(), &out.opacity, &out.depth);
      if (has_vis && out.opacity > T(0)) {
        T acc = T(0);
        for (int i = 0; i < n; ++i) acc += weights[i] * fs.visibility[off + i];
        out.mean_visibility = acc / out.opacity;
      }
    }
  }
  return results;
}

template <typename T>
RenderResult<T> render_ray(const RadianceField<T>& field, const Ray& ray, const Pose6D& light,
                           const SamplingConfig& config, std::mt19937_64* rng) {
  return render_rays(field, std::span<const Ray>(&ray, 1), light, config, rng).front();
}

void clip_to_bounds(std::span<Ray> rays, const SceneBounds& bounds) {
  for (Ray& ray : rays) {
    auto hit = bounds.intersect(ray);
    if (!hit) {
      ray.t_far = ray.t_near;
      continue;
    }
    const double tn = std::max(ray.t_near, hit->first);
    const double tf = std::min(ray.t_far, hit->second);
    if (tf > tn) {
      ray.t_near = tn;
      ray.t_far = tf;
    } else {
      ray.t_far = ray.t_near;
    }
  }
}

#define RELIGHT_INSTANTIATE(T)                                                                    \
  template struct RaySamples<T>;                                                                  \
  template bool composite_kernel<T>(int, const T*, const T*, const T*, const T*, const T*, T*, T*, \
                                    T*, T*);                                                      \
  template void composite_backward_kernel<T>(int, const T*, const T*, const T*, const T*,          \
                                             const T*, T*, T*, T*);                               \
  template CompositeResult<T> composite<T>(const RaySamples<T>&);                                 \
  template std::vector<CompositeResult<T>> composite<T>(const RaySampleBatch<T>&);                \
  template SampleGradients<T> composite_backward<T>(const RaySamples<T>&, const Vector3<T>&);     \
  template std::vector<T> stratified_samples<T>(const Ray&, int, bool, std::mt19937_64&);         \
  template std::vector<T> hierarchical_samples<T>(std::span<const T>, std::span<const T>, T, T,   \
                                                  int, std::mt19937_64*);                         \
  template SamplePlan<T> plan_samples<T>(const RadianceField<T>&, std::span<const Ray>,           \
                                         const SamplingConfig&, std::mt19937_64*);                \
  template std::vector<RenderResult<T>> render_rays<T>(const RadianceField<T>&,                   \
                                                       std::span<const Ray>, const Pose6D&,       \
                                                       const SamplingConfig&, std::mt19937_64*);  \
  template RenderResult<T> render_ray<T>(const RadianceField<T>&, const Ray&, const Pose6D&,      \
                                         const SamplingConfig&, std::mt19937_64*);

RELIGHT_INSTANTIATE(float)
RELIGHT_INSTANTIATE(double)

#undef RELIGHT_INSTANTIATE

}  // namespace relight
