// Copyright 2026 The Relight Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <random>

#include "relight/errors.hpp"
#include "relight/models.hpp"
#include "relight/renderer.hpp"

using namespace relight;

namespace {

ModelConfig small_config(int variant) {
  ModelConfig c;
  c.variant = static_cast<ModelVariant>(variant);
  c.hash.levels = 3;
  c.hash.table_size = 1u << 10;
  c.hash.base_resolution = 4;
  c.hash.per_level_scale = 2.0;
  c.hidden_width = 12;
  c.embedding_width = 5;
  c.bounds.center = Vec3(0.0, 0.1, 0.8);
  c.bounds.radius = 1.5;
  return c;
}

// Uniform random table values so the density and features are not trivially small.
template <typename T>
void perturb_table(RelightModel<T>& m, std::mt19937_64& rng, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  for (T& v : m.hash_grid().table()) v = static_cast<T>(u(rng));
}

Matrix<double> random_points(int n, const SceneBounds& b, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-0.9, 0.9);
  Matrix<double> x(3, n);
  for (int i = 0; i < n; ++i) x.col(i) = b.center + b.radius * Vec3(u(rng), u(rng), u(rng));
  return x;
}

Matrix<double> random_dirs(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Matrix<double> d(3, n);
  for (int i = 0; i < n; ++i) d.col(i) = Vec3(g(rng), g(rng), g(rng)).normalized();
  return d;
}

}  // namespace

TEST_CASE("variant flags and color network input widths") {
  const ModelConfig base;  // desk defaults: 8 levels x 2 features, e = 15
  const int h = base.hash.output_dim();
  const int e = base.embedding_width;
  CHECK(h == 16);
  CHECK(rgb_spec(build_variant<float>(ModelVariant::kV0, base, 1).config()).input_width() == e + 16);
  CHECK(rgb_spec([&] { auto c = base; c.variant = ModelVariant::kV1; return c; }()).input_width() == e + 16 + 156);
  CHECK(rgb_spec([&] { auto c = base; c.variant = ModelVariant::kV2; return c; }()).input_width() == e + 32);
  CHECK(rgb_spec([&] { auto c = base; c.variant = ModelVariant::kV3; return c; }()).input_width() == e + 32 + h);
  const auto v4 = rgb_spec([&] { auto c = base; c.variant = ModelVariant::kV4; return c; }());
  CHECK(v4.input_width() == 32 + h);
  CHECK(v4.inject_after == 0);
  CHECK(v4.inject_width == e);
  CHECK(v4.hidden_layers() == base.rgb_hidden_layers);
  auto c5 = base;
  c5.variant = ModelVariant::kV5;
  CHECK(rgb_spec(c5) == v4);
  CHECK(vis_spec(c5).input_width() == h + 16);
  CHECK(vis_spec(c5).output_width() == 1);
  CHECK(vis_spec(c5).hidden_layers() == base.vis_hidden_layers);
  CHECK(geo_spec(c5).output_width() == 1 + e);
  CHECK(geo_spec(c5).hidden_layers() == base.geo_hidden_layers);

  CHECK(variant_from_string("V3") == ModelVariant::kV3);
  CHECK(variant_from_string("v5") == ModelVariant::kV5);
  CHECK_THROWS_AS(variant_from_string("v6"), InputError);
  CHECK(variant_flags(ModelVariant::kV0).absolute_light == false);
  CHECK(variant_flags(ModelVariant::kV1).absolute_light);
  CHECK_FALSE(variant_flags(ModelVariant::kV2).absolute_light);
  CHECK(variant_flags(ModelVariant::kV2).relative_light);
  CHECK(variant_flags(ModelVariant::kV3).position_skip);
  CHECK(variant_flags(ModelVariant::kV4).delayed_embedding);
  CHECK(variant_flags(ModelVariant::kV5).visibility);
  CHECK_FALSE(build_variant<float>(ModelVariant::kV4, base, 1).has_visibility());
  CHECK(build_variant<float>(ModelVariant::kV5, base, 1).has_visibility());
}

TEST_CASE("light pose code uses the translation relative to the bounds") {
  SceneBounds b;
  b.center = Vec3(1, 2, 3);
  b.radius = 2.0;
  const Pose6D light(Mat3::Identity(), Vec3(3, 2, 3));
  const auto code = light_pose_code<double>(light, b);
  std::array<double, 12> flat{1, 0, 0, 0, 1, 0, 0, 0, 1, 1, 0, 0};
  const auto ref = fourier_encode<double>(std::span<const double>(flat));
  for (int i = 0; i < kFourierOutputDim; ++i) CHECK(code[i] == doctest::Approx(ref[i]));
}

TEST_CASE("outputs are finite, densities positive, colors and visibility in [0, 1]") {
  std::mt19937_64 rng(21);
  for (int v = 0; v <= 5; ++v) {
    RelightModel<double> m(small_config(v), 3);
    perturb_table(m, rng, 1.0);
    const auto xs = random_points(64, m.config().bounds, rng);
    const auto ds = random_dirs(64, rng);
    ModelOutputs<double> out;
    m.forward(m.make_inputs(xs, ds, Pose6D::from_translation(Vec3(2, -1, 3))), out);
    for (int i = 0; i < 64; ++i) {
      CHECK(out.sigma[i] > 0.0);
      CHECK(std::isfinite(out.sigma[i]));
      for (int k = 0; k < 3; ++k) {
        CHECK(out.rgb(k, i) >= 0.0);
        CHECK(out.rgb(k, i) <= 1.0);
      }
    }
    CHECK(out.visibility.size() == (v == 5 ? 64u : 0u));
    for (double o : out.visibility) {
      CHECK(o >= 0.0);
      CHECK(o <= 1.0);
    }
    CHECK(out.clamped == 0);
  }
}

TEST_CASE("light dependence per variant") {
  std::mt19937_64 rng(22);
  const auto base = small_config(0);
  const Matrix<double> x = random_points(1, base.bounds, rng);
  const Matrix<double> d = random_dirs(1, rng);
  const Vec3 u = Vec3(0.3, -0.5, 0.8).normalized();
  const Pose6D near_light = Pose6D::from_translation(x.col(0) + 1.0 * u);
  const Pose6D far_light = Pose6D::from_translation(x.col(0) + 3.0 * u);
  const Pose6D other = Pose6D::from_translation(x.col(0) + 2.0 * Vec3(-0.6, 0.0, 0.8));
  for (int v = 0; v <= 5; ++v) {
    RelightModel<double> m(small_config(v), 4);
    perturb_table(m, rng, 1.0);
    auto eval = [&](const Pose6D& l) {
      ModelOutputs<double> o;
      m.forward(m.make_inputs(x, d, l), o);
      return o;
    };
    const auto a = eval(near_light), b = eval(far_light), c = eval(other);
    CHECK(a.sigma[0] == c.sigma[0]);  // density never sees the light
    if (v == 0) {
      CHECK((a.rgb - c.rgb).norm() == 0.0);
    } else if (v == 1) {
      // Absolute pose code: moving the light along l still changes the input.
      CHECK((a.rgb - b.rgb).norm() > 0.0);
    } else {
      // Only the unit direction to the light enters.
      CHECK((a.rgb - b.rgb).norm() < 1e-12);
      CHECK((a.rgb - c.rgb).norm() > 0.0);
      if (v == 5) {
        CHECK(std::abs(a.visibility[0] - b.visibility[0]) < 1e-12);
        CHECK(std::abs(a.visibility[0] - c.visibility[0]) > 0.0);
      }
    }
  }
}

TEST_CASE("saturated visibility reduces V5 rendering to V4") {
  std::mt19937_64 rng(23);
  RelightModel<double> v5(small_config(5), 9);
  perturb_table(v5, rng, 1.0);
  RelightModel<double> v4(small_config(4), 9);
  auto copy = [](std::span<const double> src, std::span<double> dst) { std::copy(src.begin(), src.end(), dst.begin()); };
  copy(v5.hash_grid().table(), v4.hash_grid().table());
  copy(v5.geo().params(), v4.geo().mutable_params());
  copy(v5.rgb().params(), v4.rgb().mutable_params());
  Mlp<double>& vis = v5.vis();
  vis.mutable_params()[vis.bias_offset(vis.spec().affine_layers() - 1)] = 1e3;

  std::vector<Ray> rays(8);
  const auto dirs = random_dirs(8, rng);
  for (int i = 0; i < 8; ++i) {
    rays[i].origin = v5.config().bounds.center - 2.5 * dirs.col(i);
    rays[i].direction = dirs.col(i);
    rays[i].t_near = 0.5;
    rays[i].t_far = 4.5;
  }
  const Pose6D light = Pose6D::from_translation(Vec3(1, 2, 3));
  const SamplingConfig cfg{24, 24, false};
  const auto r5 = render_rays<double>(v5, rays, light, cfg);
  const auto r4 = render_rays<double>(v4, rays, light, cfg);
  for (int i = 0; i < 8; ++i) {
    CHECK((r5[i].rgb - r4[i].rgb).norm() < 1e-12);
    CHECK(r5[i].opacity == doctest::Approx(r4[i].opacity));
    CHECK(r5[i].mean_visibility == doctest::Approx(1.0));
  }
}

TEST_CASE("end-to-end gradients match finite differences for every variant") {
  std::mt19937_64 rng(24);
  for (int v = 0; v <= 5; ++v) {
    CAPTURE(v);
    RelightModel<double> m(small_config(v), 11 + v);
    perturb_table(m, rng, 0.5);
    for (Mlp<double>* net : {&m.geo(), &m.rgb()}) {
      std::uniform_real_distribution<double> u(-0.1, 0.1);
      for (double& p : net->mutable_params()) p += u(rng);
    }
    const int n = 6;
    const auto xs = random_points(n, m.config().bounds, rng);
    const auto ds = random_dirs(n, rng);
    const auto in = m.make_inputs(xs, ds, Pose6D::from_translation(Vec3(1.5, -2, 2.5)));
    std::normal_distribution<double> g;
    std::vector<double> ws(n), wv(n);
    Matrix<double> wr(3, n);
    for (int i = 0; i < n; ++i) {
      ws[i] = 0.1 * g(rng);
      wv[i] = g(rng);
      for (int k = 0; k < 3; ++k) wr(k, i) = g(rng);
    }
    auto loss = [&] {
      ModelOutputs<double> o;
      m.forward(in, o);
      double l = (o.rgb.array() * wr.array()).sum();
      for (int i = 0; i < n; ++i) l += ws[i] * o.sigma[i] + (o.visibility.empty() ? 0.0 : wv[i] * o.visibility[i]);
      return l;
    };
    RelightModel<double>::Cache cache;
    ModelOutputs<double> out;
    m.forward(in, out, &cache);
    auto grads = m.make_gradients();
    m.backward(cache, in, ws, wr, m.has_visibility() ? std::span<const double>(wv) : std::span<const double>{},
               grads);

    auto check_group = [&](std::span<double> params, const AlignedVector<double>& grad, const char* name) {
      CAPTURE(name);
      double norm = 0.0;
      std::vector<std::size_t> touched;
      for (std::size_t i = 0; i < grad.size(); ++i) {
        norm += std::abs(grad[i]);
        if (grad[i] != 0.0) touched.push_back(i);
      }
      CHECK(norm > 0.0);
      std::shuffle(touched.begin(), touched.end(), rng);
      if (touched.size() > 12) touched.resize(12);
      for (std::size_t i : touched) {
        const double keep = params[i];
        params[i] = keep + 1e-6;
        const double lp = loss();
        params[i] = keep - 1e-6;
        const double lm = loss();
        params[i] = keep;
        const double fd = (lp - lm) / 2e-6;
        CHECK(std::abs(fd - grad[i]) <= 1e-4 * std::max(1.0, std::abs(fd)));
      }
    };
    check_group(m.hash_grid().table(), grads.hash, "hash");
    check_group(m.geo().mutable_params(), grads.geo, "geo");
    check_group(m.rgb().mutable_params(), grads.rgb, "rgb");
    if (m.has_visibility()) check_group(m.vis().mutable_params(), grads.vis, "vis");
  }
}

TEST_CASE("model config validation and seeded construction") {
  auto c = small_config(5);
  c.hidden_width = 0;
  CHECK_THROWS_AS(RelightModel<float>(c, 1), InputError);
  c = small_config(5);
  c.bounds.radius = -1.0;
  CHECK_THROWS_AS(RelightModel<float>(c, 1), InputError);
  const RelightModel<float> a(small_config(5), 42), b(small_config(5), 42), d(small_config(5), 43);
  CHECK(std::equal(a.geo().params().begin(), a.geo().params().end(), b.geo().params().begin()));
  CHECK_FALSE(std::equal(a.geo().params().begin(), a.geo().params().end(), d.geo().params().begin()));
  const auto q = a.query(Vec3(0, 0.1, 0.8), Vec3(0, 0, 1), Pose6D::from_translation(Vec3(0, 0, 3)));
  CHECK(q.finite);
  CHECK(q.visibility.has_value());
  CHECK_THROWS_AS(a.query(Vec3(0, 0, 0), Vec3(0, 0, 2), Pose6D{}), InputError);
}
