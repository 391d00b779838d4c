// Copyright 2026 The Relight Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <iterator>

#include "relight/errors.hpp"
#include "relight/metrics.hpp"
#include "relight/synth.hpp"
#include "relight/training.hpp"
#include "temp_dir.hpp"

using namespace relight;
using relight::testing::TempDir;

namespace {

// Every frame the same flat color; narrow field of view so all rays cross the bounds.
OlatScene solid_scene(int views, int lights, int res) {
  OlatScene s;
  s.name = "solid";
  s.intrinsics = PinholeCamera::from_fov(res, res, 0.4);
  s.cameras = equal_area_waypoints(region_preset("wedge", 3.0), views, Vec3::Zero());
  s.lights = equal_area_waypoints(region_preset("dome", 3.0), lights, Vec3::Zero());
  s.bounds.radius = 1.0;
  s.t_near = 0.5;
  s.t_far = 5.0;
  for (int n = 0; n < views; ++n)
    for (int m = 0; m < lights; ++m) {
      Frame f;
      f.view = n;
      f.light = m;
      f.image = Image(res, res);
      for (std::size_t p = 0; p < f.image.pixel_count(); ++p) {
        f.image.data[3 * p] = 0.3f;
        f.image.data[3 * p + 1] = 0.6f;
        f.image.data[3 * p + 2] = 0.2f;
      }
      f.image.quantize();
      s.frames.push_back(f);
    }
  return s;
}

ModelConfig tiny_model(ModelVariant v) {
  ModelConfig c;
  c.variant = v;
  c.hash.levels = 4;
  c.hash.table_size = 1u << 12;
  c.hash.base_resolution = 4;
  c.hash.per_level_scale = 1.5;
  c.hidden_width = 16;
  c.bounds.radius = 1.0;
  return c;
}

TrainConfig tiny_train() {
  TrainConfig t;
  t.rays_per_batch = 128;
  t.n_coarse = 16;
  t.n_fine = 8;
  t.patience = 1000;
  t.max_iterations = 60;
  t.seed = 5;
  return t;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("training fits a flat-color scene") {
  const OlatScene scene = solid_scene(5, 3, 8);
  const auto split = generate_splits(5, 3, 1, 1);
  RelightModel<float> model(tiny_model(ModelVariant::kV2), 3);
  TrainConfig cfg = tiny_train();
  cfg.max_iterations = 500;
  const auto r = train(model, scene, split, cfg);
  CHECK(r.reason == StopReason::kMaxIterations);
  CHECK(r.log.front().epoch == 0);
  CHECK(r.log.back().step == 500);
  CHECK(r.best.val_psnr > 30.0);
  // The model is left holding the best parameters.
  CHECK(validation_psnr(model, scene, split.val, cfg.sampling(false), 1) == doctest::Approx(r.best.val_psnr));
  for (std::size_t i = 1; i < r.log.size(); ++i) {
    CHECK(r.log[i].epoch == r.log[i - 1].epoch + 1);
    CHECK(r.log[i].best_val_psnr >= r.log[i - 1].best_val_psnr);
  }
}

TEST_CASE("zero learning rate leaves the model and the metric unchanged; patience stops the run") {
  const OlatScene scene = solid_scene(5, 3, 8);
  const auto split = generate_splits(5, 3, 1, 1);
  RelightModel<float> model(tiny_model(ModelVariant::kV5), 3);
  const RelightModel<float> initial = model;
  TrainConfig cfg = tiny_train();
  cfg.lr = 0.0;
  cfg.patience = 3;
  cfg.max_iterations = 0;
  const auto r = train(model, scene, split, cfg);
  CHECK(r.reason == StopReason::kEarlyStop);
  REQUIRE(r.log.size() == 4);
  for (const auto& e : r.log) CHECK(e.val_psnr == r.log[0].val_psnr);
  CHECK(r.best.epoch == 0);
  CHECK(std::equal(model.rgb().params().begin(), model.rgb().params().end(), initial.rgb().params().begin()));
  CHECK(std::equal(model.hash_grid().table().begin(), model.hash_grid().table().end(),
                   initial.hash_grid().table().begin()));
  CHECK(r.last.groups[2].step == r.log.back().step);
}

TEST_CASE("epoch and iteration caps") {
  const OlatScene scene = solid_scene(5, 3, 8);
  const auto split = generate_splits(5, 3, 1, 1);
  RelightModel<float> model(tiny_model(ModelVariant::kV0), 3);
  TrainConfig cfg = tiny_train();
  cfg.max_epochs = 2;
  cfg.max_iterations = 0;
  const auto r = train(model, scene, split, cfg);
  CHECK(r.reason == StopReason::kMaxEpochs);
  CHECK(r.log.size() == 3);
  // 6 train frames x 64 rays = 384 rays = 3 batches of 128.
  CHECK(r.log.back().step == 6);
  CHECK(to_string(StopReason::kDiverged) == "diverged");
}

TEST_CASE("training is bitwise reproducible for a fixed seed and thread count") {
  const OlatScene scene = solid_scene(5, 3, 8);
  const auto split = generate_splits(5, 3, 1, 1);
  TempDir dir("determinism");
  for (int threads : {1, 2}) {
    TrainConfig cfg = tiny_train();
    cfg.threads = threads;
    std::string bytes[2];
    for (int run = 0; run < 2; ++run) {
      RelightModel<float> model(tiny_model(ModelVariant::kV5), 3);
      const auto r = train(model, scene, split, cfg);
      const auto path = dir.path() / ("run" + std::to_string(threads) + std::to_string(run) + ".ckpt");
      save_checkpoint(path, r.best);
      bytes[run] = slurp(path);
    }
    CHECK(bytes[0] == bytes[1]);
  }
  TrainConfig other = tiny_train();
  other.seed = 6;
  RelightModel<float> a(tiny_model(ModelVariant::kV5), 3), b(tiny_model(ModelVariant::kV5), 3);
  train(a, scene, split, tiny_train());
  train(b, scene, split, other);
  CHECK_FALSE(std::equal(a.rgb().params().begin(), a.rgb().params().end(), b.rgb().params().begin()));
}

TEST_CASE("runaway learning rate is reported as divergence") {
  const OlatScene scene = solid_scene(5, 3, 8);
  const auto split = generate_splits(5, 3, 1, 1);
  RelightModel<float> model(tiny_model(ModelVariant::kV2), 3);
  TrainConfig cfg = tiny_train();
  cfg.lr = 1e30;
  cfg.max_iterations = 400;
  const auto r = train(model, scene, split, cfg);
  CHECK(r.reason == StopReason::kDiverged);
  CHECK_FALSE(r.message.empty());
  CHECK(std::isfinite(r.best.val_psnr));
}

TEST_CASE("checkpoint round trip and corruption") {
  const OlatScene scene = solid_scene(5, 3, 8);
  const auto split = generate_splits(5, 3, 1, 1);
  RelightModel<float> model(tiny_model(ModelVariant::kV5), 3);
  const auto r = train(model, scene, split, tiny_train());
  TempDir dir("ckpt");
  const auto path = dir.path() / "best.ckpt";
  save_checkpoint(path, r.best);
  const Checkpoint c = load_checkpoint(path);
  CHECK(c.groups == r.best.groups);
  CHECK(c.step == r.best.step);
  CHECK(c.epoch == r.best.epoch);
  CHECK(c.val_psnr == r.best.val_psnr);
  CHECK(c.scene_name == "solid");
  CHECK(c.holdout == 1);
  CHECK(c.model.variant == ModelVariant::kV5);
  CHECK(c.model.hash == model.config().hash);
  CHECK(c.train.rays_per_batch == 128);

  const RelightModel<float> reloaded = model_from_checkpoint(c);
  const auto& cam = scene.cameras[split.val[0].first];
  const auto& light = scene.lights[split.val[0].second];
  const auto f1 = render_frame(model, scene.intrinsics, cam, light, scene.t_near, scene.t_far, {16, 8, false});
  const auto f2 = render_frame(reloaded, scene.intrinsics, cam, light, scene.t_near, scene.t_far, {16, 8, false});
  CHECK(f1.rgb.data == f2.rgb.data);
  CHECK(f1.visibility.data.size() == 64);
  CHECK(f1.opacity.data.size() == 64);

  std::string bytes = slurp(path);
  std::ofstream(dir.path() / "bad.ckpt", std::ios::binary) << "NOTACKPT" << bytes.substr(8);
  CHECK_THROWS_AS(load_checkpoint(dir.path() / "bad.ckpt"), InputError);
  std::ofstream(dir.path() / "short.ckpt", std::ios::binary) << bytes.substr(0, bytes.size() / 2);
  CHECK_THROWS_AS(load_checkpoint(dir.path() / "short.ckpt"), InputError);
  CHECK_THROWS_AS(load_checkpoint(dir.path() / "missing.ckpt"), InputError);

  RelightModel<float> wrong(tiny_model(ModelVariant::kV4), 3);
  CHECK_THROWS_AS(restore_checkpoint(c, wrong), InputError);
}

TEST_CASE("config json overlays and rejects unknown keys") {
  const TrainConfig base = tiny_train();
  const TrainConfig t = train_config_from_json({{"lr", 0.002}, {"patience", 4}}, base);
  CHECK(t.lr == 0.002);
  CHECK(t.patience == 4);
  CHECK(t.rays_per_batch == base.rays_per_batch);
  CHECK_THROWS_AS(train_config_from_json({{"learning_rate", 0.1}}), InputError);
  const TrainConfig back = train_config_from_json(to_json(base));
  CHECK(to_json(back) == to_json(base));
  TrainConfig bad = base;
  bad.patience = 0;
  CHECK_THROWS_AS(bad.validate(), InputError);

  const ModelConfig m = tiny_model(ModelVariant::kV3);
  const ModelConfig mb = model_config_from_json(to_json(m));
  CHECK(mb.variant == ModelVariant::kV3);
  CHECK(mb.hash == m.hash);
  CHECK(mb.hidden_width == 16);
  CHECK_THROWS_AS(model_config_from_json({{"depth", 3}}), InputError);
}

TEST_CASE("epoch csv") {
  TempDir dir("csv");
  std::vector<EpochRecord> log(2);
  log[1].epoch = 1;
  log[1].val_psnr = 21.5;
  write_epoch_csv(dir.path() / "train.csv", log);
  std::ifstream in(dir.path() / "train.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header.rfind("epoch,", 0) == 0);
  int lines = 0;
  for (std::string l; std::getline(in, l);) ++lines;
  CHECK(lines == 2);
}
