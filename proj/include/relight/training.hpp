// Copyright 2026 The Relight Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "relight/dataset.hpp"
#include "relight/image.hpp"
#include "relight/models.hpp"

namespace relight {

struct TrainConfig {
  int rays_per_batch = 4096;
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int n_coarse = 128;
  int n_fine = 128;
  bool jitter = true;
  int patience = 10;
  double min_improvement_db = 0.01;
  std::int64_t max_iterations = 200000;
  int max_epochs = 0;        // 0: no cap
  double max_seconds = 0.0;  // 0: no cap; a wall-clock cap breaks reproducibility
  std::uint64_t seed = 0;
  int threads = 1;
  int chunk_rays = 64;       // rays per work item; fixes the gradient summation order

  void validate() const;
  AdamHyper adam() const { return {lr, beta1, beta2, eps}; }
  SamplingConfig sampling(bool training) const { return {n_coarse, n_fine, training && jitter}; }
};

nlohmann::json to_json(const TrainConfig& c);
/// Overlays the keys present in `j` onto `base`. Unknown keys are rejected.
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});

nlohmann::json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j, ModelConfig base = {});

/// One Adam state per parameter group.
struct ModelOptimizer {
  AdamState<float> hash, geo, rgb, vis;

  static ModelOptimizer for_model(const RelightModel<float>& model, const AdamHyper& hyper);
};

struct ParamGroup {
  std::string name;
  std::vector<float> params;
  std::vector<float> m;
  std::vector<float> v;
  std::int64_t step = 0;
  std::int64_t skipped = 0;

  bool operator==(const ParamGroup&) const = default;
};

/// Everything needed to reload a model and resume its optimizer.
struct Checkpoint {
  ModelConfig model;
  TrainConfig train;
  std::int64_t step = 0;
  int epoch = 0;
  double val_psnr = 0.0;
  std::string scene_name;
  int views = 0;
  int lights = 0;
  std::uint64_t split_seed = 0;
  int holdout = 3;
  std::vector<ParamGroup> groups;  // hash, geo, rgb, vis (vis empty below V5)
};

Checkpoint make_checkpoint(const RelightModel<float>& model, const ModelOptimizer& opt);
/// Copies parameters (and optimizer moments when `opt` is given) back.
void restore_checkpoint(const Checkpoint& ckpt, RelightModel<float>& model, ModelOptimizer* opt = nullptr);
RelightModel<float> model_from_checkpoint(const Checkpoint& ckpt);

/// Binary layout, little-endian: "RLNFCKPT", u32 version, u32 header length,
/// header JSON, then per group: u32 name length, name, u64 count, float32
/// params, m, v, i64 step, i64 skipped.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// ---------------------------------------------------------------------------

struct FrameRender {
  Image rgb;
  GrayImage opacity;
  GrayImage visibility;  // empty without a visibility network
  std::size_t invalid_rays = 0;
};

/// Renders a full frame through pixel centers, rays clipped to the model's
/// bounds. Deterministic sampling.
FrameRender render_frame(const RelightModel<float>& model, const PinholeCamera& intrinsics,
                         const Pose6D& camera, const Pose6D& light, double t_near, double t_far,
                         const SamplingConfig& sampling, int threads = 1);

struct EpochRecord {
  int epoch = 0;
  std::int64_t step = 0;
  double train_loss = 0.0;  // mean over the epoch's batches; 0 for epoch 0
  double train_psnr = 0.0;
  double val_psnr = 0.0;
  double best_val_psnr = 0.0;
  bool improved = false;
  std::int64_t skipped_steps = 0;
  std::int64_t invalid_rays = 0;
  std::int64_t clamped_samples = 0;
  double seconds = 0.0;
};

enum class StopReason { kEarlyStop, kMaxIterations, kMaxEpochs, kTimeLimit, kDiverged };
std::string to_string(StopReason r);

struct TrainResult {
  Checkpoint best;
  Checkpoint last;  // last finite state
  std::vector<EpochRecord> log;
  StopReason reason = StopReason::kMaxIterations;
  std::string message;
};

using ProgressSink = std::function<void(const EpochRecord&)>;

/// Mean PSNR (capped at 100 dB) of quantized renders against the frames.
double validation_psnr(const RelightModel<float>& model, const OlatScene& scene,
                       const std::vector<FrameKey>& frames, const SamplingConfig& sampling, int threads);

/// Fits `model` on the split's train frames, validating every epoch (and
/// before the first step). The model ends holding the best-val parameters.
TrainResult train(RelightModel<float>& model, const OlatScene& scene, const SplitAssignment& split,
                  const TrainConfig& config, const ProgressSink& progress = {});

void write_epoch_csv(const std::filesystem::path& path, const std::vector<EpochRecord>& log);

}  // namespace relight
