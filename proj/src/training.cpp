// Copyright 2026 The Relight Authors
// SPDX-License-Identifier: Apache-2.0

#include "relight/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include "relight/errors.hpp"
#include "relight/metrics.hpp"
#include "relight/parallel.hpp"

namespace relight {

using nlohmann::json;

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  return splitmix(splitmix(splitmix(a) ^ b) ^ c);
}

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& what) {
  if (!j.is_object()) throw InputError(what + " must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw InputError(what + ": unknown key '" + key + "'");
  }
}

template <typename V>
void take(const json& j, const char* key, V& out) {
  if (j.contains(key)) out = j[key].get<V>();
}

}  // namespace

void TrainConfig::validate() const {
  if (rays_per_batch < 1 || n_coarse < 1 || n_fine < 0 || chunk_rays < 1 || threads < 1) {
    throw InputError("train config: counts must be >= 1");
  }
  if (patience < 1) throw InputError("train config: patience must be >= 1");
  if (max_iterations < 0 || max_epochs < 0 || max_seconds < 0.0) throw InputError("train config: caps must be >= 0");
  if (!(lr >= 0.0) || !(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(eps > 0.0)) {
    throw InputError("train config: optimizer hyperparameters out of range");
  }
  if (!(min_improvement_db >= 0.0)) throw InputError("train config: min improvement must be >= 0");
}

json to_json(const TrainConfig& c) {
  return {{"rays_per_batch", c.rays_per_batch}, {"lr", c.lr},
          {"beta1", c.beta1},                   {"beta2", c.beta2},
          {"eps", c.eps},                       {"n_coarse", c.n_coarse},
          {"n_fine", c.n_fine},                 {"jitter", c.jitter},
          {"patience", c.patience},             {"min_improvement_db", c.min_improvement_db},
          {"max_iterations", c.max_iterations}, {"max_epochs", c.max_epochs},
          {"max_seconds", c.max_seconds},       {"seed", c.seed},
          {"threads", c.threads},               {"chunk_rays", c.chunk_rays}};
}

TrainConfig train_config_from_json(const json& j, TrainConfig c) {
  reject_unknown(j, {"rays_per_batch", "lr", "beta1", "beta2", "eps", "n_coarse", "n_fine", "jitter", "patience",
                     "min_improvement_db", "max_iterations", "max_epochs", "max_seconds", "seed", "threads",
                     "chunk_rays"},
                 "train config");
  try {
    take(j, "rays_per_batch", c.rays_per_batch);
    take(j, "lr", c.lr);
    take(j, "beta1", c.beta1);
    take(j, "beta2", c.beta2);
    take(j, "eps", c.eps);
    take(j, "n_coarse", c.n_coarse);
    take(j, "n_fine", c.n_fine);
    take(j, "jitter", c.jitter);
    take(j, "patience", c.patience);
    take(j, "min_improvement_db", c.min_improvement_db);
    take(j, "max_iterations", c.max_iterations);
    take(j, "max_epochs", c.max_epochs);
    take(j, "max_seconds", c.max_seconds);
    take(j, "seed", c.seed);
    take(j, "threads", c.threads);
    take(j, "chunk_rays", c.chunk_rays);
  } catch (const json::exception& e) {
    throw InputError(std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

json to_json(const ModelConfig& c) {
  return {{"variant", to_string(c.variant)},
          {"hash",
           {{"levels", c.hash.levels},
            {"features_per_level", c.hash.features_per_level},
            {"table_size", c.hash.table_size},
            {"base_resolution", c.hash.base_resolution},
            {"per_level_scale", c.hash.per_level_scale}}},
          {"embedding_width", c.embedding_width},
          {"hidden_width", c.hidden_width},
          {"geo_hidden_layers", c.geo_hidden_layers},
          {"rgb_hidden_layers", c.rgb_hidden_layers},
          {"vis_hidden_layers", c.vis_hidden_layers},
          {"bounds",
           {{"center", {c.bounds.center.x(), c.bounds.center.y(), c.bounds.center.z()}},
            {"radius", c.bounds.radius}}}};
}

ModelConfig model_config_from_json(const json& j, ModelConfig c) {
  reject_unknown(j, {"variant", "hash", "embedding_width", "hidden_width", "geo_hidden_layers", "rgb_hidden_layers",
                     "vis_hidden_layers", "bounds"},
                 "model config");
  try {
    if (j.contains("variant")) c.variant = variant_from_string(j["variant"].get<std::string>());
    if (j.contains("hash")) {
      const json& h = j["hash"];
      reject_unknown(h, {"levels", "features_per_level", "table_size", "base_resolution", "per_level_scale"},
                     "hash config");
      take(h, "levels", c.hash.levels);
      take(h, "features_per_level", c.hash.features_per_level);
      take(h, "table_size", c.hash.table_size);
      take(h, "base_resolution", c.hash.base_resolution);
      take(h, "per_level_scale", c.hash.per_level_scale);
    }
    take(j, "embedding_width", c.embedding_width);
    take(j, "hidden_width", c.hidden_width);
    take(j, "geo_hidden_layers", c.geo_hidden_layers);
    take(j, "rgb_hidden_layers", c.rgb_hidden_layers);
    take(j, "vis_hidden_layers", c.vis_hidden_layers);
    if (j.contains("bounds")) {
      const json& b = j["bounds"];
      const auto ctr = b.at("center").get<std::vector<double>>();
      if (ctr.size() != 3) throw InputError("model config: bounds center must have 3 values");
      c.bounds.center = Vec3(ctr[0], ctr[1], ctr[2]);
      c.bounds.radius = b.at("radius").get<double>();
    }
  } catch (const json::exception& e) {
    throw InputError(std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

ModelOptimizer ModelOptimizer::for_model(const RelightModel<float>& model, const AdamHyper& hyper) {
  ModelOptimizer o;
  o.hash = AdamState<float>(model.hash_grid().table().size(), hyper);
  o.geo = AdamState<float>(model.geo().parameter_count(), hyper);
  o.rgb = AdamState<float>(model.rgb().parameter_count(), hyper);
  o.vis = AdamState<float>(model.has_visibility() ? model.vis().parameter_count() : 0, hyper);
  return o;
}

std::string to_string(StopReason r) {
  switch (r) {
    case StopReason::kEarlyStop: return "early_stop";
    case StopReason::kMaxIterations: return "max_iterations";
    case StopReason::kMaxEpochs: return "max_epochs";
    case StopReason::kTimeLimit: return "time_limit";
    case StopReason::kDiverged: return "diverged";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------

FrameRender render_frame(const RelightModel<float>& model, const PinholeCamera& intrinsics,
                         const Pose6D& camera, const Pose6D& light, double t_near, double t_far,
                         const SamplingConfig& sampling, int threads) {
  std::vector<Ray> rays = image_rays(intrinsics, camera, t_near, t_far);
  clip_to_bounds(rays, model.config().bounds);
  FrameRender out;
  out.rgb = Image(intrinsics.width, intrinsics.height);
  out.opacity = {intrinsics.width, intrinsics.height, std::vector<float>(rays.size(), 0.0f)};
  if (model.has_visibility()) out.visibility = {intrinsics.width, intrinsics.height, std::vector<float>(rays.size(), 1.0f)};

  constexpr std::size_t kChunk = 256;
  const std::size_t chunks = (rays.size() + kChunk - 1) / kChunk;
  std::vector<std::size_t> invalid(chunks, 0);
  parallel_for(chunks, threads, [&](std::size_t c, int) {
    const std::size_t lo = c * kChunk, hi = std::min(rays.size(), lo + kChunk);
    const auto res = render_rays<float>(model, std::span<const Ray>(rays.data() + lo, hi - lo), light, sampling);
    for (std::size_t i = lo; i < hi; ++i) {
      const RenderResult<float>& r = res[i - lo];
      for (int k = 0; k < 3; ++k) out.rgb.data[i * 3 + k] = r.rgb[k];
      out.opacity.data[i] = r.opacity;
      if (model.has_visibility()) out.visibility.data[i] = r.mean_visibility;
      if (!r.valid) ++invalid[c];
    }
  });
  out.invalid_rays = std::accumulate(invalid.begin(), invalid.end(), std::size_t(0));
  return out;
}

double validation_psnr(const RelightModel<float>& model, const OlatScene& scene,
                       const std::vector<FrameKey>& frames, const SamplingConfig& sampling, int threads) {
  if (frames.empty()) throw InputError("validation needs at least one frame");
  double sum = 0.0;
  for (const FrameKey& key : frames) {
    const Frame* f = scene.find(key.first, key.second);
    if (!f) throw InputError("validation frame missing from scene");
    FrameRender r = render_frame(model, scene.intrinsics, scene.cameras[key.first], scene.lights[key.second],
                                 scene.t_near, scene.t_far, sampling, threads);
    r.rgb.quantize();
    sum += capped_psnr(psnr(r.rgb, f->image));
  }
  return sum / static_cast<double>(frames.size());
}

void write_epoch_csv(const std::filesystem::path& path, const std::vector<EpochRecord>& log) {
  std::ofstream os(path);
  if (!os) throw InputError("cannot write " + path.string());
  os << "epoch,step,train_loss,train_psnr,val_psnr,best_val_psnr,improved,skipped_steps,invalid_rays,"
        "clamped_samples,seconds\n";
  os.precision(10);
  for (const auto& r : log) {
    os << r.epoch << ',' << r.step << ',' << r.train_loss << ',' << r.train_psnr << ',' << r.val_psnr << ','
       << r.best_val_psnr << ',' << (r.improved ? 1 : 0) << ',' << r.skipped_steps << ',' << r.invalid_rays << ','
       << r.clamped_samples << ',' << r.seconds << '\n';
  }
}

// ---------------------------------------------------------------------------

namespace {

struct TrainRay {
  std::uint32_t frame;  // index into the train frame list
  std::uint32_t pixel;
};

struct WorkerState {
  ModelGradients<float> grads;
  double sq_error = 0.0;
  std::int64_t valid = 0;
  std::int64_t invalid = 0;
  std::int64_t clamped = 0;
};

class TrainerImpl {
 public:
  TrainerImpl(RelightModel<float>& model, const OlatScene& scene, const SplitAssignment& split,
              const TrainConfig& cfg)
      : model_(model), scene_(scene), split_(split), cfg_(cfg) {
    cfg_.validate();
    if (split.views != static_cast<int>(scene.cameras.size()) || split.lights != static_cast<int>(scene.lights.size())) {
      throw InputError("split grid does not match the scene's views and lights");
    }
    for (const FrameKey& k : split.train) {
      if (const Frame* f = scene.find(k.first, k.second)) train_frames_.push_back(f);
    }
    for (const FrameKey& k : split.val) {
      if (scene.find(k.first, k.second)) val_frames_.push_back(k);
    }
    if (train_frames_.empty()) throw InputError("split has no train frames present in the scene");
    if (val_frames_.empty()) throw InputError("split has no val frames present in the scene");

    const std::size_t pixels = static_cast<std::size_t>(scene.intrinsics.width) * scene.intrinsics.height;
    for (const Frame* f : train_frames_) {
      if (!rays_.count(f->view)) {
        std::vector<Ray> r = image_rays(scene.intrinsics, scene.cameras[f->view], scene.t_near, scene.t_far);
        clip_to_bounds(r, model.config().bounds);
        rays_.emplace(f->view, std::move(r));
      }
    }
    for (int m = 0; m < static_cast<int>(scene.lights.size()); ++m) {
      light_codes_.push_back(light_pose_code<float>(scene.lights[m], model.config().bounds));
    }
    total_rays_ = train_frames_.size() * pixels;
    order_.resize(total_rays_);
  }

  TrainResult run(const ProgressSink& progress) {
    using Clock = std::chrono::steady_clock;
    const auto t0 = Clock::now();
    auto elapsed = [&] { return std::chrono::duration<double>(Clock::now() - t0).count(); };

    ModelOptimizer opt = ModelOptimizer::for_model(model_, cfg_.adam());
    const int workers = std::max(1, cfg_.threads);
    std::vector<WorkerState> ws(workers);
    for (auto& w : ws) w.grads = model_.make_gradients();
    ModelGradients<float> total = model_.make_gradients();

    TrainResult result;
    const SamplingConfig val_sampling = cfg_.sampling(false);
    std::int64_t step = 0, skipped_run = 0, skipped_total = 0;

    auto snapshot = [&](int epoch, double val) {
      Checkpoint c = make_checkpoint(model_, opt);
      fill_meta(c, step, epoch, val);
      return c;
    };

    EpochRecord rec;
    rec.val_psnr = validation_psnr(model_, scene_, val_frames_, val_sampling, cfg_.threads);
    rec.best_val_psnr = rec.val_psnr;
    rec.improved = true;
    rec.seconds = elapsed();
    double best = rec.val_psnr;
    int best_epoch = 0;
    result.best = snapshot(0, best);
    result.log.push_back(rec);
    if (progress) progress(rec);

    std::iota(order_.begin(), order_.end(), std::uint64_t(0));
    int epoch = 0;
    bool stop = false;
    while (!stop) {
      ++epoch;
      std::mt19937_64 shuffle_rng(mix_seed(cfg_.seed, 0x5EED, static_cast<std::uint64_t>(epoch)));
      std::shuffle(order_.begin(), order_.end(), shuffle_rng);

      double loss_sum = 0.0;
      std::int64_t batches = 0, invalid = 0, clamped = 0;
      bool epoch_complete = true;
      for (std::size_t begin = 0; begin < total_rays_; begin += cfg_.rays_per_batch) {
        if (cfg_.max_iterations > 0 && step >= cfg_.max_iterations) {
          result.reason = StopReason::kMaxIterations;
          epoch_complete = false;
          stop = true;
          break;
        }
        if (cfg_.max_seconds > 0.0 && elapsed() >= cfg_.max_seconds) {
          result.reason = StopReason::kTimeLimit;
          epoch_complete = false;
          stop = true;
          break;
        }
        const std::size_t end = std::min(total_rays_, begin + static_cast<std::size_t>(cfg_.rays_per_batch));
        const double loss = step_batch(begin, end, step, ws, total);
        for (const auto& w : ws) {
          invalid += w.invalid;
          clamped += w.clamped;
        }
        if (!std::isfinite(loss)) {
          result.reason = StopReason::kDiverged;
          result.message = "training loss became non-finite at step " + std::to_string(step);
          stop = true;
          epoch_complete = false;
          break;
        }
        const bool finite = total.finite();
        if (finite) {
          adam_step<float>(model_.hash_grid().table(), total.hash, opt.hash);
          adam_step<float>(model_.geo().mutable_params(), total.geo, opt.geo);
          adam_step<float>(model_.rgb().mutable_params(), total.rgb, opt.rgb);
          if (model_.has_visibility()) adam_step<float>(model_.vis().mutable_params(), total.vis, opt.vis);
          skipped_run = 0;
        } else {
          ++opt.hash.skipped;
          ++opt.geo.skipped;
          ++opt.rgb.skipped;
          ++opt.vis.skipped;
          ++skipped_total;
          if (++skipped_run >= kMaxConsecutiveSkips) {
            result.reason = StopReason::kDiverged;
            result.message = "gradients stayed non-finite for " + std::to_string(skipped_run) + " steps";
            stop = true;
            epoch_complete = false;
            ++step;
            break;
          }
        }
        ++step;
        loss_sum += loss;
        ++batches;
      }
      if (!epoch_complete && batches == 0) break;

      EpochRecord r;
      r.epoch = epoch;
      r.step = step;
      r.train_loss = batches ? loss_sum / batches : 0.0;
      r.train_psnr = r.train_loss > 0.0 ? capped_psnr(-10.0 * std::log10(r.train_loss)) : kPsnrCap;
      r.val_psnr = validation_psnr(model_, scene_, val_frames_, val_sampling, cfg_.threads);
      r.skipped_steps = skipped_total;
      r.invalid_rays = invalid;
      r.clamped_samples = clamped;
      if (std::isfinite(r.val_psnr) && r.val_psnr >= best + cfg_.min_improvement_db) {
        best = r.val_psnr;
        best_epoch = epoch;
        r.improved = true;
        result.best = snapshot(epoch, best);
      }
      r.best_val_psnr = best;
      r.seconds = elapsed();
      result.log.push_back(r);
      if (progress) progress(r);

      if (!stop) {
        if (epoch - best_epoch >= cfg_.patience) {
          result.reason = StopReason::kEarlyStop;
          stop = true;
        } else if (cfg_.max_epochs > 0 && epoch >= cfg_.max_epochs) {
          result.reason = StopReason::kMaxEpochs;
          stop = true;
        }
      }
    }
    result.last = snapshot(result.log.back().epoch, result.log.back().val_psnr);
    restore_checkpoint(result.best, model_);
    return result;
  }

 private:
  static constexpr int kMaxConsecutiveSkips = 50;

  void fill_meta(Checkpoint& c, std::int64_t step, int epoch, double val) const {
    c.train = cfg_;
    c.step = step;
    c.epoch = epoch;
    c.val_psnr = val;
    c.scene_name = scene_.name;
    c.views = split_.views;
    c.lights = split_.lights;
    c.split_seed = split_.seed;
    c.holdout = split_.holdout;
  }

  // Forward, composite and backward for rays order_[begin, end). Leaves the
  // mean-loss gradient in `total` and returns the batch MSE.
  double step_batch(std::size_t begin, std::size_t end, std::int64_t step, std::vector<WorkerState>& ws,
                    ModelGradients<float>& total) {
    for (auto& w : ws) {
      w.grads.zero();
      w.sq_error = 0.0;
      w.valid = w.invalid = w.clamped = 0;
    }
    const std::size_t n = end - begin;
    const std::size_t chunk = static_cast<std::size_t>(cfg_.chunk_rays);
    const std::size_t chunks = (n + chunk - 1) / chunk;
    parallel_for(chunks, static_cast<int>(ws.size()), [&](std::size_t c, int w) {
      const std::size_t lo = begin + c * chunk, hi = std::min(end, lo + chunk);
      std::mt19937_64 rng(mix_seed(cfg_.seed, static_cast<std::uint64_t>(step), c));
      process_chunk(lo, hi, rng, ws[w]);
    });

    total.zero();
    double sq = 0.0;
    std::int64_t valid = 0;
    for (const auto& w : ws) {
      total.add(w.grads);
      sq += w.sq_error;
      valid += w.valid;
    }
    if (valid == 0) return std::numeric_limits<double>::quiet_NaN();
    const float scale = 1.0f / static_cast<float>(valid);
    for (auto* g : {&total.hash, &total.geo, &total.rgb, &total.vis})
      for (float& x : *g) x *= scale;
    return sq / (3.0 * static_cast<double>(valid));
  }

  void process_chunk(std::size_t lo, std::size_t hi, std::mt19937_64& rng, WorkerState& ws) const {
    const std::size_t pixels = static_cast<std::size_t>(scene_.intrinsics.width) * scene_.intrinsics.height;
    const VariantFlags flags = model_.flags();
    std::vector<Ray> rays;
    std::vector<const Frame*> frames;
    std::vector<std::size_t> pix;
    rays.reserve(hi - lo);
    for (std::size_t i = lo; i < hi; ++i) {
      const std::uint64_t id = order_[i];
      const Frame* f = train_frames_[id / pixels];
      frames.push_back(f);
      pix.push_back(id % pixels);
      rays.push_back(rays_.at(f->view)[id % pixels]);
    }
    const SamplePlan<float> plan = plan_samples<float>(model_, rays, cfg_.sampling(true), &rng);
    const std::size_t total = plan.t.size();

    std::vector<float> rgb_pred(rays.size() * 3, 0.0f);
    if (total == 0) {
      accumulate_loss(frames, pix, rgb_pred, std::vector<char>(rays.size(), 1), ws);
      return;
    }

    ModelInputs<float> in;
    in.xs.resize(3, total);
    in.dirs.resize(3, total);
    if (flags.relative_light) in.light_pos.resize(3, total);
    if (flags.absolute_light) in.light_code.resize(kFourierOutputDim, total);
    for (std::size_t r = 0; r < rays.size(); ++r) {
      const Vec3 lp = scene_.lights[frames[r]->light].translation();
      for (std::size_t s = plan.offsets[r]; s < plan.offsets[r + 1]; ++s) {
        in.xs.col(s) = rays[r].at(plan.t[s]).cast<float>();
        in.dirs.col(s) = rays[r].direction.cast<float>();
        if (flags.relative_light) in.light_pos.col(s) = lp.cast<float>();
        if (flags.absolute_light) {
          const auto& code = light_codes_[frames[r]->light];
          std::copy(code.begin(), code.end(), &in.light_code(0, s));
        }
      }
    }

    RelightModel<float>::Cache cache;
    ModelOutputs<float> out;
    model_.forward(in, out, &cache);
    ws.clamped += static_cast<std::int64_t>(out.clamped);
    const bool has_vis = !out.visibility.empty();

    std::vector<float> d_sigma(total, 0.0f), d_vis(has_vis ? total : 0, 0.0f);
    Matrix<float> d_rgb = Matrix<float>::Zero(3, total);
    std::vector<float> weights;
    std::vector<char> ok(rays.size(), 1);
    for (std::size_t r = 0; r < rays.size(); ++r) {
      const std::size_t o = plan.offsets[r];
      const int ns = static_cast<int>(plan.offsets[r + 1] - o);
      if (ns == 0) continue;
      weights.resize(ns);
      float opacity = 0.0f, depth = 0.0f;
      const float* vis = has_vis ? out.visibility.data() + o : nullptr;
      ok[r] = composite_kernel<float>(ns, plan.t.data() + o, plan.delta.data() + o, out.sigma.data() + o,
                                      out.rgb.data() + 3 * o, vis, weights.data(), &rgb_pred[3 * r], &opacity,
                                      &depth);
      if (!ok[r]) continue;
      float g[3];
      for (int k = 0; k < 3; ++k) {
        g[k] = 2.0f * (rgb_pred[3 * r + k] - frames[r]->image.data[pix[r] * 3 + k]) / 3.0f;
      }
      composite_backward_kernel<float>(ns, plan.delta.data() + o, out.sigma.data() + o, out.rgb.data() + 3 * o, vis,
                                       g, d_sigma.data() + o, d_rgb.data() + 3 * o,
                                       has_vis ? d_vis.data() + o : nullptr);
    }
    accumulate_loss(frames, pix, rgb_pred, ok, ws);
    model_.backward(cache, in, d_sigma, d_rgb, d_vis, ws.grads);
  }

  static void accumulate_loss(const std::vector<const Frame*>& frames, const std::vector<std::size_t>& pix,
                              const std::vector<float>& pred, const std::vector<char>& ok, WorkerState& ws) {
    for (std::size_t r = 0; r < frames.size(); ++r) {
      if (!ok[r]) {
        ++ws.invalid;
        continue;
      }
      ++ws.valid;
      for (int k = 0; k < 3; ++k) {
        const double e = static_cast<double>(pred[3 * r + k]) - frames[r]->image.data[pix[r] * 3 + k];
        ws.sq_error += e * e;
      }
    }
  }

  RelightModel<float>& model_;
  const OlatScene& scene_;
  const SplitAssignment& split_;
  TrainConfig cfg_;
  std::vector<const Frame*> train_frames_;
  std::vector<FrameKey> val_frames_;
  std::map<int, std::vector<Ray>> rays_;
  std::vector<std::array<float, kFourierOutputDim>> light_codes_;
  std::size_t total_rays_ = 0;
  std::vector<std::uint64_t> order_;
};

}  // namespace

TrainResult train(RelightModel<float>& model, const OlatScene& scene, const SplitAssignment& split,
                  const TrainConfig& config, const ProgressSink& progress) {
  TrainerImpl impl(model, scene, split, config);
  return impl.run(progress);
}

}  // namespace relight
