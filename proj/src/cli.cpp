// Copyright 2026 The Relight Authors
// SPDX-License-Identifier: Apache-2.0

#include "relight/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "relight/errors.hpp"
#include "relight/metrics.hpp"
#include "relight/synth.hpp"
#include "relight/training.hpp"

#ifndef RELIGHT_VERSION
#define RELIGHT_VERSION "0.1.0"
#endif

namespace relight {

namespace fs = std::filesystem;
using nlohmann::json;

std::string version_string() { return RELIGHT_VERSION; }

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

json read_json_file(const fs::path& p, const std::string& what) {
  std::ifstream is(p);
  if (!is) throw InputError("cannot open " + what + " " + p.string());
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw InputError("malformed " + what + " " + p.string() + ": " + e.what());
  }
}

void write_json_file(const fs::path& p, const json& j) {
  std::ofstream os(p);
  if (!os) throw InputError("cannot write " + p.string());
  os << j.dump(2) << '\n';
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw InputError("cannot create output directory " + dir.string());
}

// Flag value if given, else the config entry, else the built-in default.
template <typename V>
V resolve(const CLI::Option* flag, const V& flag_value, const json& cfg, const char* key, const V& fallback) {
  if (flag && flag->count() > 0) return flag_value;
  if (cfg.contains(key)) {
    try {
      return cfg[key].get<V>();
    } catch (const json::exception& e) {
      throw InputError(std::string("config key '") + key + "': " + e.what());
    }
  }
  return fallback;
}

struct Common {
  std::string out;
  std::string config_path;
  std::uint64_t seed = 0;
  int threads = 1;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* threads_opt = nullptr;

  void add(CLI::App* app, bool out_required = true) {
    auto* o = app->add_option("--out", out, "Output directory");
    if (out_required) o->required();
    app->add_option("--config", config_path, "JSON config file (flags override it)");
    seed_opt = app->add_option("--seed", seed, "Random seed");
    threads_opt = app->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
  }
  json config() const { return config_path.empty() ? json::object() : read_json_file(config_path, "config"); }
};

class Manifest {
 public:
  explicit Manifest(std::string command) : command_(std::move(command)) {}

  void set_config(json cfg) { config_ = std::move(cfg); }
  void add_output(const fs::path& p) { outputs_.push_back(p.string()); }
  void set_result(json r) { result_ = std::move(r); }

  void write(const fs::path& dir, std::uint64_t seed) const {
    json j;
    j["command"] = command_;
    j["version"] = version_string();
    j["seed"] = seed;
    j["config"] = config_;
    j["outputs"] = outputs_;
    j["result"] = result_;
    j["timings"] = {{"wall_seconds", std::chrono::duration<double>(Clock::now() - start_).count()}};
    write_json_file(dir / "run.json", j);
  }

 private:
  using Clock = std::chrono::steady_clock;
  std::string command_;
  json config_ = json::object();
  json result_ = json::object();
  std::vector<std::string> outputs_;
  Clock::time_point start_ = Clock::now();
};

std::vector<double> parse_vec3(const std::string& s, const std::string& what) {
  std::vector<double> v;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      v.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw InputError(what + ": cannot parse '" + item + "'");
    }
  }
  if (v.size() != 3) throw InputError(what + " needs three comma-separated values");
  return v;
}

SplitAssignment split_for(const std::string& splits_path, int views, int lights, std::uint64_t seed, int holdout) {
  if (!splits_path.empty()) {
    SplitAssignment s = splits_from_json(read_json_file(splits_path, "split file"));
    if (s.views != views || s.lights != lights) {
      throw InputError("split file grid " + std::to_string(s.views) + "x" + std::to_string(s.lights) +
                       " does not match the scene's " + std::to_string(views) + "x" + std::to_string(lights));
    }
    return s;
  }
  return generate_splits(views, lights, seed, holdout);
}

std::string frame_stem(int view, int light) { return "v" + std::to_string(view) + "_l" + std::to_string(light); }

// ---------------------------------------------------------------------------

struct SynthCmd {
  Common common;
  std::string preset, spec_path;
  int views = 12, lights = 10, res = 64, spp = 1;
  CLI::Option *preset_opt, *views_opt, *lights_opt, *res_opt, *spp_opt;

  void add(CLI::App& root) {
    auto* app = root.add_subcommand("synth", "Ray-trace a synthetic OLAT scene");
    common.add(app);
    preset_opt = app->add_option("--preset", preset, "Built-in scene (sphere-shadow)");
    app->add_option("--spec", spec_path, "Scene spec JSON file");
    views_opt = app->add_option("--views", views, "Camera waypoints")->check(CLI::PositiveNumber);
    lights_opt = app->add_option("--lights", lights, "Light waypoints")->check(CLI::PositiveNumber);
    res_opt = app->add_option("--res", res, "Image width and height")->check(CLI::PositiveNumber);
    spp_opt = app->add_option("--spp", spp, "Samples per pixel")->check(CLI::PositiveNumber);
    app->callback([this] { run_requested = true; });
  }

  int run(std::ostream& out, std::ostream& err) const {
    const json cfg = common.config();
    Manifest manifest("synth");
    SceneSpec spec;
    std::string spec_file = spec_path;
    if (spec_file.empty() && cfg.contains("spec_file")) spec_file = cfg["spec_file"].get<std::string>();
    if (!spec_file.empty() && preset_opt->count() == 0) {
      spec = scene_spec_from_json(read_json_file(spec_file, "scene spec"));
    } else if (cfg.contains("spec") && preset_opt->count() == 0) {
      spec = scene_spec_from_json(cfg["spec"]);
    } else {
      spec = scene_preset(resolve<std::string>(preset_opt, preset, cfg, "preset", "sphere-shadow"));
    }
    const int n = resolve(views_opt, views, cfg, "views", 12);
    const int m = resolve(lights_opt, lights, cfg, "lights", 10);
    const int r = resolve(res_opt, res, cfg, "res", 64);
    const int s = resolve(spp_opt, spp, cfg, "spp", 1);
    const auto seed = resolve<std::uint64_t>(common.seed_opt, common.seed, cfg, "seed", 0);
    const int threads = resolve(common.threads_opt, common.threads, cfg, "threads", 1);
    if (n < 1 || m < 1 || r < 1 || s < 1 || threads < 1) throw InputError("synth: counts must be >= 1");

    const PinholeCamera k = PinholeCamera::from_fov(r, r, spec.fov_x);
    err << "synth: " << spec.name << " " << n << " views x " << m << " lights at " << r << "x" << r << "\n";
    const OlatScene scene = synth_olat(spec, camera_waypoints(spec, n), light_waypoints(spec, m), k, s, seed, threads);
    const fs::path dir = common.out;
    ensure_dir(dir);
    save_scene(dir, scene);
    write_json_file(dir / "scene_spec.json", scene_spec_to_json(spec));
    manifest.set_config({{"spec", scene_spec_to_json(spec)}, {"views", n}, {"lights", m}, {"res", r}, {"spp", s},
                         {"threads", threads}});
    manifest.add_output(dir / "scene.json");
    manifest.add_output(dir / "scene_spec.json");
    manifest.set_result({{"frames", scene.frames.size()}});
    manifest.write(dir, seed);
    out << "wrote " << scene.frames.size() << " frames to " << dir.string() << "\n";
    return kExitOk;
  }

  bool run_requested = false;
};

struct SplitsCmd {
  Common common;
  int views = 0, lights = 0, holdout = 3;
  CLI::Option *views_opt, *lights_opt, *holdout_opt;
  bool run_requested = false;

  void add(CLI::App& root) {
    auto* app = root.add_subcommand("splits", "Generate train/val/easy/hard splits");
    common.add(app);
    views_opt = app->add_option("--views", views, "Number of camera views N");
    lights_opt = app->add_option("--lights", lights, "Number of lights M");
    holdout_opt = app->add_option("--holdout", holdout, "Held-out views/lights per set");
    app->callback([this] { run_requested = true; });
  }

  int run(std::ostream& out, std::ostream&) const {
    const json cfg = common.config();
    Manifest manifest("splits");
    const int n = resolve(views_opt, views, cfg, "views", 0);
    const int m = resolve(lights_opt, lights, cfg, "lights", 0);
    const int h = resolve(holdout_opt, holdout, cfg, "holdout", 3);
    const auto seed = resolve<std::uint64_t>(common.seed_opt, common.seed, cfg, "seed", 0);
    const SplitAssignment s = generate_splits(n, m, seed, h);
    const fs::path dir = common.out;
    ensure_dir(dir);
    write_json_file(dir / "splits.json", splits_to_json(s));
    const json counts = {{"train", s.train.size()}, {"val", s.val.size()},       {"easy", s.easy.size()},
                         {"hard", s.hard.size()},   {"unused", s.unused.size()}};
    manifest.set_config({{"views", n}, {"lights", m}, {"holdout", h}});
    manifest.add_output(dir / "splits.json");
    manifest.set_result(counts);
    manifest.write(dir, seed);
    out << "train " << s.train.size() << " val " << s.val.size() << " easy " << s.easy.size() << " hard "
        << s.hard.size() << " unused " << s.unused.size() << "\n";
    return kExitOk;
  }
};

struct TrajectoryCmd {
  Common common;
  std::string region = "dome", center = "0,0,0", target;
  int count = 1;
  double radius = 1.0, theta_min = 0, theta_max = 0, phi_min = 0, phi_max = 0;
  CLI::Option *region_opt, *count_opt, *radius_opt, *center_opt, *target_opt;
  CLI::Option *tmin_opt, *tmax_opt, *pmin_opt, *pmax_opt;
  bool run_requested = false;

  void add(CLI::App& root) {
    auto* app = root.add_subcommand("trajectory", "Equal-area waypoints on a spherical region");
    common.add(app);
    region_opt = app->add_option("--region", region, "Preset region: wedge or dome");
    count_opt = app->add_option("--count", count, "Number of waypoints");
    radius_opt = app->add_option("--radius", radius, "Sphere radius");
    center_opt = app->add_option("--center", center, "Sphere center x,y,z");
    target_opt = app->add_option("--target", target, "Look-at target x,y,z (default: center)");
    tmin_opt = app->add_option("--theta-min", theta_min, "Polar angle lower bound, degrees");
    tmax_opt = app->add_option("--theta-max", theta_max, "Polar angle upper bound, degrees");
    pmin_opt = app->add_option("--phi-min", phi_min, "Azimuth lower bound, degrees");
    pmax_opt = app->add_option("--phi-max", phi_max, "Azimuth upper bound, degrees");
    app->callback([this] { run_requested = true; });
  }

  int run(std::ostream& out, std::ostream&) const {
    const json cfg = common.config();
    Manifest manifest("trajectory");
    const auto c = parse_vec3(resolve(center_opt, center, cfg, "center", std::string("0,0,0")), "--center");
    const Vec3 ctr(c[0], c[1], c[2]);
    const double r = resolve(radius_opt, radius, cfg, "radius", 1.0);
    SphericalRegion reg = region_preset(resolve(region_opt, region, cfg, "region", std::string("dome")), r, ctr);
    reg.theta_min = resolve(tmin_opt, theta_min, cfg, "theta_min_deg", reg.theta_min / kDeg) * kDeg;
    reg.theta_max = resolve(tmax_opt, theta_max, cfg, "theta_max_deg", reg.theta_max / kDeg) * kDeg;
    reg.phi_min = resolve(pmin_opt, phi_min, cfg, "phi_min_deg", reg.phi_min / kDeg) * kDeg;
    reg.phi_max = resolve(pmax_opt, phi_max, cfg, "phi_max_deg", reg.phi_max / kDeg) * kDeg;
    const std::string tgt = resolve(target_opt, target, cfg, "target", std::string());
    Vec3 look = ctr;
    if (!tgt.empty()) {
      const auto t = parse_vec3(tgt, "--target");
      look = Vec3(t[0], t[1], t[2]);
    }
    const int k = resolve(count_opt, count, cfg, "count", 1);
    const auto cells = equal_area_cells(reg, k);
    const auto poses = equal_area_waypoints(reg, k, look);

    json j;
    j["region"] = {{"theta_min_deg", reg.theta_min / kDeg}, {"theta_max_deg", reg.theta_max / kDeg},
                   {"phi_min_deg", reg.phi_min / kDeg},     {"phi_max_deg", reg.phi_max / kDeg},
                   {"radius", r},                           {"center", {ctr.x(), ctr.y(), ctr.z()}}};
    j["target"] = {look.x(), look.y(), look.z()};
    j["poses"] = json::array();
    for (const auto& p : poses) j["poses"].push_back(pose_to_json(p));
    j["cells"] = json::array();
    for (const auto& cell : cells) {
      j["cells"].push_back({{"theta_lo_deg", cell.theta_lo / kDeg}, {"theta_hi_deg", cell.theta_hi / kDeg},
                            {"phi_lo_deg", cell.phi_lo / kDeg},     {"phi_hi_deg", cell.phi_hi / kDeg},
                            {"solid_angle", cell.solid_angle()}});
    }
    const fs::path dir = common.out;
    ensure_dir(dir);
    write_json_file(dir / "poses.json", j);
    manifest.set_config({{"region", j["region"]}, {"count", k}, {"target", j["target"]}});
    manifest.add_output(dir / "poses.json");
    manifest.set_result({{"poses", poses.size()}});
    manifest.write(dir, 0);
    out << "wrote " << poses.size() << " poses\n";
    return kExitOk;
  }
};

// Flags shared by train / render / eval for the sampler.
struct SamplerFlags {
  int n_coarse = 0, n_fine = 0;
  CLI::Option *coarse_opt = nullptr, *fine_opt = nullptr;
  void add(CLI::App* app) {
    coarse_opt = app->add_option("--n-coarse", n_coarse, "Coarse samples per ray")->check(CLI::PositiveNumber);
    fine_opt = app->add_option("--n-fine", n_fine, "Fine samples per ray")->check(CLI::NonNegativeNumber);
  }
};

struct TrainCmd {
  Common common;
  SamplerFlags sampler;
  std::string scene, variant = "v5", splits;
  std::uint64_t split_seed = 0;
  int holdout = 3, batch = 0, patience = 0, max_epochs = 0, hash_levels = 0, hash_log2 = 0, hidden = 0;
  std::int64_t max_iterations = 0;
  double lr = 0, max_seconds = 0;
  CLI::Option *scene_opt, *variant_opt, *splits_opt, *split_seed_opt, *holdout_opt, *batch_opt, *patience_opt,
      *max_epochs_opt, *max_iter_opt, *lr_opt, *max_seconds_opt, *levels_opt, *log2_opt, *hidden_opt;
  bool run_requested = false;

  void add(CLI::App& root) {
    auto* app = root.add_subcommand("train", "Train one model variant on a scene");
    common.add(app);
    sampler.add(app);
    scene_opt = app->add_option("--scene", scene, "Scene directory");
    variant_opt = app->add_option("--variant", variant, "Model variant v0..v5");
    splits_opt = app->add_option("--splits", splits, "Split JSON (default: generated)");
    split_seed_opt = app->add_option("--split-seed", split_seed, "Seed for generated splits");
    holdout_opt = app->add_option("--holdout", holdout, "Held-out views/lights for generated splits");
    batch_opt = app->add_option("--batch", batch, "Rays per batch")->check(CLI::PositiveNumber);
    lr_opt = app->add_option("--lr", lr, "Adam learning rate");
    patience_opt = app->add_option("--patience", patience, "Early-stopping patience in epochs");
    max_epochs_opt = app->add_option("--max-epochs", max_epochs, "Epoch cap (0: none)");
    max_iter_opt = app->add_option("--max-iterations", max_iterations, "Iteration cap (0: none)");
    max_seconds_opt = app->add_option("--max-seconds", max_seconds, "Wall-clock cap (0: none)");
    levels_opt = app->add_option("--hash-levels", hash_levels, "Hash grid levels");
    log2_opt = app->add_option("--hash-log2-size", hash_log2, "log2 of the hash table size");
    hidden_opt = app->add_option("--hidden", hidden, "Hidden width of all networks");
    app->callback([this] { run_requested = true; });
  }

  int run(std::ostream& out, std::ostream& err) const {
    const json cfg = common.config();
    for (const auto& [key, _] : cfg.items()) {
      static const std::set<std::string> known = {"scene", "variant", "splits", "split_seed", "holdout",
                                                  "model", "train"};
      if (!known.count(key)) throw InputError("config: unknown key '" + key + "'");
    }
    Manifest manifest("train");
    const std::string scene_dir = resolve(scene_opt, scene, cfg, "scene", std::string());
    if (scene_dir.empty()) throw InputError("train: --scene is required");
    if (!fs::is_directory(scene_dir)) throw InputError("scene directory not found: " + scene_dir);
    const OlatScene sc = load_scene(scene_dir);

    ModelConfig mc;
    mc.bounds = sc.bounds;
    if (cfg.contains("model")) mc = model_config_from_json(cfg["model"], mc);
    mc.variant = variant_from_string(resolve(variant_opt, variant, cfg, "variant", to_string(mc.variant)));
    if (levels_opt->count()) mc.hash.levels = hash_levels;
    if (log2_opt->count()) {
      if (hash_log2 < 1 || hash_log2 > 30) throw InputError("--hash-log2-size must lie in [1, 30]");
      mc.hash.table_size = 1u << hash_log2;
    }
    if (levels_opt->count()) mc.hash.per_level_scale = HashGridParams::scale_for_top(mc.hash.levels, mc.hash.base_resolution, 2048);
    if (hidden_opt->count()) mc.hidden_width = hidden;
    mc.validate();

    TrainConfig tc;
    if (cfg.contains("train")) tc = train_config_from_json(cfg["train"], tc);
    if (common.seed_opt->count()) tc.seed = common.seed;
    if (common.threads_opt->count()) tc.threads = common.threads;
    if (batch_opt->count()) tc.rays_per_batch = batch;
    if (lr_opt->count()) tc.lr = lr;
    if (patience_opt->count()) tc.patience = patience;
    if (max_epochs_opt->count()) tc.max_epochs = max_epochs;
    if (max_iter_opt->count()) tc.max_iterations = max_iterations;
    if (max_seconds_opt->count()) tc.max_seconds = max_seconds;
    if (sampler.coarse_opt->count()) tc.n_coarse = sampler.n_coarse;
    if (sampler.fine_opt->count()) tc.n_fine = sampler.n_fine;
    tc.validate();

    const std::string split_file = resolve(splits_opt, splits, cfg, "splits", std::string());
    const auto sseed = resolve<std::uint64_t>(split_seed_opt, split_seed, cfg, "split_seed", tc.seed);
    const int hold = resolve(holdout_opt, holdout, cfg, "holdout", 3);
    const SplitAssignment split = split_for(split_file, sc.view_count(), sc.light_count(), sseed, hold);

    const fs::path dir = common.out;
    ensure_dir(dir);
    write_json_file(dir / "splits.json", splits_to_json(split));
    const json resolved = {{"scene", scene_dir},         {"variant", to_string(mc.variant)},
                           {"splits", split_file},       {"split_seed", split.seed},
                           {"holdout", split.holdout},   {"model", to_json(mc)},
                           {"train", to_json(tc)}};
    manifest.set_config(resolved);

    RelightModel<float> model(mc, tc.seed);
    err << "train: " << to_string(mc.variant) << " on " << sc.name << ", " << split.train.size() << " train / "
        << split.val.size() << " val frames\n";
    const TrainResult res = train(model, sc, split, tc, [&](const EpochRecord& r) {
      err << "epoch " << r.epoch << " step " << r.step << " loss " << r.train_loss << " val_psnr " << r.val_psnr
          << (r.improved ? " *" : "") << " (" << r.seconds << " s)\n";
    });
    save_checkpoint(dir / "best.ckpt", res.best);
    save_checkpoint(dir / "last.ckpt", res.last);
    write_epoch_csv(dir / "train.csv", res.log);
    for (const char* f : {"best.ckpt", "last.ckpt", "train.csv", "splits.json"}) manifest.add_output(dir / f);
    manifest.set_result({{"stop_reason", to_string(res.reason)},
                         {"message", res.message},
                         {"best_epoch", res.best.epoch},
                         {"best_val_psnr", res.best.val_psnr},
                         {"steps", res.last.step},
                         {"epochs", res.log.back().epoch}});
    manifest.write(dir, tc.seed);
    if (res.reason == StopReason::kDiverged) {
      err << "train: " << res.message << "; last finite state kept in last.ckpt\n";
      return kExitNumerical;
    }
    out << "best val PSNR " << res.best.val_psnr << " dB at epoch " << res.best.epoch << " ("
        << to_string(res.reason) << ")\n";
    return kExitOk;
  }
};

struct ModelScene {
  Checkpoint ckpt;
  OlatScene scene;
};

ModelScene load_pair(const std::string& ckpt_path, const std::string& scene_dir) {
  if (ckpt_path.empty()) throw InputError("--checkpoint is required");
  if (scene_dir.empty()) throw InputError("--scene is required");
  if (!fs::is_directory(scene_dir)) throw InputError("scene directory not found: " + scene_dir);
  ModelScene ms{load_checkpoint(ckpt_path), load_scene(scene_dir)};
  if (ms.ckpt.views != ms.scene.view_count() || ms.ckpt.lights != ms.scene.light_count()) {
    throw InputError("checkpoint was trained on a " + std::to_string(ms.ckpt.views) + "x" +
                     std::to_string(ms.ckpt.lights) + " grid, scene has " + std::to_string(ms.scene.view_count()) +
                     "x" + std::to_string(ms.scene.light_count()));
  }
  const SceneBounds& a = ms.ckpt.model.bounds;
  const SceneBounds& b = ms.scene.bounds;
  if ((a.center - b.center).norm() > 1e-9 || std::abs(a.radius - b.radius) > 1e-9) {
    throw InputError("checkpoint bounds do not match the scene bounds");
  }
  return ms;
}

struct RenderCmd {
  Common common;
  SamplerFlags sampler;
  std::string checkpoint, scene, split = "val", splits, poses;
  int light_index = 0;
  CLI::Option *poses_opt, *split_opt;
  bool run_requested = false;

  void add(CLI::App& root) {
    auto* app = root.add_subcommand("render", "Render frames from a checkpoint");
    common.add(app);
    sampler.add(app);
    app->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
    app->add_option("--scene", scene, "Scene directory (intrinsics and poses)")->required();
    split_opt = app->add_option("--split", split, "Split to render: train, val, easy, hard");
    app->add_option("--splits", splits, "Split JSON (default: regenerated from the checkpoint)");
    poses_opt = app->add_option("--poses", poses, "Trajectory poses.json to render instead of a split");
    app->add_option("--light-index", light_index, "Light used with --poses");
    app->callback([this] { run_requested = true; });
  }

  int run(std::ostream& out, std::ostream& err) const {
    Manifest manifest("render");
    const ModelScene ms = load_pair(checkpoint, scene);
    const RelightModel<float> model = model_from_checkpoint(ms.ckpt);
    SamplingConfig sc{ms.ckpt.train.n_coarse, ms.ckpt.train.n_fine, false};
    if (sampler.coarse_opt->count()) sc.n_coarse = sampler.n_coarse;
    if (sampler.fine_opt->count()) sc.n_fine = sampler.n_fine;
    const int threads = common.threads;

    std::vector<std::pair<Pose6D, int>> jobs;
    std::vector<std::string> names;
    if (poses_opt->count()) {
      const json j = read_json_file(poses, "poses file");
      if (light_index < 0 || light_index >= ms.scene.light_count()) throw InputError("--light-index out of range");
      int i = 0;
      for (const auto& p : j.at("poses")) {
        jobs.emplace_back(pose_from_json(p, "pose " + std::to_string(i)), light_index);
        names.push_back("pose" + std::to_string(i++) + "_l" + std::to_string(light_index));
      }
    } else {
      const SplitAssignment s = split_for(splits, ms.scene.view_count(), ms.scene.light_count(), ms.ckpt.split_seed,
                                          ms.ckpt.holdout);
      for (const FrameKey& k : s.frames(split)) {
        jobs.emplace_back(ms.scene.cameras[k.first], k.second);
        names.push_back(frame_stem(k.first, k.second));
      }
    }
    if (jobs.empty()) throw InputError("nothing to render");
    const fs::path dir = common.out;
    ensure_dir(dir / "renders");
    ensure_dir(dir / "opacity");
    if (model.has_visibility()) ensure_dir(dir / "visibility");
    for (std::size_t i = 0; i < jobs.size(); ++i) {
      const FrameRender fr = render_frame(model, ms.scene.intrinsics, jobs[i].first, ms.scene.lights[jobs[i].second],
                                          ms.scene.t_near, ms.scene.t_far, sc, threads);
      write_png(dir / "renders" / (names[i] + ".png"), fr.rgb);
      write_png16(dir / "opacity" / (names[i] + ".png"), fr.opacity);
      if (model.has_visibility()) write_png16(dir / "visibility" / (names[i] + ".png"), fr.visibility);
      err << "render: " << names[i] << "\n";
    }
    manifest.set_config({{"checkpoint", checkpoint}, {"scene", scene}, {"split", split}, {"poses", poses},
                         {"n_coarse", sc.n_coarse}, {"n_fine", sc.n_fine}, {"threads", threads}});
    manifest.add_output(dir / "renders");
    manifest.set_result({{"frames", jobs.size()}});
    manifest.write(dir, 0);
    out << "rendered " << jobs.size() << " frames\n";
    return kExitOk;
  }
};

struct EvalCmd {
  Common common;
  SamplerFlags sampler;
  std::string checkpoint, scene, split = "val", splits;
  bool run_requested = false;

  void add(CLI::App& root) {
    auto* app = root.add_subcommand("eval", "Score a checkpoint on a split");
    common.add(app);
    sampler.add(app);
    app->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
    app->add_option("--scene", scene, "Scene directory")->required();
    app->add_option("--split", split, "val, easy, hard or train");
    app->add_option("--splits", splits, "Split JSON (default: regenerated from the checkpoint)");
    app->callback([this] { run_requested = true; });
  }

  int run(std::ostream& out, std::ostream& err) const {
    Manifest manifest("eval");
    if (split != "val" && split != "easy" && split != "hard" && split != "train") {
      throw InputError("unknown split '" + split + "'");
    }
    const ModelScene ms = load_pair(checkpoint, scene);
    const RelightModel<float> model = model_from_checkpoint(ms.ckpt);
    SamplingConfig sc{ms.ckpt.train.n_coarse, ms.ckpt.train.n_fine, false};
    if (sampler.coarse_opt->count()) sc.n_coarse = sampler.n_coarse;
    if (sampler.fine_opt->count()) sc.n_fine = sampler.n_fine;
    const SplitAssignment s = split_for(splits, ms.scene.view_count(), ms.scene.light_count(), ms.ckpt.split_seed,
                                        ms.ckpt.holdout);
    std::vector<FrameKey> keys;
    for (const FrameKey& k : s.frames(split))
      if (ms.scene.find(k.first, k.second)) keys.push_back(k);
    if (keys.empty()) throw InputError("split '" + split + "' has no frames in this scene");

    const bool have_ssim = ssim_available(ms.scene.frames.front().image);
    if (!have_ssim) {
      err << "warning: images are " << ms.scene.intrinsics.width << "x" << ms.scene.intrinsics.height
          << ", smaller than the 11x11 SSIM window; SSIM unavailable\n";
    }
    const fs::path dir = common.out;
    ensure_dir(dir / "renders");
    if (model.has_visibility()) ensure_dir(dir / "visibility");
    MetricReport report;
    report.split = split;
    for (const FrameKey& k : keys) {
      FrameRender fr = render_frame(model, ms.scene.intrinsics, ms.scene.cameras[k.first], ms.scene.lights[k.second],
                                    ms.scene.t_near, ms.scene.t_far, sc, common.threads);
      fr.rgb.quantize();
      const Image& gt = ms.scene.find(k.first, k.second)->image;
      FrameMetric fm{k.first, k.second, psnr(fr.rgb, gt), std::nullopt};
      if (have_ssim) fm.ssim = ssim(fr.rgb, gt);
      report.frames.push_back(fm);
      const std::string stem = frame_stem(k.first, k.second);
      write_png(dir / "renders" / (stem + ".png"), fr.rgb);
      if (model.has_visibility()) write_png16(dir / "visibility" / (stem + ".png"), fr.visibility);
      err << "eval: " << stem << " psnr " << capped_psnr(fm.psnr) << "\n";
    }
    report.finalize();
    write_json_file(dir / "metrics.json", to_json(report));
    write_metric_csv(dir / "metrics.csv", report);
    manifest.set_config({{"checkpoint", checkpoint}, {"scene", scene}, {"split", split}, {"splits", splits},
                         {"n_coarse", sc.n_coarse}, {"n_fine", sc.n_fine}, {"threads", common.threads}});
    for (const char* f : {"metrics.json", "metrics.csv", "renders"}) manifest.add_output(dir / f);
    if (model.has_visibility()) manifest.add_output(dir / "visibility");
    manifest.set_result(to_json(report)["mean_psnr"]);
    manifest.write(dir, 0);
    out << split << ": " << report.count() << " frames, mean PSNR " << report.mean_psnr;
    if (report.mean_ssim) out << ", mean SSIM " << *report.mean_ssim;
    out << "\n";
    return kExitOk;
  }
};

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Relightable radiance fields from one-light-at-a-time captures", "relight"};
  app.set_version_flag("--version", version_string());
  app.require_subcommand(1);
  SynthCmd synth;
  SplitsCmd splits;
  TrajectoryCmd trajectory;
  TrainCmd train_cmd;
  RenderCmd render;
  EvalCmd eval;
  synth.add(app);
  splits.add(app);
  trajectory.add(app);
  train_cmd.add(app);
  render.add(app);
  eval.add(app);

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  }
  try {
    if (synth.run_requested) return synth.run(out, err);
    if (splits.run_requested) return splits.run(out, err);
    if (trajectory.run_requested) return trajectory.run(out, err);
    if (train_cmd.run_requested) return train_cmd.run(out, err);
    if (render.run_requested) return render.run(out, err);
    if (eval.run_requested) return eval.run(out, err);
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace relight
