// Copyright 2026 The Relight Authors
// SPDX-License-Identifier: Apache-2.0

#include "relight/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "relight/errors.hpp"

namespace relight {

namespace fs = std::filesystem;
using nlohmann::json;

const Frame* OlatScene::find(int view, int light) const {
  for (const Frame& f : frames)
    if (f.view == view && f.light == light) return &f;
  return nullptr;
}

void OlatScene::validate() const {
  intrinsics.validate();
  if (cameras.empty()) throw InputError("scene '" + name + "' has no camera poses");
  if (lights.empty()) throw InputError("scene '" + name + "' has no light poses");
  if (!(t_near >= 0.0 && t_near < t_far)) throw InputError("scene '" + name + "': need 0 <= near < far");
  if (!(bounds.radius > 0.0)) throw InputError("scene '" + name + "': bounds radius must be positive");
  if (frames.size() > slot_count()) throw InputError("scene '" + name + "' has more frames than slots");
  std::set<FrameKey> seen;
  for (const Frame& f : frames) {
    const std::string where = "frame (" + std::to_string(f.view) + ", " + std::to_string(f.light) + ")";
    if (f.view < 0 || f.view >= view_count()) throw InputError(where + ": view index out of range");
    if (f.light < 0 || f.light >= light_count()) throw InputError(where + ": light index out of range");
    if (!seen.insert({f.view, f.light}).second) throw InputError(where + ": duplicate frame");
    if (!f.image.data.empty() &&
        (f.image.width != intrinsics.width || f.image.height != intrinsics.height)) {
      throw InputError(where + " image '" + f.path + "' is " + std::to_string(f.image.width) + "x" +
                       std::to_string(f.image.height) + ", expected " +
                       std::to_string(intrinsics.width) + "x" + std::to_string(intrinsics.height));
    }
  }
}

json pose_to_json(const Pose6D& p) {
  const Mat4 m = p.matrix();
  json rows = json::array();
  for (int r = 0; r < 4; ++r) rows.push_back({m(r, 0), m(r, 1), m(r, 2), m(r, 3)});
  return rows;
}

Pose6D pose_from_json(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 4) throw InputError(what + ": pose must be a 4x4 matrix");
  Mat4 m;
  for (int r = 0; r < 4; ++r) {
    if (!j[r].is_array() || j[r].size() != 4) throw InputError(what + ": pose must be a 4x4 matrix");
    for (int c = 0; c < 4; ++c) {
      if (!j[r][c].is_number()) throw InputError(what + ": pose entries must be numbers");
      m(r, c) = j[r][c].get<double>();
    }
  }
  try {
    return Pose6D::from_matrix(m);
  } catch (const InputError& e) {
    throw InputError(what + ": " + e.what());
  }
}

void save_scene(const fs::path& dir, const OlatScene& scene) {
  scene.validate();
  fs::create_directories(dir / "images");
  json j;
  j["name"] = scene.name;
  j["intrinsics"] = {{"fx", scene.intrinsics.fx},       {"fy", scene.intrinsics.fy},
                     {"cx", scene.intrinsics.cx},       {"cy", scene.intrinsics.cy},
                     {"width", scene.intrinsics.width}, {"height", scene.intrinsics.height}};
  j["near"] = scene.t_near;
  j["far"] = scene.t_far;
  j["bounds"] = {{"center", {scene.bounds.center.x(), scene.bounds.center.y(), scene.bounds.center.z()}},
                 {"radius", scene.bounds.radius}};
  j["camera_poses"] = json::array();
  for (const Pose6D& p : scene.cameras) j["camera_poses"].push_back(pose_to_json(p));
  j["light_poses"] = json::array();
  for (const Pose6D& p : scene.lights) j["light_poses"].push_back(pose_to_json(p));
  j["frames"] = json::array();
  for (const Frame& f : scene.frames) {
    std::string rel = f.path;
    if (rel.empty()) {
      std::ostringstream name;
      name << "images/v" << f.view << "_l" << f.light << ".png";
      rel = name.str();
    }
    if (!f.image.data.empty()) write_png(dir / rel, f.image);
    j["frames"].push_back({{"view_index", f.view}, {"light_index", f.light}, {"image", rel}});
  }
  std::ofstream out(dir / "scene.json");
  if (!out) throw InputError("cannot write '" + (dir / "scene.json").string() + "'");
  out << j.dump(1) << "\n";
}

namespace {

template <typename V>
V require(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw InputError(where + ": missing field '" + key + "'");
  try {
    return j.at(key).get<V>();
  } catch (const json::exception&) {
    throw InputError(where + ": field '" + key + "' has the wrong type");
  }
}

}  // namespace

OlatScene load_scene(const fs::path& dir, bool load_images) {
  const fs::path manifest = dir / "scene.json";
  if (!fs::exists(manifest)) throw InputError("no scene manifest at '" + manifest.string() + "'");
  json j;
  {
    std::ifstream in(manifest);
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw InputError("malformed scene manifest '" + manifest.string() + "': " + e.what());
    }
  }
  if (!j.is_object()) throw InputError("scene manifest must be a JSON object");
  const std::string where = "scene.json";
  OlatScene s;
  s.name = j.value("name", dir.filename().string());
  const json intr = require<json>(j, "intrinsics", where);
  s.intrinsics.fx = require<double>(intr, "fx", where + " intrinsics");
  s.intrinsics.fy = require<double>(intr, "fy", where + " intrinsics");
  s.intrinsics.cx = require<double>(intr, "cx", where + " intrinsics");
  s.intrinsics.cy = require<double>(intr, "cy", where + " intrinsics");
  s.intrinsics.width = require<int>(intr, "width", where + " intrinsics");
  s.intrinsics.height = require<int>(intr, "height", where + " intrinsics");
  s.t_near = j.value("near", 0.1);
  s.t_far = j.value("far", 6.0);
  if (j.contains("bounds")) {
    const json b = j["bounds"];
    const auto c = require<std::vector<double>>(b, "center", where + " bounds");
    if (c.size() != 3) throw InputError(where + ": bounds center needs 3 components");
    s.bounds.center = Vec3(c[0], c[1], c[2]);
    s.bounds.radius = require<double>(b, "radius", where + " bounds");
  } else {
    s.bounds.radius = 0.5 * s.t_far;
  }

  const json cams = require<json>(j, "camera_poses", where);
  const json lights = require<json>(j, "light_poses", where);
  if (!cams.is_array() || !lights.is_array()) throw InputError(where + ": pose lists must be arrays");
  for (std::size_t i = 0; i < cams.size(); ++i) s.cameras.push_back(pose_from_json(cams[i], "camera_poses[" + std::to_string(i) + "]"));
  for (std::size_t i = 0; i < lights.size(); ++i) s.lights.push_back(pose_from_json(lights[i], "light_poses[" + std::to_string(i) + "]"));

  const json frames = j.value("frames", json::array());
  if (!frames.is_array()) throw InputError(where + ": 'frames' must be an array");
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const std::string fw = "frames[" + std::to_string(i) + "]";
    Frame f;
    f.view = require<int>(frames[i], "view_index", fw);
    f.light = require<int>(frames[i], "light_index", fw);
    f.path = require<std::string>(frames[i], "image", fw);
    const fs::path image_path = dir / f.path;
    if (!fs::exists(image_path)) throw InputError(fw + ": image file '" + image_path.string() + "' not found");
    if (load_images) f.image = read_png(image_path);
    s.frames.push_back(std::move(f));
  }
  s.validate();
  return s;
}

// ---------------------------------------------------------------------------

const std::vector<FrameKey>& SplitAssignment::frames(const std::string& split) const {
  if (split == "train") return train;
  if (split == "val") return val;
  if (split == "easy") return easy;
  if (split == "hard") return hard;
  if (split == "unused") return unused;
  throw InputError("unknown split '" + split + "'");
}

SplitAssignment generate_splits(int views, int lights, std::uint64_t seed, int holdout) {
  if (holdout < 1) throw InputError("splits: holdout must be >= 1");
  if (views <= 2 * holdout) {
    throw InputError("splits: need more than " + std::to_string(2 * holdout) + " views, got " + std::to_string(views));
  }
  if (lights <= holdout) {
    throw InputError("splits: need more than " + std::to_string(holdout) + " lights, got " + std::to_string(lights));
  }
  SplitAssignment s;
  s.views = views;
  s.lights = lights;
  s.holdout = holdout;
  s.seed = seed;
  std::mt19937_64 rng(seed);

  std::vector<int> view_perm(views);
  std::iota(view_perm.begin(), view_perm.end(), 0);
  std::shuffle(view_perm.begin(), view_perm.end(), rng);
  s.val_views.assign(view_perm.begin(), view_perm.begin() + holdout);
  s.test_views.assign(view_perm.begin() + holdout, view_perm.begin() + 2 * holdout);

  std::vector<int> light_perm(lights);
  std::iota(light_perm.begin(), light_perm.end(), 0);
  std::shuffle(light_perm.begin(), light_perm.end(), rng);
  s.test_lights.assign(light_perm.begin(), light_perm.begin() + holdout);
  std::vector<int> seen_lights(light_perm.begin() + holdout, light_perm.end());
  std::sort(seen_lights.begin(), seen_lights.end());

  std::sort(s.val_views.begin(), s.val_views.end());
  std::sort(s.test_views.begin(), s.test_views.end());
  std::sort(s.test_lights.begin(), s.test_lights.end());
  for (std::size_t i = 0; i < s.val_views.size(); ++i) {
    std::vector<int> pool = seen_lights;
    std::shuffle(pool.begin(), pool.end(), rng);
    pool.resize(holdout);
    std::sort(pool.begin(), pool.end());
    s.val_lights.push_back(pool);
  }

  auto contains = [](const std::vector<int>& v, int x) { return std::find(v.begin(), v.end(), x) != v.end(); };
  for (int n = 0; n < views; ++n) {
    const bool is_val = contains(s.val_views, n);
    const bool is_test = contains(s.test_views, n);
    const std::vector<int>* triple = nullptr;
    if (is_val) {
      const auto it = std::find(s.val_views.begin(), s.val_views.end(), n);
      triple = &s.val_lights[it - s.val_views.begin()];
    }
    for (int m = 0; m < lights; ++m) {
      const bool test_light = contains(s.test_lights, m);
      const FrameKey key{n, m};
      if (is_test) {
        (test_light ? s.hard : s.easy).push_back(key);
      } else if (is_val) {
        (contains(*triple, m) ? s.val : s.unused).push_back(key);
      } else {
        (test_light ? s.unused : s.train).push_back(key);
      }
    }
  }
  return s;
}

namespace {

json keys_to_json(const std::vector<FrameKey>& keys) {
  json a = json::array();
  for (const auto& [n, m] : keys) a.push_back({n, m});
  return a;
}

std::vector<FrameKey> keys_from_json(const json& j) {
  std::vector<FrameKey> out;
  for (const auto& e : j) out.emplace_back(e.at(0).get<int>(), e.at(1).get<int>());
  return out;
}

}  // namespace

json splits_to_json(const SplitAssignment& s) {
  json j;
  j["views"] = s.views;
  j["lights"] = s.lights;
  j["holdout"] = s.holdout;
  j["seed"] = s.seed;
  j["val_views"] = s.val_views;
  j["test_views"] = s.test_views;
  j["test_lights"] = s.test_lights;
  j["val_lights"] = s.val_lights;
  j["frames"] = {{"train", keys_to_json(s.train)}, {"val", keys_to_json(s.val)},
                 {"easy", keys_to_json(s.easy)},   {"hard", keys_to_json(s.hard)},
                 {"unused", keys_to_json(s.unused)}};
  j["counts"] = {{"train", s.train.size()}, {"val", s.val.size()}, {"easy", s.easy.size()},
                 {"hard", s.hard.size()},   {"unused", s.unused.size()}};
  return j;
}

SplitAssignment splits_from_json(const json& j) {
  try {
    SplitAssignment s;
    s.views = j.at("views").get<int>();
    s.lights = j.at("lights").get<int>();
    s.holdout = j.at("holdout").get<int>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.val_views = j.at("val_views").get<std::vector<int>>();
    s.test_views = j.at("test_views").get<std::vector<int>>();
    s.test_lights = j.at("test_lights").get<std::vector<int>>();
    s.val_lights = j.at("val_lights").get<std::vector<std::vector<int>>>();
    const json& f = j.at("frames");
    s.train = keys_from_json(f.at("train"));
    s.val = keys_from_json(f.at("val"));
    s.easy = keys_from_json(f.at("easy"));
    s.hard = keys_from_json(f.at("hard"));
    s.unused = keys_from_json(f.at("unused"));
    return s;
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed split file: ") + e.what());
  }
}

}  // namespace relight
