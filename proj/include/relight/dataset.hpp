// Copyright 2026 The Relight Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "relight/geometry.hpp"
#include "relight/image.hpp"

namespace relight {

/// (view index n, light index m), both 0-based.
using FrameKey = std::pair<int, int>;

struct Frame {
  int view = 0;
  int light = 0;
  std::string path;  // relative to the scene directory
  Image image;
};

/// A one-light-at-a-time capture: N camera poses, M light poses and a
/// possibly sparse grid of frames I[n, m].
struct OlatScene {
  std::string name;
  PinholeCamera intrinsics;
  std::vector<Pose6D> cameras;
  std::vector<Pose6D> lights;
  std::vector<Frame> frames;
  double t_near = 0.1;
  double t_far = 6.0;
  SceneBounds bounds;

  int view_count() const { return static_cast<int>(cameras.size()); }
  int light_count() const { return static_cast<int>(lights.size()); }
  std::size_t slot_count() const { return cameras.size() * lights.size(); }

  /// Frame at (n, m), or null if that slot is empty.
  const Frame* find(int view, int light) const;
  /// Throws InputError naming the offending entry.
  void validate() const;
};

/// Writes `scene.json` and one PNG per frame. Frames without a path get
/// `images/v{n}_l{m}.png`.
void save_scene(const std::filesystem::path& dir, const OlatScene& scene);

/// Reads and validates a scene directory. With `load_images` false, frame
/// slots are listed but pixels are not read.
OlatScene load_scene(const std::filesystem::path& dir, bool load_images = true);

nlohmann::json pose_to_json(const Pose6D& p);
Pose6D pose_from_json(const nlohmann::json& j, const std::string& what);

// ---------------------------------------------------------------------------
// Train / val / easy / hard partition.

struct SplitAssignment {
  int views = 0;
  int lights = 0;
  int holdout = 3;
  std::uint64_t seed = 0;
  std::vector<int> val_views;
  std::vector<int> test_views;
  std::vector<int> test_lights;
  /// Light triple for each entry of val_views, same order.
  std::vector<std::vector<int>> val_lights;

  std::vector<FrameKey> train;
  std::vector<FrameKey> val;
  std::vector<FrameKey> easy;
  std::vector<FrameKey> hard;
  std::vector<FrameKey> unused;

  /// "train", "val", "easy", "hard" or "unused".
  const std::vector<FrameKey>& frames(const std::string& split) const;
};

/// Draws held-out validation views, test views and test lights (each
/// `holdout` wide) and derives the five frame sets. Throws InputError unless
/// N > 2 * holdout and M > holdout.
SplitAssignment generate_splits(int views, int lights, std::uint64_t seed, int holdout = 3);

nlohmann::json splits_to_json(const SplitAssignment& s);
SplitAssignment splits_from_json(const nlohmann::json& j);

}  // namespace relight
