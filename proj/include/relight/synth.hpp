// Copyright 2026 The Relight Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "relight/dataset.hpp"
#include "relight/trajectory.hpp"

namespace relight {

struct Material {
  Vec3 albedo = Vec3::Constant(0.5);
  double specular_strength = 0.0;
  double specular_exponent = 32.0;
};

struct Texture {
  enum class Kind { kSolid, kChecker, kStripes };
  Kind kind = Kind::kSolid;
  Vec3 a = Vec3::Constant(0.5);
  Vec3 b = Vec3::Constant(0.5);
  double scale = 0.25;  // scene units per tile / stripe

  Vec3 albedo(double s, double t) const;
};

struct SpherePrimitive {
  std::string name;
  Vec3 center = Vec3::Zero();
  double radius = 0.5;
  Material material;
};

struct BoxPrimitive {
  std::string name;
  Vec3 lo = Vec3::Constant(-0.5);
  Vec3 hi = Vec3::Constant(0.5);
  Material material;
};

struct MeshPrimitive {
  static constexpr std::size_t kMaxTriangles = 1000;
  std::string name;
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> triangles;
  Material material;
};

/// Parallelogram origin + s * u + t * v for s, t in [0, 1], shaded with a
/// texture in scene units along u and v. Two-sided.
struct QuadPrimitive {
  std::string name;
  Vec3 origin = Vec3::Zero();
  Vec3 u = Vec3::UnitX();
  Vec3 v = Vec3::UnitY();
  Texture texture;
  double specular_strength = 0.0;
  double specular_exponent = 32.0;
};

/// Direct-lighting scene description for the ground-truth renderer, plus
/// the capture layout (camera / light regions and intrinsics).
struct SceneSpec {
  std::string name = "scene";
  std::vector<SpherePrimitive> spheres;
  std::vector<BoxPrimitive> boxes;
  std::vector<MeshPrimitive> meshes;
  std::vector<QuadPrimitive> quads;
  double ambient = 0.05;
  double light_intensity = 1.0;

  SceneBounds bounds;
  double t_near = 0.1;
  double t_far = 6.0;
  SphericalRegion camera_region;
  SphericalRegion light_region;
  Vec3 target = Vec3::Zero();
  double fov_x = 0.8;  // radians

  /// Throws InputError when materials or geometry are out of range.
  void validate() const;
};

/// "sphere-shadow": a glossy sphere on a checkered floor in front of a
/// striped wall, lit from the upper front dome.
SceneSpec scene_preset(const std::string& name);
SceneSpec scene_spec_from_json(const nlohmann::json& j);
nlohmann::json scene_spec_to_json(const SceneSpec& spec);

enum class SurfaceKind { kNone, kSphere, kBox, kMesh, kQuad };

struct SurfaceHit {
  SurfaceKind kind = SurfaceKind::kNone;
  int index = -1;
  double t = 0.0;
  Vec3 point = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();  // facing the incoming ray
  Vec3 albedo = Vec3::Zero();
  double specular_strength = 0.0;
  double specular_exponent = 32.0;

  bool hit() const { return kind != SurfaceKind::kNone; }
};

/// What the oracle saw at a pixel: the first surface, whether its shadow ray
/// was blocked, and the shaded color.
struct PixelTrace {
  SurfaceHit surface;
  bool shadowed = false;
  Vec3 color = Vec3::Zero();
};

/// Nearest intersection along `ray` within [t_near, t_far].
SurfaceHit intersect_scene(const SceneSpec& spec, const Ray& ray);

/// Ambient plus, when the point sees the light, Lambert and Blinn-Phong
/// terms. Not clamped.
PixelTrace trace_ray(const SceneSpec& spec, const Ray& ray, const Vec3& light_position);

/// Per-pixel traces through pixel centers, row-major.
std::vector<PixelTrace> trace_image(const SceneSpec& spec, const PinholeCamera& camera, const Pose6D& pose,
                                    const Vec3& light_position);

/// Renders every (camera, light) pair. Images are clamped to [0,1] and
/// quantized to 8 bits. With samples_per_pixel > 1 the sub-pixel positions
/// are jittered from `seed`.
OlatScene synth_olat(const SceneSpec& spec, const std::vector<Pose6D>& cameras,
                     const std::vector<Pose6D>& lights, const PinholeCamera& intrinsics,
                     int samples_per_pixel = 1, std::uint64_t seed = 0, int threads = 1);

/// Camera and light waypoints from the spec's regions.
std::vector<Pose6D> camera_waypoints(const SceneSpec& spec, int count);
std::vector<Pose6D> light_waypoints(const SceneSpec& spec, int count);

}  // namespace relight
