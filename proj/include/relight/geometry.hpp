// Copyright 2026 The Relight Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <optional>
#include <span>
#include <vector>

namespace relight {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

/// Rigid transform x -> R x + t. Camera and light poses map their local
/// frame into world coordinates.
class Pose6D {
 public:
  Pose6D() : rotation_(Mat3::Identity()), translation_(Vec3::Zero()) {}

  /// Throws InputError unless `rotation` is orthonormal with det +1.
  Pose6D(const Mat3& rotation, const Vec3& translation);

  static Pose6D identity() { return {}; }
  static Pose6D from_translation(const Vec3& t) { return Pose6D(Mat3::Identity(), t); }
  /// Parses a 4x4 homogeneous matrix; the bottom row must be (0,0,0,1).
  static Pose6D from_matrix(const Mat4& m);

  /// Pose at `eye` whose +z axis points at `target`, +x to the right and +y
  /// down in the image, with `up` as the world up hint.
  static Pose6D look_at(const Vec3& eye, const Vec3& target, const Vec3& up = Vec3::UnitZ());

  const Mat3& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }
  Mat4 matrix() const;

  /// Row-major R followed by t: the 12 numbers fed to the light-pose code.
  std::array<double, 12> flattened() const;

  Pose6D inverse() const;
  Pose6D operator*(const Pose6D& rhs) const;

 private:
  Mat3 rotation_;
  Vec3 translation_;
};

inline Pose6D compose(const Pose6D& a, const Pose6D& b) { return a * b; }
inline Pose6D invert(const Pose6D& p) { return p.inverse(); }

struct PinholeCamera {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.5;
  double cy = 0.5;
  int width = 1;
  int height = 1;

  /// Throws InputError when the invariants on focal length and principal
  /// point do not hold.
  void validate() const;

  /// Camera with square pixels, centered principal point, and the given
  /// horizontal field of view in radians.
  static PinholeCamera from_fov(int width, int height, double fov_x);
};

struct Ray {
  Vec3 origin = Vec3::Zero();
  Vec3 direction = Vec3::UnitZ();
  double t_near = 0.0;
  double t_far = 1.0;

  Vec3 at(double t) const { return origin + t * direction; }
};

/// Axis-aligned cube that maps world positions into the unit cube fed to the
/// hash grid.
struct SceneBounds {
  Vec3 center = Vec3::Zero();
  double radius = 1.0;

  Vec3 normalize(const Vec3& x) const { return (x - center) / (2.0 * radius) + Vec3::Constant(0.5); }
  Vec3 min() const { return center - Vec3::Constant(radius); }
  Vec3 max() const { return center + Vec3::Constant(radius); }

  /// Parametric interval where the ray is inside the cube, if any.
  std::optional<std::pair<double, double>> intersect(const Ray& ray) const;
};

/// A point on the image plane in continuous pixel coordinates. Pixel (i, j)
/// covers [i, i+1) x [j, j+1), so its center is (i + 0.5, j + 0.5).
struct PixelCoord {
  double u = 0.0;
  double v = 0.0;
};

/// One world-space ray per pixel. Throws InputError for a pixel outside
/// [0, width] x [0, height].
std::vector<Ray> camera_rays(const PinholeCamera& camera, const Pose6D& pose,
                             std::span<const PixelCoord> pixels, double t_near = 0.1,
                             double t_far = 6.0);

/// Rays through the centers of every pixel, row-major from the top-left.
std::vector<Ray> image_rays(const PinholeCamera& camera, const Pose6D& pose, double t_near,
                            double t_far);

/// Unit vector from `x` toward the light position. Throws DegenerateError
/// when the two points coincide.
Vec3 relative_light_dir(const Vec3& light_t, const Vec3& x);

inline Vec3 transform_point(const Pose6D& pose, const Vec3& x) {
  return pose.rotation() * x + pose.translation();
}

}  // namespace relight
