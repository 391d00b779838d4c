// Copyright 2026 The Relight Authors
// SPDX-License-Identifier: Apache-2.0

#include "relight/geometry.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "relight/errors.hpp"

namespace relight {

namespace {
constexpr double kOrthoTolerance = 1e-9;
}

Pose6D::Pose6D(const Mat3& rotation, const Vec3& translation)
    : rotation_(rotation), translation_(translation) {
  const double ortho_err = (rotation * rotation.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff();
  if (!std::isfinite(ortho_err) || ortho_err > kOrthoTolerance) {
    throw InputError("pose rotation is not orthonormal (max deviation " +
                     std::to_string(ortho_err) + ")");
  }
  if (std::abs(rotation.determinant() - 1.0) > kOrthoTolerance) {
    throw InputError("pose rotation has determinant " + std::to_string(rotation.determinant()));
  }
  if (!translation.allFinite()) throw InputError("pose translation is not finite");
}

Pose6D Pose6D::from_matrix(const Mat4& m) {
  const Eigen::RowVector4d bottom = m.row(3);
  if ((bottom - Eigen::RowVector4d(0, 0, 0, 1)).cwiseAbs().maxCoeff() > kOrthoTolerance) {
    throw InputError("pose matrix bottom row must be (0, 0, 0, 1)");
  }
  return Pose6D(m.topLeftCorner<3, 3>(), m.topRightCorner<3, 1>());
}

Pose6D Pose6D::look_at(const Vec3& eye, const Vec3& target, const Vec3& up) {
  Vec3 forward = target - eye;
  if (forward.norm() < 1e-12) throw DegenerateError("look_at: eye coincides with target");
  forward.normalize();
  Vec3 right = forward.cross(up);
  if (right.norm() < 1e-9) {
    // Looking along the up hint; any perpendicular works.
    right = forward.cross(std::abs(forward.y()) < 0.9 ? Vec3::UnitY() : Vec3::UnitX());
  }
  right.normalize();
  const Vec3 down = forward.cross(right);
  Mat3 r;
  r.col(0) = right;
  r.col(1) = down;
  r.col(2) = forward;
  return Pose6D(r, eye);
}

Mat4 Pose6D::matrix() const {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = rotation_;
  m.topRightCorner<3, 1>() = translation_;
  return m;
}

std::array<double, 12> Pose6D::flattened() const {
  std::array<double, 12> out{};
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) out[r * 3 + c] = rotation_(r, c);
  for (int i = 0; i < 3; ++i) out[9 + i] = translation_[i];
  return out;
}

Pose6D Pose6D::inverse() const {
  Pose6D p;
  p.rotation_ = rotation_.transpose();
  p.translation_ = -(p.rotation_ * translation_);
  return p;
}

Pose6D Pose6D::operator*(const Pose6D& rhs) const {
  Pose6D p;
  p.rotation_ = rotation_ * rhs.rotation_;
  p.translation_ = rotation_ * rhs.translation_ + translation_;
  return p;
}

void PinholeCamera::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw InputError("camera focal lengths must be positive");
  if (width < 1 || height < 1) throw InputError("camera image size must be positive");
  if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height)) {
    throw InputError("camera principal point outside the image");
  }
}

PinholeCamera PinholeCamera::from_fov(int width, int height, double fov_x) {
  PinholeCamera cam;
  cam.width = width;
  cam.height = height;
  cam.fx = 0.5 * width / std::tan(0.5 * fov_x);
  cam.fy = cam.fx;
  cam.cx = 0.5 * width;
  cam.cy = 0.5 * height;
  cam.validate();
  return cam;
}

std::optional<std::pair<double, double>> SceneBounds::intersect(const Ray& ray) const {
  double t0 = -std::numeric_limits<double>::infinity();
  double t1 = std::numeric_limits<double>::infinity();
  const Vec3 lo = min();
  const Vec3 hi = max();
  for (int a = 0; a < 3; ++a) {
    const double d = ray.direction[a];
    const double o = ray.origin[a];
    if (std::abs(d) < 1e-15) {
      if (o < lo[a] || o > hi[a]) return std::nullopt;
      continue;
    }
    double ta = (lo[a] - o) / d;
    double tb = (hi[a] - o) / d;
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  if (t0 >= t1) return std::nullopt;
  return std::make_pair(t0, t1);
}

std::vector<Ray> camera_rays(const PinholeCamera& camera, const Pose6D& pose,
                             std::span<const PixelCoord> pixels, double t_near, double t_far) {
  camera.validate();
  if (!(t_near >= 0.0 && t_near < t_far)) throw InputError("camera_rays: need 0 <= t_near < t_far");
  std::vector<Ray> rays;
  rays.reserve(pixels.size());
  for (const PixelCoord& px : pixels) {
    if (!(px.u >= 0.0 && px.u <= camera.width && px.v >= 0.0 && px.v <= camera.height)) {
      throw InputError("camera_rays: pixel (" + std::to_string(px.u) + ", " +
                       std::to_string(px.v) + ") outside the image");
    }
    const Vec3 local((px.u - camera.cx) / camera.fx, (px.v - camera.cy) / camera.fy, 1.0);
    Ray ray;
    ray.origin = pose.translation();
    ray.direction = (pose.rotation() * local).normalized();
    ray.t_near = t_near;
    ray.t_far = t_far;
    rays.push_back(ray);
  }
  return rays;
}

std::vector<Ray> image_rays(const PinholeCamera& camera, const Pose6D& pose, double t_near,
                            double t_far) {
  std::vector<PixelCoord> pixels;
  pixels.reserve(static_cast<size_t>(camera.width) * camera.height);
  for (int j = 0; j < camera.height; ++j)
    for (int i = 0; i < camera.width; ++i) pixels.push_back({i + 0.5, j + 0.5});
  return camera_rays(camera, pose, pixels, t_near, t_far);
}

Vec3 relative_light_dir(const Vec3& light_t, const Vec3& x) {
  const Vec3 diff = light_t - x;
  const double n = diff.norm();
  if (!(n >= 1e-12)) throw DegenerateError("relative_light_dir: light coincides with the query point");
  return diff / n;
}

}  // namespace relight
