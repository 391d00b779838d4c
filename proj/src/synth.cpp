// Copyright 2026 The Relight Authors
// SPDX-License-Identifier: Apache-2.0

#include "relight/synth.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "relight/errors.hpp"
#include "relight/parallel.hpp"

namespace relight {

using nlohmann::json;

namespace {

constexpr double kEps = 1e-7;
constexpr double kDeg = std::numbers::pi / 180.0;

bool in_unit(const Vec3& v) { return (v.array() >= 0.0).all() && (v.array() <= 1.0).all(); }

void check_material(const Material& m, const std::string& what) {
  if (!in_unit(m.albedo)) throw InputError(what + ": albedo must lie in [0,1]");
  if (m.specular_strength < 0.0 || m.specular_exponent <= 0.0) {
    throw InputError(what + ": specular parameters out of range");
  }
}

bool hit_sphere(const SpherePrimitive& s, const Ray& ray, double t_max, double& t_out) {
  const Vec3 oc = ray.origin - s.center;
  const double b = oc.dot(ray.direction);
  const double c = oc.squaredNorm() - s.radius * s.radius;
  const double disc = b * b - c;
  if (disc < 0.0) return false;
  const double sq = std::sqrt(disc);
  for (double t : {-b - sq, -b + sq}) {
    if (t > ray.t_near && t < t_max) {
      t_out = t;
      return true;
    }
  }
  return false;
}

bool hit_box(const BoxPrimitive& box, const Ray& ray, double t_max, double& t_out, Vec3& normal) {
  double t0 = ray.t_near, t1 = t_max;
  int axis0 = -1, axis1 = -1;
  for (int a = 0; a < 3; ++a) {
    const double d = ray.direction[a];
    if (std::abs(d) < 1e-15) {
      if (ray.origin[a] < box.lo[a] || ray.origin[a] > box.hi[a]) return false;
      continue;
    }
    double ta = (box.lo[a] - ray.origin[a]) / d;
    double tb = (box.hi[a] - ray.origin[a]) / d;
    if (ta > tb) std::swap(ta, tb);
    if (ta > t0) { t0 = ta; axis0 = a; }
    if (tb < t1) { t1 = tb; axis1 = a; }
    if (t0 > t1) return false;
  }
  // Entering hit, or exit hit when the origin is inside.
  const bool entering = axis0 >= 0 && t0 > ray.t_near;
  const int axis = entering ? axis0 : axis1;
  const double t = entering ? t0 : t1;
  if (axis < 0 || !(t > ray.t_near && t < t_max)) return false;
  t_out = t;
  normal = Vec3::Zero();
  normal[axis] = 1.0;
  return true;
}

bool hit_triangle(const Vec3& a, const Vec3& b, const Vec3& c, const Ray& ray, double t_max, double& t_out) {
  const Vec3 e1 = b - a, e2 = c - a;
  const Vec3 p = ray.direction.cross(e2);
  const double det = e1.dot(p);
  if (std::abs(det) < 1e-14) return false;
  const double inv = 1.0 / det;
  const Vec3 s = ray.origin - a;
  const double u = s.dot(p) * inv;
  if (u < 0.0 || u > 1.0) return false;
  const Vec3 q = s.cross(e1);
  const double v = ray.direction.dot(q) * inv;
  if (v < 0.0 || u + v > 1.0) return false;
  const double t = e2.dot(q) * inv;
  if (!(t > ray.t_near && t < t_max)) return false;
  t_out = t;
  return true;
}

bool hit_quad(const QuadPrimitive& q, const Ray& ray, double t_max, double& t_out, double& s_out, double& t_param) {
  const Vec3 n = q.u.cross(q.v);
  const double denom = n.dot(ray.direction);
  if (std::abs(denom) < 1e-14) return false;
  const double t = n.dot(q.origin - ray.origin) / denom;
  if (!(t > ray.t_near && t < t_max)) return false;
  const Vec3 rel = ray.at(t) - q.origin;
  // Solve rel = s u + t v in the quad's plane.
  const double uu = q.u.dot(q.u), uv = q.u.dot(q.v), vv = q.v.dot(q.v);
  const double ru = rel.dot(q.u), rv = rel.dot(q.v);
  const double det = uu * vv - uv * uv;
  const double s = (ru * vv - rv * uv) / det;
  const double w = (rv * uu - ru * uv) / det;
  if (s < 0.0 || s > 1.0 || w < 0.0 || w > 1.0) return false;
  t_out = t;
  s_out = s;
  t_param = w;
  return true;
}

Vec3 arr3(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 3) throw InputError(what + " must be a 3-vector");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

json vec_json(const Vec3& v) { return {v.x(), v.y(), v.z()}; }

Material material_from_json(const json& j) {
  Material m;
  if (j.contains("albedo")) m.albedo = arr3(j["albedo"], "albedo");
  m.specular_strength = j.value("specular", 0.0);
  m.specular_exponent = j.value("shininess", 32.0);
  return m;
}

json material_json(const Material& m) {
  return {{"albedo", vec_json(m.albedo)}, {"specular", m.specular_strength}, {"shininess", m.specular_exponent}};
}

SphericalRegion region_from_json(const json& j) {
  SphericalRegion r;
  r.theta_min = j.at("theta_min_deg").get<double>() * kDeg;
  r.theta_max = j.at("theta_max_deg").get<double>() * kDeg;
  r.phi_min = j.at("phi_min_deg").get<double>() * kDeg;
  r.phi_max = j.at("phi_max_deg").get<double>() * kDeg;
  r.radius = j.at("radius").get<double>();
  if (j.contains("center")) r.center = arr3(j["center"], "region center");
  return r;
}

json region_json(const SphericalRegion& r) {
  return {{"theta_min_deg", r.theta_min / kDeg}, {"theta_max_deg", r.theta_max / kDeg},
          {"phi_min_deg", r.phi_min / kDeg},     {"phi_max_deg", r.phi_max / kDeg},
          {"radius", r.radius},                  {"center", vec_json(r.center)}};
}

}  // namespace

Vec3 Texture::albedo(double s, double t) const {
  switch (kind) {
    case Kind::kSolid: return a;
    case Kind::kChecker: {
      const long i = static_cast<long>(std::floor(s / scale));
      const long j = static_cast<long>(std::floor(t / scale));
      return ((i + j) & 1) ? b : a;
    }
    case Kind::kStripes: {
      const long i = static_cast<long>(std::floor(s / scale));
      return (i & 1) ? b : a;
    }
  }
  return a;
}

void SceneSpec::validate() const {
  if (!(ambient >= 0.0 && ambient <= 1.0)) throw InputError("scene spec: ambient must lie in [0,1]");
  if (!(light_intensity >= 0.0)) throw InputError("scene spec: light intensity must be >= 0");
  if (!(t_near >= 0.0 && t_near < t_far)) throw InputError("scene spec: need 0 <= near < far");
  if (!(bounds.radius > 0.0)) throw InputError("scene spec: bounds radius must be positive");
  if (!(fov_x > 0.0 && fov_x < std::numbers::pi)) throw InputError("scene spec: field of view out of range");
  for (const auto& s : spheres) {
    check_material(s.material, "sphere '" + s.name + "'");
    if (!(s.radius > 0.0)) throw InputError("sphere '" + s.name + "': radius must be positive");
  }
  for (const auto& b : boxes) {
    check_material(b.material, "box '" + b.name + "'");
    if (!((b.hi - b.lo).array() > 0.0).all()) throw InputError("box '" + b.name + "': empty extent");
  }
  for (const auto& m : meshes) {
    check_material(m.material, "mesh '" + m.name + "'");
    if (m.triangles.size() > MeshPrimitive::kMaxTriangles) throw InputError("mesh '" + m.name + "': more than 1000 triangles");
    for (const auto& tri : m.triangles)
      for (int idx : tri)
        if (idx < 0 || idx >= static_cast<int>(m.vertices.size())) throw InputError("mesh '" + m.name + "': vertex index out of range");
  }
  for (const auto& q : quads) {
    if (!in_unit(q.texture.a) || !in_unit(q.texture.b)) throw InputError("quad '" + q.name + "': albedo must lie in [0,1]");
    if (q.u.cross(q.v).norm() < 1e-12) throw InputError("quad '" + q.name + "': degenerate edges");
    if (!(q.texture.scale > 0.0)) throw InputError("quad '" + q.name + "': texture scale must be positive");
  }
  camera_region.validate();
  light_region.validate();
}

SceneSpec scene_preset(const std::string& name) {
  if (name != "sphere-shadow") throw InputError("unknown scene preset '" + name + "'");
  SceneSpec s;
  s.name = name;
  SpherePrimitive ball;
  ball.name = "ball";
  ball.center = Vec3(0.0, 0.15, 0.4);
  ball.radius = 0.4;
  ball.material.albedo = Vec3(0.85, 0.25, 0.2);
  ball.material.specular_strength = 0.25;
  ball.material.specular_exponent = 24.0;
  s.spheres.push_back(ball);

  QuadPrimitive ground;
  ground.name = "ground";
  ground.origin = Vec3(-1.4, -1.2, 0.0);
  ground.u = Vec3(2.8, 0.0, 0.0);
  ground.v = Vec3(0.0, 2.6, 0.0);
  ground.texture.kind = Texture::Kind::kChecker;
  ground.texture.a = Vec3(0.75, 0.72, 0.65);
  ground.texture.b = Vec3(0.4, 0.38, 0.34);
  ground.texture.scale = 0.35;
  s.quads.push_back(ground);

  QuadPrimitive wall;
  wall.name = "wall";
  wall.origin = Vec3(-1.4, -1.2, 0.0);
  wall.u = Vec3(2.8, 0.0, 0.0);
  wall.v = Vec3(0.0, 0.0, 1.8);
  wall.texture.kind = Texture::Kind::kStripes;
  wall.texture.a = Vec3(0.55, 0.6, 0.7);
  wall.texture.b = Vec3(0.3, 0.36, 0.46);
  wall.texture.scale = 0.4;
  s.quads.push_back(wall);

  s.ambient = 0.06;
  s.light_intensity = 0.95;
  s.bounds.center = Vec3(0.0, 0.1, 0.8);
  s.bounds.radius = 1.5;
  s.t_near = 0.1;
  s.t_far = 8.0;
  s.target = Vec3(0.0, 0.0, 0.35);
  s.camera_region = region_preset("wedge", 3.6, s.target);
  s.light_region = region_preset("dome", 2.6, s.target);
  s.fov_x = 45.0 * kDeg;
  return s;
}

SceneSpec scene_spec_from_json(const json& j) {
  try {
    SceneSpec s;
    if (j.contains("preset")) s = scene_preset(j["preset"].get<std::string>());
    s.name = j.value("name", s.name);
    s.ambient = j.value("ambient", s.ambient);
    s.light_intensity = j.value("light_intensity", s.light_intensity);
    s.t_near = j.value("near", s.t_near);
    s.t_far = j.value("far", s.t_far);
    if (j.contains("fov_deg")) s.fov_x = j["fov_deg"].get<double>() * kDeg;
    if (j.contains("target")) s.target = arr3(j["target"], "target");
    if (j.contains("bounds")) {
      s.bounds.center = arr3(j["bounds"].at("center"), "bounds center");
      s.bounds.radius = j["bounds"].at("radius").get<double>();
    }
    if (j.contains("camera_region")) s.camera_region = region_from_json(j["camera_region"]);
    if (j.contains("light_region")) s.light_region = region_from_json(j["light_region"]);
    if (j.contains("spheres")) {
      s.spheres.clear();
      for (const auto& e : j["spheres"]) {
        SpherePrimitive p;
        p.name = e.value("name", "sphere");
        p.center = arr3(e.at("center"), "sphere center");
        p.radius = e.at("radius").get<double>();
        p.material = material_from_json(e);
        s.spheres.push_back(p);
      }
    }
    if (j.contains("boxes")) {
      s.boxes.clear();
      for (const auto& e : j["boxes"]) {
        BoxPrimitive p;
        p.name = e.value("name", "box");
        p.lo = arr3(e.at("min"), "box min");
        p.hi = arr3(e.at("max"), "box max");
        p.material = material_from_json(e);
        s.boxes.push_back(p);
      }
    }
    if (j.contains("meshes")) {
      s.meshes.clear();
      for (const auto& e : j["meshes"]) {
        MeshPrimitive p;
        p.name = e.value("name", "mesh");
        for (const auto& v : e.at("vertices")) p.vertices.push_back(arr3(v, "mesh vertex"));
        for (const auto& t : e.at("triangles")) p.triangles.push_back({t.at(0).get<int>(), t.at(1).get<int>(), t.at(2).get<int>()});
        p.material = material_from_json(e);
        s.meshes.push_back(std::move(p));
      }
    }
    if (j.contains("quads")) {
      s.quads.clear();
      for (const auto& e : j["quads"]) {
        QuadPrimitive q;
        q.name = e.value("name", "quad");
        q.origin = arr3(e.at("origin"), "quad origin");
        q.u = arr3(e.at("u"), "quad u");
        q.v = arr3(e.at("v"), "quad v");
        const json tex = e.value("texture", json::object());
        const std::string kind = tex.value("kind", "solid");
        if (kind == "solid") q.texture.kind = Texture::Kind::kSolid;
        else if (kind == "checker") q.texture.kind = Texture::Kind::kChecker;
        else if (kind == "stripes") q.texture.kind = Texture::Kind::kStripes;
        else throw InputError("unknown texture kind '" + kind + "'");
        if (tex.contains("a")) q.texture.a = arr3(tex["a"], "texture a");
        q.texture.b = tex.contains("b") ? arr3(tex["b"], "texture b") : q.texture.a;
        q.texture.scale = tex.value("scale", 0.25);
        q.specular_strength = e.value("specular", 0.0);
        q.specular_exponent = e.value("shininess", 32.0);
        s.quads.push_back(q);
      }
    }
    s.validate();
    return s;
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed scene spec: ") + e.what());
  }
}

json scene_spec_to_json(const SceneSpec& s) {
  json j;
  j["name"] = s.name;
  j["ambient"] = s.ambient;
  j["light_intensity"] = s.light_intensity;
  j["near"] = s.t_near;
  j["far"] = s.t_far;
  j["fov_deg"] = s.fov_x / kDeg;
  j["target"] = vec_json(s.target);
  j["bounds"] = {{"center", vec_json(s.bounds.center)}, {"radius", s.bounds.radius}};
  j["camera_region"] = region_json(s.camera_region);
  j["light_region"] = region_json(s.light_region);
  j["spheres"] = json::array();
  for (const auto& p : s.spheres) {
    json e = material_json(p.material);
    e["name"] = p.name;
    e["center"] = vec_json(p.center);
    e["radius"] = p.radius;
    j["spheres"].push_back(e);
  }
  j["boxes"] = json::array();
  for (const auto& p : s.boxes) {
    json e = material_json(p.material);
    e["name"] = p.name;
    e["min"] = vec_json(p.lo);
    e["max"] = vec_json(p.hi);
    j["boxes"].push_back(e);
  }
  j["meshes"] = json::array();
  for (const auto& p : s.meshes) {
    json e = material_json(p.material);
    e["name"] = p.name;
    e["vertices"] = json::array();
    for (const auto& v : p.vertices) e["vertices"].push_back(vec_json(v));
    e["triangles"] = json::array();
    for (const auto& t : p.triangles) e["triangles"].push_back({t[0], t[1], t[2]});
    j["meshes"].push_back(e);
  }
  j["quads"] = json::array();
  for (const auto& q : s.quads) {
    const char* kind = q.texture.kind == Texture::Kind::kChecker ? "checker"
                       : q.texture.kind == Texture::Kind::kStripes ? "stripes" : "solid";
    j["quads"].push_back({{"name", q.name}, {"origin", vec_json(q.origin)}, {"u", vec_json(q.u)},
                          {"v", vec_json(q.v)}, {"specular", q.specular_strength},
                          {"shininess", q.specular_exponent},
                          {"texture", {{"kind", kind}, {"a", vec_json(q.texture.a)},
                                       {"b", vec_json(q.texture.b)}, {"scale", q.texture.scale}}}});
  }
  return j;
}

SurfaceHit intersect_scene(const SceneSpec& spec, const Ray& ray) {
  SurfaceHit best;
  double t_best = ray.t_far;
  double t = 0.0;
  for (std::size_t i = 0; i < spec.spheres.size(); ++i) {
    const auto& s = spec.spheres[i];
    if (hit_sphere(s, ray, t_best, t)) {
      t_best = t;
      best.kind = SurfaceKind::kSphere;
      best.index = static_cast<int>(i);
      best.normal = (ray.at(t) - s.center) / s.radius;
      best.albedo = s.material.albedo;
      best.specular_strength = s.material.specular_strength;
      best.specular_exponent = s.material.specular_exponent;
    }
  }
  for (std::size_t i = 0; i < spec.boxes.size(); ++i) {
    const auto& b = spec.boxes[i];
    Vec3 n;
    if (hit_box(b, ray, t_best, t, n)) {
      t_best = t;
      best.kind = SurfaceKind::kBox;
      best.index = static_cast<int>(i);
      best.normal = n;
      best.albedo = b.material.albedo;
      best.specular_strength = b.material.specular_strength;
      best.specular_exponent = b.material.specular_exponent;
    }
  }
  for (std::size_t i = 0; i < spec.meshes.size(); ++i) {
    const auto& m = spec.meshes[i];
    for (const auto& tri : m.triangles) {
      const Vec3& a = m.vertices[tri[0]];
      const Vec3& b = m.vertices[tri[1]];
      const Vec3& c = m.vertices[tri[2]];
      if (hit_triangle(a, b, c, ray, t_best, t)) {
        t_best = t;
        best.kind = SurfaceKind::kMesh;
        best.index = static_cast<int>(i);
        best.normal = (b - a).cross(c - a).normalized();
        best.albedo = m.material.albedo;
        best.specular_strength = m.material.specular_strength;
        best.specular_exponent = m.material.specular_exponent;
      }
    }
  }
  for (std::size_t i = 0; i < spec.quads.size(); ++i) {
    const auto& q = spec.quads[i];
    double s = 0.0, w = 0.0;
    if (hit_quad(q, ray, t_best, t, s, w)) {
      t_best = t;
      best.kind = SurfaceKind::kQuad;
      best.index = static_cast<int>(i);
      best.normal = q.u.cross(q.v).normalized();
      best.albedo = q.texture.albedo(s * q.u.norm(), w * q.v.norm());
      best.specular_strength = q.specular_strength;
      best.specular_exponent = q.specular_exponent;
    }
  }
  if (best.hit()) {
    best.t = t_best;
    best.point = ray.at(t_best);
    if (best.normal.dot(ray.direction) > 0.0) best.normal = -best.normal;
  }
  return best;
}

PixelTrace trace_ray(const SceneSpec& spec, const Ray& ray, const Vec3& light_position) {
  PixelTrace out;
  out.surface = intersect_scene(spec, ray);
  if (!out.surface.hit()) return out;
  const SurfaceHit& h = out.surface;
  const Vec3 to_light = light_position - h.point;
  const double dist = to_light.norm();
  const Vec3 l = to_light / dist;

  Ray shadow;
  shadow.origin = h.point + h.normal * 1e-6;
  shadow.direction = l;
  shadow.t_near = kEps;
  shadow.t_far = dist;
  out.shadowed = intersect_scene(spec, shadow).hit();

  out.color = Vec3::Constant(spec.ambient);
  const double n_dot_l = h.normal.dot(l);
  if (!out.shadowed && n_dot_l > 0.0) {
    Vec3 lit = h.albedo * n_dot_l;
    if (h.specular_strength > 0.0) {
      const Vec3 half = (l - ray.direction).normalized();
      lit += Vec3::Constant(h.specular_strength * std::pow(std::max(0.0, h.normal.dot(half)), h.specular_exponent));
    }
    out.color += spec.light_intensity * lit;
  }
  return out;
}

std::vector<PixelTrace> trace_image(const SceneSpec& spec, const PinholeCamera& camera, const Pose6D& pose,
                                    const Vec3& light_position) {
  std::vector<PixelTrace> out;
  for (const Ray& r : image_rays(camera, pose, spec.t_near, spec.t_far)) {
    out.push_back(trace_ray(spec, r, light_position));
  }
  return out;
}

OlatScene synth_olat(const SceneSpec& spec, const std::vector<Pose6D>& cameras,
                     const std::vector<Pose6D>& lights, const PinholeCamera& intrinsics,
                     int samples_per_pixel, std::uint64_t seed, int threads) {
  spec.validate();
  intrinsics.validate();
  if (cameras.empty() || lights.empty()) throw InputError("synth: need at least one camera and one light");
  if (samples_per_pixel < 1) throw InputError("synth: samples per pixel must be >= 1");
  OlatScene scene;
  scene.name = spec.name;
  scene.intrinsics = intrinsics;
  scene.cameras = cameras;
  scene.lights = lights;
  scene.t_near = spec.t_near;
  scene.t_far = spec.t_far;
  scene.bounds = spec.bounds;
  const std::size_t n_frames = cameras.size() * lights.size();
  scene.frames.resize(n_frames);

  parallel_for(n_frames, threads, [&](std::size_t idx, int) {
    const int view = static_cast<int>(idx / lights.size());
    const int light = static_cast<int>(idx % lights.size());
    Frame& f = scene.frames[idx];
    f.view = view;
    f.light = light;
    f.image = Image(intrinsics.width, intrinsics.height);
    const Vec3 lp = lights[light].translation();
    std::mt19937_64 rng(seed ^ (0x9E3779B97F4A7C15ull * (idx + 1)));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<PixelCoord> px(samples_per_pixel);
    for (int y = 0; y < intrinsics.height; ++y) {
      for (int x = 0; x < intrinsics.width; ++x) {
        for (int s = 0; s < samples_per_pixel; ++s) {
          px[s] = samples_per_pixel == 1 ? PixelCoord{x + 0.5, y + 0.5}
                                         : PixelCoord{x + unit(rng), y + unit(rng)};
        }
        Vec3 acc = Vec3::Zero();
        for (const Ray& r : camera_rays(intrinsics, cameras[view], px, spec.t_near, spec.t_far)) {
          acc += trace_ray(spec, r, lp).color.cwiseMax(0.0).cwiseMin(1.0);
        }
        acc /= samples_per_pixel;
        for (int c = 0; c < 3; ++c) f.image.at(x, y, c) = static_cast<float>(acc[c]);
      }
    }
    f.image.quantize();
  });
  scene.validate();
  return scene;
}

std::vector<Pose6D> camera_waypoints(const SceneSpec& spec, int count) {
  return equal_area_waypoints(spec.camera_region, count, spec.target);
}

std::vector<Pose6D> light_waypoints(const SceneSpec& spec, int count) {
  return equal_area_waypoints(spec.light_region, count, spec.target);
}

}  // namespace relight
