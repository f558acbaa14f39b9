#include "neuromanip/error.hpp"
#include "neuromanip/scene.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <set>

namespace nm::scene {

bool known_class(std::string_view name) noexcept {
  return std::find(kObjectClasses.begin(), kObjectClasses.end(), name) != kObjectClasses.end();
}

Vec3 SceneObject::center() const {
  return {(aabb.min[0] + aabb.max[0]) / 2, (aabb.min[1] + aabb.max[1]) / 2, (aabb.min[2] + aabb.max[2]) / 2};
}

const SceneObject* Scene::find(int id) const noexcept {
  for (const auto& o : objects)
    if (o.id == id) return &o;
  return nullptr;
}

void validate(const Scene& scene) {
  const auto& cam = scene.camera;
  if (!(cam.focal_px > 0.0) || !(cam.baseline_m > 0.0) || cam.width <= 0 || cam.height <= 0) {
    throw Error(Errc::Validation, "scene", "camera needs positive focal_px, baseline_m, width and height");
  }
  std::set<int> ids;
  for (const auto& o : scene.objects) {
    const std::string where = "object " + std::to_string(o.id);
    if (!ids.insert(o.id).second) throw Error(Errc::Validation, "scene", where + ": duplicate id");
    if (!known_class(o.class_label)) {
      throw Error(Errc::Validation, "scene", where + ": unknown class '" + o.class_label + "'");
    }
    double diag2 = 0.0;
    for (int a = 0; a < 3; ++a) {
      if (!(o.aabb.min[a] < o.aabb.max[a])) {
        throw Error(Errc::Validation, "scene", where + ": aabb min must be below max on every axis");
      }
      diag2 += (o.aabb.max[a] - o.aabb.min[a]) * (o.aabb.max[a] - o.aabb.min[a]);
    }
    if (!(o.grasp_size_m > 0.0) || o.grasp_size_m > std::sqrt(diag2)) {
      throw Error(Errc::Validation, "scene", where + ": grasp_size_m must be positive and within the box diagonal");
    }
  }
}

Vec3 normalized(const Vec3& v) {
  const double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
  if (!(n > 0.0) || !std::isfinite(n)) throw Error(Errc::Validation, "scene", "zero-length direction");
  return {v[0] / n, v[1] / n, v[2] / n};
}

double angle_between_deg(const Vec3& a, const Vec3& b) {
  // atan2 of cross and dot is accurate for tiny angles, unlike acos.
  const Vec3 c{a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
  const double cn = std::sqrt(c[0] * c[0] + c[1] * c[1] + c[2] * c[2]);
  const double d = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
  return std::atan2(cn, d) * 180.0 / std::numbers::pi;
}

GazeSample gaze_through_pixel(const Camera& cam, double px, double py, std::int64_t t_us) {
  GazeSample g;
  g.timestamp_us = t_us;
  g.origin = {0.0, 0.0, 0.0};
  g.dir = normalized({(px - cam.width / 2.0) / cam.focal_px, (py - cam.height / 2.0) / cam.focal_px, 1.0});
  return g;
}

std::array<double, 2> project(const Camera& cam, const Vec3& p) {
  return {cam.width / 2.0 + cam.focal_px * p[0] / p[2], cam.height / 2.0 + cam.focal_px * p[1] / p[2]};
}

std::optional<double> ray_aabb(const Vec3& origin, const Vec3& dir, const Aabb& box) {
  double t_enter = -std::numeric_limits<double>::infinity();
  double t_exit = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (dir[a] == 0.0) {
      if (origin[a] < box.min[a] || origin[a] > box.max[a]) return std::nullopt;
      continue;
    }
    double t1 = (box.min[a] - origin[a]) / dir[a];
    double t2 = (box.max[a] - origin[a]) / dir[a];
    if (t1 > t2) std::swap(t1, t2);
    t_enter = std::max(t_enter, t1);
    t_exit = std::min(t_exit, t2);
    if (t_enter > t_exit) return std::nullopt;
  }
  if (t_exit < 0.0) return std::nullopt;
  return std::max(t_enter, 0.0);
}

std::optional<int> gaze_object_intersection(const GazeSample& ray, std::span<const SceneObject> objects) {
  std::optional<int> best;
  double best_t = 0.0;
  for (const auto& o : objects) {
    const auto t = ray_aabb(ray.origin, ray.dir, o.aabb);
    if (!t) continue;
    if (!best || *t < best_t - 1e-9 || (std::abs(*t - best_t) < 1e-9 && o.id < *best)) {
      best = o.id;
      best_t = *t;
    }
  }
  return best;
}

double depth_from_disparity(double disparity_px, double focal_px, double baseline_m) {
  if (!(disparity_px > 0.0)) {
    throw Error(Errc::NonPositiveDisparity, "scene", "disparity must be positive, got " + std::to_string(disparity_px));
  }
  if (!(focal_px > 0.0) || !(baseline_m > 0.0)) {
    throw Error(Errc::Validation, "scene", "focal length and baseline must be positive");
  }
  return focal_px * baseline_m / disparity_px;
}

double iou(const Rect& a, const Rect& b) {
  const int x0 = std::max(a.x, b.x);
  const int y0 = std::max(a.y, b.y);
  const int x1 = std::min(a.x + a.w, b.x + b.w);
  const int y1 = std::min(a.y + a.h, b.y + b.h);
  const long inter = (x1 > x0 && y1 > y0) ? static_cast<long>(x1 - x0) * (y1 - y0) : 0;
  const long uni = static_cast<long>(a.area()) + b.area() - inter;
  return uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

Rect projected_bbox(const Camera& cam, const SceneObject& obj) {
  double x0 = std::numeric_limits<double>::infinity(), y0 = x0;
  double x1 = -x0, y1 = -x0;
  for (int c = 0; c < 8; ++c) {
    const Vec3 p{(c & 1) ? obj.aabb.max[0] : obj.aabb.min[0], (c & 2) ? obj.aabb.max[1] : obj.aabb.min[1],
                 (c & 4) ? obj.aabb.max[2] : obj.aabb.min[2]};
    if (p[2] <= 1e-6) continue;
    const auto q = project(cam, p);
    x0 = std::min(x0, q[0]);
    y0 = std::min(y0, q[1]);
    x1 = std::max(x1, q[0]);
    y1 = std::max(y1, q[1]);
  }
  if (!(x1 > x0)) return {};
  const int ix0 = std::clamp(static_cast<int>(std::floor(x0)), 0, cam.width);
  const int iy0 = std::clamp(static_cast<int>(std::floor(y0)), 0, cam.height);
  const int ix1 = std::clamp(static_cast<int>(std::ceil(x1)), 0, cam.width);
  const int iy1 = std::clamp(static_cast<int>(std::ceil(y1)), 0, cam.height);
  return {ix0, iy0, std::max(0, ix1 - ix0), std::max(0, iy1 - iy0)};
}

}  // namespace nm::scene
