#include "neuromanip/error.hpp"
#include "neuromanip/scene.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace nm::scene {

Frame render(const Scene& scene, std::int64_t t_us, std::array<double, 2> gaze_px, std::span<const int> hidden) {
  const auto& cam = scene.camera;
  Frame f(cam.width, cam.height, 0.2f);
  f.timestamp_us = t_us;
  f.gaze_px = gaze_px;

  // Painter's order: far objects first.
  std::vector<const SceneObject*> order;
  for (const auto& o : scene.objects)
    if (std::find(hidden.begin(), hidden.end(), o.id) == hidden.end()) order.push_back(&o);
  std::stable_sort(order.begin(), order.end(),
                   [](const SceneObject* a, const SceneObject* b) { return a->center()[2] > b->center()[2]; });
  for (const auto* o : order) {
    const Rect r = projected_bbox(cam, *o);
    const float shade = 0.45f + 0.1f * static_cast<float>(((o->id % 5) + 5) % 5);
    for (int y = r.y; y < r.y + r.h; ++y)
      for (int x = r.x; x < r.x + r.w; ++x) f.at(x, y) = shade;
  }
  return f;
}

std::vector<Roi> extract_rois(const Frame& prev, const Frame& cur, RoiParams params) {
  if (prev.width != cur.width || prev.height != cur.height ||
      prev.pixels.size() != cur.pixels.size()) {
    throw Error(Errc::DimensionMismatch, "scene",
                "frames are " + std::to_string(prev.width) + "x" + std::to_string(prev.height) + " and " +
                    std::to_string(cur.width) + "x" + std::to_string(cur.height));
  }
  const int w = cur.width;
  const int h = cur.height;
  const double gx = cur.gaze_px[0];
  const double gy = cur.gaze_px[1];
  const double r2 = params.radius_px * params.radius_px;

  std::vector<std::uint8_t> mask(static_cast<std::size_t>(w) * h, 0);
  const int y_lo = std::max(0, static_cast<int>(std::floor(gy - params.radius_px)));
  const int y_hi = std::min(h - 1, static_cast<int>(std::ceil(gy + params.radius_px)));
  const int x_lo = std::max(0, static_cast<int>(std::floor(gx - params.radius_px)));
  const int x_hi = std::min(w - 1, static_cast<int>(std::ceil(gx + params.radius_px)));
  for (int y = y_lo; y <= y_hi; ++y) {
    for (int x = x_lo; x <= x_hi; ++x) {
      const double dx = x - gx, dy = y - gy;
      if (dx * dx + dy * dy > r2) continue;
      if (std::abs(static_cast<double>(cur.at(x, y)) - prev.at(x, y)) > params.tau)
        mask[static_cast<std::size_t>(y) * w + x] = 1;
    }
  }

  std::vector<Roi> rois;
  std::vector<int> stack;
  for (int start = 0; start < w * h; ++start) {
    if (mask[start] != 1) continue;
    mask[start] = 2;
    stack.assign(1, start);
    int count = 0;
    int x0 = w, y0 = h, x1 = -1, y1 = -1;
    while (!stack.empty()) {
      const int p = stack.back();
      stack.pop_back();
      const int x = p % w, y = p / w;
      ++count;
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
      const int nb[4][2] = {{x - 1, y}, {x + 1, y}, {x, y - 1}, {x, y + 1}};
      for (const auto& n : nb) {
        if (n[0] < 0 || n[0] >= w || n[1] < 0 || n[1] >= h) continue;
        const int q = n[1] * w + n[0];
        if (mask[q] == 1) {
          mask[q] = 2;
          stack.push_back(q);
        }
      }
    }
    if (count < params.min_pixels) continue;
    Roi roi;
    const int rx0 = std::max(0, x0 - params.margin_px);
    const int ry0 = std::max(0, y0 - params.margin_px);
    const int rx1 = std::min(w, x1 + 1 + params.margin_px);
    const int ry1 = std::min(h, y1 + 1 + params.margin_px);
    roi.rect = {rx0, ry0, rx1 - rx0, ry1 - ry0};
    rois.push_back(std::move(roi));
  }

  std::stable_sort(rois.begin(), rois.end(), [](const Roi& a, const Roi& b) {
    if (a.rect.area() != b.rect.area()) return a.rect.area() > b.rect.area();
    if (a.rect.y != b.rect.y) return a.rect.y < b.rect.y;
    return a.rect.x < b.rect.x;
  });
  if (rois.size() > params.max_rois) rois.resize(params.max_rois);
  for (auto& roi : rois) {
    roi.crop.reserve(static_cast<std::size_t>(roi.rect.area()));
    for (int y = roi.rect.y; y < roi.rect.y + roi.rect.h; ++y)
      for (int x = roi.rect.x; x < roi.rect.x + roi.rect.w; ++x) roi.crop.push_back(cur.at(x, y));
  }
  return rois;
}

std::vector<Detection> OracleDetector::detect(std::span<const Roi> rois) const {
  if (!scene_) throw Error(Errc::SceneNotLoaded, "scene", "oracle detector has no scene");
  std::vector<Detection> out;
  out.reserve(rois.size());
  for (const auto& roi : rois) {
    Detection d;
    d.bbox_px = roi.rect;
    double best = 0.0;
    const SceneObject* hit = nullptr;
    for (const auto& o : scene_->objects) {
      const double v = iou(roi.rect, projected_bbox(scene_->camera, o));
      if (v > best || (hit && v == best && v > 0.0 && o.id < hit->id)) {
        best = v;
        hit = &o;
      }
    }
    if (hit && best >= min_iou_) {
      d.object_id = hit->id;
      d.class_label = hit->class_label;
      d.confidence = best;
    }
    out.push_back(std::move(d));
  }
  return out;
}

std::vector<Detection> detect_objects(std::span<const Roi> rois, const Scene* scene) {
  if (!scene) throw Error(Errc::SceneNotLoaded, "scene", "no scene loaded");
  return OracleDetector(std::make_shared<const Scene>(*scene)).detect(rois);
}

}  // namespace nm::scene
