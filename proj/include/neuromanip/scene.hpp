#pragma once

// Synthetic scene and gaze front end: gaze-ray picking, dispersion-based
// fixation detection, frame differencing ROIs, stereo depth and a pluggable
// object detector.

#include <array>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace nm::scene {

using Vec3 = std::array<double, 3>;

inline constexpr std::array<std::string_view, 6> kObjectClasses = {"cup", "bottle", "smartphone",
                                                                   "door_handle", "pen", "block"};
bool known_class(std::string_view name) noexcept;

struct Aabb {
  Vec3 min{};
  Vec3 max{};
};

struct SceneObject {
  int id = 0;
  std::string class_label;
  Aabb aabb;
  double yaw = 0.0;  // stored, unused by the grasp scorer
  double grasp_size_m = 0.0;

  Vec3 center() const;
};

// Pinhole camera at the origin looking down +z, x right, y down.
struct Camera {
  double focal_px = 600.0;
  double baseline_m = 0.06;
  int width = 640;
  int height = 480;
};

struct Scene {
  Camera camera;
  std::vector<SceneObject> objects;

  const SceneObject* find(int id) const noexcept;
};

// Throws Validation on broken invariants (box corners, size, vocabulary, ids).
void validate(const Scene& scene);

struct GazeSample {
  std::int64_t timestamp_us = 0;
  Vec3 origin{};
  Vec3 dir{0.0, 0.0, 1.0};
};

Vec3 normalized(const Vec3& v);
double angle_between_deg(const Vec3& a, const Vec3& b);

// Ray from the camera centre through pixel (px, py).
GazeSample gaze_through_pixel(const Camera& cam, double px, double py, std::int64_t t_us = 0);
std::array<double, 2> project(const Camera& cam, const Vec3& p);

// Slab test. Returns the entry distance along the ray if it hits (a ray that
// starts inside the box enters at 0).
std::optional<double> ray_aabb(const Vec3& origin, const Vec3& dir, const Aabb& box);

// Nearest hit by entry distance; near-equal distances go to the smaller id.
std::optional<int> gaze_object_intersection(const GazeSample& ray, std::span<const SceneObject> objects);

struct FixationParams {
  double dispersion_deg = 1.5;  // full cone aperture
  double dwell_ms = 300.0;
};

struct FixationEvent {
  std::optional<int> object_id;
  std::int64_t onset_us = 0;
  double dwell_ms = 0.0;
};

// Online dispersion-threshold detector. `push` reports when a fixation opens
// (dwell satisfied) and when it closes.
class FixationTracker {
 public:
  struct Update {
    std::optional<FixationEvent> opened;  // dwell_ms is the dwell at opening
    std::optional<FixationEvent> closed;
  };

  explicit FixationTracker(std::vector<SceneObject> objects = {}, FixationParams params = {});

  Update push(const GazeSample& s);
  // Closes an open fixation at end of stream.
  std::optional<FixationEvent> finish();

  bool fixating() const noexcept { return fixating_; }
  std::optional<int> current_object() const noexcept { return object_; }

 private:
  bool compact() const;
  Vec3 mean_dir() const;

  std::vector<SceneObject> objects_;
  FixationParams params_;
  std::deque<GazeSample> window_;
  bool fixating_ = false;
  std::optional<int> object_;
  std::optional<std::int64_t> last_t_;
};

// Batch form: one event per fixation, emitted at close or stream end.
std::vector<FixationEvent> detect_fixation(std::span<const GazeSample> samples,
                                           std::span<const SceneObject> objects = {},
                                           FixationParams params = {});

struct Rect {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  int area() const noexcept { return w * h; }
  bool operator==(const Rect&) const = default;
};

double iou(const Rect& a, const Rect& b);

struct Frame {
  int width = 0;
  int height = 0;
  std::vector<float> pixels;  // row-major, [0, 1]
  std::int64_t timestamp_us = 0;
  std::array<double, 2> gaze_px{};

  Frame() = default;
  Frame(int w, int h, float fill = 0.0f) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {}
  float& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  float at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

// Projected bounding box of an object clamped to the image.
Rect projected_bbox(const Camera& cam, const SceneObject& obj);

// Filled rectangles over a flat background; objects in `hidden` are skipped.
Frame render(const Scene& scene, std::int64_t t_us, std::array<double, 2> gaze_px,
             std::span<const int> hidden = {});

struct Roi {
  Rect rect;
  std::vector<float> crop;
};

struct RoiParams {
  double radius_px = 120.0;
  double tau = 0.1;
  int margin_px = 8;
  int min_pixels = 16;
  std::size_t max_rois = 4;
};

std::vector<Roi> extract_rois(const Frame& prev, const Frame& cur, RoiParams params = {});

double depth_from_disparity(double disparity_px, double focal_px, double baseline_m);

struct Detection {
  std::optional<int> object_id;
  std::string class_label;
  Rect bbox_px;
  double confidence = 0.0;
};

class ObjectDetector {
 public:
  virtual ~ObjectDetector() = default;
  virtual std::vector<Detection> detect(std::span<const Roi> rois) const = 0;
};

// Ground-truth detector: best-IoU projected object box, accepted at IoU >= 0.3.
class OracleDetector final : public ObjectDetector {
 public:
  OracleDetector() = default;
  explicit OracleDetector(std::shared_ptr<const Scene> scene, double min_iou = 0.3)
      : scene_(std::move(scene)), min_iou_(min_iou) {}

  std::vector<Detection> detect(std::span<const Roi> rois) const override;

 private:
  std::shared_ptr<const Scene> scene_;
  double min_iou_ = 0.3;
};

std::vector<Detection> detect_objects(std::span<const Roi> rois, const Scene* scene);

// Scene JSON and gaze CSV (`t_us,ox,oy,oz,dx,dy,dz`).
Scene load_scene(const std::filesystem::path& path);
Scene parse_scene(std::string_view json_text, const std::string& origin = "<scene>");
void save_scene(const std::filesystem::path& path, const Scene& scene);
std::vector<GazeSample> read_gaze_csv(const std::filesystem::path& path);
void write_gaze_csv(const std::filesystem::path& path, std::span<const GazeSample> samples);

}  // namespace nm::scene
