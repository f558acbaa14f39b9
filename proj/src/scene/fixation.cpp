#include "neuromanip/error.hpp"
#include "neuromanip/scene.hpp"

namespace nm::scene {

FixationTracker::FixationTracker(std::vector<SceneObject> objects, FixationParams params)
    : objects_(std::move(objects)), params_(params) {
  if (!(params_.dispersion_deg > 0.0) || !(params_.dwell_ms > 0.0)) {
    throw Error(Errc::Validation, "scene", "fixation dispersion and dwell must be positive");
  }
}

Vec3 FixationTracker::mean_dir() const {
  Vec3 sum{};
  for (const auto& s : window_)
    for (int a = 0; a < 3; ++a) sum[a] += s.dir[a];
  return normalized(sum);
}

bool FixationTracker::compact() const {
  if (window_.size() < 2) return true;
  const Vec3 m = mean_dir();
  const double half = params_.dispersion_deg / 2.0;
  for (const auto& s : window_)
    if (angle_between_deg(s.dir, m) > half) return false;
  return true;
}

FixationTracker::Update FixationTracker::push(const GazeSample& s) {
  if (last_t_ && s.timestamp_us <= *last_t_) {
    throw Error(Errc::NonMonotonicTimestamps, "scene",
                "gaze sample at " + std::to_string(s.timestamp_us) + " us after " + std::to_string(*last_t_) + " us");
  }
  last_t_ = s.timestamp_us;
  Update up;

  if (fixating_) {
    if (angle_between_deg(s.dir, mean_dir()) <= params_.dispersion_deg / 2.0) {
      window_.push_back(s);
      return up;
    }
    up.closed = finish();
  }

  window_.push_back(s);
  while (!compact()) window_.pop_front();
  const double span_ms = static_cast<double>(window_.back().timestamp_us - window_.front().timestamp_us) / 1000.0;
  if (span_ms >= params_.dwell_ms) {
    fixating_ = true;
    GazeSample ray = window_.back();
    ray.dir = mean_dir();
    object_ = gaze_object_intersection(ray, objects_);
    up.opened = FixationEvent{object_, window_.front().timestamp_us, span_ms};
  }
  return up;
}

std::optional<FixationEvent> FixationTracker::finish() {
  if (!fixating_) {
    window_.clear();
    return std::nullopt;
  }
  FixationEvent ev{object_, window_.front().timestamp_us,
                   static_cast<double>(window_.back().timestamp_us - window_.front().timestamp_us) / 1000.0};
  fixating_ = false;
  object_.reset();
  window_.clear();
  return ev;
}

std::vector<FixationEvent> detect_fixation(std::span<const GazeSample> samples, std::span<const SceneObject> objects,
                                           FixationParams params) {
  FixationTracker tracker({objects.begin(), objects.end()}, params);
  std::vector<FixationEvent> events;
  for (const auto& s : samples) {
    auto up = tracker.push(s);
    if (up.closed) events.push_back(*up.closed);
  }
  if (auto last = tracker.finish()) events.push_back(*last);
  return events;
}

}  // namespace nm::scene
