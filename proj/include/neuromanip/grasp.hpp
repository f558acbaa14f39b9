#pragma once

// Grasp library and the context-to-grasp mapper that narrows the action
// space from all patterns to k scored candidates.

#include "neuromanip/scene.hpp"
#include "neuromanip/signal.hpp"

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace nm::grasp {

using signal::GestureLabel;
using Setpoints = std::array<double, 6>;  // actuator 6 is thumb abduction

struct GraspPattern {
  int id = 0;
  std::string label;                   // gesture name or an extra pattern name
  std::optional<GestureLabel> gesture;  // set when `label` names a GestureLabel
  Setpoints setpoints{};
  std::vector<std::string> classes;
  double size_lo = 0.0;
  double size_hi = 0.0;
  double prior = 1.0;

  bool applies_to(std::string_view object_class) const;
};

struct GraspLibrary {
  std::vector<GraspPattern> patterns;
  int k_max = 3;

  const GraspPattern* find(int id) const noexcept;
  const GraspPattern* for_gesture(GestureLabel g) const noexcept;
  // Setpoints of the pattern mapped to `g`.
  Setpoints setpoints(GestureLabel g) const;
};

// Throws Validation: ids unique, n >= 6, all six gestures mapped exactly once,
// setpoints in [0, 1], lo < hi, prior in (0, 1], k_max >= 1.
void validate(const GraspLibrary& lib);

struct Candidate {
  int pattern_id = 0;
  double score = 0.0;
  bool operator==(const Candidate&) const = default;
};

struct CandidateSet {
  std::vector<Candidate> entries;  // descending score
  int source_object = 0;

  bool empty() const noexcept { return entries.empty(); }
  std::size_t size() const noexcept { return entries.size(); }
  // Gesture labels of the entries, in entry order (unmapped patterns skipped).
  std::vector<GestureLabel> labels(const GraspLibrary& lib) const;
  bool admits(const GraspLibrary& lib, GestureLabel g) const;
  bool operator==(const CandidateSet&) const = default;
};

// Triangular kernel on [lo, hi] peaking at the midpoint; 0 outside.
double size_fit(double size, double lo, double hi);

CandidateSet context_to_grasps(const scene::SceneObject& object, const GraspLibrary& lib);

struct RestrictedDecision {
  GestureLabel label = GestureLabel::Rest;
  double confidence = 0.0;
};

// Masked argmax over the candidate labels; softmax confidence over survivors.
RestrictedDecision restrict_classify(std::span<const double> logits, const CandidateSet& candidates,
                                     const GraspLibrary& lib);

std::size_t cycle_alternative(const CandidateSet& candidates, std::size_t current_index);

// Library file: JSON array of {id, label, setpoints[6], classes[], size_range:[lo,hi], prior}.
GraspLibrary parse_library(std::string_view json_text, const std::string& origin = "<library>", int k_max = 3);
GraspLibrary load_library(const std::filesystem::path& path, int k_max = 3);

}  // namespace nm::grasp
