#include "neuromanip/error.hpp"
#include "neuromanip/grasp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace nm::grasp {

bool GraspPattern::applies_to(std::string_view object_class) const {
  return std::find(classes.begin(), classes.end(), object_class) != classes.end();
}

const GraspPattern* GraspLibrary::find(int id) const noexcept {
  for (const auto& p : patterns)
    if (p.id == id) return &p;
  return nullptr;
}

const GraspPattern* GraspLibrary::for_gesture(GestureLabel g) const noexcept {
  for (const auto& p : patterns)
    if (p.gesture == g) return &p;
  return nullptr;
}

Setpoints GraspLibrary::setpoints(GestureLabel g) const {
  const auto* p = for_gesture(g);
  if (!p) throw Error(Errc::Validation, "grasp", "no pattern for " + std::string(signal::gesture_name(g)));
  return p->setpoints;
}

void validate(const GraspLibrary& lib) {
  if (lib.k_max < 1) throw Error(Errc::Validation, "grasp", "k_max must be at least 1");
  if (lib.patterns.size() < 6) throw Error(Errc::Validation, "grasp", "library needs at least 6 patterns");
  std::set<int> ids;
  std::array<int, signal::kGestureCount> mapped{};
  for (const auto& p : lib.patterns) {
    const std::string where = "pattern " + std::to_string(p.id);
    if (!ids.insert(p.id).second) throw Error(Errc::Validation, "grasp", where + ": duplicate id");
    for (double s : p.setpoints)
      if (!(s >= 0.0 && s <= 1.0)) throw Error(Errc::Validation, "grasp", where + ": setpoints must lie in [0, 1]");
    if (!(p.size_lo < p.size_hi)) throw Error(Errc::Validation, "grasp", where + ": size_range lo must be below hi");
    if (!(p.prior > 0.0 && p.prior <= 1.0)) throw Error(Errc::Validation, "grasp", where + ": prior must be in (0, 1]");
    if (p.gesture) mapped[static_cast<std::size_t>(signal::gesture_code(*p.gesture))]++;
  }
  for (int g = 0; g < signal::kGestureCount; ++g) {
    const auto name = std::string(signal::gesture_name(static_cast<GestureLabel>(g)));
    if (mapped[g] == 0) throw Error(Errc::Validation, "grasp", "no pattern for " + name);
    if (mapped[g] > 1) throw Error(Errc::Validation, "grasp", "more than one pattern for " + name);
  }
}

std::vector<GestureLabel> CandidateSet::labels(const GraspLibrary& lib) const {
  std::vector<GestureLabel> out;
  for (const auto& e : entries) {
    const auto* p = lib.find(e.pattern_id);
    if (p && p->gesture) out.push_back(*p->gesture);
  }
  return out;
}

bool CandidateSet::admits(const GraspLibrary& lib, GestureLabel g) const {
  const auto l = labels(lib);
  return std::find(l.begin(), l.end(), g) != l.end();
}

double size_fit(double size, double lo, double hi) {
  if (!(hi > lo) || size <= lo || size >= hi) return 0.0;
  const double mid = (lo + hi) / 2.0;
  const double half = (hi - lo) / 2.0;
  return 1.0 - std::abs(size - mid) / half;
}

CandidateSet context_to_grasps(const scene::SceneObject& object, const GraspLibrary& lib) {
  struct Raw {
    double score;
    int id;
  };
  std::vector<Raw> raw;
  bool any_applicable = false;
  for (const auto& p : lib.patterns) {
    if (!p.applies_to(object.class_label)) continue;
    any_applicable = true;
    const double r = p.prior * size_fit(object.grasp_size_m, p.size_lo, p.size_hi);
    if (r > 0.0) raw.push_back({r, p.id});
  }
  if (!any_applicable || raw.empty()) {
    throw Error(Errc::NoApplicableGrasp, "grasp",
                "no pattern fits " + object.class_label + " (object " + std::to_string(object.id) + ")");
  }
  std::sort(raw.begin(), raw.end(), [](const Raw& a, const Raw& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
  });
  if (raw.size() > static_cast<std::size_t>(lib.k_max)) raw.resize(static_cast<std::size_t>(lib.k_max));
  double total = 0.0;
  for (const auto& r : raw) total += r.score;
  CandidateSet cs;
  cs.source_object = object.id;
  for (const auto& r : raw) cs.entries.push_back({r.id, r.score / total});
  return cs;
}

RestrictedDecision restrict_classify(std::span<const double> logits, const CandidateSet& candidates,
                                     const GraspLibrary& lib) {
  if (candidates.empty()) throw Error(Errc::EmptyCandidates, "grasp", "candidate set is empty");
  if (logits.size() != static_cast<std::size_t>(signal::kGestureCount)) {
    throw Error(Errc::DimensionMismatch, "grasp", "expected 6 logits");
  }
  std::array<bool, signal::kGestureCount> keep{};
  bool any = false;
  for (GestureLabel g : candidates.labels(lib)) {
    keep[static_cast<std::size_t>(signal::gesture_code(g))] = true;
    any = true;
  }
  if (!any) throw Error(Errc::EmptyCandidates, "grasp", "no candidate maps to a gesture label");

  int best = -1;
  for (int k = 0; k < signal::kGestureCount; ++k)
    if (keep[k] && (best < 0 || logits[k] > logits[best])) best = k;
  double sum = 0.0;
  for (int k = 0; k < signal::kGestureCount; ++k)
    if (keep[k]) sum += std::exp(logits[k] - logits[best]);
  return {static_cast<GestureLabel>(best), 1.0 / sum};
}

std::size_t cycle_alternative(const CandidateSet& candidates, std::size_t current_index) {
  if (candidates.empty()) throw Error(Errc::EmptyCandidates, "grasp", "candidate set is empty");
  return (current_index + 1) % candidates.size();
}

}  // namespace nm::grasp
