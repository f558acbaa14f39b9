#include "neuromanip/error.hpp"
#include "neuromanip/harness.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <memory>
#include <sstream>

namespace nm::harness {

namespace {

using nlohmann::json;

constexpr int kStepMs = 10;

[[noreturn]] void bad(const std::string& where, const std::string& what) {
  throw Error(Errc::Validation, "harness", where + ": " + what);
}

void only_keys(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
  if (!j.is_object()) bad(where, "expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::none_of(keys.begin(), keys.end(), [&](const char* k) { return it.key() == k; })) {
      bad(where, "unknown key '" + it.key() + "'");
    }
  }
}

int positive_ms(const json& j, const std::string& where) {
  if (!j.contains("duration_ms") || !j["duration_ms"].is_number_integer()) bad(where, "duration_ms must be an integer");
  const int d = j["duration_ms"].get<int>();
  if (d <= 0 || d % kStepMs != 0) bad(where, "duration_ms must be a positive multiple of 10");
  return d;
}

std::optional<int> object_ref(const json& v, const scene::Scene& scene, const std::string& where) {
  if (v.is_null()) return std::nullopt;
  if (v.is_number_integer()) {
    const int id = v.get<int>();
    if (!scene.find(id)) bad(where, "no object with id " + std::to_string(id));
    return id;
  }
  if (v.is_string()) {
    const auto name = v.get<std::string>();
    for (const auto& o : scene.objects)
      if (o.class_label == name) return o.id;
    bad(where, "no object of class '" + name + "' in the scene");
  }
  bad(where, "object must be an id, a class name or null");
}

GestureLabel gesture_ref(const json& v, const std::string& where) {
  std::optional<GestureLabel> g;
  if (v.is_number_integer()) g = signal::gesture_from_code(v.get<int>());
  else if (v.is_string()) g = signal::parse_gesture(v.get<std::string>());
  if (!g) bad(where, "unknown gesture " + v.dump());
  return *g;
}

// A pixel whose ray misses every object, for "looking at nothing".
std::array<double, 2> background_pixel(const scene::Scene& scene) {
  const auto& c = scene.camera;
  const std::array<std::array<double, 2>, 5> tries = {{{4.0, 4.0},
                                                        {c.width - 4.0, 4.0},
                                                        {4.0, c.height - 4.0},
                                                        {c.width - 4.0, c.height - 4.0},
                                                        {c.width / 2.0, 4.0}}};
  for (const auto& p : tries) {
    if (!scene::gaze_object_intersection(scene::gaze_through_pixel(c, p[0], p[1]), scene.objects)) return p;
  }
  throw Error(Errc::Validation, "harness", "scene leaves no background pixel for off-object gaze");
}

}  // namespace

Scenario load_scenario(const std::filesystem::path& path, const scene::Scene& scene) {
  const auto where = path.string();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "harness", "cannot read scenario " + where);
  std::stringstream ss;
  ss << in.rdbuf();
  json j;
  try {
    j = json::parse(ss.str());
  } catch (const json::parse_error& e) {
    bad(where, e.what());
  }
  only_keys(j, {"name", "gaze", "intent", "release_ms", "noise_sigma", "backend", "expect", "seed"}, where);

  Scenario s;
  try {
    s.name = j.value("name", path.stem().string());
    if (!j.contains("gaze") || !j["gaze"].is_array()) bad(where, "gaze must be an array");
    for (std::size_t i = 0; i < j["gaze"].size(); ++i) {
      const auto& g = j["gaze"][i];
      const auto w = where + ": gaze[" + std::to_string(i) + "]";
      only_keys(g, {"object", "duration_ms"}, w);
      s.gaze.push_back({object_ref(g.value("object", json(nullptr)), scene, w), positive_ms(g, w)});
    }
    if (j.contains("intent")) {
      if (!j["intent"].is_array()) bad(where, "intent must be an array");
      for (std::size_t i = 0; i < j["intent"].size(); ++i) {
        const auto& g = j["intent"][i];
        const auto w = where + ": intent[" + std::to_string(i) + "]";
        only_keys(g, {"gesture", "duration_ms"}, w);
        if (!g.contains("gesture")) bad(w, "gesture missing");
        s.intent.push_back({gesture_ref(g["gesture"], w), positive_ms(g, w)});
      }
    }
    if (j.contains("release_ms")) {
      const int r = j["release_ms"].get<int>();
      if (r <= 0 || r % kStepMs != 0) bad(where, "release_ms must be a positive multiple of 10");
      s.release_ms = r;
    }
    s.noise_sigma = j.value("noise_sigma", s.noise_sigma);
    if (!(s.noise_sigma >= 0.0)) bad(where, "noise_sigma must be non-negative");
    const auto backend = j.value("backend", std::string("dense"));
    if (backend == "dense") s.backend = classify::Backend::Dense;
    else if (backend == "spiking") s.backend = classify::Backend::Spiking;
    else bad(where, "backend must be 'dense' or 'spiking'");
    if (j.contains("expect")) {
      const auto& e = j["expect"];
      only_keys(e, {"executed", "min_rejected"}, where + ": expect");
      if (e.contains("executed") && !e["executed"].is_null()) s.expect_executed = gesture_ref(e["executed"], where);
      s.expect_min_rejected = e.value("min_rejected", 0);
    }
    s.seed = j.value("seed", s.seed);
  } catch (const json::exception& e) {
    bad(where, e.what());
  }
  if (s.gaze.empty()) bad(where, "gaze is empty");
  return s;
}

SimulationResult simulate(const RunConfig& cfg, const World& world, const classify::Pipeline& model,
                          const Scenario& scenario) {
  if (!model.loaded()) throw Error(Errc::ModelNotLoaded, "harness", "simulate needs a trained model");
  const auto& sc = world.scene;
  controller::Controller ctl(controller::Context{&world.lib, sc.objects, cfg.controller_config()});

  int gaze_ms = 0, intent_ms = 0;
  for (const auto& g : scenario.gaze) gaze_ms += g.duration_ms;
  for (const auto& g : scenario.intent) intent_ms += g.duration_ms;
  int total_ms = std::max(gaze_ms, intent_ms);
  if (scenario.release_ms) total_ms = std::max(total_ms, *scenario.release_ms + cfg.ramp_ms + kStepMs);

  // Gaze, one sample per step; the trace holds its last target once exhausted.
  const auto off_object = background_pixel(sc);
  std::vector<std::array<double, 2>> gaze_px;
  for (const auto& g : scenario.gaze) {
    const auto px = g.object_id ? scene::project(sc.camera, sc.find(*g.object_id)->center()) : off_object;
    for (int t = 0; t < g.duration_ms; t += kStepMs) gaze_px.push_back(px);
  }
  while (static_cast<int>(gaze_px.size()) * kStepMs < total_ms) gaze_px.push_back(gaze_px.back());

  // One continuous EMG recording, Rest outside the scripted intent.
  std::vector<std::pair<GestureLabel, int>> segments;
  for (const auto& i : scenario.intent) segments.emplace_back(i.gesture, i.duration_ms);
  if (intent_ms < total_ms) segments.emplace_back(GestureLabel::Rest, total_ms - intent_ms);
  const auto emg_model = signal::SynthEmgModel::with_default_activation(scenario.noise_sigma, cfg.mains_amp, scenario.seed);
  auto chain = signal::design_filter_chain(signal::kSampleRateHz);
  const auto emg = signal::filter_stream(chain, signal::synth_emg_segments(emg_model, segments));
  const auto windows = signal::window_stream(emg);

  SimulationResult res;
  auto shared_scene = std::make_shared<const scene::Scene>(sc);
  const scene::OracleDetector detector(shared_scene);
  scene::FixationTracker tracker(sc.objects);
  std::size_t next_window = 0;
  const auto apply = [&](const controller::ControlEvent& ev) {
    res.events.push_back(ev);
    ctl.apply(ev);
  };

  for (int k = 0; k * kStepMs < total_ms; ++k) {
    const std::int64_t t_us = static_cast<std::int64_t>(k) * kStepMs * 1000;
    const auto& px = gaze_px[static_cast<std::size_t>(k)];
    const auto upd = tracker.push(scene::gaze_through_pixel(sc.camera, px[0], px[1], t_us));
    if (upd.closed) apply(controller::FixationLost{});
    if (upd.opened) {
      if (upd.opened->object_id) {
        // Reference frame without the fixated object, so it shows up as the changed region.
        const int id = *upd.opened->object_id;
        const auto prev = scene::render(sc, t_us - kStepMs * 1000, px, std::span<const int>(&id, 1));
        const auto cur = scene::render(sc, t_us, px);
        const auto rois = scene::extract_rois(prev, cur);
        for (auto& d : detector.detect(rois)) res.detections.push_back(std::move(d));
      }
      apply(controller::Fixation{upd.opened->object_id});
    }
    // Windows complete once their last frame has arrived.
    while (next_window < windows.size()) {
      const auto& w = windows[next_window];
      const std::int64_t ready_us = w.start_us + static_cast<std::int64_t>(w.width) * signal::kFramePeriodUs;
      if (ready_us > t_us) break;
      const auto c = model.classify_window(w, scenario.backend);
      // Rest is the absence of intent, not a grasp request.
      if (c.label != GestureLabel::Rest) apply(controller::EmgDecision{c.label, c.confidence});
      ++next_window;
    }
    if (scenario.release_ms && k * kStepMs == *scenario.release_ms) apply(controller::Release{});
    apply(controller::Tick{static_cast<double>(kStepMs)});
  }
  if (tracker.finish()) apply(controller::FixationLost{});

  res.log = ctl.log();
  for (const auto& e : res.log)
    if (e.label) res.executed.push_back(*e.label);
  res.rejected = ctl.rejected();
  res.unsafe_executions = controller::audit_log(res.log);
  res.final_state = std::string(controller::state_name(ctl.state()));
  bool ok = res.unsafe_executions == 0 && res.rejected >= scenario.expect_min_rejected;
  if (scenario.expect_executed) {
    ok = ok && std::find(res.executed.begin(), res.executed.end(), *scenario.expect_executed) != res.executed.end();
  } else {
    ok = ok && res.log.empty();
  }
  res.expectation_met = ok;
  return res;
}

}  // namespace nm::harness
