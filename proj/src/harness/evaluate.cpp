#include "neuromanip/error.hpp"
#include "neuromanip/harness.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>

namespace nm::harness {

namespace {

using nlohmann::json;
using controller::ControlEvent;

grasp::CandidateSet sample_context(const Sample& s, const World& world, std::size_t index) {
  const auto where = "sample " + std::to_string(index);
  const auto ray = scene::gaze_through_pixel(world.scene.camera, s.gaze_px[0], s.gaze_px[1]);
  const auto hit = scene::gaze_object_intersection(ray, world.scene.objects);
  if (!hit) throw Error(Errc::DatasetContextMismatch, "harness", where + ": gaze misses every object");
  const auto* obj = world.scene.find(*hit);
  grasp::CandidateSet cs;
  try {
    cs = grasp::context_to_grasps(*obj, world.lib);
  } catch (const Error& e) {
    if (e.code() != Errc::NoApplicableGrasp) throw;
    throw Error(Errc::DatasetContextMismatch, "harness", where + ": fixated object has no applicable grasp");
  }
  if (!cs.admits(world.lib, s.y)) {
    throw Error(Errc::DatasetContextMismatch, "harness",
                where + ": " + std::string(signal::gesture_name(s.y)) + " is not a candidate for object " +
                    std::to_string(*hit));
  }
  return cs;
}

json matrix(const std::array<std::array<int, 6>, 6>& m) {
  json out = json::array();
  for (const auto& row : m) out.push_back(std::vector<int>(row.begin(), row.end()));
  return out;
}

}  // namespace

EvalReport evaluate(std::span<const Sample> samples, const classify::Pipeline& model, const World& world,
                    const RunConfig& cfg, Mode mode) {
  if (samples.empty()) throw Error(Errc::EmptyInput, "harness", "evaluation set is empty");
  EvalReport r;
  r.mode = mode;
  r.n_samples = static_cast<int>(samples.size());
  r.noise_sigma = samples.front().sigma;
  r.has_spiking = model.has_spiking();
  const controller::Context ctx{&world.lib, world.scene.objects, cfg.controller_config()};

  int correct_u = 0, correct_r = 0, s_agree = 0, s_correct_u = 0, s_correct_r = 0;
  double lat_d = 0.0, lat_s = 0.0, ratio = 0.0;
  std::vector<ControlEvent> events;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    const auto cs = sample_context(s, world, i);
    const int y = signal::gesture_code(s.y);

    const auto d = model.classify_features(s.x, classify::Backend::Dense);
    lat_d += d.latency_us;
    const auto rd = grasp::restrict_classify(d.logits, cs, world.lib);
    const int pu = signal::gesture_code(d.label);
    const int pr = signal::gesture_code(rd.label);
    r.confusion[y][pu]++;
    r.confusion_restricted[y][pr]++;
    correct_u += pu == y;
    correct_r += pr == y;

    if (r.has_spiking) {
      const auto sp = model.classify_features(s.x, classify::Backend::Spiking);
      lat_s += sp.latency_us;
      ratio += sp.energy->event_ratio;
      r.dense_macs = sp.energy->dense_macs;
      s_agree += sp.label == d.label;
      s_correct_u += sp.label == s.y;
      s_correct_r += grasp::restrict_classify(sp.logits, cs, world.lib).label == s.y;
    }

    // Drive the controller with this window's decision, held for the
    // confirmation dwell, then release.
    const bool restricted = mode == Mode::Restricted;
    const controller::EmgDecision dec{restricted ? rd.label : d.label, restricted ? rd.confidence : d.confidence};
    events.clear();
    events.push_back(controller::Fixation{cs.source_object});
    for (int k = 0; k < cfg.confirm_windows; ++k) events.push_back(dec);
    events.push_back(controller::Tick{static_cast<double>(cfg.ramp_ms)});
    events.push_back(controller::Release{});
    events.push_back(controller::Tick{static_cast<double>(cfg.ramp_ms)});
    const auto tr = controller::run_trace(controller::Idle{}, events, ctx);
    r.rejected_decisions += tr.rejected;
    const auto allowed = cs.labels(world.lib);
    for (const auto& e : tr.log) {
      if (!e.label) continue;
      ++r.grasp_commands;
      // The log audit, plus an independent check against this sample's context.
      if (std::find(allowed.begin(), allowed.end(), *e.label) == allowed.end()) ++r.unsafe_executions;
    }
    r.unsafe_executions += controller::audit_log(tr.log);
  }
  const double n = static_cast<double>(samples.size());
  r.acc_unrestricted = correct_u / n;
  r.acc_restricted = correct_r / n;
  r.lift = r.acc_restricted - r.acc_unrestricted;
  r.mean_latency_dense_us = lat_d / n;
  if (r.has_spiking) {
    r.spiking_agreement = s_agree / n;
    r.spiking_acc_unrestricted = s_correct_u / n;
    r.spiking_acc_restricted = s_correct_r / n;
    r.mean_event_ratio = ratio / n;
    r.mean_latency_spiking_us = lat_s / n;
  }
  return r;
}

std::string report_json(const EvalReport& r, std::uint64_t seed) {
  json j;
  j["report"] = "mechanism reproduction on synthetic EMG; not a replication of amputee data";
  j["mode"] = r.mode == Mode::Restricted ? "restricted" : "unrestricted";
  j["seed"] = seed;
  j["n_samples"] = r.n_samples;
  j["noise_sigma"] = r.noise_sigma;
  j["acc_unrestricted"] = r.acc_unrestricted;
  j["acc_restricted"] = r.acc_restricted;
  j["lift"] = r.lift;
  j["confusion"] = matrix(r.confusion);
  j["confusion_restricted"] = matrix(r.confusion_restricted);
  j["unsafe_executions"] = r.unsafe_executions;
  j["rejected_decisions"] = r.rejected_decisions;
  j["grasp_commands"] = r.grasp_commands;
  if (r.has_spiking) {
    j["spiking"] = {{"agreement", r.spiking_agreement},
                    {"acc_unrestricted", r.spiking_acc_unrestricted},
                    {"acc_restricted", r.spiking_acc_restricted}};
    j["mean_event_ratio"] = r.mean_event_ratio;
    j["dense_macs"] = r.dense_macs;
  } else {
    j["spiking"] = nullptr;
    j["mean_event_ratio"] = nullptr;
  }
  json lat;
  lat["dense_mean_us"] = r.mean_latency_dense_us;
  lat["spiking_mean_us"] = r.has_spiking ? json(r.mean_latency_spiking_us) : json(nullptr);
  j["latency"] = lat;
  return j.dump(2);
}

double accuracy_at(const RunConfig& cfg, const classify::Pipeline& model, double sigma, int n) {
  if (n <= 0) throw Error(Errc::EmptyInput, "harness", "validation set is empty");
  int correct = 0;
  for (int i = 0; i < n; ++i) {
    const auto y = static_cast<GestureLabel>(i % signal::kGestureCount);
    const auto seed = mix_seed(cfg.seed, 4, static_cast<std::uint64_t>(i));
    const auto x = signal::extract_features(synth_window(y, sigma, cfg.mains_amp, seed));
    correct += model.classify_features(x, classify::Backend::Dense).label == y;
  }
  return static_cast<double>(correct) / n;
}

CalibrationResult calibrate_noise(const RunConfig& cfg, const classify::Pipeline& model, double target, double tol) {
  const auto& c = cfg.calibration;
  const int n = cfg.dataset.validation;
  CalibrationResult res;
  const auto probe = [&](double sigma) {
    const double a = accuracy_at(cfg, model, sigma, n);
    res.probes.emplace_back(sigma, a);
    ++res.iterations;
    return a;
  };
  const auto monotone_or_throw = [&] {
    auto p = res.probes;
    std::sort(p.begin(), p.end());
    for (std::size_t i = 1; i < p.size(); ++i) {
      // Same seeds at every sigma, so only sampling jitter of a few windows is tolerated.
      if (p[i].second > p[i - 1].second + 0.005) {
        throw Error(Errc::CalibrationFailed, "harness",
                    "accuracy rises from " + std::to_string(p[i - 1].second) + " to " + std::to_string(p[i].second) +
                        " between sigma " + std::to_string(p[i - 1].first) + " and " + std::to_string(p[i].first));
      }
    }
  };
  const auto done = [&](double sigma, double acc) {
    monotone_or_throw();
    res.sigma = sigma;
    res.accuracy = acc;
    return res;
  };

  double lo = c.sigma_lo, hi = c.sigma_hi;
  const double a_lo = probe(lo);
  if (std::abs(a_lo - target) <= tol) return done(lo, a_lo);
  if (a_lo < target) {
    throw Error(Errc::CalibrationFailed, "harness",
                "target " + std::to_string(target) + " above accuracy " + std::to_string(a_lo) + " at bracket floor");
  }
  const double a_hi = probe(hi);
  if (std::abs(a_hi - target) <= tol) return done(hi, a_hi);
  if (a_hi > target) {
    throw Error(Errc::CalibrationFailed, "harness",
                "target " + std::to_string(target) + " below accuracy " + std::to_string(a_hi) + " at sigma " +
                    std::to_string(hi));
  }
  for (int it = 0; it < c.max_iter; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double a = probe(mid);
    if (std::abs(a - target) <= tol) return done(mid, a);
    if (a > target) lo = mid;
    else hi = mid;
  }
  monotone_or_throw();
  throw Error(Errc::CalibrationFailed, "harness", "no sigma within tolerance after " + std::to_string(c.max_iter) + " steps");
}

}  // namespace nm::harness
