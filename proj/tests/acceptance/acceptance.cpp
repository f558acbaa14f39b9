// Acceptance gate: one PASS/FAIL line per criterion; exit 3 on any failure.

#include "neuromanip/classify.hpp"
#include "neuromanip/controller.hpp"
#include "neuromanip/error.hpp"
#include "neuromanip/grasp.hpp"
#include "neuromanip/harness.hpp"
#include "neuromanip/signal.hpp"
#include "oracles.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <random>
#include <map>
#include <string>

using namespace nm;
using namespace nm::harness;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

// ---- pinned tolerances ----------------------------------------------------
constexpr double kAccTarget = 0.83, kAccBand = 0.05;
constexpr double kMinRestricted = 0.90, kMinLift = 0.08;
constexpr double kLiftBudgetS = 120.0;
constexpr int kFuzzScenarios = 10000, kFuzzEvents = 80;
constexpr double kSafetyBudgetS = 300.0;
constexpr double kMinAgreement = 0.90;
constexpr int kEncodeVectors = 20000;
constexpr double kMaxEventRatio = 0.10;
constexpr double kLatencyBudgetUs = 5000.0;
constexpr double kMaxDb50 = -30.0, kBand20Db = 1.0, kMaxDbDc = -40.0, kMinNotchReduction = 0.99;

int failures = 0;

void report(const char* name, bool ok, const std::string& detail) {
  std::cout << (ok ? "PASS " : "FAIL ") << name << ": " << detail << std::endl;
  if (!ok) ++failures;
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Trained {
  classify::Pipeline model;
  double sigma = 0.0;
};

// Train, convert and calibrate exactly as the command-line pipeline does.
Trained build(const RunConfig& cfg, const World& world) {
  const auto train = generate_dataset(cfg, world, Split::Train);
  classify::Pipeline p(train_model(cfg, train).net);
  const auto calib = generate_dataset(cfg, world, Split::Calib);
  p.set_spiking(convert_model(cfg, p.dense(), calib));
  const auto cal = calibrate_noise(cfg, p, cfg.calibration.target, cfg.calibration.tol);
  return {std::move(p), cal.sigma};
}

std::string without_latency(const std::string& report_text) {
  auto j = json::parse(report_text);
  j.erase("latency");
  return j.dump();
}

// ---- safety fuzz ------------------------------------------------------------

struct FuzzStats {
  int unsafe = 0;
  int commands = 0;
  int executions = 0;
  int rejected = 0;
};

// Random event streams; every grasp command must carry a label admitted for
// the object most recently fixated, checked against the grasp module directly.
FuzzStats fuzz_controller(const RunConfig& cfg, const World& world) {
  const controller::Context ctx{&world.lib, world.scene.objects, cfg.controller_config()};
  std::vector<int> ids;
  for (const auto& o : world.scene.objects) ids.push_back(o.id);
  std::map<int, std::vector<signal::GestureLabel>> admitted;
  for (const auto& o : world.scene.objects) {
    try {
      admitted[o.id] = grasp::context_to_grasps(o, world.lib).labels(world.lib);
    } catch (const Error&) {
      admitted[o.id] = {};
    }
  }

  FuzzStats s;
  std::mt19937_64 rng(mix_seed(cfg.seed, 900));
  std::uniform_int_distribution<int> kind(0, 99);
  std::uniform_int_distribution<int> pick_id(0, static_cast<int>(ids.size()));  // last: unknown id
  std::uniform_int_distribution<int> pick_label(0, signal::kGestureCount - 1);
  std::uniform_real_distribution<double> conf(0.5, 1.0);
  std::uniform_real_distribution<double> dt(1.0, 400.0);

  for (int sc = 0; sc < kFuzzScenarios; ++sc) {
    controller::Controller ctl(ctx);
    std::optional<int> last_fix;
    auto label = signal::GestureLabel::Rest;
    for (int e = 0; e < kFuzzEvents; ++e) {
      const int k = kind(rng);
      controller::ControlEvent ev;
      if (k < 12) {
        const int i = pick_id(rng);
        std::optional<int> id;
        if (k < 10) id = i < static_cast<int>(ids.size()) ? ids[i] : 999;
        ev = controller::Fixation{id};
        last_fix = id;
      } else if (k < 15) {
        ev = controller::FixationLost{};
        last_fix.reset();
      } else if (k < 65) {
        // New intents are half uniform, half drawn from what the fixated object admits; otherwise hold.
        if (k < 25) {
          const auto& adm = last_fix && admitted.count(*last_fix) ? admitted[*last_fix] : std::vector<signal::GestureLabel>{};
          label = (k < 20 && !adm.empty()) ? adm[rng() % adm.size()] : static_cast<signal::GestureLabel>(pick_label(rng));
        }
        ev = controller::EmgDecision{label, conf(rng)};
      } else if (k < 72) {
        ev = controller::CycleGesture{};
      } else if (k < 95) {
        ev = controller::Tick{dt(rng)};
      } else {
        ev = controller::Release{};
      }
      const std::size_t before = ctl.log().size();
      ctl.apply(ev);
      if (ctl.log().size() == before) continue;
      ++s.commands;
      const auto& entry = ctl.log().back();
      const bool actuates = std::any_of(entry.setpoints.begin(), entry.setpoints.end(), [](double v) { return v != 0.0; });
      if (!actuates) continue;
      ++s.executions;
      const auto& ok = last_fix && admitted.count(*last_fix) ? admitted[*last_fix] : std::vector<signal::GestureLabel>{};
      const bool safe = entry.label && std::find(ok.begin(), ok.end(), *entry.label) != ok.end() &&
                        entry.setpoints == world.lib.setpoints(*entry.label);
      if (!safe) ++s.unsafe;
    }
    s.unsafe += controller::audit_log(ctl.log());
    s.rejected += ctl.rejected();
  }
  return s;
}

// ---- encode exactness ---------------------------------------------------------

// Returns the number of neurons whose spike count differs from floor(T x).
long encode_mismatches(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.2, 1.2);
  std::uniform_int_distribution<int> steps(1, 256);
  long bad = 0;
  for (int v = 0; v < kEncodeVectors; ++v) {
    const int T = v < 64 ? classify::kDefaultTimesteps : steps(rng);
    std::vector<double> x(signal::kFeatureCount);
    for (std::size_t i = 0; i < x.size(); ++i) {
      switch (rng() % 4) {
        case 0: x[i] = static_cast<double>(rng() % (T + 1)) / T; break;  // exact multiples of 1/T
        case 1: x[i] = (rng() % 2) ? 0.0 : 1.0; break;
        default: x[i] = u(rng);
      }
    }
    const auto train = classify::encode_rate(x, T);
    for (int i = 0; i < static_cast<int>(x.size()); ++i) {
      const double c = std::clamp(x[i], 0.0, 1.0);
      if (train.count(i) != static_cast<int>(std::floor(T * c))) ++bad;
    }
  }
  return bad;
}

// ---- filter ---------------------------------------------------------------------

double notch_worst_retained(double mains_amp) {
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto m = signal::SynthEmgModel::with_default_activation(0.05, mains_amp, seed);
    const auto raw = signal::synth_emg(m, static_cast<signal::GestureLabel>(seed % signal::kGestureCount), 10000);
    auto chain = signal::design_filter_chain(signal::kSampleRateHz);
    const auto out = signal::filter_stream(chain, raw);
    for (int ch = 0; ch < signal::kChannels; ++ch) {
      std::vector<double> pre, post;
      for (std::size_t i = 0; i < raw.size(); ++i) {
        pre.push_back(raw[i].channels[ch]);
        post.push_back(out[i].channels[ch]);
      }
      worst = std::max(worst, oracle::band_power(post, 49.0, 51.0, signal::kSampleRateHz) /
                                  oracle::band_power(pre, 49.0, 51.0, signal::kSampleRateHz));
    }
  }
  return worst;
}

// ---- study -----------------------------------------------------------------------

struct Published {
  const char* metric;
  double means[3];
};

// Figure values for the 100 / 200 / 300 g conditions.
constexpr Published kPublished[] = {
    {"completion_s", {51.6, 67.5, 92.1}},   {"fatigue_index_s", {2.5, 4.7, 12.2}},
    {"tlx_mental", {5.8, 8.3, 10.7}},       {"tlx_physical", {3.9, 9.5, 16.5}},
    {"tlx_temporal", {5.6, 7.2, 11.8}},     {"tlx_performance", {15.1, 13.1, 8.2}},
    {"tlx_effort", {5.2, 10.7, 17.4}},      {"tlx_frustration", {3.4, 6.3, 11.9}},
};

}  // namespace

int main() {
  try {
    const auto cfg = load_config(std::filesystem::path(NEUROMANIP_DATA_DIR) / "config.json");
    const auto world = load_world(cfg);

    // Restriction lift.
    const auto t_lift = Clock::now();
    const auto run1 = build(cfg, world);
    const auto test = generate_dataset(cfg, world, Split::Test, run1.sigma);
    const auto eval = evaluate(test, run1.model, world, cfg, Mode::Restricted);
    const double lift_s = seconds_since(t_lift);
    report("restriction_lift",
           std::abs(eval.acc_unrestricted - kAccTarget) <= kAccBand && eval.acc_restricted >= kMinRestricted &&
               eval.lift >= kMinLift && test.size() == 6000 && lift_s < kLiftBudgetS,
           fmt("sigma*=%.4f acc_unrestricted=%.4f acc_restricted=%.4f lift=%.4f", run1.sigma, eval.acc_unrestricted,
               eval.acc_restricted, eval.lift) +
               fmt(" n=%.0f runtime=%.1fs", static_cast<double>(test.size()), lift_s));

    // Safety.
    const auto t_safe = Clock::now();
    const auto fz = fuzz_controller(cfg, world);
    const double safe_s = seconds_since(t_safe);
    report("safety",
           eval.unsafe_executions == 0 && fz.unsafe == 0 && fz.executions > 0 && eval.grasp_commands > 0 &&
               safe_s < kSafetyBudgetS,
           fmt("eval unsafe=%.0f of %.0f commands; fuzz unsafe=%.0f of %.0f executions", eval.unsafe_executions,
               eval.grasp_commands, fz.unsafe, fz.executions) +
               fmt(" (%.0f scenarios, %.0f rejections) runtime=%.1fs", kFuzzScenarios, fz.rejected, safe_s));

    // Spiking fidelity and exact rate coding.
    const long enc_bad = encode_mismatches(mix_seed(cfg.seed, 901));
    report("snn_fidelity", eval.has_spiking && eval.spiking_agreement >= kMinAgreement && enc_bad == 0,
           fmt("top-1 agreement=%.4f at T=%.0f; encode_rate mismatches=%.0f over %.0f vectors",
               eval.spiking_agreement, run1.model.spiking().timesteps, static_cast<double>(enc_bad), kEncodeVectors));

    // Energy proxy.
    report("energy_proxy", eval.has_spiking && eval.mean_event_ratio <= kMaxEventRatio,
           fmt("mean synaptic events / dense MACs=%.4f (limit %.2f, dense MACs=%.0f)", eval.mean_event_ratio,
               kMaxEventRatio, static_cast<double>(eval.dense_macs)));

    // Latency.
    std::vector<signal::EmgWindow> windows;
    for (int i = 0; i < 240; ++i)
      windows.push_back(synth_window(static_cast<signal::GestureLabel>(i % signal::kGestureCount), run1.sigma,
                                     cfg.mains_amp, mix_seed(cfg.seed, 30, static_cast<std::uint64_t>(i))));
    const auto bd = bench_latency(run1.model, classify::Backend::Dense, windows, cfg.bench.n, cfg.bench.warmup);
    const auto bs = bench_latency(run1.model, classify::Backend::Spiking, windows, cfg.bench.n, cfg.bench.warmup);
    report("latency", bd.mean_us < kLatencyBudgetUs && bs.mean_us < kLatencyBudgetUs,
           fmt("classify_window mean dense=%.1fus spiking=%.1fus (budget %.0fus)", bd.mean_us, bs.mean_us,
               kLatencyBudgetUs));

    // Filter.
    const auto chain = signal::design_filter_chain(signal::kSampleRateHz);
    const double db50 = oracle::cascade_magnitude_db(chain.sections(), 50.0, signal::kSampleRateHz);
    const double db20 = oracle::cascade_magnitude_db(chain.sections(), 20.0, signal::kSampleRateHz);
    const double db0 = oracle::cascade_magnitude_db(chain.sections(), 0.0, signal::kSampleRateHz);
    const double retained = notch_worst_retained(0.5);
    report("filter", db50 <= kMaxDb50 && std::abs(db20) <= kBand20Db && db0 <= kMaxDbDc &&
                         1.0 - retained >= kMinNotchReduction,
           fmt("50Hz=%.1fdB 20Hz=%.2fdB DC=%.1fdB mains band power reduction=%.5f", db50, db20, db0, 1.0 - retained));

    // Study analytics.
    const auto rows = study_stats(read_study_csv(std::filesystem::path(NEUROMANIP_DATA_DIR) /
                                                 "reference_study_aggregates.csv"));
    int matched = 0, checked = 0;
    const int masses[] = {100, 200, 300};
    for (const auto& p : kPublished) {
      for (int i = 0; i < 3; ++i) {
        ++checked;
        for (const auto& r : rows)
          if (r.metric == p.metric && r.mass_g == masses[i] && r.mean == p.means[i]) ++matched;
      }
    }
    report("study_analytics", matched == checked,
           fmt("%.0f of %.0f published means reproduced exactly", matched, checked));

    // Determinism: an independent second run from scratch.
    const auto run2 = build(cfg, world);
    const auto test2 = generate_dataset(cfg, world, Split::Test, run2.sigma);
    const auto eval2 = evaluate(test2, run2.model, world, cfg, Mode::Restricted);
    const auto a = without_latency(report_json(eval, cfg.seed));
    const auto b = without_latency(report_json(eval2, cfg.seed));
    report("determinism", a == b && run1.sigma == run2.sigma,
           std::string("two runs from scratch; reports identical excluding latency: ") + (a == b ? "yes" : "no") +
               fmt(" (%.0f bytes), sigma* %.4f vs %.4f", static_cast<double>(a.size()), run1.sigma, run2.sigma));
  } catch (const Error& e) {
    std::cout << "FAIL setup: " << e.what() << std::endl;
    return 3;
  }
  std::cout << (failures == 0 ? "ALL PASS" : std::to_string(failures) + " FAILED") << std::endl;
  return failures == 0 ? 0 : 3;
}
