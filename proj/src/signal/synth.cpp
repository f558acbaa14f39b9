#include "neuromanip/error.hpp"
#include "neuromanip/signal.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

namespace nm::signal {

namespace {

constexpr int kNoiseWarmupSamples = 400;

const std::vector<Biquad>& shaping_sections() {
  static const std::vector<Biquad> sections =
      design_butterworth_bandpass(2, kBandLowHz, kBandHighHz, kSampleRateHz);
  return sections;
}

// Output RMS of the shaping filter driven by unit white noise, from the
// energy of its impulse response.
double shaping_noise_gain() {
  static const double gain = [] {
    FilterChain probe(shaping_sections(), kSampleRateHz);
    double energy = 0.0;
    for (int i = 0; i < 20000; ++i) {
      const double y = probe.process_sample(0, i == 0 ? 1.0 : 0.0);
      energy += y * y;
    }
    return std::sqrt(energy);
  }();
  return gain;
}

}  // namespace

std::array<std::array<double, kChannels>, kGestureCount> default_activation() {
  return {{
      {0.06, 0.06, 0.06, 0.06, 0.06, 0.06, 0.06, 0.06},  // Rest
      {0.85, 0.75, 0.55, 0.25, 0.15, 0.15, 0.35, 0.65},  // CylindricalGrip
      {0.30, 0.70, 0.85, 0.60, 0.20, 0.10, 0.15, 0.25},  // LateralPinch
      {0.20, 0.30, 0.55, 0.85, 0.70, 0.30, 0.15, 0.15},  // TripodPinch
      {0.15, 0.15, 0.20, 0.35, 0.65, 0.85, 0.70, 0.30},  // OpenHand
      {0.60, 0.20, 0.15, 0.15, 0.30, 0.50, 0.85, 0.60},  // IndexPoint
  }};
}

SynthEmgModel SynthEmgModel::with_default_activation(double noise_sigma, double mains_amp,
                                                     std::uint64_t seed) {
  SynthEmgModel m;
  m.activation = default_activation();
  m.noise_sigma = noise_sigma;
  m.mains_amp = mains_amp;
  m.seed = seed;
  return m;
}

std::vector<EmgFrame> synth_emg_segments(const SynthEmgModel& model,
                                         std::span<const std::pair<GestureLabel, int>> segments,
                                         std::int64_t start_us) {
  int total_ms = 0;
  for (const auto& [g, ms] : segments) {
    if (!gesture_from_code(gesture_code(g))) {
      throw Error(Errc::Validation, "signal", "unknown gesture code");
    }
    if (ms <= 0) throw Error(Errc::DurationTooShort, "signal", "segment duration must be positive");
    total_ms += ms;
  }
  if (total_ms < 200) {
    throw Error(Errc::DurationTooShort, "signal",
                std::to_string(total_ms) + " ms, need at least 200 ms");
  }
  if (model.noise_sigma < 0.0 || model.mains_amp < 0.0) {
    throw Error(Errc::Validation, "signal", "noise_sigma and mains_amp must be nonnegative");
  }

  std::mt19937_64 rng(model.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  FilterChain shaper(shaping_sections(), kSampleRateHz);
  const double inv_gain = 1.0 / shaping_noise_gain();

  std::array<double, kChannels> band{};
  auto advance_noise = [&] {
    for (int ch = 0; ch < kChannels; ++ch) band[ch] = shaper.process_sample(ch, normal(rng)) * inv_gain;
  };
  for (int i = 0; i < kNoiseWarmupSamples; ++i) advance_noise();

  std::vector<EmgFrame> frames;
  frames.reserve(static_cast<std::size_t>(total_ms) * 1000 / kFramePeriodUs + 1);
  std::int64_t t = start_us;
  for (const auto& [g, ms] : segments) {
    const auto& gains = model.activation[static_cast<std::size_t>(gesture_code(g))];
    const auto n = static_cast<std::int64_t>(ms) * 1000 / kFramePeriodUs;
    for (std::int64_t i = 0; i < n; ++i) {
      advance_noise();
      EmgFrame f;
      f.timestamp_us = t;
      const double mains =
          model.mains_amp * std::sin(2.0 * std::numbers::pi * kMainsHz * static_cast<double>(t) * 1e-6);
      for (int ch = 0; ch < kChannels; ++ch) {
        f.channels[ch] = gains[ch] * band[ch] + mains + model.noise_sigma * normal(rng);
      }
      frames.push_back(f);
      t += kFramePeriodUs;
    }
  }
  return frames;
}

std::vector<EmgFrame> synth_emg(const SynthEmgModel& model, GestureLabel gesture, int duration_ms,
                                std::int64_t start_us) {
  if (duration_ms < 200) {
    throw Error(Errc::DurationTooShort, "signal",
                std::to_string(duration_ms) + " ms, need at least 200 ms");
  }
  const std::pair<GestureLabel, int> seg{gesture, duration_ms};
  return synth_emg_segments(model, std::span(&seg, 1), start_us);
}

void write_emg_csv(const std::filesystem::path& path, std::span<const EmgFrame> frames) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "signal", "cannot write " + path.string());
  out << "t_us";
  for (int ch = 1; ch <= kChannels; ++ch) out << ",ch" << ch;
  out << '\n';
  char buf[64];
  for (const auto& f : frames) {
    out << f.timestamp_us;
    for (double v : f.channels) {
      auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
      out << ',' << std::string_view(buf, static_cast<std::size_t>(end - buf));
    }
    out << '\n';
  }
}

std::vector<EmgFrame> read_emg_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "signal", "cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw Error(Errc::Validation, "signal", path.string() + ": empty file");
  std::string expected = "t_us";
  for (int ch = 1; ch <= kChannels; ++ch) expected += ",ch" + std::to_string(ch);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != expected) {
    throw Error(Errc::Validation, "signal", path.string() + ":1: expected header '" + expected + "'");
  }
  std::vector<EmgFrame> frames;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    EmgFrame f;
    const char* p = line.data();
    const char* end = line.data() + line.size();
    auto fail = [&](const char* what) {
      throw Error(Errc::Validation, "signal",
                  path.string() + ":" + std::to_string(lineno) + ": " + what);
    };
    auto r = std::from_chars(p, end, f.timestamp_us);
    if (r.ec != std::errc{}) fail("bad t_us");
    p = r.ptr;
    for (int ch = 0; ch < kChannels; ++ch) {
      if (p == end || *p != ',') fail("expected 9 columns");
      ++p;
      r = std::from_chars(p, end, f.channels[ch]);
      if (r.ec != std::errc{}) fail("bad channel value");
      p = r.ptr;
    }
    if (p != end && !(*p == '\r' && p + 1 == end)) fail("trailing data");
    frames.push_back(f);
  }
  return frames;
}

}  // namespace nm::signal
