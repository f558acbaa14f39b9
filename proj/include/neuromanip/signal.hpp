#pragma once

// EMG front end: 8-channel frames at 200 Hz, band-pass + mains notch
// conditioning, sliding windows and time-domain features.

#include <array>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace nm::signal {

inline constexpr int kChannels = 8;
inline constexpr double kSampleRateHz = 200.0;
inline constexpr std::int64_t kFramePeriodUs = 5000;
inline constexpr int kFeaturesPerChannel = 4;
inline constexpr int kFeatureCount = kChannels * kFeaturesPerChannel;
inline constexpr int kGestureCount = 6;
inline constexpr double kZeroCrossingThreshold = 0.01;

enum class GestureLabel : int {
  Rest = 0,
  CylindricalGrip = 1,
  LateralPinch = 2,
  TripodPinch = 3,
  OpenHand = 4,
  IndexPoint = 5,
};

std::string_view gesture_name(GestureLabel g) noexcept;
std::optional<GestureLabel> parse_gesture(std::string_view name) noexcept;
std::optional<GestureLabel> gesture_from_code(int code) noexcept;
inline int gesture_code(GestureLabel g) noexcept { return static_cast<int>(g); }

struct EmgFrame {
  std::int64_t timestamp_us = 0;
  std::array<double, kChannels> channels{};

  bool operator==(const EmgFrame&) const = default;
};

// Second-order section, a0 normalized to 1.
struct Biquad {
  std::array<double, 3> b{1.0, 0.0, 0.0};
  std::array<double, 2> a{0.0, 0.0};

  std::complex<double> response(double freq_hz, double fs) const;
  bool stable() const;
};

std::vector<Biquad> design_butterworth_bandpass(int prototype_order, double low_hz, double high_hz,
                                                double fs);
Biquad design_notch(double center_hz, double q, double fs);

// Cascade of biquads with independent transposed direct-form II state per
// channel. Not thread-safe; one stream at a time.
class FilterChain {
 public:
  FilterChain() = default;
  FilterChain(std::vector<Biquad> sections, double fs);

  std::span<const Biquad> sections() const noexcept { return sections_; }
  double sample_rate() const noexcept { return fs_; }

  std::complex<double> response(double freq_hz) const;
  double magnitude_db(double freq_hz) const;
  bool stable() const;

  void reset();
  bool is_reset() const;

  // Filters one scalar through the cascade using channel `ch`'s state.
  double process_sample(int ch, double x);
  EmgFrame process(const EmgFrame& frame);

 private:
  std::vector<Biquad> sections_;
  double fs_ = kSampleRateHz;
  // state_[ch * sections * 2 + s * 2 + {0,1}]
  std::vector<double> state_;
  std::optional<std::int64_t> last_timestamp_;

  friend std::vector<EmgFrame> filter_stream(FilterChain&, std::span<const EmgFrame>);
};

inline constexpr double kBandLowHz = 2.0;
inline constexpr double kBandHighHz = 40.0;
inline constexpr double kMainsHz = 50.0;
inline constexpr double kNotchQ = 30.0;

// 4th-order Butterworth 2-40 Hz band-pass followed by a Q=30 notch at 50 Hz.
FilterChain design_filter_chain(double fs);

// Causal filtering. Continues from the chain's current state; throws
// NonMonotonicTimestamps if timestamps do not strictly increase.
std::vector<EmgFrame> filter_stream(FilterChain& chain, std::span<const EmgFrame> frames);

struct WindowParams {
  int width = 40;
  int stride = 10;
};

struct EmgWindow {
  std::int64_t start_us = 0;
  int width = 0;
  // channel-major: samples[ch * width + i]
  std::vector<double> samples;

  double at(int ch, int i) const { return samples[static_cast<std::size_t>(ch * width + i)]; }
};

std::vector<EmgWindow> window_stream(std::span<const EmgFrame> frames, WindowParams params = {});
EmgWindow make_window(std::span<const EmgFrame> frames, std::size_t offset, int width);

using FeatureVector = std::array<double, kFeatureCount>;

// Per channel {MAV, RMS, waveform length, zero crossings}, channel-major.
FeatureVector extract_features(const EmgWindow& window);

struct SynthEmgModel {
  std::array<std::array<double, kChannels>, kGestureCount> activation{};
  double noise_sigma = 0.0;
  double mains_amp = 0.0;
  std::uint64_t seed = 0;

  static SynthEmgModel with_default_activation(double noise_sigma, double mains_amp,
                                               std::uint64_t seed);
};

// Activation gains used by the bundled synthetic dataset.
std::array<std::array<double, kChannels>, kGestureCount> default_activation();

std::vector<EmgFrame> synth_emg(const SynthEmgModel& model, GestureLabel gesture, int duration_ms,
                                std::int64_t start_us = 0);

// A sequence of (gesture, duration_ms) segments sharing one noise state, so
// the concatenated stream is continuous.
std::vector<EmgFrame> synth_emg_segments(
    const SynthEmgModel& model, std::span<const std::pair<GestureLabel, int>> segments,
    std::int64_t start_us = 0);

// CSV with header `t_us,ch1,...,ch8`.
void write_emg_csv(const std::filesystem::path& path, std::span<const EmgFrame> frames);
std::vector<EmgFrame> read_emg_csv(const std::filesystem::path& path);

}  // namespace nm::signal
