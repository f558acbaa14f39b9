#include "neuromanip/error.hpp"
#include "neuromanip/signal.hpp"

#include <cmath>

namespace nm::signal {

namespace {
constexpr std::array<std::string_view, kGestureCount> kGestureNames = {
    "Rest", "CylindricalGrip", "LateralPinch", "TripodPinch", "OpenHand", "IndexPoint"};
}

std::string_view gesture_name(GestureLabel g) noexcept {
  const int c = gesture_code(g);
  return (c >= 0 && c < kGestureCount) ? kGestureNames[static_cast<std::size_t>(c)] : "?";
}

std::optional<GestureLabel> parse_gesture(std::string_view name) noexcept {
  for (int i = 0; i < kGestureCount; ++i) {
    if (kGestureNames[static_cast<std::size_t>(i)] == name) return static_cast<GestureLabel>(i);
  }
  return std::nullopt;
}

std::optional<GestureLabel> gesture_from_code(int code) noexcept {
  if (code < 0 || code >= kGestureCount) return std::nullopt;
  return static_cast<GestureLabel>(code);
}

EmgWindow make_window(std::span<const EmgFrame> frames, std::size_t offset, int width) {
  if (width <= 0 || offset + static_cast<std::size_t>(width) > frames.size()) {
    throw Error(Errc::StreamTooShort, "signal", "window exceeds stream");
  }
  EmgWindow w;
  w.start_us = frames[offset].timestamp_us;
  w.width = width;
  w.samples.resize(static_cast<std::size_t>(kChannels * width));
  for (int i = 0; i < width; ++i) {
    const auto& f = frames[offset + static_cast<std::size_t>(i)];
    for (int ch = 0; ch < kChannels; ++ch) w.samples[static_cast<std::size_t>(ch * width + i)] = f.channels[ch];
  }
  return w;
}

std::vector<EmgWindow> window_stream(std::span<const EmgFrame> frames, WindowParams params) {
  if (params.width <= 0 || params.stride <= 0) {
    throw Error(Errc::Validation, "signal", "window width and stride must be positive");
  }
  const auto n = frames.size();
  const auto w = static_cast<std::size_t>(params.width);
  if (n < w) {
    throw Error(Errc::StreamTooShort, "signal",
                std::to_string(n) + " frames, need at least " + std::to_string(w));
  }
  const std::size_t count = (n - w) / static_cast<std::size_t>(params.stride) + 1;
  std::vector<EmgWindow> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    out.push_back(make_window(frames, k * static_cast<std::size_t>(params.stride), params.width));
  }
  return out;
}

FeatureVector extract_features(const EmgWindow& window) {
  FeatureVector f{};
  const int w = window.width;
  if (w <= 0) return f;
  for (int ch = 0; ch < kChannels; ++ch) {
    const double* x = window.samples.data() + static_cast<std::ptrdiff_t>(ch) * w;
    double abs_sum = 0.0, sq_sum = 0.0, wl = 0.0;
    int zc = 0;
    for (int i = 0; i < w; ++i) {
      abs_sum += std::abs(x[i]);
      sq_sum += x[i] * x[i];
      if (i + 1 < w) {
        wl += std::abs(x[i + 1] - x[i]);
        const bool crossing = (x[i] > 0.0) != (x[i + 1] > 0.0);
        if (crossing && std::abs(x[i]) > kZeroCrossingThreshold &&
            std::abs(x[i + 1]) > kZeroCrossingThreshold) {
          ++zc;
        }
      }
    }
    const auto base = static_cast<std::size_t>(ch * kFeaturesPerChannel);
    f[base + 0] = abs_sum / w;
    f[base + 1] = std::sqrt(sq_sum / w);
    f[base + 2] = wl;
    f[base + 3] = zc;
  }
  return f;
}

}  // namespace nm::signal
