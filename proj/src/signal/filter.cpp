#include "neuromanip/error.hpp"
#include "neuromanip/signal.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace nm::signal {

namespace {

using cplx = std::complex<double>;

cplx bilinear(cplx s, double fs) { return (2.0 * fs + s) / (2.0 * fs - s); }

double prewarp(double f, double fs) { return 2.0 * fs * std::tan(std::numbers::pi * f / fs); }

}  // namespace

cplx Biquad::response(double freq_hz, double fs) const {
  const cplx zinv = std::polar(1.0, -2.0 * std::numbers::pi * freq_hz / fs);
  const cplx num = b[0] + zinv * (b[1] + zinv * b[2]);
  const cplx den = 1.0 + zinv * (a[0] + zinv * a[1]);
  return num / den;
}

bool Biquad::stable() const {
  // Jury conditions for z^2 + a1 z + a2.
  return std::abs(a[1]) < 1.0 && std::abs(a[0]) < 1.0 + a[1];
}

std::vector<Biquad> design_butterworth_bandpass(int prototype_order, double low_hz,
                                                double high_hz, double fs) {
  if (prototype_order <= 0 || prototype_order % 2 != 0) {
    throw Error(Errc::Validation, "signal", "band-pass prototype order must be even and positive");
  }
  if (!(low_hz > 0.0 && low_hz < high_hz && high_hz < fs / 2.0)) {
    throw Error(Errc::Validation, "signal", "band edges must satisfy 0 < low < high < fs/2");
  }
  const double wl = prewarp(low_hz, fs);
  const double wh = prewarp(high_hz, fs);
  const double w0 = std::sqrt(wl * wh);
  const double bw = wh - wl;

  // Each upper-half-plane analog prototype pole maps to two band-pass poles;
  // their conjugates come from the mirrored prototype pole.
  std::vector<cplx> upper;
  const int n = prototype_order;
  for (int k = 0; k < n; ++k) {
    const cplx p = std::polar(1.0, std::numbers::pi * (2.0 * k + n + 1) / (2.0 * n));
    if (p.imag() <= 0.0) continue;
    const cplx half = p * bw / 2.0;
    const cplx disc = std::sqrt(half * half - w0 * w0);
    for (cplx s : {half + disc, half - disc}) {
      cplx z = bilinear(s, fs);
      if (z.imag() < 0.0) z = std::conj(z);
      upper.push_back(z);
    }
  }

  std::vector<Biquad> sections;
  for (const cplx& z : upper) {
    Biquad q;
    q.b = {1.0, 0.0, -1.0};  // one zero at DC, one at Nyquist
    q.a = {-2.0 * z.real(), std::norm(z)};
    sections.push_back(q);
  }

  const double f0 = fs / std::numbers::pi * std::atan(w0 / (2.0 * fs));
  cplx h = 1.0;
  for (const auto& q : sections) h *= q.response(f0, fs);
  const double g = 1.0 / std::abs(h);
  for (double& c : sections.front().b) c *= g;
  return sections;
}

Biquad design_notch(double center_hz, double q, double fs) {
  if (!(center_hz > 0.0 && center_hz < fs / 2.0) || !(q > 0.0)) {
    throw Error(Errc::Validation, "signal", "notch requires 0 < f0 < fs/2 and Q > 0");
  }
  const double w0 = 2.0 * std::numbers::pi * center_hz / fs;
  const double alpha = std::sin(w0) / (2.0 * q);
  const double a0 = 1.0 + alpha;
  Biquad n;
  n.b = {1.0 / a0, -2.0 * std::cos(w0) / a0, 1.0 / a0};
  n.a = {-2.0 * std::cos(w0) / a0, (1.0 - alpha) / a0};
  return n;
}

FilterChain::FilterChain(std::vector<Biquad> sections, double fs)
    : sections_(std::move(sections)),
      fs_(fs),
      state_(static_cast<std::size_t>(kChannels) * sections_.size() * 2, 0.0) {}

cplx FilterChain::response(double freq_hz) const {
  cplx h = 1.0;
  for (const auto& s : sections_) h *= s.response(freq_hz, fs_);
  return h;
}

double FilterChain::magnitude_db(double freq_hz) const {
  return 20.0 * std::log10(std::abs(response(freq_hz)));
}

bool FilterChain::stable() const {
  return std::all_of(sections_.begin(), sections_.end(), [](const Biquad& q) { return q.stable(); });
}

void FilterChain::reset() {
  std::fill(state_.begin(), state_.end(), 0.0);
  last_timestamp_.reset();
}

bool FilterChain::is_reset() const {
  return !last_timestamp_ && std::all_of(state_.begin(), state_.end(), [](double v) { return v == 0.0; });
}

double FilterChain::process_sample(int ch, double x) {
  double* st = state_.data() + static_cast<std::size_t>(ch) * sections_.size() * 2;
  for (const auto& q : sections_) {
    const double y = q.b[0] * x + st[0];
    st[0] = q.b[1] * x - q.a[0] * y + st[1];
    st[1] = q.b[2] * x - q.a[1] * y;
    x = y;
    st += 2;
  }
  return x;
}

EmgFrame FilterChain::process(const EmgFrame& frame) {
  if (last_timestamp_ && frame.timestamp_us <= *last_timestamp_) {
    throw Error(Errc::NonMonotonicTimestamps, "signal",
                "frame at " + std::to_string(frame.timestamp_us) + " us follows " +
                    std::to_string(*last_timestamp_) + " us");
  }
  EmgFrame out;
  out.timestamp_us = frame.timestamp_us;
  for (int ch = 0; ch < kChannels; ++ch) out.channels[ch] = process_sample(ch, frame.channels[ch]);
  last_timestamp_ = frame.timestamp_us;
  return out;
}

FilterChain design_filter_chain(double fs) {
  if (fs != kSampleRateHz) {
    throw Error(Errc::UnsupportedSampleRate, "signal",
                "only " + std::to_string(static_cast<int>(kSampleRateHz)) + " Hz is supported");
  }
  auto sections = design_butterworth_bandpass(2, kBandLowHz, kBandHighHz, fs);
  sections.push_back(design_notch(kMainsHz, kNotchQ, fs));
  return FilterChain(std::move(sections), fs);
}

std::vector<EmgFrame> filter_stream(FilterChain& chain, std::span<const EmgFrame> frames) {
  // Validate first so a bad stream leaves the chain untouched.
  std::optional<std::int64_t> prev = chain.last_timestamp_;
  for (const auto& f : frames) {
    if (prev && f.timestamp_us <= *prev) {
      throw Error(Errc::NonMonotonicTimestamps, "signal",
                  "frame at " + std::to_string(f.timestamp_us) + " us follows " +
                      std::to_string(*prev) + " us");
    }
    prev = f.timestamp_us;
  }
  std::vector<EmgFrame> out;
  out.reserve(frames.size());
  for (const auto& f : frames) out.push_back(chain.process(f));
  return out;
}

}  // namespace nm::signal
