#pragma once

// Test-only reference computations. Written independently of the library
// code paths they check: no library headers beyond plain data types.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <vector>

namespace oracle {

// |H(e^{jw})| in dB for a cascade of {b0,b1,b2}/{1,a1,a2} sections,
// evaluated term by term with real trigonometry.
template <typename Section>
double cascade_magnitude_db(std::span<const Section> sections, double f, double fs) {
  const double w = 2.0 * std::numbers::pi * f / fs;
  double mag = 1.0;
  for (const auto& s : sections) {
    const double nr = s.b[0] + s.b[1] * std::cos(w) + s.b[2] * std::cos(2 * w);
    const double ni = -(s.b[1] * std::sin(w) + s.b[2] * std::sin(2 * w));
    const double dr = 1.0 + s.a[0] * std::cos(w) + s.a[1] * std::cos(2 * w);
    const double di = -(s.a[0] * std::sin(w) + s.a[1] * std::sin(2 * w));
    mag *= std::sqrt((nr * nr + ni * ni) / (dr * dr + di * di));
  }
  return 20.0 * std::log10(mag);
}

template <typename Container>
double cascade_magnitude_db(const Container& sections, double f, double fs) {
  return cascade_magnitude_db(std::span(sections.data(), sections.size()), f, fs);
}

// Largest root magnitude of z^2 + a1 z + a2.
inline double max_pole_radius(const std::array<double, 2>& a) {
  const std::complex<double> disc = std::sqrt(std::complex<double>(a[0] * a[0] - 4.0 * a[1]));
  const auto r1 = (-a[0] + disc) / 2.0;
  const auto r2 = (-a[0] - disc) / 2.0;
  return std::max(std::abs(r1), std::abs(r2));
}

// Sum of |X_k|^2 over DFT bins whose frequency lies in [lo, hi].
inline double band_power(const std::vector<double>& x, double lo, double hi, double fs) {
  const std::size_t n = x.size();
  double total = 0.0;
  for (std::size_t k = 0; k <= n / 2; ++k) {
    const double f = fs * static_cast<double>(k) / static_cast<double>(n);
    if (f < lo || f > hi) continue;
    double re = 0.0, im = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double ang = -2.0 * std::numbers::pi * static_cast<double>(k * i % n) / static_cast<double>(n);
      re += x[i] * std::cos(ang);
      im += x[i] * std::sin(ang);
    }
    total += re * re + im * im;
  }
  return total;
}

// MAV, RMS, WL, ZC of one channel, spelled out literally.
inline std::array<double, 4> hand_features(const std::vector<double>& x) {
  double mav = 0, ms = 0, wl = 0, zc = 0;
  for (double v : x) {
    mav += std::fabs(v);
    ms += v * v;
  }
  for (std::size_t i = 1; i < x.size(); ++i) {
    wl += std::fabs(x[i] - x[i - 1]);
    if (x[i] * x[i - 1] < 0 && std::fabs(x[i]) > 0.01 && std::fabs(x[i - 1]) > 0.01) zc += 1;
  }
  return {mav / x.size(), std::sqrt(ms / x.size()), wl, zc};
}

// y = W x + b with W row-major (rows x cols), straight loops.
inline std::vector<double> matvec(const std::vector<double>& w, const std::vector<double>& b,
                                  const std::vector<double>& x) {
  const std::size_t rows = b.size(), cols = x.size();
  std::vector<double> y(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = b[r];
    for (std::size_t c = 0; c < cols; ++c) acc += w[r * cols + c] * x[c];
    y[r] = acc;
  }
  return y;
}

inline double rect_iou(int ax, int ay, int aw, int ah, int bx, int by, int bw, int bh) {
  // Count overlapping unit cells row by row.
  long inter = 0;
  for (int y = std::max(ay, by); y < std::min(ay + ah, by + bh); ++y)
    inter += std::max(0, std::min(ax + aw, bx + bw) - std::max(ax, bx));
  const long uni = static_cast<long>(aw) * ah + static_cast<long>(bw) * bh - inter;
  return uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

// Angle in degrees between two 3-vectors.
inline double angle_deg(const std::array<double, 3>& a, const std::array<double, 3>& b) {
  const double dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
  const double na = std::sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2]);
  const double nb = std::sqrt(b[0] * b[0] + b[1] * b[1] + b[2] * b[2]);
  return std::acos(std::clamp(dot / (na * nb), -1.0, 1.0)) * 180.0 / std::numbers::pi;
}

}  // namespace oracle
