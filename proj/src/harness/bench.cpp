#include "neuromanip/error.hpp"
#include "neuromanip/harness.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace nm::harness {

BenchReport bench_latency(const classify::Pipeline& model, classify::Backend backend,
                          std::span<const signal::EmgWindow> windows, int n, int warmup) {
  if (n <= 0) throw Error(Errc::EmptyBench, "harness", "n must be positive");
  if (windows.empty()) throw Error(Errc::EmptyBench, "harness", "no windows to classify");
  using clock = std::chrono::steady_clock;

  // Keeps the optimizer from discarding calls whose result is unused.
  volatile int sink = 0;
  for (int i = 0; i < warmup; ++i) {
    sink = sink + signal::gesture_code(model.classify_window(windows[i % windows.size()], backend).label);
  }
  std::vector<double> us(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto t0 = clock::now();
    const auto c = model.classify_window(windows[i % windows.size()], backend);
    const auto t1 = clock::now();
    sink = sink + signal::gesture_code(c.label);
    us[i] = std::chrono::duration<double, std::micro>(t1 - t0).count();
  }

  BenchReport r;
  r.backend = backend;
  r.n = n;
  r.mean_us = std::accumulate(us.begin(), us.end(), 0.0) / n;
  std::sort(us.begin(), us.end());
  r.median_us = n % 2 ? us[n / 2] : 0.5 * (us[n / 2 - 1] + us[n / 2]);
  // nearest rank
  const auto rank = static_cast<std::size_t>(std::ceil(0.99 * n));
  r.p99_us = us[std::max<std::size_t>(rank, 1) - 1];
  return r;
}

std::string bench_json(std::span<const BenchReport> reports) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : reports) {
    out.push_back({{"backend", r.backend == classify::Backend::Dense ? "dense" : "spiking"},
                   {"n", r.n},
                   {"mean_us", r.mean_us},
                   {"median_us", r.median_us},
                   {"p99_us", r.p99_us}});
  }
  return out.dump(2);
}

}  // namespace nm::harness
