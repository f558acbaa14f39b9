#include "neuromanip/classify.hpp"
#include "neuromanip/error.hpp"

#include <chrono>

namespace nm::classify {

Pipeline::Pipeline(DenseNet dense, std::optional<SpikingNetwork> snn)
    : dense_(std::move(dense)), snn_(std::move(snn)), loaded_(dense_.valid()) {
  if (!loaded_) throw Error(Errc::ModelNotLoaded, "classify", "dense network is not well formed");
}

const DenseNet& Pipeline::dense() const {
  if (!loaded_) throw Error(Errc::ModelNotLoaded, "classify", "no model loaded");
  return dense_;
}

const SpikingNetwork& Pipeline::spiking() const {
  if (!snn_) throw Error(Errc::ModelNotLoaded, "classify", "model has not been converted to a spiking network");
  return *snn_;
}

void Pipeline::set_spiking(SpikingNetwork snn) { snn_ = std::move(snn); }

Classification Pipeline::classify_features(const FeatureVector& features, Backend backend) const {
  if (!loaded_) throw Error(Errc::ModelNotLoaded, "classify", "no model loaded");
  using clock = std::chrono::steady_clock;
  Classification c;
  if (backend == Backend::Dense) {
    const auto t0 = clock::now();
    c.logits = dense_logits(dense_, features);
    const auto t1 = clock::now();
    c.latency_us = std::chrono::duration<double, std::micro>(t1 - t0).count();
    const int k = argmax(c.logits);
    c.label = static_cast<GestureLabel>(k);
    c.confidence = softmax_at(c.logits, k);
    return c;
  }
  const auto& snn = spiking();
  const auto t0 = clock::now();
  const auto rates = snn.norm.unit_rates(features);
  const auto out = snn_infer(snn, encode_rate(rates, snn.timesteps));
  const auto t1 = clock::now();
  c.latency_us = std::chrono::duration<double, std::micro>(t1 - t0).count();
  c.logits = snn_decoded_logits(snn, out);
  const int k = argmax(out.counts);
  c.label = static_cast<GestureLabel>(k);
  c.confidence = softmax_at(c.logits, k);
  c.energy = out.energy;
  return c;
}

Classification Pipeline::classify_window(const signal::EmgWindow& window, Backend backend) const {
  if (!loaded_) throw Error(Errc::ModelNotLoaded, "classify", "no model loaded");
  return classify_features(signal::extract_features(window), backend);
}

}  // namespace nm::classify
