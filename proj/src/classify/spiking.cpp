#include "neuromanip/classify.hpp"
#include "neuromanip/error.hpp"

#include <algorithm>
#include <cmath>

namespace nm::classify {

int SpikeTrain::count(int i) const {
  int c = 0;
  for (int t = 0; t < steps; ++t) c += bits[static_cast<std::size_t>(t) * neurons + i];
  return c;
}

std::int64_t SpikeTrain::total() const {
  std::int64_t c = 0;
  for (auto b : bits) c += b;
  return c;
}

std::vector<int> SpikingNetwork::layer_sizes() const {
  std::vector<int> sizes;
  if (layers.empty()) return sizes;
  sizes.push_back(layers.front().inputs);
  for (const auto& l : layers) sizes.push_back(l.outputs);
  return sizes;
}

std::int64_t SpikingNetwork::dense_macs() const {
  std::int64_t m = 0;
  for (const auto& l : layers) m += static_cast<std::int64_t>(l.inputs) * l.outputs;
  return m;
}

double percentile(std::vector<double> values, double p) {
  if (values.empty()) throw Error(Errc::EmptyInput, "classify", "percentile of empty set");
  const auto n = values.size();
  auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(n)));
  rank = std::clamp<std::size_t>(rank, 1, n);
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(rank - 1), values.end());
  return values[rank - 1];
}

namespace {

DenseLayer fold_input_layer(const DenseLayer& d, const Normalizer& n) {
  DenseLayer f = d;
  for (int o = 0; o < d.outputs; ++o) {
    for (int i = 0; i < d.inputs; ++i) {
      const double sd = n.stddev[i] > 0.0 ? n.stddev[i] : 1.0;
      const double range = n.max[i] - n.min[i];
      const double w = d.weights[static_cast<std::size_t>(o * d.inputs + i)];
      f.weights[static_cast<std::size_t>(o * d.inputs + i)] = range > 0.0 ? w * range / sd : 0.0;
      f.bias[o] += w * (n.min[i] - n.mean[i]) / sd;
    }
  }
  return f;
}

}  // namespace

SpikingNetwork assemble_snn(const DenseNet& net, std::span<const double> thresholds, int timesteps) {
  if (!net.valid()) throw Error(Errc::ModelNotLoaded, "classify", "dense network is not well formed");
  if (thresholds.size() != net.layers.size()) {
    throw Error(Errc::ShapeMismatch, "classify", "one threshold per layer required");
  }
  if (timesteps <= 0) throw Error(Errc::Validation, "classify", "timesteps must be positive");
  SpikingNetwork snn;
  snn.timesteps = timesteps;
  snn.norm = net.norm;
  snn.thresholds.assign(thresholds.begin(), thresholds.end());
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    if (!(thresholds[k] > 0.0)) throw Error(Errc::Validation, "classify", "thresholds must be positive");
    // The first layer consumes [0, 1] rates: the z-score map is folded in.
    const DenseLayer d = k == 0 ? fold_input_layer(net.layers[0], net.norm) : net.layers[k];
    SpikingLayer s;
    s.inputs = d.inputs;
    s.outputs = d.outputs;
    s.weights = d.weights;
    s.bias_current = d.bias;
    s.lif = LifParams{1.0, thresholds[k]};
    // A presynaptic spike stands for one threshold's worth of activation.
    if (k > 0)
      for (double& w : s.weights) w *= thresholds[k - 1];
    snn.layers.push_back(std::move(s));
  }
  return snn;
}

SpikingNetwork convert_to_snn(const DenseNet& net, std::span<const FeatureVector> calib, int timesteps) {
  if (calib.empty()) throw Error(Errc::EmptyCalibration, "classify", "calibration set is empty");
  if (!net.valid()) throw Error(Errc::ModelNotLoaded, "classify", "dense network is not well formed");

  // Pre-activation percentiles along the same input path the spiking
  // network sees (clipped rates into the folded first layer).
  std::vector<DenseLayer> path = net.layers;
  path[0] = fold_input_layer(net.layers[0], net.norm);
  const std::size_t nl = path.size();
  std::vector<std::vector<double>> pre(nl);
  for (const auto& x : calib) {
    const auto r = net.norm.unit_rates(x);
    std::vector<double> a(r.begin(), r.end());
    for (std::size_t k = 0; k < nl; ++k) {
      a = path[k].affine(a);
      pre[k].insert(pre[k].end(), a.begin(), a.end());
      for (double& v : a) v = std::max(v, 0.0);
    }
  }
  std::vector<double> thresholds;
  for (std::size_t k = 0; k < nl; ++k) {
    double theta = percentile(pre[k], kThresholdPercentile);
    if (!(theta > 0.0)) {
      const double mx = *std::max_element(pre[k].begin(), pre[k].end());
      theta = mx > 0.0 ? mx : 1.0;
    }
    thresholds.push_back(theta);
  }
  return assemble_snn(net, thresholds, timesteps);
}

SpikeTrain encode_rate(std::span<const double> rates, int timesteps) {
  SpikeTrain train(timesteps, static_cast<int>(rates.size()));
  for (int i = 0; i < train.neurons; ++i) {
    const double x = std::clamp(rates[i], 0.0, 1.0);
    double prev = 0.0;
    for (int t = 1; t <= timesteps; ++t) {
      const double cur = std::floor(static_cast<double>(t) * x);
      if (cur > prev) train.set(t - 1, i);
      prev = cur;
    }
  }
  return train;
}

SnnOutput snn_infer(const SpikingNetwork& snn, const SpikeTrain& input) {
  if (snn.layers.empty()) throw Error(Errc::ModelNotLoaded, "classify", "empty spiking network");
  if (input.neurons != snn.layers.front().inputs || input.steps != snn.timesteps) {
    throw Error(Errc::ShapeMismatch, "classify",
                "input train is " + std::to_string(input.steps) + "x" + std::to_string(input.neurons) +
                    ", network expects " + std::to_string(snn.timesteps) + "x" +
                    std::to_string(snn.layers.front().inputs));
  }
  const int steps = snn.timesteps;
  const std::size_t nl = snn.layers.size();

  SnnOutput out;
  out.trains.reserve(nl);
  std::vector<std::vector<double>> v(nl);
  for (std::size_t k = 0; k < nl; ++k) {
    v[k].assign(static_cast<std::size_t>(snn.layers[k].outputs), 0.0);
    out.trains.emplace_back(steps, snn.layers[k].outputs);
  }

  std::int64_t events = 0;
  std::vector<int> active, next_active;
  for (int t = 0; t < steps; ++t) {
    active.clear();
    for (int i = 0; i < input.neurons; ++i)
      if (input.spiked(t, i)) active.push_back(i);
    for (std::size_t k = 0; k < nl; ++k) {
      const auto& layer = snn.layers[k];
      auto& pot = v[k];
      for (int o = 0; o < layer.outputs; ++o) pot[o] = pot[o] * layer.lif.decay + layer.bias_current[o];
      // Event-driven accumulation: one lookup per presynaptic spike per target.
      for (int i : active) {
        for (int o = 0; o < layer.outputs; ++o)
          pot[o] += layer.weights[static_cast<std::size_t>(o) * layer.inputs + i];
      }
      events += static_cast<std::int64_t>(active.size()) * layer.outputs;
      next_active.clear();
      for (int o = 0; o < layer.outputs; ++o) {
        if (pot[o] >= layer.lif.threshold) {
          next_active.push_back(o);
          out.trains[k].set(t, o);
          pot[o] = 0.0;
        }
      }
      active.swap(next_active);
    }
  }

  const auto& last = out.trains.back();
  out.counts.resize(static_cast<std::size_t>(last.neurons));
  for (int o = 0; o < last.neurons; ++o) out.counts[o] = last.count(o);
  out.energy.synaptic_events = events;
  out.energy.dense_macs = snn.dense_macs();
  out.energy.event_ratio = out.energy.dense_macs > 0
                               ? static_cast<double>(events) / static_cast<double>(out.energy.dense_macs)
                               : 0.0;
  return out;
}

Logits snn_decoded_logits(const SpikingNetwork& snn, const SnnOutput& out) {
  if (out.counts.size() != kGestureCount) throw Error(Errc::ShapeMismatch, "classify", "output layer is not 6-way");
  const double scale = snn.layers.back().lif.threshold / static_cast<double>(snn.timesteps);
  Logits l{};
  for (int c = 0; c < kGestureCount; ++c) l[c] = out.counts[c] * scale;
  return l;
}

}  // namespace nm::classify
