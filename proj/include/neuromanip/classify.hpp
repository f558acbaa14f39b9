#pragma once

// Dense reference classifier, its conversion to an integrate-and-fire spiking
// network, and event-count energy accounting.

#include "neuromanip/signal.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace nm::classify {

using signal::FeatureVector;
using signal::GestureLabel;
using signal::kFeatureCount;
using signal::kGestureCount;

using Logits = std::array<double, kGestureCount>;

// Training-set statistics. The dense path consumes z-scores, the spiking
// path consumes min/max-rescaled rates in [0, 1].
struct Normalizer {
  FeatureVector mean{};
  FeatureVector stddev{};
  FeatureVector min{};
  FeatureVector max{};

  static Normalizer fit(std::span<const FeatureVector> xs);
  FeatureVector standardize(const FeatureVector& x) const;
  FeatureVector unit_rates(const FeatureVector& x) const;
};

struct DenseLayer {
  int inputs = 0;
  int outputs = 0;
  std::vector<double> weights;  // row-major, outputs x inputs
  std::vector<double> bias;

  std::vector<double> affine(std::span<const double> x) const;
};

struct DenseNet {
  std::vector<DenseLayer> layers;
  Normalizer norm;

  std::vector<int> layer_sizes() const;
  // Number of multiply-accumulates in one forward pass.
  std::int64_t macs() const;
  bool valid() const;
};

// Standard topology: 32-64-64-6, rectifier hidden units, raw logits out.
inline constexpr std::array<int, 4> kDefaultTopology{kFeatureCount, 64, 64, kGestureCount};

struct LabeledFeatures {
  FeatureVector x{};
  GestureLabel y = GestureLabel::Rest;
};

struct TrainOptions {
  int epochs = 40;
  double learning_rate = 0.02;
  double momentum = 0.9;
  double weight_decay = 0.0;  // L2 on weights, not biases
  int batch_size = 32;
  std::uint64_t seed = 1;
  std::vector<int> hidden{64, 64};
  int min_per_class = 60;
};

struct TrainResult {
  DenseNet net;
  double train_accuracy = 0.0;
  double final_loss = 0.0;
};

TrainResult train_dense(std::span<const LabeledFeatures> data, const TrainOptions& opts);

// Forward pass on an already standardized input.
std::vector<double> dense_forward(const DenseNet& net, std::span<const double> standardized);
Logits dense_logits(const DenseNet& net, const FeatureVector& raw_features);

// Index of the largest value; ties go to the lowest index.
int argmax(std::span<const double> v);
// Softmax probability of entry `k`.
double softmax_at(std::span<const double> v, int k);

struct LifParams {
  double decay = 1.0;
  double threshold = 1.0;
};

struct SpikingLayer {
  int inputs = 0;
  int outputs = 0;
  std::vector<double> weights;       // row-major, outputs x inputs
  std::vector<double> bias_current;  // injected every step
  LifParams lif;
};

struct SpikingNetwork {
  std::vector<SpikingLayer> layers;
  int timesteps = 64;
  Normalizer norm;
  // Percentile thresholds as computed by conversion, one per layer.
  std::vector<double> thresholds;

  std::vector<int> layer_sizes() const;
  std::int64_t dense_macs() const;
};

struct SpikeTrain {
  int steps = 0;
  int neurons = 0;
  std::vector<std::uint8_t> bits;  // bits[t * neurons + i]

  SpikeTrain() = default;
  SpikeTrain(int steps, int neurons)
      : steps(steps), neurons(neurons), bits(static_cast<std::size_t>(steps) * neurons, 0) {}

  bool spiked(int t, int i) const { return bits[static_cast<std::size_t>(t) * neurons + i] != 0; }
  void set(int t, int i) { bits[static_cast<std::size_t>(t) * neurons + i] = 1; }
  int count(int i) const;
  std::int64_t total() const;

  bool operator==(const SpikeTrain&) const = default;
};

struct EnergyReport {
  std::int64_t synaptic_events = 0;
  std::int64_t dense_macs = 0;
  double event_ratio = 0.0;

  bool operator==(const EnergyReport&) const = default;
};

struct SnnOutput {
  std::vector<double> counts;  // output spikes per class
  EnergyReport energy;
  std::vector<SpikeTrain> trains;  // per layer, output layer last
};

inline constexpr int kDefaultTimesteps = 64;
inline constexpr double kThresholdPercentile = 99.9;

// Nearest-rank percentile (p in (0, 100]).
double percentile(std::vector<double> values, double p);

// Thresholds are the 99.9th percentile of each layer's pre-activation over
// `calib`; weights of later layers are scaled by the presynaptic threshold so
// spike rates carry activations across layers.
SpikingNetwork convert_to_snn(const DenseNet& net, std::span<const FeatureVector> calib,
                              int timesteps = kDefaultTimesteps);
// Rebuilds a spiking network from a dense net and stored thresholds.
SpikingNetwork assemble_snn(const DenseNet& net, std::span<const double> thresholds, int timesteps);

// Accumulator coding: neuron i fires at step t (1-based) iff
// floor(t x_i) > floor((t-1) x_i). Inputs are clipped to [0, 1].
SpikeTrain encode_rate(std::span<const double> rates, int timesteps);

SnnOutput snn_infer(const SpikingNetwork& snn, const SpikeTrain& input);
// Counts rescaled to the output layer's logit range.
Logits snn_decoded_logits(const SpikingNetwork& snn, const SnnOutput& out);

enum class Backend { Dense, Spiking };

struct Classification {
  GestureLabel label = GestureLabel::Rest;
  double confidence = 0.0;
  double latency_us = 0.0;
  Logits logits{};
  std::optional<EnergyReport> energy;
};

// A trained dense model plus, after conversion, its spiking counterpart.
class Pipeline {
 public:
  Pipeline() = default;
  explicit Pipeline(DenseNet dense, std::optional<SpikingNetwork> snn = std::nullopt);

  bool loaded() const noexcept { return loaded_; }
  bool has_spiking() const noexcept { return snn_.has_value(); }
  const DenseNet& dense() const;
  const SpikingNetwork& spiking() const;
  void set_spiking(SpikingNetwork snn);

  Classification classify_features(const FeatureVector& features, Backend backend) const;
  Classification classify_window(const signal::EmgWindow& window, Backend backend) const;

 private:
  DenseNet dense_;
  std::optional<SpikingNetwork> snn_;
  bool loaded_ = false;
};

// Model file (JSON, version "nmv1").
void save_model(const std::filesystem::path& path, const Pipeline& pipeline);
Pipeline load_model(const std::filesystem::path& path);

}  // namespace nm::classify
