#include "neuromanip/classify.hpp"
#include "neuromanip/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace nm::classify {

Normalizer Normalizer::fit(std::span<const FeatureVector> xs) {
  Normalizer n;
  if (xs.empty()) return n;
  const double count = static_cast<double>(xs.size());
  n.min = xs.front();
  n.max = xs.front();
  for (const auto& x : xs) {
    for (int d = 0; d < kFeatureCount; ++d) {
      n.mean[d] += x[d];
      n.min[d] = std::min(n.min[d], x[d]);
      n.max[d] = std::max(n.max[d], x[d]);
    }
  }
  for (double& m : n.mean) m /= count;
  for (const auto& x : xs)
    for (int d = 0; d < kFeatureCount; ++d) n.stddev[d] += (x[d] - n.mean[d]) * (x[d] - n.mean[d]);
  for (double& s : n.stddev) s = std::sqrt(s / count);
  return n;
}

FeatureVector Normalizer::standardize(const FeatureVector& x) const {
  FeatureVector z{};
  for (int d = 0; d < kFeatureCount; ++d) {
    const double s = stddev[d] > 0.0 ? stddev[d] : 1.0;
    z[d] = (x[d] - mean[d]) / s;
  }
  return z;
}

FeatureVector Normalizer::unit_rates(const FeatureVector& x) const {
  FeatureVector r{};
  for (int d = 0; d < kFeatureCount; ++d) {
    const double range = max[d] - min[d];
    r[d] = range > 0.0 ? std::clamp((x[d] - min[d]) / range, 0.0, 1.0) : 0.0;
  }
  return r;
}

std::vector<double> DenseLayer::affine(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != inputs) {
    throw Error(Errc::DimensionMismatch, "classify",
                "layer expects " + std::to_string(inputs) + " inputs, got " + std::to_string(x.size()));
  }
  std::vector<double> y(bias);
  for (int o = 0; o < outputs; ++o) {
    const double* w = weights.data() + static_cast<std::ptrdiff_t>(o) * inputs;
    double acc = 0.0;
    for (int i = 0; i < inputs; ++i) acc += w[i] * x[i];
    y[o] += acc;
  }
  return y;
}

std::vector<int> DenseNet::layer_sizes() const {
  std::vector<int> sizes;
  if (layers.empty()) return sizes;
  sizes.push_back(layers.front().inputs);
  for (const auto& l : layers) sizes.push_back(l.outputs);
  return sizes;
}

std::int64_t DenseNet::macs() const {
  std::int64_t m = 0;
  for (const auto& l : layers) m += static_cast<std::int64_t>(l.inputs) * l.outputs;
  return m;
}

bool DenseNet::valid() const {
  if (layers.empty()) return false;
  if (layers.front().inputs != kFeatureCount || layers.back().outputs != kGestureCount) return false;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const auto& l = layers[k];
    if (k > 0 && l.inputs != layers[k - 1].outputs) return false;
    if (l.weights.size() != static_cast<std::size_t>(l.inputs) * l.outputs) return false;
    if (l.bias.size() != static_cast<std::size_t>(l.outputs)) return false;
    const auto finite = [](double v) { return std::isfinite(v); };
    if (!std::all_of(l.weights.begin(), l.weights.end(), finite)) return false;
    if (!std::all_of(l.bias.begin(), l.bias.end(), finite)) return false;
  }
  return true;
}

std::vector<double> dense_forward(const DenseNet& net, std::span<const double> standardized) {
  if (net.layers.empty()) throw Error(Errc::ModelNotLoaded, "classify", "empty network");
  std::vector<double> a(standardized.begin(), standardized.end());
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    a = net.layers[k].affine(a);
    if (k + 1 < net.layers.size())
      for (double& v : a) v = std::max(v, 0.0);
  }
  return a;
}

Logits dense_logits(const DenseNet& net, const FeatureVector& raw_features) {
  const auto z = net.norm.standardize(raw_features);
  const auto out = dense_forward(net, z);
  if (out.size() != kGestureCount) throw Error(Errc::DimensionMismatch, "classify", "output layer is not 6-way");
  Logits l{};
  std::copy(out.begin(), out.end(), l.begin());
  return l;
}

int argmax(std::span<const double> v) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(v.size()); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

double softmax_at(std::span<const double> v, int k) {
  const double m = *std::max_element(v.begin(), v.end());
  double sum = 0.0;
  for (double x : v) sum += std::exp(x - m);
  return std::exp(v[k] - m) / sum;
}

TrainResult train_dense(std::span<const LabeledFeatures> data, const TrainOptions& opts) {
  std::array<int, kGestureCount> per_class{};
  for (const auto& s : data) per_class[static_cast<std::size_t>(signal::gesture_code(s.y))]++;
  if (data.empty()) throw Error(Errc::InsufficientData, "classify", "empty dataset");
  for (int c = 0; c < kGestureCount; ++c) {
    if (per_class[c] > 0 && per_class[c] < opts.min_per_class) {
      throw Error(Errc::InsufficientData, "classify",
                  "class " + std::to_string(c) + " has " + std::to_string(per_class[c]) +
                      " samples, need " + std::to_string(opts.min_per_class));
    }
  }
  if (opts.epochs <= 0 || opts.batch_size <= 0 || !(opts.learning_rate > 0.0)) {
    throw Error(Errc::Validation, "classify", "epochs, batch size and learning rate must be positive");
  }

  std::vector<FeatureVector> raw;
  raw.reserve(data.size());
  for (const auto& s : data) raw.push_back(s.x);

  TrainResult result;
  DenseNet& net = result.net;
  net.norm = Normalizer::fit(raw);

  std::vector<FeatureVector> xs;
  xs.reserve(raw.size());
  for (const auto& x : raw) xs.push_back(net.norm.standardize(x));

  std::mt19937_64 rng(opts.seed);
  std::vector<int> sizes{kFeatureCount};
  sizes.insert(sizes.end(), opts.hidden.begin(), opts.hidden.end());
  sizes.push_back(kGestureCount);
  for (std::size_t k = 0; k + 1 < sizes.size(); ++k) {
    DenseLayer l;
    l.inputs = sizes[k];
    l.outputs = sizes[k + 1];
    std::normal_distribution<double> init(0.0, std::sqrt(2.0 / l.inputs));
    l.weights.resize(static_cast<std::size_t>(l.inputs) * l.outputs);
    for (double& w : l.weights) w = init(rng);
    l.bias.assign(static_cast<std::size_t>(l.outputs), 0.0);
    net.layers.push_back(std::move(l));
  }

  const std::size_t nl = net.layers.size();
  std::vector<std::vector<double>> vw(nl), vb(nl), gw(nl), gb(nl);
  for (std::size_t k = 0; k < nl; ++k) {
    vw[k].assign(net.layers[k].weights.size(), 0.0);
    vb[k].assign(net.layers[k].bias.size(), 0.0);
    gw[k].resize(net.layers[k].weights.size());
    gb[k].resize(net.layers[k].bias.size());
  }

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<std::vector<double>> acts(nl + 1);
  std::vector<double> delta, prev_delta;

  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(opts.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(opts.batch_size));
      for (std::size_t k = 0; k < nl; ++k) {
        std::fill(gw[k].begin(), gw[k].end(), 0.0);
        std::fill(gb[k].begin(), gb[k].end(), 0.0);
      }
      for (std::size_t bi = start; bi < stop; ++bi) {
        const std::size_t idx = order[bi];
        acts[0].assign(xs[idx].begin(), xs[idx].end());
        for (std::size_t k = 0; k < nl; ++k) {
          acts[k + 1] = net.layers[k].affine(acts[k]);
          if (k + 1 < nl)
            for (double& v : acts[k + 1]) v = std::max(v, 0.0);
        }
        // Softmax cross-entropy gradient at the logits.
        const auto& logits = acts[nl];
        const double m = *std::max_element(logits.begin(), logits.end());
        double z = 0.0;
        for (double v : logits) z += std::exp(v - m);
        const int y = signal::gesture_code(data[idx].y);
        loss_sum += -(logits[y] - m - std::log(z));
        delta.resize(logits.size());
        for (std::size_t o = 0; o < logits.size(); ++o) delta[o] = std::exp(logits[o] - m) / z;
        delta[static_cast<std::size_t>(y)] -= 1.0;

        for (std::size_t k = nl; k-- > 0;) {
          const auto& l = net.layers[k];
          const auto& in = acts[k];
          for (int o = 0; o < l.outputs; ++o) {
            const double d = delta[o];
            if (d == 0.0) continue;
            gb[k][o] += d;
            double* g = gw[k].data() + static_cast<std::ptrdiff_t>(o) * l.inputs;
            for (int i = 0; i < l.inputs; ++i) g[i] += d * in[i];
          }
          if (k == 0) break;
          prev_delta.assign(static_cast<std::size_t>(l.inputs), 0.0);
          for (int o = 0; o < l.outputs; ++o) {
            const double d = delta[o];
            if (d == 0.0) continue;
            const double* w = l.weights.data() + static_cast<std::ptrdiff_t>(o) * l.inputs;
            for (int i = 0; i < l.inputs; ++i) prev_delta[i] += d * w[i];
          }
          for (int i = 0; i < l.inputs; ++i)
            if (in[i] <= 0.0) prev_delta[i] = 0.0;
          delta.swap(prev_delta);
        }
      }
      const double scale = opts.learning_rate / static_cast<double>(stop - start);
      for (std::size_t k = 0; k < nl; ++k) {
        auto& l = net.layers[k];
        for (std::size_t j = 0; j < l.weights.size(); ++j) {
          vw[k][j] = opts.momentum * vw[k][j] - scale * gw[k][j] -
                     opts.learning_rate * opts.weight_decay * l.weights[j];
          l.weights[j] += vw[k][j];
        }
        for (std::size_t j = 0; j < l.bias.size(); ++j) {
          vb[k][j] = opts.momentum * vb[k][j] - scale * gb[k][j];
          l.bias[j] += vb[k][j];
        }
      }
    }
    result.final_loss = loss_sum / static_cast<double>(order.size());
    if (!std::isfinite(result.final_loss)) {
      throw Error(Errc::DivergedLoss, "classify", "non-finite loss at epoch " + std::to_string(epoch));
    }
  }

  int correct = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const auto out = dense_forward(net, xs[i]);
    if (argmax(out) == signal::gesture_code(data[i].y)) ++correct;
  }
  result.train_accuracy = static_cast<double>(correct) / static_cast<double>(xs.size());
  return result;
}

}  // namespace nm::classify
