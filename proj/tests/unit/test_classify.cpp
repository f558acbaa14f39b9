#include <doctest.h>

#include "fixtures.hpp"
#include "neuromanip/classify.hpp"
#include "neuromanip/error.hpp"
#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <random>

using namespace nm;
using namespace nm::classify;
using signal::GestureLabel;

namespace {

DenseNet blank_net(std::vector<int> sizes) {
  DenseNet net;
  for (std::size_t k = 0; k + 1 < sizes.size(); ++k) {
    DenseLayer l;
    l.inputs = sizes[k];
    l.outputs = sizes[k + 1];
    l.weights.assign(static_cast<std::size_t>(l.inputs * l.outputs), 0.0);
    l.bias.assign(static_cast<std::size_t>(l.outputs), 0.0);
    net.layers.push_back(l);
  }
  net.norm.mean.fill(0.0);
  net.norm.stddev.fill(1.0);
  net.norm.min.fill(0.0);
  net.norm.max.fill(1.0);
  return net;
}

DenseNet random_net(std::uint64_t seed) {
  auto net = blank_net({32, 64, 64, 6});
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 0.3);
  for (auto& l : net.layers) {
    for (auto& w : l.weights) w = n(rng);
    for (auto& b : l.bias) b = n(rng);
  }
  return net;
}

// Plain forward pass: rectified hidden layers, linear output.
std::vector<double> oracle_forward(const DenseNet& net, std::vector<double> x) {
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    x = oracle::matvec(net.layers[k].weights, net.layers[k].bias, x);
    if (k + 1 < net.layers.size())
      for (double& v : x) v = v > 0.0 ? v : 0.0;
  }
  return x;
}

std::vector<double> hand_standardize(const DenseNet& net, const FeatureVector& x) {
  std::vector<double> z(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double sd = net.norm.stddev[i] > 0.0 ? net.norm.stddev[i] : 1.0;
    z[i] = (x[i] - net.norm.mean[i]) / sd;
  }
  return z;
}

SpikingNetwork single_neuron(double w, double theta, int steps) {
  SpikingNetwork snn;
  snn.timesteps = steps;
  SpikingLayer l;
  l.inputs = 1;
  l.outputs = 1;
  l.weights = {w};
  l.bias_current = {0.0};
  l.lif = LifParams{1.0, theta};
  snn.layers.push_back(l);
  snn.thresholds = {theta};
  return snn;
}

SpikeTrain always_on(int steps) {
  SpikeTrain s(steps, 1);
  for (int t = 0; t < steps; ++t) s.set(t, 0);
  return s;
}

}  // namespace

TEST_CASE("dense_forward: zero net, one-hot path, and straight-line oracle") {
  SUBCASE("zero weights give zero logits") {
    const auto net = blank_net({32, 64, 64, 6});
    std::vector<double> x(32, 0.7);
    for (double v : dense_forward(net, x)) CHECK(v == 0.0);
  }
  SUBCASE("a single positive path passes the feature through") {
    auto net = blank_net({32, 64, 64, 6});
    net.layers[0].weights[0 * 32 + 3] = 1.0;
    net.layers[1].weights[0 * 64 + 0] = 1.0;
    net.layers[2].weights[0 * 64 + 0] = 1.0;
    std::vector<double> x(32, 0.0);
    x[3] = 2.5;
    const auto y = dense_forward(net, x);
    CHECK(y[0] == 2.5);
    for (int c = 1; c < 6; ++c) CHECK(y[c] == 0.0);
  }
  SUBCASE("random nets match the matrix oracle") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
      const auto net = random_net(100 + trial);
      std::vector<double> x(32);
      for (double& v : x) v = n(rng);
      const auto got = dense_forward(net, x);
      const auto want = oracle_forward(net, x);
      REQUIRE(got.size() == want.size());
      for (std::size_t c = 0; c < got.size(); ++c) CHECK(got[c] == doctest::Approx(want[c]).epsilon(1e-6));
    }
  }
  SUBCASE("wrong input width is rejected") {
    const auto net = blank_net({32, 64, 64, 6});
    std::vector<double> x(31, 0.0);
    try {
      dense_forward(net, x);
      FAIL("expected DimensionMismatch");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::DimensionMismatch);
    }
  }
  CHECK(blank_net({32, 64, 64, 6}).macs() == 6528);
}

TEST_CASE("train_dense on a separable two-cluster set") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0.0, 0.2);
  std::vector<LabeledFeatures> data;
  for (int i = 0; i < 200; ++i) {
    LabeledFeatures s;
    s.y = i % 2 ? GestureLabel::CylindricalGrip : GestureLabel::Rest;
    for (auto& v : s.x) v = (i % 2 ? 2.0 : -2.0) + n(rng);
    data.push_back(s);
  }
  // Nearest-centroid oracle: the set must be separable before we ask for 100%.
  FeatureVector c0{}, c1{};
  for (const auto& s : data)
    for (int i = 0; i < 32; ++i) (s.y == GestureLabel::Rest ? c0 : c1)[i] += s.x[i] / 100.0;
  for (const auto& s : data) {
    double d0 = 0, d1 = 0;
    for (int i = 0; i < 32; ++i) {
      d0 += (s.x[i] - c0[i]) * (s.x[i] - c0[i]);
      d1 += (s.x[i] - c1[i]) * (s.x[i] - c1[i]);
    }
    REQUIRE((d1 < d0) == (s.y == GestureLabel::CylindricalGrip));
  }

  TrainOptions opts;
  opts.epochs = 10;
  opts.seed = 3;
  const auto a = train_dense(data, opts);
  CHECK(a.train_accuracy == 1.0);
  const auto b = train_dense(data, opts);
  for (std::size_t k = 0; k < a.net.layers.size(); ++k) {
    CHECK(a.net.layers[k].weights == b.net.layers[k].weights);
    CHECK(a.net.layers[k].bias == b.net.layers[k].bias);
  }
  CHECK(a.net.layer_sizes() == std::vector<int>{32, 64, 64, 6});

  try {
    train_dense({}, opts);
    FAIL("expected InsufficientData");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::InsufficientData);
  }
  std::vector<LabeledFeatures> few(data.begin(), data.begin() + 20);
  CHECK_THROWS_AS(train_dense(few, opts), Error);
}

TEST_CASE("encode_rate spike counts are exactly floor(T x)") {
  CHECK(encode_rate(std::vector<double>{0.0}, 64).count(0) == 0);
  CHECK(encode_rate(std::vector<double>{1.0}, 64).count(0) == 64);
  CHECK(encode_rate(std::vector<double>{0.25}, 64).count(0) == 16);

  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> steps(1, 256);
  for (int trial = 0; trial < 2000; ++trial) {
    const int t = steps(rng);
    std::vector<double> x(32);
    for (double& v : x) v = u(rng);
    x[0] = 0.0;
    x[1] = 1.0;
    x[2] = static_cast<double>(trial % (t + 1)) / t;  // exact multiples of 1/T
    const auto train = encode_rate(x, t);
    for (int i = 0; i < 32; ++i) {
      // Oracle: count steps where the running floor increases.
      int want = 0;
      for (int s = 1; s <= t; ++s) want += std::floor(s * x[i]) > std::floor((s - 1) * x[i]);
      REQUIRE(train.count(i) == want);
      REQUIRE(train.count(i) == static_cast<int>(std::floor(t * x[i])));
    }
  }
  // Rates are clipped into [0, 1].
  CHECK(encode_rate(std::vector<double>{-0.5, 1.7}, 10).count(0) == 0);
  CHECK(encode_rate(std::vector<double>{-0.5, 1.7}, 10).count(1) == 10);
}

TEST_CASE("encode_rate is monotone in each input") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 5000; ++trial) {
    const double a = u(rng), b = u(rng);
    const double lo = std::min(a, b), hi = std::max(a, b);
    CHECK(encode_rate(std::vector<double>{lo}, 64).count(0) <= encode_rate(std::vector<double>{hi}, 64).count(0));
  }
}

TEST_CASE("snn_infer single-neuron dynamics") {
  SUBCASE("zero input and zero bias: silence and no events") {
    auto snn = random_net(1);
    for (auto& l : snn.layers) std::fill(l.bias.begin(), l.bias.end(), 0.0);
    const auto s = assemble_snn(snn, std::vector<double>{1.0, 1.0, 1.0}, 64);
    const auto out = snn_infer(s, SpikeTrain(64, 32));
    for (double c : out.counts) CHECK(c == 0.0);
    CHECK(out.energy.synaptic_events == 0);
    CHECK(out.energy.dense_macs == 6528);
  }
  SUBCASE("w = 1, theta = 1 fires every step") {
    const auto out = snn_infer(single_neuron(1.0, 1.0, 20), always_on(20));
    for (int t = 0; t < 20; ++t) CHECK(out.trains[0].spiked(t, 0));
  }
  SUBCASE("w = 0.4, theta = 1 fires on steps 3, 6, 9, ...") {
    const int steps = 30;
    const auto out = snn_infer(single_neuron(0.4, 1.0, steps), always_on(steps));
    // Oracle: integrate, compare, reset to zero.
    double v = 0.0;
    for (int t = 1; t <= steps; ++t) {
      v += 0.4;
      const bool fire = v >= 1.0;
      if (fire) v = 0.0;
      CHECK(out.trains[0].spiked(t - 1, 0) == fire);
      CHECK(fire == (t % 3 == 0));
    }
    CHECK(out.counts[0] == 10.0);
    CHECK(out.energy.synaptic_events == steps);
  }
  SUBCASE("infinite thresholds: only first-layer events") {
    auto net = random_net(2);
    const double inf = std::numeric_limits<double>::infinity();
    auto s = assemble_snn(net, std::vector<double>{1.0, 1.0, 1.0}, 64);
    for (auto& l : s.layers) l.lif.threshold = inf;
    std::vector<double> rates(32);
    for (int i = 0; i < 32; ++i) rates[i] = (i + 1) / 40.0;
    const auto in = encode_rate(rates, 64);
    const auto out = snn_infer(s, in);
    for (double c : out.counts) CHECK(c == 0.0);
    CHECK(out.energy.synaptic_events == in.total() * 64);
  }
  SUBCASE("shape mismatch") {
    try {
      snn_infer(single_neuron(1.0, 1.0, 8), always_on(9));
      FAIL("expected ShapeMismatch");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::ShapeMismatch);
    }
  }
}

TEST_CASE("convert_to_snn thresholds") {
  const auto net = random_net(9);
  SUBCASE("empty calibration set") {
    try {
      convert_to_snn(net, std::vector<FeatureVector>{}, 64);
      FAIL("expected EmptyCalibration");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::EmptyCalibration);
    }
  }
  SUBCASE("one calibration vector: threshold is that vector's layer maximum") {
    FeatureVector x{};
    for (int i = 0; i < 32; ++i) x[i] = 0.1 + 0.8 * i / 31.0;
    const auto snn = convert_to_snn(net, std::vector<FeatureVector>{x}, 64);
    const auto pre0 = oracle::matvec(net.layers[0].weights, net.layers[0].bias, hand_standardize(net, x));
    CHECK(snn.thresholds[0] == doctest::Approx(*std::max_element(pre0.begin(), pre0.end())).epsilon(1e-9));
    CHECK(snn.layers[0].lif.decay == 1.0);
  }
  SUBCASE("activations bounded by 1 give thresholds at most 1") {
    auto small = blank_net({32, 64, 64, 6});
    for (auto& l : small.layers) {
      for (auto& w : l.weights) w = 0.001;
      for (auto& b : l.bias) b = 0.01;
    }
    std::vector<FeatureVector> calib(10);
    for (int k = 0; k < 10; ++k) calib[k].fill(0.1 * k);
    const auto snn = convert_to_snn(small, calib, 64);
    for (double t : snn.thresholds) CHECK(t <= 1.0);
  }
  CHECK(percentile({5.0, 1.0, 3.0}, 100.0) == 5.0);
  CHECK(percentile({5.0, 1.0, 3.0}, 50.0) == 3.0);
}

TEST_CASE("pipeline contract") {
  Pipeline empty;
  signal::EmgWindow w;
  w.width = 40;
  w.samples.assign(8 * 40, 0.0);
  try {
    empty.classify_window(w, Backend::Dense);
    FAIL("expected ModelNotLoaded");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::ModelNotLoaded);
  }

  // Uniform logits: lowest label wins, confidence 1/6.
  const Pipeline flat(blank_net({32, 64, 64, 6}));
  const auto c = flat.classify_window(w, Backend::Dense);
  CHECK(c.label == GestureLabel::Rest);
  CHECK(c.confidence == doctest::Approx(1.0 / 6.0));
  CHECK_FALSE(c.energy.has_value());
  CHECK_THROWS_AS(flat.classify_window(w, Backend::Spiking), Error);
}

TEST_CASE("trained model: clean CylindricalGrip windows are recognized") {
  const auto& model = fixture::small_model();
  const auto& net = model.dense();
  auto act = signal::default_activation();
  for (auto& a : act[1]) a *= 0.9 / 0.85;  // peak activation 0.9
  int pipeline_hits = 0, oracle_hits = 0;
  for (int seed = 0; seed < 100; ++seed) {
    signal::SynthEmgModel m;
    m.activation = act;
    m.noise_sigma = 0.05;
    m.mains_amp = 0.1;
    m.seed = 1000 + seed;
    auto chain = signal::design_filter_chain(signal::kSampleRateHz);
    const auto f = signal::filter_stream(chain, signal::synth_emg(m, GestureLabel::CylindricalGrip, 1000));
    const auto w = signal::make_window(f, f.size() - 40, 40);
    pipeline_hits += model.classify_window(w, Backend::Dense).label == GestureLabel::CylindricalGrip;
    const auto y = oracle_forward(net, hand_standardize(net, signal::extract_features(w)));
    oracle_hits += std::max_element(y.begin(), y.end()) - y.begin() == 1;
  }
  CHECK(oracle_hits > 95);
  CHECK(pipeline_hits == oracle_hits);
}

TEST_CASE("trained model: spiking agrees with dense on a held-out set") {
  const auto& model = fixture::small_model();
  const auto cfg = fixture::small_config();
  const auto test = harness::generate_dataset(cfg, fixture::world(), harness::Split::Test);
  int agree = 0;
  for (const auto& s : test) {
    agree += model.classify_features(s.x, Backend::Dense).label == model.classify_features(s.x, Backend::Spiking).label;
  }
  const double rate = static_cast<double>(agree) / static_cast<double>(test.size());
  MESSAGE("agreement " << rate);
  CHECK(rate >= 0.90);
}

TEST_CASE("spiking inference replays identically and round-trips through the model file") {
  const auto& model = fixture::small_model();
  const auto w = harness::synth_window(GestureLabel::TripodPinch, 0.3, 0.1, 77);
  const auto a = model.classify_window(w, Backend::Spiking);
  const auto b = model.classify_window(w, Backend::Spiking);
  CHECK(a.label == b.label);
  CHECK(a.confidence == b.confidence);
  CHECK(a.logits == b.logits);
  CHECK(*a.energy == *b.energy);
  CHECK(a.energy->dense_macs == 6528);
  CHECK(a.energy->synaptic_events <= a.energy->dense_macs * model.spiking().timesteps);

  const auto& snn = model.spiking();
  const auto rates = snn.norm.unit_rates(signal::extract_features(w));
  const auto in = encode_rate(rates, snn.timesteps);
  CHECK(snn_infer(snn, in).trains == snn_infer(snn, in).trains);

  const auto path = std::filesystem::temp_directory_path() / "nm_test_model.json";
  save_model(path, model);
  const auto back = load_model(path);
  for (auto backend : {Backend::Dense, Backend::Spiking}) {
    const auto x = model.classify_window(w, backend);
    const auto y = back.classify_window(w, backend);
    CHECK(x.label == y.label);
    CHECK(x.logits == y.logits);
  }
  std::filesystem::remove(path);
}
