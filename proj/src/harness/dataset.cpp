#include "neuromanip/error.hpp"
#include "neuromanip/harness.hpp"
#include "text.hpp"

#include <algorithm>
#include <fstream>

namespace nm::harness {

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double unit_interval(std::uint64_t x) { return static_cast<double>(x >> 11) * 0x1.0p-53; }

int stream_of(Split s) {
  switch (s) {
    case Split::Train: return 1;
    case Split::Calib: return 2;
    case Split::Test: return 3;
    case Split::Validation: return 4;
  }
  return 0;
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  return splitmix(splitmix(splitmix(a) ^ b) ^ c);
}

signal::EmgWindow synth_window(GestureLabel g, double sigma, double mains_amp, std::uint64_t seed) {
  const auto model = signal::SynthEmgModel::with_default_activation(sigma, mains_amp, seed);
  const auto raw = signal::synth_emg(model, g, kSampleDurationMs);
  auto chain = signal::design_filter_chain(signal::kSampleRateHz);
  const auto filtered = signal::filter_stream(chain, raw);
  const int w = signal::WindowParams{}.width;
  return signal::make_window(filtered, filtered.size() - static_cast<std::size_t>(w), w);
}

World load_world(const RunConfig& cfg) {
  World w;
  w.scene = scene::load_scene(cfg.paths.scene);
  w.lib = grasp::load_library(cfg.paths.library, cfg.k_max);
  return w;
}

std::vector<Sample> generate_dataset(const RunConfig& cfg, const World& world, Split split,
                                     std::optional<double> sigma, std::optional<int> n) {
  const int stream = stream_of(split);
  int count = 0;
  switch (split) {
    case Split::Train: count = cfg.dataset.train; break;
    case Split::Calib: count = cfg.dataset.calib; break;
    case Split::Test: count = cfg.dataset.test; break;
    case Split::Validation: count = cfg.dataset.validation; break;
  }
  if (n) count = *n;
  const bool mixed_noise = split == Split::Train || split == Split::Calib;
  const double fixed_sigma = sigma.value_or(cfg.noise_sigma);

  // Objects whose candidate set admits each label, in id order.
  std::array<std::vector<const scene::SceneObject*>, signal::kGestureCount> eligible;
  for (const auto& o : world.scene.objects) {
    try {
      const auto cs = grasp::context_to_grasps(o, world.lib);
      for (auto g : cs.labels(world.lib)) eligible[static_cast<std::size_t>(signal::gesture_code(g))].push_back(&o);
    } catch (const Error& e) {
      if (e.code() != Errc::NoApplicableGrasp) throw;
    }
  }
  for (auto& v : eligible)
    std::sort(v.begin(), v.end(), [](const auto* a, const auto* b) { return a->id < b->id; });

  std::vector<Sample> out;
  out.reserve(static_cast<std::size_t>(std::max(0, count)));
  for (int i = 0; i < count; ++i) {
    Sample s;
    s.y = static_cast<GestureLabel>(i % signal::kGestureCount);
    const auto& objs = eligible[static_cast<std::size_t>(i % signal::kGestureCount)];
    if (objs.empty()) {
      throw Error(Errc::DatasetContextMismatch, "harness",
                  std::string("no scene object admits ") + std::string(signal::gesture_name(s.y)));
    }
    const auto* obj = objs[mix_seed(cfg.seed, stream + 200, static_cast<std::uint64_t>(i)) % objs.size()];
    s.object_id = obj->id;
    s.gaze_px = scene::project(world.scene.camera, obj->center());
    s.sigma = mixed_noise ? cfg.train_noise_max * unit_interval(mix_seed(cfg.seed, stream + 100, static_cast<std::uint64_t>(i)))
                          : fixed_sigma;
    s.seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(stream), static_cast<std::uint64_t>(i));
    s.x = signal::extract_features(synth_window(s.y, s.sigma, cfg.mains_amp, s.seed));
    out.push_back(s);
  }
  return out;
}

void write_dataset_csv(const std::filesystem::path& path, std::span<const Sample> samples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "harness", "cannot write " + path.string());
  out << "label,object_id,gaze_x,gaze_y,sigma,seed";
  for (int k = 1; k <= signal::kFeatureCount; ++k) out << ",f" << k;
  out << '\n';
  for (const auto& s : samples) {
    out << signal::gesture_code(s.y) << ',' << s.object_id << ',' << text::fmt(s.gaze_px[0]) << ','
        << text::fmt(s.gaze_px[1]) << ',' << text::fmt(s.sigma) << ',' << s.seed;
    for (double v : s.x) out << ',' << text::fmt(v);
    out << '\n';
  }
}

std::vector<Sample> read_dataset_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "harness", "cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || text::trim(line).rfind("label,object_id,gaze_x,gaze_y,sigma,seed,f1", 0) != 0) {
    throw Error(Errc::Validation, "harness", path.string() + ":1: not a dataset file");
  }
  std::vector<Sample> out;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    const auto fail = [&](const std::string& what) {
      throw Error(Errc::Validation, "harness", path.string() + ":" + std::to_string(lineno) + ": " + what);
    };
    const auto cols = text::split(line);
    if (cols.size() != 6 + static_cast<std::size_t>(signal::kFeatureCount)) fail("wrong column count");
    Sample s;
    int code = 0;
    if (!text::parse(cols[0], code) || !signal::gesture_from_code(code)) fail("bad label");
    s.y = static_cast<GestureLabel>(code);
    if (!text::parse(cols[1], s.object_id) || !text::parse(cols[2], s.gaze_px[0]) ||
        !text::parse(cols[3], s.gaze_px[1]) || !text::parse(cols[4], s.sigma) || !text::parse(cols[5], s.seed)) {
      fail("bad context columns");
    }
    for (int k = 0; k < signal::kFeatureCount; ++k)
      if (!text::parse(cols[6 + static_cast<std::size_t>(k)], s.x[static_cast<std::size_t>(k)])) fail("bad feature");
    out.push_back(s);
  }
  return out;
}

classify::TrainResult train_model(const RunConfig& cfg, std::span<const Sample> train) {
  std::vector<classify::LabeledFeatures> data;
  data.reserve(train.size());
  for (const auto& s : train) data.push_back({s.x, s.y});
  classify::TrainOptions opts = cfg.train;
  opts.seed = mix_seed(cfg.seed, 10);
  return classify::train_dense(data, opts);
}

classify::SpikingNetwork convert_model(const RunConfig& cfg, const classify::DenseNet& net,
                                       std::span<const Sample> calib) {
  std::vector<FeatureVector> xs;
  xs.reserve(calib.size());
  for (const auto& s : calib) xs.push_back(s.x);
  return classify::convert_to_snn(net, xs, cfg.timesteps);
}

}  // namespace nm::harness
