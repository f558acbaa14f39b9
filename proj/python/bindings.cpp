#include "neuromanip/classify.hpp"
#include "neuromanip/error.hpp"
#include "neuromanip/grasp.hpp"
#include "neuromanip/harness.hpp"
#include "neuromanip/signal.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace nm;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

harness::Split parse_split(const std::string& s) {
  if (s == "train") return harness::Split::Train;
  if (s == "calib") return harness::Split::Calib;
  if (s == "test") return harness::Split::Test;
  if (s == "validation") return harness::Split::Validation;
  throw Error(Errc::Validation, "python", "split must be train, calib, test or validation");
}

classify::Backend parse_backend(const std::string& s) {
  if (s == "dense") return classify::Backend::Dense;
  if (s == "spiking") return classify::Backend::Spiking;
  throw Error(Errc::Validation, "python", "backend must be dense or spiking");
}

signal::FeatureVector to_features(const Array& a) {
  if (a.ndim() != 1 || a.shape(0) != signal::kFeatureCount)
    throw Error(Errc::DimensionMismatch, "python", "expected " + std::to_string(signal::kFeatureCount) + " features");
  signal::FeatureVector f{};
  std::copy(a.data(), a.data() + signal::kFeatureCount, f.begin());
  return f;
}

// Rows of (n, 8) samples at the native sample rate.
std::vector<signal::EmgFrame> to_frames(const Array& a) {
  if (a.ndim() != 2 || a.shape(1) != signal::kChannels)
    throw Error(Errc::DimensionMismatch, "python", "expected shape (n, " + std::to_string(signal::kChannels) + ")");
  std::vector<signal::EmgFrame> frames(static_cast<std::size_t>(a.shape(0)));
  auto r = a.unchecked<2>();
  for (py::ssize_t i = 0; i < a.shape(0); ++i) {
    frames[i].timestamp_us = static_cast<std::int64_t>(i) * signal::kFramePeriodUs;
    for (int c = 0; c < signal::kChannels; ++c) frames[i].channels[c] = r(i, c);
  }
  return frames;
}

// Explicit shape and stride: the single-count constructor yields zero strides here.
template <class T>
py::array_t<T> vector1d(const std::vector<T>& v) {
  return py::array_t<T>(std::vector<py::ssize_t>{static_cast<py::ssize_t>(v.size())},
                        std::vector<py::ssize_t>{static_cast<py::ssize_t>(sizeof(T))}, v.data());
}

py::dict classification_dict(const classify::Classification& c) {
  py::dict d;
  d["label"] = std::string(signal::gesture_name(c.label));
  d["code"] = signal::gesture_code(c.label);
  d["confidence"] = c.confidence;
  d["logits"] = std::vector<double>(c.logits.begin(), c.logits.end());
  if (c.energy) {
    d["synaptic_events"] = c.energy->synaptic_events;
    d["dense_macs"] = c.energy->dense_macs;
  }
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Context-aware prosthetic-hand controller: signal chain, classifiers, grasp restriction, evaluation";

  // Leaked on purpose: the type must outlive interpreter teardown.
  static auto* err = new py::exception<Error>(m, "NeuromanipError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object type = py::reinterpret_borrow<py::object>(err->ptr());
      py::object exc = type(e.what());
      exc.attr("code") = std::string(errc_name(e.code()));
      exc.attr("module") = e.module();
      PyErr_SetObject(err->ptr(), exc.ptr());
    }
  });

  m.attr("SAMPLE_RATE_HZ") = signal::kSampleRateHz;
  m.attr("CHANNELS") = signal::kChannels;
  m.attr("FEATURES") = signal::kFeatureCount;

  m.def("gesture_names", [] {
    std::vector<std::string> out;
    for (int i = 0; i < signal::kGestureCount; ++i)
      out.emplace_back(signal::gesture_name(static_cast<signal::GestureLabel>(i)));
    return out;
  });

  // ---- signal
  m.def("filter_magnitude_db", [](double freq_hz) {
    return signal::design_filter_chain(signal::kSampleRateHz).magnitude_db(freq_hz);
  }, py::arg("freq_hz"));
  m.def("filter_signal", [](const Array& x) {
    auto chain = signal::design_filter_chain(signal::kSampleRateHz);
    const auto out = signal::filter_stream(chain, to_frames(x));
    Array y({static_cast<py::ssize_t>(out.size()), static_cast<py::ssize_t>(signal::kChannels)});
    auto w = y.mutable_unchecked<2>();
    for (std::size_t i = 0; i < out.size(); ++i)
      for (int c = 0; c < signal::kChannels; ++c) w(i, c) = out[i].channels[c];
    return y;
  }, py::arg("samples"), "Causal band-pass plus notch over an (n, 8) array");
  m.def("extract_features", [](const Array& x) {
    const auto frames = to_frames(x);
    const auto f = signal::extract_features(signal::make_window(frames, 0, static_cast<int>(frames.size())));
    return vector1d<double>(std::vector<double>(f.begin(), f.end()));
  }, py::arg("window"), "Per-channel MAV, RMS, waveform length, zero crossings of an (n, 8) window");
  m.def("synth_emg", [](const std::string& gesture, int duration_ms, double noise_sigma, double mains_amp,
                        std::uint64_t seed) {
    const auto g = signal::parse_gesture(gesture);
    if (!g) throw Error(Errc::Validation, "python", "unknown gesture " + gesture);
    const auto frames =
        signal::synth_emg(signal::SynthEmgModel::with_default_activation(noise_sigma, mains_amp, seed), *g, duration_ms);
    Array y({static_cast<py::ssize_t>(frames.size()), static_cast<py::ssize_t>(signal::kChannels)});
    auto w = y.mutable_unchecked<2>();
    for (std::size_t i = 0; i < frames.size(); ++i)
      for (int c = 0; c < signal::kChannels; ++c) w(i, c) = frames[i].channels[c];
    return y;
  }, py::arg("gesture"), py::arg("duration_ms"), py::arg("noise_sigma") = 0.05, py::arg("mains_amp") = 0.0,
     py::arg("seed") = 0);

  // ---- spiking
  m.def("encode_rate_counts", [](const std::vector<double>& rates, int timesteps) {
    const auto t = classify::encode_rate(rates, timesteps);
    std::vector<int> counts;
    for (int i = 0; i < t.neurons; ++i) counts.push_back(t.count(i));
    return counts;
  }, py::arg("rates"), py::arg("timesteps"));

  // ---- configuration and world
  py::class_<harness::RunConfig>(m, "Config")
      .def_readwrite("seed", &harness::RunConfig::seed)
      .def_readwrite("noise_sigma", &harness::RunConfig::noise_sigma)
      .def_readwrite("timesteps", &harness::RunConfig::timesteps)
      .def_readwrite("k_max", &harness::RunConfig::k_max)
      .def_property("train_size", [](const harness::RunConfig& c) { return c.dataset.train; },
                    [](harness::RunConfig& c, int n) { c.dataset.train = n; })
      .def_property("test_size", [](const harness::RunConfig& c) { return c.dataset.test; },
                    [](harness::RunConfig& c, int n) { c.dataset.test = n; })
      .def_property("epochs", [](const harness::RunConfig& c) { return c.train.epochs; },
                    [](harness::RunConfig& c, int n) { c.train.epochs = n; });
  m.def("load_config", &harness::load_config, py::arg("path"));

  py::class_<harness::World>(m, "World")
      .def("object_ids", [](const harness::World& w) {
        std::vector<int> ids;
        for (const auto& o : w.scene.objects) ids.push_back(o.id);
        return ids;
      })
      .def("object_class", [](const harness::World& w, int id) {
        const auto* o = w.scene.find(id);
        if (!o) throw Error(Errc::Validation, "python", "no object " + std::to_string(id));
        return o->class_label;
      })
      .def("candidates", [](const harness::World& w, int id) {
        const auto* o = w.scene.find(id);
        if (!o) throw Error(Errc::Validation, "python", "no object " + std::to_string(id));
        py::list out;
        for (const auto& c : grasp::context_to_grasps(*o, w.lib).entries)
          out.append(py::make_tuple(c.pattern_id, w.lib.find(c.pattern_id)->label, c.score));
        return out;
      }, py::arg("object_id"), "Top-k (pattern id, label, score) for an object");
  m.def("load_world", &harness::load_world, py::arg("config"));

  // ---- data
  m.def("generate_dataset", [](const harness::RunConfig& cfg, const harness::World& w, const std::string& split,
                               std::optional<double> sigma, std::optional<int> n) {
    const auto s = harness::generate_dataset(cfg, w, parse_split(split), sigma, n);
    Array x({static_cast<py::ssize_t>(s.size()), static_cast<py::ssize_t>(signal::kFeatureCount)});
    std::vector<int> labels, objects;
    auto xw = x.mutable_unchecked<2>();
    for (std::size_t i = 0; i < s.size(); ++i) {
      for (int f = 0; f < signal::kFeatureCount; ++f) xw(i, f) = s[i].x[f];
      labels.push_back(signal::gesture_code(s[i].y));
      objects.push_back(s[i].object_id);
    }
    return py::make_tuple(x, vector1d<int>(labels), vector1d<int>(objects));
  }, py::arg("config"), py::arg("world"), py::arg("split"), py::arg("sigma") = py::none(), py::arg("n") = py::none(),
     "Returns (features (n, 32), gesture codes, object ids)");

  // ---- model
  py::class_<classify::Pipeline>(m, "Model")
      .def_property_readonly("has_spiking", &classify::Pipeline::has_spiking)
      .def("classify", [](const classify::Pipeline& p, const Array& features, const std::string& backend) {
        return classification_dict(p.classify_features(to_features(features), parse_backend(backend)));
      }, py::arg("features"), py::arg("backend") = "dense")
      .def("save", [](const classify::Pipeline& p, const std::filesystem::path& path) { classify::save_model(path, p); });
  m.def("load_model", &classify::load_model, py::arg("path"));
  m.def("build_model", [](const harness::RunConfig& cfg, const harness::World& w, bool spiking) {
    py::gil_scoped_release nogil;
    const auto train = harness::generate_dataset(cfg, w, harness::Split::Train);
    classify::Pipeline p(harness::train_model(cfg, train).net);
    if (spiking) p.set_spiking(harness::convert_model(cfg, p.dense(), harness::generate_dataset(cfg, w, harness::Split::Calib)));
    return p;
  }, py::arg("config"), py::arg("world"), py::arg("spiking") = true, "Train on the train split and optionally convert");

  // ---- evaluation and study
  m.def("evaluate_json", [](const harness::RunConfig& cfg, const harness::World& w, const classify::Pipeline& p,
                            std::optional<double> sigma, std::optional<int> n, bool restricted) {
    py::gil_scoped_release nogil;
    const auto s = harness::generate_dataset(cfg, w, harness::Split::Test, sigma, n);
    const auto r = harness::evaluate(s, p, w, cfg, restricted ? harness::Mode::Restricted : harness::Mode::Unrestricted);
    return harness::report_json(r, cfg.seed);
  }, py::arg("config"), py::arg("world"), py::arg("model"), py::arg("sigma") = py::none(), py::arg("n") = py::none(),
     py::arg("restricted") = true);
  m.def("study_stats", [](const std::filesystem::path& path) {
    py::list out;
    for (const auto& r : harness::study_stats(harness::read_study_csv(path))) {
      py::dict d;
      d["metric"] = r.metric;
      d["mass_g"] = r.mass_g;
      d["n"] = r.n;
      d["mean"] = r.mean;
      d["sd"] = r.sd ? py::cast(*r.sd) : py::none();
      out.append(d);
    }
    return out;
  }, py::arg("path"));
}
