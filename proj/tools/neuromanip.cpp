#include "neuromanip/error.hpp"
#include "neuromanip/harness.hpp"
#ifdef NEUROMANIP_HAVE_SERVICE
#include "neuromanip/serve.hpp"
#endif

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

namespace {

using namespace nm;
using namespace nm::harness;

constexpr int kOk = 0;
constexpr int kInvalid = 2;
constexpr int kFailed = 3;

struct Globals {
  std::string config;
  RunConfig cfg;
  std::filesystem::path config_path;
};

void load(Globals& g) {
  g.config_path = resolve_config_path(g.config.empty() ? std::nullopt : std::optional<std::filesystem::path>(g.config));
  g.cfg = load_config_with_env(g.config_path);
}

std::filesystem::path out_dir(const RunConfig& cfg) {
  auto d = cfg.paths.out_dir.empty() ? std::filesystem::path("out") : cfg.paths.out_dir;
  std::filesystem::create_directories(d);
  return d;
}

void write_text(const std::filesystem::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(Errc::Io, "harness", "cannot write " + p.string());
  out << s << '\n';
}

classify::Pipeline load_trained(const RunConfig& cfg) {
  if (cfg.paths.model.empty()) throw Error(Errc::ModelNotLoaded, "harness", "config has no model path");
  if (!std::filesystem::exists(cfg.paths.model)) {
    throw Error(Errc::ModelNotLoaded, "harness", cfg.paths.model.string() + " does not exist; run `train` first");
  }
  return classify::load_model(cfg.paths.model);
}

std::optional<Split> parse_split(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "calib") return Split::Calib;
  if (s == "test") return Split::Test;
  if (s == "validation") return Split::Validation;
  return std::nullopt;
}

int cmd_gen_data(Globals& g, const std::vector<std::string>& splits, std::optional<double> sigma) {
  const auto world = load_world(g.cfg);
  const auto dir = out_dir(g.cfg);
  for (const auto& name : splits) {
    const auto split = parse_split(name);
    if (!split) throw Error(Errc::Validation, "harness", "unknown split '" + name + "'");
    const auto samples = generate_dataset(g.cfg, world, *split, sigma);
    const auto path = dir / (name + ".csv");
    write_dataset_csv(path, samples);
    std::cout << name << ": " << samples.size() << " samples -> " << path.string() << '\n';
  }
  return kOk;
}

int cmd_train(Globals& g, const std::string& data) {
  std::vector<Sample> train;
  if (!data.empty()) {
    train = read_dataset_csv(data);
  } else {
    train = generate_dataset(g.cfg, load_world(g.cfg), Split::Train);
  }
  const auto r = train_model(g.cfg, train);
  std::filesystem::create_directories(g.cfg.paths.model.parent_path());
  classify::save_model(g.cfg.paths.model, classify::Pipeline(r.net));
  nlohmann::json j{{"samples", train.size()},
                   {"train_accuracy", r.train_accuracy},
                   {"final_loss", r.final_loss},
                   {"model", g.cfg.paths.model.string()}};
  std::cout << j.dump(2) << '\n';
  return kOk;
}

int cmd_convert(Globals& g) {
  auto model = load_trained(g.cfg);
  const auto calib = generate_dataset(g.cfg, load_world(g.cfg), Split::Calib);
  model.set_spiking(convert_model(g.cfg, model.dense(), calib));
  classify::save_model(g.cfg.paths.model, model);
  nlohmann::json j{{"calibration_samples", calib.size()},
                   {"timesteps", g.cfg.timesteps},
                   {"thresholds", model.spiking().thresholds},
                   {"model", g.cfg.paths.model.string()}};
  std::cout << j.dump(2) << '\n';
  return kOk;
}

int cmd_calibrate(Globals& g, std::optional<double> target, std::optional<double> tol, bool save) {
  const auto model = load_trained(g.cfg);
  const double t = target.value_or(g.cfg.calibration.target);
  const double e = tol.value_or(g.cfg.calibration.tol);
  const auto r = calibrate_noise(g.cfg, model, t, e);
  nlohmann::json probes = nlohmann::json::array();
  for (const auto& [s, a] : r.probes) probes.push_back({{"sigma", s}, {"accuracy", a}});
  nlohmann::json j{{"target", t}, {"tol", e}, {"sigma", r.sigma}, {"accuracy", r.accuracy}, {"probes", probes}};
  if (save) {
    // Persist into the file as written, not the env-overridden view.
    auto on_disk = load_config(g.config_path);
    on_disk.noise_sigma = r.sigma;
    save_config(g.config_path, on_disk);
    j["saved_to"] = g.config_path.string();
  }
  std::cout << j.dump(2) << '\n';
  return kOk;
}

int cmd_eval(Globals& g, bool restricted, std::optional<double> sigma, const std::string& data, const std::string& out) {
  const auto model = load_trained(g.cfg);
  const auto world = load_world(g.cfg);
  const auto samples = data.empty() ? generate_dataset(g.cfg, world, Split::Test, sigma) : read_dataset_csv(data);
  const auto r = evaluate(samples, model, world, g.cfg, restricted ? Mode::Restricted : Mode::Unrestricted);
  const auto js = report_json(r, g.cfg.seed);
  const auto path = out.empty() ? out_dir(g.cfg) / (restricted ? "eval_restricted.json" : "eval_unrestricted.json")
                                : std::filesystem::path(out);
  write_text(path, js);
  std::cout << js << '\n';
  return r.unsafe_executions == 0 ? kOk : kFailed;
}

int cmd_bench(Globals& g, std::optional<int> n, const std::string& backend) {
  const auto model = load_trained(g.cfg);
  std::vector<signal::EmgWindow> windows;
  for (int i = 0; i < 240; ++i) {
    windows.push_back(synth_window(static_cast<signal::GestureLabel>(i % signal::kGestureCount), g.cfg.noise_sigma,
                                   g.cfg.mains_amp, mix_seed(g.cfg.seed, 30, static_cast<std::uint64_t>(i))));
  }
  std::vector<classify::Backend> which;
  if (backend == "dense" || backend == "both") which.push_back(classify::Backend::Dense);
  if (backend == "spiking" || backend == "both") {
    if (!model.has_spiking()) throw Error(Errc::ModelNotLoaded, "harness", "model has no spiking network; run `convert`");
    which.push_back(classify::Backend::Spiking);
  }
  if (which.empty()) throw Error(Errc::Validation, "harness", "backend must be dense, spiking or both");
  std::vector<BenchReport> reports;
  for (auto b : which) reports.push_back(bench_latency(model, b, windows, n.value_or(g.cfg.bench.n), g.cfg.bench.warmup));
  const auto js = bench_json(reports);
  write_text(out_dir(g.cfg) / "bench.json", js);
  std::cout << js << '\n';
  bool within = true;
  for (const auto& r : reports) within = within && r.mean_us < g.cfg.bench.budget_us;
  return within ? kOk : kFailed;
}

int cmd_simulate(Globals& g, const std::string& scenario_path, const std::string& log_path) {
  const auto model = load_trained(g.cfg);
  const auto world = load_world(g.cfg);
  const auto sc = load_scenario(scenario_path, world.scene);
  const auto r = simulate(g.cfg, world, model, sc);
  const auto log = log_path.empty() ? out_dir(g.cfg) / (std::filesystem::path(scenario_path).stem().string() + ".log.jsonl")
                                    : std::filesystem::path(log_path);
  controller::write_command_log(log, r.log);
  nlohmann::json executed = nlohmann::json::array();
  for (auto l : r.executed) executed.push_back(std::string(signal::gesture_name(l)));
  nlohmann::json dets = nlohmann::json::array();
  for (const auto& d : r.detections) dets.push_back({{"object_id", d.object_id ? nlohmann::json(*d.object_id) : nlohmann::json(nullptr)},
                                                     {"class", d.class_label},
                                                     {"confidence", d.confidence}});
  nlohmann::json j{{"scenario", sc.name},
                   {"events", r.events.size()},
                   {"commands", r.log.size()},
                   {"executed", executed},
                   {"rejected", r.rejected},
                   {"unsafe_executions", r.unsafe_executions},
                   {"final_state", r.final_state},
                   {"detections", dets},
                   {"expectation_met", r.expectation_met},
                   {"command_log", log.string()}};
  std::cout << j.dump(2) << '\n';
  return r.expectation_met ? kOk : kFailed;
}

int cmd_study_stats(const std::string& csv) {
  const auto rows = study_stats(read_study_csv(csv));
  std::cout << aggregates_csv(rows);
  return kOk;
}

int cmd_serve([[maybe_unused]] Globals& g, [[maybe_unused]] std::optional<int> port) {
#ifdef NEUROMANIP_HAVE_SERVICE
  std::optional<classify::Pipeline> model;
  if (std::filesystem::exists(g.cfg.paths.model)) {
    model = classify::load_model(g.cfg.paths.model);
  } else {
    std::cerr << "note: no model at " << g.cfg.paths.model.string() << "; EMG intent is forwarded as-is\n";
  }
  serve::ServeOptions opts;
  opts.port = port.value_or(g.cfg.port);
  serve::Server server(g.cfg, load_world(g.cfg), std::move(model), opts);
  const int bound = server.listen();
  std::cerr << "listening on ws://" << opts.host << ':' << bound << '\n';
  server.run_until_signal();
  return kOk;
#else
  throw Error(Errc::Validation, "harness", "this build has no service support");
#endif
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Context-aware prosthetic hand controller: simulation and evaluation tools"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "config JSON (default: $NEUROMANIP_CONFIG or the bundled one)");

  std::vector<std::string> splits{"train", "calib", "test", "validation"};
  std::optional<double> gen_sigma;
  auto* gen = app.add_subcommand("gen-data", "write synthetic dataset CSVs to the output directory");
  gen->add_option("--split", splits, "splits to write")->check(CLI::IsMember({"train", "calib", "test", "validation"}));
  gen->add_option("--sigma", gen_sigma, "noise for test/validation (default: config noise_sigma)");

  std::string train_data;
  auto* train = app.add_subcommand("train", "train the dense classifier and save the model");
  train->add_option("--data", train_data, "training CSV (default: generate)");

  auto* convert = app.add_subcommand("convert", "convert the saved dense model to a spiking network");

  std::optional<double> target, tol;
  bool no_save = false;
  auto* calib = app.add_subcommand("calibrate", "find the noise level that yields the target accuracy");
  calib->add_option("--target", target);
  calib->add_option("--tol", tol);
  calib->add_flag("--no-save", no_save, "do not write sigma back to the config");

  bool restricted = false;
  std::optional<double> eval_sigma;
  std::string eval_data, eval_out;
  auto* eval = app.add_subcommand("eval", "evaluate on the test split");
  eval->add_flag("--restricted", restricted, "drive the controller with context-restricted decisions");
  eval->add_option("--sigma", eval_sigma, "override noise for the generated test set");
  eval->add_option("--data", eval_data, "test CSV (default: generate)");
  eval->add_option("--out", eval_out, "report path");

  std::optional<int> bench_n;
  std::string backend = "both";
  auto* bench = app.add_subcommand("bench", "per-window latency of the classifier");
  bench->add_option("--n", bench_n);
  bench->add_option("--backend", backend)->check(CLI::IsMember({"dense", "spiking", "both"}));

  std::string scenario, sim_log;
  auto* sim = app.add_subcommand("simulate", "run a scripted end-to-end trial");
  sim->add_option("scenario", scenario)->required();
  sim->add_option("--log", sim_log, "command log path (JSON lines)");

  std::string study_csv;
  auto* study = app.add_subcommand("study-stats", "per-condition means and SDs from trial, TLX or aggregate CSVs");
  study->add_option("csv", study_csv)->required();

  std::optional<int> port;
  auto* srv = app.add_subcommand("serve", "run the local WebSocket service");
  srv->add_option("--port", port)->check(CLI::Range(0, 65535));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kInvalid;
  }

  try {
    if (*study) return cmd_study_stats(study_csv);
    load(g);
    if (*gen) return cmd_gen_data(g, splits, gen_sigma);
    if (*train) return cmd_train(g, train_data);
    if (*convert) return cmd_convert(g);
    if (*calib) return cmd_calibrate(g, target, tol, !no_save);
    if (*eval) return cmd_eval(g, restricted, eval_sigma, eval_data, eval_out);
    if (*bench) return cmd_bench(g, bench_n, backend);
    if (*sim) return cmd_simulate(g, scenario, sim_log);
    if (*srv) return cmd_serve(g, port);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.code() == Errc::CalibrationFailed ? kFailed : kInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInvalid;
  }
  return kInvalid;
}
