#pragma once

// Configuration, synthetic datasets, evaluation, calibration, latency bench,
// study analytics and end-to-end scenario simulation.

#include "neuromanip/classify.hpp"
#include "neuromanip/controller.hpp"
#include "neuromanip/grasp.hpp"
#include "neuromanip/scene.hpp"
#include "neuromanip/signal.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace nm::harness {

using signal::FeatureVector;
using signal::GestureLabel;

// ---- configuration -------------------------------------------------------

struct DatasetSizes {
  int train = 6000;
  int calib = 300;
  int test = 6000;
  int validation = 6000;
};

struct CalibrationSettings {
  double target = 0.83;
  double tol = 0.02;
  double sigma_lo = 0.0;
  double sigma_hi = 3.0;
  int max_iter = 30;
};

struct BenchSettings {
  int n = 10000;
  int warmup = 100;
  double budget_us = 5000.0;
};

struct Paths {
  std::filesystem::path scene;
  std::filesystem::path library;
  std::filesystem::path model;
  std::filesystem::path out_dir;
};

struct RunConfig {
  std::uint64_t seed = 7;
  DatasetSizes dataset;
  double noise_sigma = 0.0;      // evaluation noise; calibrate writes sigma* here
  double train_noise_max = 0.8;  // training windows draw sigma ~ U[0, this]
  double mains_amp = 0.1;
  int timesteps = classify::kDefaultTimesteps;
  int k_max = 3;
  int confirm_windows = 5;
  double confirm_threshold = 0.6;
  int ramp_ms = 800;
  classify::TrainOptions train;
  CalibrationSettings calibration;
  BenchSettings bench;
  Paths paths;
  int port = 8765;

  controller::ControllerConfig controller_config() const { return {confirm_windows, confirm_threshold, ramp_ms}; }
};

// Unknown keys are rejected at every level. Relative paths resolve against
// the file's directory.
RunConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir,
                       const std::string& origin = "<config>");
RunConfig load_config(const std::filesystem::path& path);
void save_config(const std::filesystem::path& path, const RunConfig& cfg);
// `explicit_path`, else $NEUROMANIP_CONFIG, else the bundled default;
// $NEUROMANIP_SEED overrides the seed.
std::filesystem::path resolve_config_path(const std::optional<std::filesystem::path>& explicit_path);
RunConfig load_config_with_env(const std::optional<std::filesystem::path>& explicit_path);
std::filesystem::path default_data_dir();

// ---- synthetic data ------------------------------------------------------

inline constexpr int kSampleDurationMs = 1000;

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c = 0);

// Last 200 ms window of a filtered 1 s synthetic recording.
signal::EmgWindow synth_window(GestureLabel g, double sigma, double mains_amp, std::uint64_t seed);

struct Sample {
  FeatureVector x{};
  GestureLabel y = GestureLabel::Rest;
  int object_id = 0;
  std::array<double, 2> gaze_px{};
  double sigma = 0.0;
  std::uint64_t seed = 0;
};

enum class Split { Train, Calib, Test, Validation };

struct World {
  scene::Scene scene;
  grasp::GraspLibrary lib;
};
World load_world(const RunConfig& cfg);

// Balanced labels (i mod 6). Each sample is paired with an object whose
// candidate set admits its label; train/calib draw per-sample noise in
// [0, train_noise_max], test/validation use `sigma` (default: cfg.noise_sigma).
std::vector<Sample> generate_dataset(const RunConfig& cfg, const World& world, Split split,
                                     std::optional<double> sigma = std::nullopt, std::optional<int> n = std::nullopt);

void write_dataset_csv(const std::filesystem::path& path, std::span<const Sample> samples);
std::vector<Sample> read_dataset_csv(const std::filesystem::path& path);

classify::TrainResult train_model(const RunConfig& cfg, std::span<const Sample> train);
classify::SpikingNetwork convert_model(const RunConfig& cfg, const classify::DenseNet& net,
                                       std::span<const Sample> calib);

// ---- evaluation ----------------------------------------------------------

enum class Mode { Unrestricted, Restricted };

struct EvalReport {
  Mode mode = Mode::Restricted;
  int n_samples = 0;
  double noise_sigma = 0.0;
  double acc_unrestricted = 0.0;
  double acc_restricted = 0.0;
  double lift = 0.0;
  std::array<std::array<int, 6>, 6> confusion{};  // [true][predicted], unrestricted
  std::array<std::array<int, 6>, 6> confusion_restricted{};
  int unsafe_executions = 0;
  int rejected_decisions = 0;
  int grasp_commands = 0;
  bool has_spiking = false;
  double spiking_agreement = 0.0;
  double spiking_acc_unrestricted = 0.0;
  double spiking_acc_restricted = 0.0;
  double mean_event_ratio = 0.0;
  std::int64_t dense_macs = 0;
  double mean_latency_dense_us = 0.0;
  double mean_latency_spiking_us = 0.0;
};

EvalReport evaluate(std::span<const Sample> samples, const classify::Pipeline& model, const World& world,
                    const RunConfig& cfg, Mode mode);
// Stable JSON; latency lives under its own "latency" key.
std::string report_json(const EvalReport& r, std::uint64_t seed);

struct CalibrationResult {
  double sigma = 0.0;
  double accuracy = 0.0;
  int iterations = 0;
  std::vector<std::pair<double, double>> probes;  // (sigma, accuracy)
};

// Dense accuracy over a validation set regenerated at each probed sigma
// (same seeds at every sigma).
double accuracy_at(const RunConfig& cfg, const classify::Pipeline& model, double sigma, int n);
CalibrationResult calibrate_noise(const RunConfig& cfg, const classify::Pipeline& model, double target, double tol);

struct BenchReport {
  classify::Backend backend = classify::Backend::Dense;
  int n = 0;
  double mean_us = 0.0;
  double median_us = 0.0;
  double p99_us = 0.0;
};

BenchReport bench_latency(const classify::Pipeline& model, classify::Backend backend,
                          std::span<const signal::EmgWindow> windows, int n, int warmup = 100);
std::string bench_json(std::span<const BenchReport> reports);

// ---- study analytics -----------------------------------------------------

struct TrialRecord {
  std::string participant;
  int mass_g = 0;
  int trial = 0;
  double completion_s = 0.0;
};

inline constexpr std::array<std::string_view, 6> kTlxScales = {"mental", "physical", "temporal",
                                                               "performance", "effort", "frustration"};

struct TlxRecord {
  std::string participant;
  int mass_g = 0;
  std::array<int, 6> scores{};
};

struct AggregateRow {
  std::string metric;
  int mass_g = 0;
  int n = 0;
  double mean = 0.0;
  std::optional<double> sd;  // absent for n < 2 or when unpublished
};

// completion_s(trial 3) - completion_s(trial 1); trials 1..3 must each be present once.
double fatigue_index(std::span<const TrialRecord> trials);

// Per-(mass, metric) sample mean and n-1 standard deviation.
std::vector<AggregateRow> study_aggregate(std::span<const TrialRecord> trials);
std::vector<AggregateRow> study_aggregate(std::span<const TlxRecord> records);
// Pools rows sharing (metric, mass); a single row is returned unchanged.
std::vector<AggregateRow> pool_aggregates(std::span<const AggregateRow> rows);

enum class StudyCsvKind { Trials, Tlx, Aggregates };
struct StudyTable {
  StudyCsvKind kind = StudyCsvKind::Aggregates;
  std::vector<TrialRecord> trials;
  std::vector<TlxRecord> tlx;
  std::vector<AggregateRow> aggregates;
};
StudyTable read_study_csv(const std::filesystem::path& path);
std::vector<AggregateRow> study_stats(const StudyTable& table);
std::string aggregates_csv(std::span<const AggregateRow> rows);

// ---- end-to-end simulation -----------------------------------------------

struct GazeSegment {
  std::optional<int> object_id;  // none: background
  int duration_ms = 0;
};

struct IntentSegment {
  GestureLabel gesture = GestureLabel::Rest;
  int duration_ms = 0;
};

struct Scenario {
  std::string name;
  std::vector<GazeSegment> gaze;
  std::vector<IntentSegment> intent;
  std::optional<int> release_ms;
  double noise_sigma = 0.05;
  classify::Backend backend = classify::Backend::Dense;
  std::optional<GestureLabel> expect_executed;  // none: expect no grasp
  int expect_min_rejected = 0;
  std::uint64_t seed = 1;
};

Scenario load_scenario(const std::filesystem::path& path, const scene::Scene& scene);

struct SimulationResult {
  std::vector<controller::ControlEvent> events;
  std::vector<controller::CommandLogEntry> log;
  std::vector<GestureLabel> executed;
  int rejected = 0;
  int unsafe_executions = 0;
  std::string final_state;
  std::vector<scene::Detection> detections;  // at each fixation onset
  bool expectation_met = false;
};

SimulationResult simulate(const RunConfig& cfg, const World& world, const classify::Pipeline& model,
                          const Scenario& scenario);

}  // namespace nm::harness
