#include <doctest.h>

#include "fixtures.hpp"
#include "neuromanip/error.hpp"
#include "neuromanip/harness.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

using namespace nm;
using namespace nm::harness;
namespace fs = std::filesystem;

namespace {

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return Errc::Io;
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "nm_harness_test";
  fs::create_directories(dir);
  return dir / name;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Mean and n-1 SD the long way round.
std::pair<double, double> mean_sd(const std::vector<double>& xs) {
  long double s = 0;
  for (double x : xs) s += x;
  const long double m = s / xs.size();
  long double ss = 0;
  for (double x : xs) ss += (x - m) * (x - m);
  return {static_cast<double>(m), static_cast<double>(std::sqrt(ss / (xs.size() - 1)))};
}

const AggregateRow* find_row(const std::vector<AggregateRow>& rows, const std::string& metric, int mass) {
  for (const auto& r : rows)
    if (r.metric == metric && r.mass_g == mass) return &r;
  return nullptr;
}

}  // namespace

TEST_CASE("config loading") {
  const auto& cfg = fixture::config();
  CHECK(cfg.k_max == 3);
  CHECK(cfg.confirm_windows == 5);
  CHECK(cfg.confirm_threshold == 0.6);
  CHECK(cfg.timesteps == 64);
  CHECK(cfg.paths.scene.is_absolute());
  CHECK(fs::exists(cfg.paths.scene));
  CHECK(fs::exists(cfg.paths.library));

  const auto base = fs::path("/tmp/somewhere");
  const auto rel = parse_config(R"({"paths":{"scene":"s.json","library":"/abs/lib.json","model":"m/model.json","out_dir":"o"}})", base);
  CHECK(rel.paths.scene == base / "s.json");
  CHECK(rel.paths.library == fs::path("/abs/lib.json"));
  CHECK(rel.paths.model == base / "m/model.json");

  CHECK(code_of([&] { parse_config(R"({"seed":1,"colour":"red"})", base); }) == Errc::Validation);
  CHECK(code_of([&] { parse_config(R"({"train":{"epochs":3,"dropout":0.5}})", base); }) == Errc::Validation);
  CHECK(code_of([&] { parse_config(R"({"k_max":0})", base); }) == Errc::Validation);
  CHECK(code_of([&] { parse_config(R"({"seed":"seven"})", base); }) == Errc::Validation);
  CHECK(code_of([&] { parse_config("{", base); }) == Errc::Validation);

  SUBCASE("round trip through save_config") {
    auto c = cfg;
    c.noise_sigma = 0.4321;
    c.seed = 99;
    const auto p = scratch("config.json");
    save_config(p, c);
    const auto back = load_config(p);
    CHECK(back.noise_sigma == 0.4321);
    CHECK(back.seed == 99);
    CHECK(fs::weakly_canonical(back.paths.scene) == fs::weakly_canonical(c.paths.scene));
    CHECK(fs::weakly_canonical(back.paths.model) == fs::weakly_canonical(c.paths.model));
    CHECK(back.train.weight_decay == c.train.weight_decay);
  }
  SUBCASE("environment overrides") {
    const auto p = scratch("config_env.json");
    save_config(p, cfg);
    ::setenv("NEUROMANIP_CONFIG", p.c_str(), 1);
    ::setenv("NEUROMANIP_SEED", "12345", 1);
    CHECK(resolve_config_path(std::nullopt) == p);
    CHECK(load_config_with_env(std::nullopt).seed == 12345);
    ::setenv("NEUROMANIP_SEED", "-4", 1);
    CHECK(code_of([] { load_config_with_env(std::nullopt); }) == Errc::Validation);
    ::unsetenv("NEUROMANIP_SEED");
    ::unsetenv("NEUROMANIP_CONFIG");
    CHECK(load_config_with_env(p).seed == cfg.seed);
  }
}

TEST_CASE("fatigue index") {
  std::vector<TrialRecord> t{{"p1", 100, 1, 50.0}, {"p1", 100, 2, 51.0}, {"p1", 100, 3, 53.0}};
  CHECK(fatigue_index(t) == 3.0);
  t[2].completion_s = 50.0;
  CHECK(fatigue_index(t) == 0.0);
  t.pop_back();
  CHECK(code_of([&] { fatigue_index(t); }) == Errc::MissingTrial);
}

TEST_CASE("study aggregates") {
  SUBCASE("trial records: per-participant means, n-1 SD") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(40.0, 100.0);
    std::vector<TrialRecord> trials;
    std::map<int, std::vector<double>> comp, fat;
    for (int p = 0; p < 7; ++p) {
      for (int m : {100, 200, 300}) {
        double v[3];
        for (int k = 0; k < 3; ++k) {
          v[k] = u(rng);
          trials.push_back({"p" + std::to_string(p), m, k + 1, v[k]});
        }
        comp[m].push_back((v[0] + v[1] + v[2]) / 3.0);
        fat[m].push_back(v[2] - v[0]);
      }
    }
    const auto rows = study_aggregate(trials);
    for (int m : {100, 200, 300}) {
      const auto* c = find_row(rows, "completion_s", m);
      const auto* f = find_row(rows, "fatigue_index_s", m);
      REQUIRE(c);
      REQUIRE(f);
      const auto [cm, cs] = mean_sd(comp[m]);
      const auto [fm, fsd] = mean_sd(fat[m]);
      CHECK(c->n == 7);
      CHECK(c->mean == doctest::Approx(cm).epsilon(1e-12));
      CHECK(*c->sd == doctest::Approx(cs).epsilon(1e-12));
      CHECK(f->mean == doctest::Approx(fm).epsilon(1e-12));
      CHECK(*f->sd == doctest::Approx(fsd).epsilon(1e-12));
    }
  }
  SUBCASE("single participant: SD absent") {
    std::vector<TrialRecord> t{{"p1", 200, 1, 60.0}, {"p1", 200, 2, 61.0}, {"p1", 200, 3, 65.0}};
    const auto rows = study_aggregate(t);
    const auto* f = find_row(rows, "fatigue_index_s", 200);
    REQUIRE(f);
    CHECK(f->n == 1);
    CHECK(f->mean == 5.0);
    CHECK_FALSE(f->sd.has_value());
    CHECK(find_row(rows, "completion_s", 200)->mean == 62.0);
    std::vector<TlxRecord> one{{"p1", 100, {1, 2, 3, 4, 5, 6}}};
    const auto tl = study_aggregate(one);
    CHECK(find_row(tl, "tlx_effort", 100)->mean == 5.0);
    CHECK_FALSE(find_row(tl, "tlx_effort", 100)->sd.has_value());
  }
  SUBCASE("validation") {
    CHECK(code_of([] { study_aggregate(std::span<const TrialRecord>{}); }) == Errc::EmptyInput);
    CHECK(code_of([] { study_aggregate(std::span<const TlxRecord>{}); }) == Errc::EmptyInput);
    std::vector<TrialRecord> bad_mass{{"p", 150, 1, 50.0}};
    CHECK(code_of([&] { study_aggregate(bad_mass); }) == Errc::Validation);
    std::vector<TrialRecord> dup{{"p", 100, 1, 50.0}, {"p", 100, 1, 51.0}, {"p", 100, 3, 52.0}};
    CHECK(code_of([&] { study_aggregate(dup); }) == Errc::Validation);
    std::vector<TrialRecord> missing{{"p", 100, 1, 50.0}, {"p", 100, 3, 52.0}};
    CHECK(code_of([&] { study_aggregate(missing); }) == Errc::MissingTrial);
    std::vector<TlxRecord> bad_score{{"p", 100, {1, 2, 3, 4, 5, 21}}};
    CHECK(code_of([&] { study_aggregate(bad_score); }) == Errc::Validation);
  }
  SUBCASE("pooling two groups equals aggregating the raw records") {
    std::mt19937_64 rng(6);
    std::uniform_int_distribution<int> s(1, 20);
    std::vector<TlxRecord> a, b, all;
    for (int p = 0; p < 13; ++p) {
      for (int m : {100, 200, 300}) {
        TlxRecord r{"p" + std::to_string(p), m, {}};
        for (int& v : r.scores) v = s(rng);
        (p < 5 ? a : b).push_back(r);
        all.push_back(r);
      }
    }
    auto rows = study_aggregate(a);
    const auto rb = study_aggregate(b);
    rows.insert(rows.end(), rb.begin(), rb.end());
    const auto pooled = pool_aggregates(rows);
    const auto direct = study_aggregate(all);
    REQUIRE(pooled.size() == direct.size());
    for (const auto& d : direct) {
      const auto* p = find_row(pooled, d.metric, d.mass_g);
      REQUIRE(p);
      CHECK(p->n == d.n);
      CHECK(p->mean == doctest::Approx(d.mean).epsilon(1e-12));
      CHECK(*p->sd == doctest::Approx(*d.sd).epsilon(1e-12));
    }
  }
}

TEST_CASE("bundled reference aggregates reproduce exactly") {
  const auto path = fixture::data_dir() / "reference_study_aggregates.csv";
  const auto table = read_study_csv(path);
  CHECK(table.kind == StudyCsvKind::Aggregates);
  const auto rows = study_stats(table);
  CHECK(rows.size() == 24);

  // Published figure values.
  const double completion[] = {51.6, 67.5, 92.1}, fatigue[] = {2.5, 4.7, 12.2}, physical[] = {3.9, 9.5, 16.5};
  const int masses[] = {100, 200, 300};
  for (int i = 0; i < 3; ++i) {
    CHECK(find_row(rows, "completion_s", masses[i])->mean == completion[i]);
    CHECK(find_row(rows, "fatigue_index_s", masses[i])->mean == fatigue[i]);
    CHECK(find_row(rows, "tlx_physical", masses[i])->mean == physical[i]);
  }
  CHECK_FALSE(find_row(rows, "completion_s", 100)->sd.has_value());
  CHECK(*find_row(rows, "tlx_physical", 300)->sd == 1.1);

  // The emitted table is the input table minus its comment line.
  std::string expected;
  std::istringstream in(read_file(path));
  for (std::string line; std::getline(in, line);)
    if (!line.empty() && line[0] != '#') expected += line + "\n";
  CHECK(aggregates_csv(rows) == expected);

  write_file(scratch("bad_study.csv"), "metric,mass_g,n,mean,sd\ncompletion_s,100,ten,51.6,\n");
  try {
    read_study_csv(scratch("bad_study.csv"));
    FAIL("accepted a bad row");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::Validation);
    CHECK(e.detail().find(":2:") != std::string::npos);
  }
}

TEST_CASE("trial and TLX csv files") {
  write_file(scratch("trials.csv"),
             "participant,mass_g,trial,completion_s\n"
             "a,100,1,50\na,100,2,51\na,100,3,53\nb,100,1,48\nb,100,2,49\nb,100,3,52\n");
  const auto t = read_study_csv(scratch("trials.csv"));
  CHECK(t.kind == StudyCsvKind::Trials);
  const auto rows = study_stats(t);
  CHECK(find_row(rows, "fatigue_index_s", 100)->mean == 3.5);
  CHECK(find_row(rows, "completion_s", 100)->mean == doctest::Approx((154.0 / 3 + 149.0 / 3) / 2));

  write_file(scratch("tlx.csv"),
             "participant,mass_g,mental,physical,temporal,performance,effort,frustration\n"
             "a,300,10,16,12,8,17,12\nb,300,11,17,11,9,18,11\n");
  const auto x = read_study_csv(scratch("tlx.csv"));
  CHECK(x.kind == StudyCsvKind::Tlx);
  const auto tr = study_stats(x);
  CHECK(find_row(tr, "tlx_physical", 300)->mean == 16.5);
  CHECK(*find_row(tr, "tlx_physical", 300)->sd == doctest::Approx(std::sqrt(0.5)));
}

TEST_CASE("dataset generation") {
  const auto cfg = fixture::small_config();
  const auto& w = fixture::world();
  const auto a = generate_dataset(cfg, w, Split::Test, 0.3, 120);
  const auto b = generate_dataset(cfg, w, Split::Test, 0.3, 120);
  REQUIRE(a.size() == 120);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].x == b[i].x);
    CHECK(a[i].y == b[i].y);
    CHECK(a[i].object_id == b[i].object_id);
    CHECK(a[i].y == static_cast<GestureLabel>(i % 6));
    const auto cs = grasp::context_to_grasps(*w.scene.find(a[i].object_id), w.lib);
    CHECK(cs.admits(w.lib, a[i].y));
  }
  const auto other = generate_dataset(cfg, w, Split::Validation, 0.3, 120);
  CHECK(other[0].x != a[0].x);

  write_dataset_csv(scratch("ds.csv"), a);
  const auto back = read_dataset_csv(scratch("ds.csv"));
  REQUIRE(back.size() == a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(back[i].x == a[i].x);
    CHECK(back[i].y == a[i].y);
    CHECK(back[i].gaze_px == a[i].gaze_px);
    CHECK(back[i].seed == a[i].seed);
  }
}

TEST_CASE("evaluate") {
  const auto cfg = fixture::small_config();
  const auto& w = fixture::world();
  const auto& model = fixture::small_model();

  SUBCASE("noiseless data is perfectly separable by the bundled-config model") {
    const auto clean = generate_dataset(fixture::config(), w, Split::Test, 0.0);
    const auto r = evaluate(clean, fixture::full_dense_model(), w, fixture::config(), Mode::Restricted);
    CHECK(r.n_samples == 6000);
    CHECK(r.acc_unrestricted == 1.0);
    CHECK(r.acc_restricted == 1.0);
    CHECK(r.lift == 0.0);
    CHECK(r.unsafe_executions == 0);
  }
  SUBCASE("noisy data: lift, safety, confusion bookkeeping, determinism") {
    const auto noisy = generate_dataset(cfg, w, Split::Test, 1.0, 600);
    const auto r = evaluate(noisy, model, w, cfg, Mode::Restricted);
    MESSAGE("acc_u " << r.acc_unrestricted << " acc_r " << r.acc_restricted);
    CHECK(r.lift >= 0.0);
    CHECK(r.acc_unrestricted < 1.0);
    CHECK(r.unsafe_executions == 0);
    CHECK(r.grasp_commands > 0);
    for (int y = 0; y < 6; ++y) {
      int row = 0, row_r = 0;
      for (int p = 0; p < 6; ++p) {
        row += r.confusion[y][p];
        row_r += r.confusion_restricted[y][p];
      }
      CHECK(row == 100);
      CHECK(row_r == 100);
    }
    CHECK(r.dense_macs == 6528);
    CHECK(r.mean_event_ratio > 0.0);

    const auto strip = [&](const EvalReport& e) {
      auto j = nlohmann::json::parse(report_json(e, cfg.seed));
      j.erase("latency");
      return j.dump();
    };
    const auto again = evaluate(noisy, model, w, cfg, Mode::Restricted);
    CHECK(strip(again) == strip(r));
    const auto j = nlohmann::json::parse(report_json(r, cfg.seed));
    CHECK(j["mode"] == "restricted");
    CHECK(j["report"].get<std::string>().find("synthetic") != std::string::npos);

    const auto u = evaluate(noisy, model, w, cfg, Mode::Unrestricted);
    CHECK(u.acc_unrestricted == r.acc_unrestricted);
    CHECK(u.unsafe_executions == 0);
  }
  SUBCASE("a sample whose label is not a candidate is a generator bug") {
    auto ds = generate_dataset(cfg, w, Split::Test, 0.0, 12);
    for (auto& s : ds) {
      const auto cs = grasp::context_to_grasps(*w.scene.find(s.object_id), w.lib);
      for (int g = 0; g < 6; ++g) {
        if (!cs.admits(w.lib, static_cast<GestureLabel>(g))) {
          s.y = static_cast<GestureLabel>(g);
          break;
        }
      }
    }
    CHECK(code_of([&] { evaluate(ds, model, w, cfg, Mode::Restricted); }) == Errc::DatasetContextMismatch);
    CHECK(code_of([&] { evaluate(std::span<const Sample>{}, model, w, cfg, Mode::Restricted); }) == Errc::EmptyInput);
  }
}

TEST_CASE("calibrate_noise bracket edges") {
  auto cfg = fixture::small_config();
  cfg.dataset.validation = 600;
  const auto& model = fixture::small_model();
  const auto top = calibrate_noise(cfg, model, 1.0, 0.02);
  CHECK(top.sigma == 0.0);
  CHECK(top.accuracy >= 0.98);
  CHECK(code_of([&] { calibrate_noise(cfg, model, 0.1, 0.02); }) == Errc::CalibrationFailed);
}

TEST_CASE("bench_latency") {
  const auto& model = fixture::small_model();
  std::vector<signal::EmgWindow> windows;
  for (int i = 0; i < 12; ++i) windows.push_back(synth_window(static_cast<GestureLabel>(i % 6), 0.2, 0.1, 500 + i));
  CHECK(code_of([&] { bench_latency(model, classify::Backend::Dense, windows, 0); }) == Errc::EmptyBench);
  CHECK(code_of([&] { bench_latency(model, classify::Backend::Dense, {}, 10); }) == Errc::EmptyBench);
  const auto r = bench_latency(model, classify::Backend::Spiking, windows, 50, 5);
  CHECK(r.n == 50);
  CHECK(r.mean_us > 0.0);
  CHECK(r.median_us <= r.p99_us);
  const auto j = nlohmann::json::parse(bench_json(std::span(&r, 1)));
  CHECK(j[0]["backend"] == "spiking");
}

TEST_CASE("bundled scenarios") {
  const auto cfg = fixture::small_config();
  const auto& w = fixture::world();
  const auto& model = fixture::small_model();
  const auto dir = fixture::data_dir() / "scenarios";

  const auto cup = simulate(cfg, w, model, load_scenario(dir / "cup_cylindrical.json", w.scene));
  CHECK(cup.expectation_met);
  CHECK(cup.unsafe_executions == 0);
  REQUIRE_FALSE(cup.executed.empty());
  CHECK(cup.executed.front() == GestureLabel::CylindricalGrip);
  REQUIRE_FALSE(cup.detections.empty());
  CHECK(cup.detections.front().class_label == "cup");

  const auto off = simulate(cfg, w, model, load_scenario(dir / "gaze_off_object.json", w.scene));
  CHECK(off.expectation_met);
  CHECK(off.log.empty());

  const auto open = simulate(cfg, w, model, load_scenario(dir / "openhand_at_cup.json", w.scene));
  CHECK(open.expectation_met);
  CHECK(open.log.empty());
  CHECK(open.rejected > 0);

  const auto again = simulate(cfg, w, model, load_scenario(dir / "cup_cylindrical.json", w.scene));
  CHECK(again.log == cup.log);
  CHECK(again.events == cup.events);

  write_file(scratch("sc1.json"), R"({"name":"x","gaze":[{"object":"cup","duration_ms":15}],"intent":[],"expect":{"executed":null}})");
  CHECK(code_of([&] { load_scenario(scratch("sc1.json"), w.scene); }) == Errc::Validation);
  write_file(scratch("sc2.json"), R"({"name":"x","gaze":[{"object":"teapot","duration_ms":100}],"intent":[],"expect":{"executed":null}})");
  CHECK(code_of([&] { load_scenario(scratch("sc2.json"), w.scene); }) == Errc::Validation);
  write_file(scratch("sc3.json"), R"({"name":"x","gaze":[],"intent":[],"expect":{"executed":null},"speed":2})");
  CHECK(code_of([&] { load_scenario(scratch("sc3.json"), w.scene); }) == Errc::Validation);
}
