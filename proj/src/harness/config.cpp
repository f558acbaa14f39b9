#include "neuromanip/error.hpp"
#include "neuromanip/harness.hpp"
#include "text.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace nm::harness {

namespace {

using nlohmann::json;

class Reader {
 public:
  Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) fail("expected an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.push_back(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      fail(std::string("field '") + key + "' has the wrong type");
    }
  }

  const json* child(const char* key) {
    seen_.push_back(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (std::find(seen_.begin(), seen_.end(), it.key()) == seen_.end()) fail("unknown key '" + it.key() + "'");
    }
  }

  [[noreturn]] void fail(const std::string& what) const { throw Error(Errc::Validation, "harness", where_ + ": " + what); }
  const std::string& where() const { return where_; }

 private:
  const json& j_;
  std::string where_;
  std::vector<std::string> seen_;
};

void check(bool ok, const std::string& where, const std::string& what) {
  if (!ok) throw Error(Errc::Validation, "harness", where + ": " + what);
}

std::filesystem::path resolve(const std::string& p, const std::filesystem::path& base) {
  if (p.empty()) return {};
  std::filesystem::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

}  // namespace

std::filesystem::path default_data_dir() {
  if (const char* d = std::getenv("NEUROMANIP_DATA_DIR"); d && *d) return d;
  return NEUROMANIP_DATA_DIR;
}

RunConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir, const std::string& origin) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(Errc::Validation, "harness", origin + ": " + e.what());
  }
  RunConfig cfg;
  Reader top(j, origin);
  top.get("seed", cfg.seed);
  if (const auto* d = top.child("dataset")) {
    Reader r(*d, origin + ": dataset");
    r.get("train", cfg.dataset.train);
    r.get("calib", cfg.dataset.calib);
    r.get("test", cfg.dataset.test);
    r.get("validation", cfg.dataset.validation);
    r.finish();
  }
  top.get("noise_sigma", cfg.noise_sigma);
  top.get("train_noise_max", cfg.train_noise_max);
  top.get("mains_amp", cfg.mains_amp);
  top.get("timesteps", cfg.timesteps);
  top.get("k_max", cfg.k_max);
  top.get("confirm_windows", cfg.confirm_windows);
  top.get("confirm_threshold", cfg.confirm_threshold);
  top.get("ramp_ms", cfg.ramp_ms);
  if (const auto* t = top.child("train")) {
    Reader r(*t, origin + ": train");
    r.get("epochs", cfg.train.epochs);
    r.get("learning_rate", cfg.train.learning_rate);
    r.get("momentum", cfg.train.momentum);
    r.get("weight_decay", cfg.train.weight_decay);
    r.get("batch_size", cfg.train.batch_size);
    r.finish();
  }
  if (const auto* c = top.child("calibration")) {
    Reader r(*c, origin + ": calibration");
    r.get("target", cfg.calibration.target);
    r.get("tol", cfg.calibration.tol);
    r.get("sigma_lo", cfg.calibration.sigma_lo);
    r.get("sigma_hi", cfg.calibration.sigma_hi);
    r.get("max_iter", cfg.calibration.max_iter);
    r.finish();
  }
  if (const auto* b = top.child("bench")) {
    Reader r(*b, origin + ": bench");
    r.get("n", cfg.bench.n);
    r.get("warmup", cfg.bench.warmup);
    r.get("budget_us", cfg.bench.budget_us);
    r.finish();
  }
  if (const auto* p = top.child("paths")) {
    Reader r(*p, origin + ": paths");
    std::string scene, library, model, out_dir;
    r.get("scene", scene);
    r.get("library", library);
    r.get("model", model);
    r.get("out_dir", out_dir);
    r.finish();
    cfg.paths.scene = resolve(scene, base_dir);
    cfg.paths.library = resolve(library, base_dir);
    cfg.paths.model = resolve(model, base_dir);
    cfg.paths.out_dir = resolve(out_dir, base_dir);
  }
  top.get("port", cfg.port);
  top.finish();

  const auto& w = origin;
  check(cfg.dataset.train > 0 && cfg.dataset.calib > 0 && cfg.dataset.test > 0 && cfg.dataset.validation > 0, w,
        "dataset sizes must be positive");
  check(cfg.noise_sigma >= 0.0 && cfg.train_noise_max >= 0.0 && cfg.mains_amp >= 0.0, w,
        "noise levels must be non-negative");
  check(cfg.timesteps > 0, w, "timesteps must be positive");
  check(cfg.k_max >= 1, w, "k_max must be at least 1");
  check(cfg.confirm_windows >= 1, w, "confirm_windows must be at least 1");
  check(cfg.confirm_threshold >= 0.0 && cfg.confirm_threshold <= 1.0, w, "confirm_threshold must be in [0, 1]");
  check(cfg.ramp_ms > 0, w, "ramp_ms must be positive");
  check(cfg.calibration.tol > 0.0 && cfg.calibration.sigma_lo >= 0.0 &&
            cfg.calibration.sigma_hi > cfg.calibration.sigma_lo && cfg.calibration.max_iter > 0,
        w, "calibration needs tol > 0 and 0 <= sigma_lo < sigma_hi");
  check(cfg.bench.n >= 0 && cfg.bench.warmup >= 0 && cfg.bench.budget_us > 0.0, w, "bad bench settings");
  check(cfg.port >= 0 && cfg.port <= 65535, w, "port out of range");
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "harness", "cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path(), path.string());
}

void save_config(const std::filesystem::path& path, const RunConfig& cfg) {
  const auto base = path.parent_path();
  const auto rel = [&](const std::filesystem::path& p) -> std::string {
    if (p.empty()) return "";
    const auto b = std::filesystem::absolute(base.empty() ? std::filesystem::path(".") : base);
    auto r = std::filesystem::absolute(p).lexically_normal().lexically_relative(b.lexically_normal());
    return r.empty() ? p.string() : r.generic_string();
  };
  nlohmann::ordered_json j;
  j["seed"] = cfg.seed;
  j["dataset"] = {{"train", cfg.dataset.train},
                  {"calib", cfg.dataset.calib},
                  {"test", cfg.dataset.test},
                  {"validation", cfg.dataset.validation}};
  j["noise_sigma"] = cfg.noise_sigma;
  j["train_noise_max"] = cfg.train_noise_max;
  j["mains_amp"] = cfg.mains_amp;
  j["timesteps"] = cfg.timesteps;
  j["k_max"] = cfg.k_max;
  j["confirm_windows"] = cfg.confirm_windows;
  j["confirm_threshold"] = cfg.confirm_threshold;
  j["ramp_ms"] = cfg.ramp_ms;
  j["train"] = {{"epochs", cfg.train.epochs},
                {"learning_rate", cfg.train.learning_rate},
                {"momentum", cfg.train.momentum},
                {"weight_decay", cfg.train.weight_decay},
                {"batch_size", cfg.train.batch_size}};
  j["calibration"] = {{"target", cfg.calibration.target},
                      {"tol", cfg.calibration.tol},
                      {"sigma_lo", cfg.calibration.sigma_lo},
                      {"sigma_hi", cfg.calibration.sigma_hi},
                      {"max_iter", cfg.calibration.max_iter}};
  j["bench"] = {{"n", cfg.bench.n}, {"warmup", cfg.bench.warmup}, {"budget_us", cfg.bench.budget_us}};
  j["paths"] = {{"scene", rel(cfg.paths.scene)},
                {"library", rel(cfg.paths.library)},
                {"model", rel(cfg.paths.model)},
                {"out_dir", rel(cfg.paths.out_dir)}};
  j["port"] = cfg.port;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "harness", "cannot write config " + path.string());
  out << j.dump(2) << '\n';
}

std::filesystem::path resolve_config_path(const std::optional<std::filesystem::path>& explicit_path) {
  if (explicit_path && !explicit_path->empty()) return *explicit_path;
  if (const char* env = std::getenv("NEUROMANIP_CONFIG"); env && *env) return env;
  return default_data_dir() / "config.json";
}

RunConfig load_config_with_env(const std::optional<std::filesystem::path>& explicit_path) {
  RunConfig cfg = load_config(resolve_config_path(explicit_path));
  if (const char* env = std::getenv("NEUROMANIP_SEED"); env && *env) {
    std::uint64_t seed = 0;
    if (!text::parse(env, seed)) {
      throw Error(Errc::Validation, "harness", std::string("NEUROMANIP_SEED is not an unsigned integer: ") + env);
    }
    cfg.seed = seed;
  }
  return cfg;
}

}  // namespace nm::harness
