#pragma once

// Shared, lazily built artifacts: the bundled config/world and a small model
// trained the same way as the full pipeline.

#include "neuromanip/harness.hpp"

#include <filesystem>

namespace fixture {

inline std::filesystem::path data_dir() { return NEUROMANIP_DATA_DIR; }

inline const nm::harness::RunConfig& config() {
  static const auto cfg = nm::harness::load_config(data_dir() / "config.json");
  return cfg;
}

inline const nm::harness::World& world() {
  static const auto w = nm::harness::load_world(config());
  return w;
}

// 1800 training windows instead of 6000 to keep unit tests quick.
inline nm::harness::RunConfig small_config() {
  auto cfg = config();
  cfg.dataset.train = 1800;
  cfg.dataset.calib = 300;
  cfg.dataset.test = 1200;
  cfg.dataset.validation = 1200;
  return cfg;
}

inline const nm::classify::Pipeline& small_model() {
  static const auto model = [] {
    const auto cfg = small_config();
    const auto train = nm::harness::generate_dataset(cfg, world(), nm::harness::Split::Train);
    nm::classify::Pipeline p(nm::harness::train_model(cfg, train).net);
    const auto calib = nm::harness::generate_dataset(cfg, world(), nm::harness::Split::Calib);
    p.set_spiking(nm::harness::convert_model(cfg, p.dense(), calib));
    return p;
  }();
  return model;
}

// Trained on the bundled config as-is (dense only; about 5 s).
inline const nm::classify::Pipeline& full_dense_model() {
  static const auto model = [] {
    const auto train = nm::harness::generate_dataset(config(), world(), nm::harness::Split::Train);
    return nm::classify::Pipeline(nm::harness::train_model(config(), train).net);
  }();
  return model;
}

}  // namespace fixture
