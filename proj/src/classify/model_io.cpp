#include "neuromanip/classify.hpp"
#include "neuromanip/error.hpp"

#include <json.hpp>

#include <fstream>

namespace nm::classify {

namespace {

using nlohmann::json;

constexpr const char* kModelVersion = "nmv1";

json to_json(const FeatureVector& v) { return json(std::vector<double>(v.begin(), v.end())); }

FeatureVector feature_array(const json& j, const char* field) {
  const auto v = j.at(field).get<std::vector<double>>();
  if (v.size() != kFeatureCount) {
    throw Error(Errc::Validation, "classify", std::string("normalization.") + field + " must have 32 entries");
  }
  FeatureVector out{};
  std::copy(v.begin(), v.end(), out.begin());
  return out;
}

}  // namespace

void save_model(const std::filesystem::path& path, const Pipeline& pipeline) {
  const auto& net = pipeline.dense();
  json j;
  j["version"] = kModelVersion;
  j["layer_sizes"] = net.layer_sizes();
  json layers = json::array();
  for (const auto& l : net.layers) layers.push_back({{"weights", l.weights}, {"bias", l.bias}});
  j["layers"] = layers;
  j["normalization"] = {{"mean", to_json(net.norm.mean)},
                        {"std", to_json(net.norm.stddev)},
                        {"min", to_json(net.norm.min)},
                        {"max", to_json(net.norm.max)}};
  if (pipeline.has_spiking()) {
    const auto& snn = pipeline.spiking();
    j["timesteps"] = snn.timesteps;
    j["thresholds"] = snn.thresholds;
  } else {
    j["timesteps"] = kDefaultTimesteps;
    j["thresholds"] = nullptr;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "classify", "cannot write " + path.string());
  out << j.dump(1) << '\n';
}

Pipeline load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::ModelNotLoaded, "classify", "cannot read " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(Errc::Validation, "classify", path.string() + ": " + e.what());
  }
  try {
    if (j.at("version").get<std::string>() != kModelVersion) {
      throw Error(Errc::Validation, "classify", path.string() + ": unsupported model version");
    }
    const auto sizes = j.at("layer_sizes").get<std::vector<int>>();
    const auto& layers = j.at("layers");
    if (sizes.size() < 2 || layers.size() != sizes.size() - 1) {
      throw Error(Errc::Validation, "classify", path.string() + ": layer_sizes and layers disagree");
    }
    DenseNet net;
    for (std::size_t k = 0; k + 1 < sizes.size(); ++k) {
      DenseLayer l;
      l.inputs = sizes[k];
      l.outputs = sizes[k + 1];
      l.weights = layers[k].at("weights").get<std::vector<double>>();
      l.bias = layers[k].at("bias").get<std::vector<double>>();
      net.layers.push_back(std::move(l));
    }
    const auto& n = j.at("normalization");
    net.norm.mean = feature_array(n, "mean");
    net.norm.stddev = feature_array(n, "std");
    net.norm.min = feature_array(n, "min");
    net.norm.max = feature_array(n, "max");
    if (!net.valid()) {
      throw Error(Errc::Validation, "classify", path.string() + ": weights do not match layer sizes");
    }
    std::optional<SpikingNetwork> snn;
    if (j.contains("thresholds") && !j["thresholds"].is_null()) {
      const auto thresholds = j["thresholds"].get<std::vector<double>>();
      snn = assemble_snn(net, thresholds, j.at("timesteps").get<int>());
    }
    return Pipeline(std::move(net), std::move(snn));
  } catch (const json::exception& e) {
    throw Error(Errc::Validation, "classify", path.string() + ": " + e.what());
  }
}

}  // namespace nm::classify
