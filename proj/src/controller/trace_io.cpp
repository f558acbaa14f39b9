#include "neuromanip/controller.hpp"
#include "neuromanip/error.hpp"

#include <json.hpp>

#include <fstream>

namespace nm::controller {

namespace {

using nlohmann::json;

GestureLabel label_from_json(const json& v) {
  std::optional<GestureLabel> g;
  if (v.is_number_integer()) g = signal::gesture_from_code(v.get<int>());
  else if (v.is_string()) g = signal::parse_gesture(v.get<std::string>());
  if (!g) throw Error(Errc::Validation, "controller", "unknown gesture " + v.dump());
  return *g;
}

json setpoints_json(const Setpoints& s) { return json(std::vector<double>(s.begin(), s.end())); }

}  // namespace

std::string event_to_json(const ControlEvent& ev) {
  json j;
  if (const auto* f = std::get_if<Fixation>(&ev)) {
    j["type"] = "fixation";
    j["object_id"] = f->object_id ? json(*f->object_id) : json(nullptr);
  } else if (std::holds_alternative<FixationLost>(ev)) {
    j["type"] = "fixation_lost";
  } else if (const auto* d = std::get_if<EmgDecision>(&ev)) {
    j["type"] = "emg";
    j["label"] = std::string(signal::gesture_name(d->label));
    j["confidence"] = d->confidence;
  } else if (std::holds_alternative<CycleGesture>(ev)) {
    j["type"] = "cycle";
  } else if (const auto* t = std::get_if<Tick>(&ev)) {
    j["type"] = "tick";
    j["dt_ms"] = t->dt_ms;
  } else {
    j["type"] = "release";
  }
  return j.dump();
}

ControlEvent event_from_json(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw Error(Errc::Validation, "controller", std::string("malformed event: ") + e.what());
  }
  try {
    const auto type = j.at("type").get<std::string>();
    if (type == "fixation") {
      const auto& id = j.at("object_id");
      return Fixation{id.is_null() ? std::nullopt : std::optional<int>(id.get<int>())};
    }
    if (type == "fixation_lost") return FixationLost{};
    if (type == "emg") {
      const double c = j.at("confidence").get<double>();
      if (!(c >= 0.0 && c <= 1.0)) throw Error(Errc::Validation, "controller", "confidence outside [0, 1]");
      return EmgDecision{label_from_json(j.at("label")), c};
    }
    if (type == "cycle") return CycleGesture{};
    if (type == "tick") {
      const double dt = j.at("dt_ms").get<double>();
      if (!(dt > 0.0)) throw Error(Errc::Validation, "controller", "tick dt_ms must be positive");
      return Tick{dt};
    }
    if (type == "release") return Release{};
    throw Error(Errc::Validation, "controller", "unknown event type '" + type + "'");
  } catch (const json::exception& e) {
    throw Error(Errc::Validation, "controller", std::string("malformed event: ") + e.what());
  }
}

std::vector<ControlEvent> read_trace(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "controller", "cannot read " + path.string());
  std::vector<ControlEvent> events;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      events.push_back(event_from_json(line));
    } catch (const Error& e) {
      throw Error(Errc::Validation, "controller", path.string() + ":" + std::to_string(lineno) + ": " + e.detail());
    }
  }
  return events;
}

void write_trace(const std::filesystem::path& path, std::span<const ControlEvent> events) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "controller", "cannot write " + path.string());
  for (const auto& ev : events) out << event_to_json(ev) << '\n';
}

std::string log_entry_to_json(const CommandLogEntry& e) {
  json j;
  j["t"] = e.t_ms;
  j["state_before"] = e.state_before;
  j["label"] = e.label ? json(std::string(signal::gesture_name(*e.label))) : json(nullptr);
  j["setpoints"] = setpoints_json(e.setpoints);
  j["ramp_ms"] = e.ramp_ms;
  json cands = json::array();
  for (auto g : e.candidates) cands.push_back(std::string(signal::gesture_name(g)));
  j["candidates"] = cands;
  return j.dump();
}

void write_command_log(const std::filesystem::path& path, std::span<const CommandLogEntry> log) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "controller", "cannot write " + path.string());
  for (const auto& e : log) out << log_entry_to_json(e) << '\n';
}

std::vector<CommandLogEntry> read_command_log(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "controller", "cannot read " + path.string());
  std::vector<CommandLogEntry> log;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = json::parse(line);
      CommandLogEntry e;
      e.t_ms = j.at("t").get<double>();
      e.state_before = j.at("state_before").get<std::string>();
      if (!j.at("label").is_null()) e.label = label_from_json(j["label"]);
      const auto sp = j.at("setpoints").get<std::vector<double>>();
      if (sp.size() != 6) throw Error(Errc::Validation, "controller", "setpoints must have 6 entries");
      std::copy(sp.begin(), sp.end(), e.setpoints.begin());
      e.ramp_ms = j.at("ramp_ms").get<int>();
      for (const auto& c : j.value("candidates", json::array())) e.candidates.push_back(label_from_json(c));
      log.push_back(std::move(e));
    } catch (const json::exception& ex) {
      throw Error(Errc::Validation, "controller", path.string() + ":" + std::to_string(lineno) + ": " + ex.what());
    } catch (const Error& ex) {
      throw Error(Errc::Validation, "controller", path.string() + ":" + std::to_string(lineno) + ": " + ex.detail());
    }
  }
  return log;
}

}  // namespace nm::controller
