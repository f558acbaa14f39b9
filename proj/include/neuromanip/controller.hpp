#pragma once

// Grasp state machine: fixation context arms a candidate set, confirmed EMG
// decisions inside that set execute, everything else is held back.

#include "neuromanip/grasp.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace nm::controller {

using grasp::CandidateSet;
using grasp::Setpoints;
using signal::GestureLabel;

struct Idle {
  bool operator==(const Idle&) const = default;
};
struct Armed {
  int object_id = 0;
  CandidateSet candidates;
  std::size_t highlighted = 0;
  bool operator==(const Armed&) const = default;
};
// Carries the context captured when arming so a reset to Armed or the audit
// can refer back to it.
struct Confirming {
  GestureLabel label = GestureLabel::Rest;
  int hold_windows = 0;
  int object_id = 0;
  CandidateSet candidates;
  std::size_t highlighted = 0;
  bool operator==(const Confirming&) const = default;
};
struct Executing {
  GestureLabel label = GestureLabel::Rest;
  double progress = 0.0;
  int object_id = 0;
  bool operator==(const Executing&) const = default;
};
struct Holding {
  GestureLabel label = GestureLabel::Rest;
  int object_id = 0;
  bool operator==(const Holding&) const = default;
};
struct Releasing {
  double progress = 0.0;
  bool operator==(const Releasing&) const = default;
};

using ControllerState = std::variant<Idle, Armed, Confirming, Executing, Holding, Releasing>;
std::string_view state_name(const ControllerState& s) noexcept;

struct Fixation {
  std::optional<int> object_id;
  bool operator==(const Fixation&) const = default;
};
struct FixationLost {
  bool operator==(const FixationLost&) const = default;
};
struct EmgDecision {
  GestureLabel label = GestureLabel::Rest;
  double confidence = 0.0;
  bool operator==(const EmgDecision&) const = default;
};
struct CycleGesture {
  bool operator==(const CycleGesture&) const = default;
};
struct Tick {
  double dt_ms = 0.0;
  bool operator==(const Tick&) const = default;
};
struct Release {
  bool operator==(const Release&) const = default;
};

using ControlEvent = std::variant<Fixation, FixationLost, EmgDecision, CycleGesture, Tick, Release>;

struct ActuatorCommand {
  Setpoints setpoints{};
  int ramp_ms = 800;
  bool operator==(const ActuatorCommand&) const = default;
};

struct ControllerConfig {
  int confirm_windows = 5;
  double min_confidence = 0.6;
  int ramp_ms = 800;
};

// Everything `step` reads besides state and event. Not owning.
struct Context {
  const grasp::GraspLibrary* lib = nullptr;
  std::span<const scene::SceneObject> objects;
  ControllerConfig config;
};

struct Transition {
  ControllerState state;
  std::optional<ActuatorCommand> command;
  bool rejected = false;  // an out-of-candidate decision was discarded
};

Transition step(const ControllerState& state, const ControlEvent& event, const Context& ctx);

struct CommandLogEntry {
  double t_ms = 0.0;
  std::string state_before;
  std::optional<GestureLabel> label;  // none for release commands
  Setpoints setpoints{};
  int ramp_ms = 0;
  std::vector<GestureLabel> candidates;  // captured when Confirming was entered
  bool operator==(const CommandLogEntry&) const = default;
};

struct TraceResult {
  ControllerState final_state;
  std::vector<CommandLogEntry> log;
  int rejected = 0;
};

// Fold of `step`; time is the running sum of Tick durations.
TraceResult run_trace(const ControllerState& initial, std::span<const ControlEvent> events, const Context& ctx);

// Number of commands with nonzero setpoints whose label is missing from the
// candidate set recorded with them.
int audit_log(std::span<const CommandLogEntry> log);

// Linear interpolation of the six actuators toward the last command.
class ActuatorTrack {
 public:
  void command(const ActuatorCommand& cmd);
  void advance(double dt_ms);
  const Setpoints& current() const noexcept { return current_; }

 private:
  Setpoints from_{};
  Setpoints to_{};
  Setpoints current_{};
  double ramp_ms_ = 1.0;
  double elapsed_ms_ = 0.0;
};

// Stateful driver used by simulate and serve.
class Controller {
 public:
  explicit Controller(Context ctx) : ctx_(ctx) {}

  const Transition& apply(const ControlEvent& event);
  const ControllerState& state() const noexcept { return state_; }
  int rejected() const noexcept { return rejected_; }
  double time_ms() const noexcept { return t_ms_; }
  const std::vector<CommandLogEntry>& log() const noexcept { return log_; }
  const Setpoints& setpoints() const noexcept { return track_.current(); }
  const Context& context() const noexcept { return ctx_; }

 private:
  Context ctx_;
  ControllerState state_ = Idle{};
  Transition last_;
  int rejected_ = 0;
  double t_ms_ = 0.0;
  std::vector<CommandLogEntry> log_;
  ActuatorTrack track_;
};

// Trace files: JSON lines, one tagged event per line.
std::string event_to_json(const ControlEvent& ev);
ControlEvent event_from_json(std::string_view line);
std::vector<ControlEvent> read_trace(const std::filesystem::path& path);
void write_trace(const std::filesystem::path& path, std::span<const ControlEvent> events);
// Command log: JSON lines {t, state_before, label, setpoints, ramp_ms, candidates}.
std::string log_entry_to_json(const CommandLogEntry& e);
void write_command_log(const std::filesystem::path& path, std::span<const CommandLogEntry> log);
std::vector<CommandLogEntry> read_command_log(const std::filesystem::path& path);

}  // namespace nm::controller
