#include "neuromanip/controller.hpp"
#include "neuromanip/error.hpp"

#include <algorithm>

namespace nm::controller {

namespace {

template <class... Fs>
struct overloaded : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
overloaded(Fs...) -> overloaded<Fs...>;

// Arms on an applicable object; anything else disarms.
ControllerState arm(std::optional<int> object_id, const Context& ctx) {
  if (!object_id || !ctx.lib) return Idle{};
  const scene::SceneObject* obj = nullptr;
  for (const auto& o : ctx.objects)
    if (o.id == *object_id) obj = &o;
  if (!obj) return Idle{};
  try {
    auto cs = grasp::context_to_grasps(*obj, *ctx.lib);
    if (cs.labels(*ctx.lib).empty()) return Idle{};
    return Armed{obj->id, std::move(cs), 0};
  } catch (const Error& e) {
    if (e.code() == Errc::NoApplicableGrasp) return Idle{};
    throw;
  }
}

// Fixation while armed: same object keeps the state, anything else re-arms.
ControllerState refixate(const ControllerState& current, int current_object, const Fixation& f, const Context& ctx) {
  if (f.object_id && *f.object_id == current_object) return current;
  return arm(f.object_id, ctx);
}

}  // namespace

std::string_view state_name(const ControllerState& s) noexcept {
  static constexpr std::string_view names[] = {"Idle", "Armed", "Confirming", "Executing", "Holding", "Releasing"};
  return names[s.index()];
}

Transition step(const ControllerState& state, const ControlEvent& event, const Context& ctx) {
  const auto& cfg = ctx.config;
  const double ramp = static_cast<double>(cfg.ramp_ms);
  Transition tr{state, std::nullopt, false};

  std::visit(
      overloaded{
          [&](const Idle&) {
            if (const auto* f = std::get_if<Fixation>(&event)) tr.state = arm(f->object_id, ctx);
          },
          [&](const Armed& a) {
            std::visit(overloaded{
                           [&](const Fixation& f) { tr.state = refixate(state, a.object_id, f, ctx); },
                           [&](const FixationLost&) { tr.state = Idle{}; },
                           [&](const EmgDecision& d) {
                             if (!a.candidates.admits(*ctx.lib, d.label)) {
                               tr.rejected = true;
                             } else if (d.confidence >= cfg.min_confidence) {
                               Confirming c{d.label, 1, a.object_id, a.candidates, a.highlighted};
                               if (c.hold_windows >= cfg.confirm_windows) {
                                 tr.state = Executing{d.label, 0.0, a.object_id};
                                 tr.command = ActuatorCommand{ctx.lib->setpoints(d.label), cfg.ramp_ms};
                               } else {
                                 tr.state = std::move(c);
                               }
                             }
                           },
                           [&](const CycleGesture&) {
                             Armed next = a;
                             next.highlighted = grasp::cycle_alternative(a.candidates, a.highlighted);
                             tr.state = std::move(next);
                           },
                           [&](const auto&) {},
                       },
                       event);
          },
          [&](const Confirming& c) {
            std::visit(overloaded{
                           [&](const Fixation& f) { tr.state = refixate(state, c.object_id, f, ctx); },
                           [&](const FixationLost&) { tr.state = Idle{}; },
                           [&](const EmgDecision& d) {
                             if (!c.candidates.admits(*ctx.lib, d.label)) {
                               tr.rejected = true;
                             } else if (d.label == c.label && d.confidence >= cfg.min_confidence) {
                               if (c.hold_windows + 1 >= cfg.confirm_windows) {
                                 tr.state = Executing{c.label, 0.0, c.object_id};
                                 tr.command = ActuatorCommand{ctx.lib->setpoints(c.label), cfg.ramp_ms};
                               } else {
                                 Confirming next = c;
                                 ++next.hold_windows;
                                 tr.state = std::move(next);
                               }
                             } else {
                               tr.state = Armed{c.object_id, c.candidates, c.highlighted};
                             }
                           },
                           [&](const auto&) {},
                       },
                       event);
          },
          [&](const Executing& x) {
            if (const auto* t = std::get_if<Tick>(&event)) {
              if (!(t->dt_ms > 0.0)) return;
              const double p = std::min(1.0, x.progress + t->dt_ms / ramp);
              if (p >= 1.0) tr.state = Holding{x.label, x.object_id};
              else tr.state = Executing{x.label, p, x.object_id};
            } else if (std::holds_alternative<Release>(event)) {
              tr.state = Releasing{0.0};
              tr.command = ActuatorCommand{Setpoints{}, cfg.ramp_ms};
            }
          },
          [&](const Holding&) {
            if (std::holds_alternative<Release>(event)) {
              tr.state = Releasing{0.0};
              tr.command = ActuatorCommand{Setpoints{}, cfg.ramp_ms};
            }
          },
          [&](const Releasing& r) {
            if (const auto* t = std::get_if<Tick>(&event)) {
              if (!(t->dt_ms > 0.0)) return;
              const double p = std::min(1.0, r.progress + t->dt_ms / ramp);
              if (p >= 1.0) tr.state = Idle{};
              else tr.state = Releasing{p};
            }
          },
      },
      state);
  return tr;
}

namespace {

CommandLogEntry log_entry(double t_ms, const ControllerState& before, const Transition& tr, const Context& ctx) {
  CommandLogEntry e;
  e.t_ms = t_ms;
  e.state_before = std::string(state_name(before));
  e.setpoints = tr.command->setpoints;
  e.ramp_ms = tr.command->ramp_ms;
  if (const auto* x = std::get_if<Executing>(&tr.state)) {
    e.label = x->label;
    if (const auto* c = std::get_if<Confirming>(&before)) e.candidates = c->candidates.labels(*ctx.lib);
    else if (const auto* a = std::get_if<Armed>(&before)) e.candidates = a->candidates.labels(*ctx.lib);
  }
  return e;
}

}  // namespace

TraceResult run_trace(const ControllerState& initial, std::span<const ControlEvent> events, const Context& ctx) {
  TraceResult r{initial, {}, 0};
  double t = 0.0;
  for (const auto& ev : events) {
    if (const auto* tick = std::get_if<Tick>(&ev)) t += tick->dt_ms;
    Transition tr = step(r.final_state, ev, ctx);
    if (tr.rejected) ++r.rejected;
    if (tr.command) r.log.push_back(log_entry(t, r.final_state, tr, ctx));
    r.final_state = std::move(tr.state);
  }
  return r;
}

int audit_log(std::span<const CommandLogEntry> log) {
  int unsafe = 0;
  for (const auto& e : log) {
    const bool actuates = std::any_of(e.setpoints.begin(), e.setpoints.end(), [](double v) { return v != 0.0; });
    if (!actuates) continue;
    if (!e.label || std::find(e.candidates.begin(), e.candidates.end(), *e.label) == e.candidates.end()) ++unsafe;
  }
  return unsafe;
}

void ActuatorTrack::command(const ActuatorCommand& cmd) {
  from_ = current_;
  to_ = cmd.setpoints;
  ramp_ms_ = std::max(1, cmd.ramp_ms);
  elapsed_ms_ = 0.0;
}

void ActuatorTrack::advance(double dt_ms) {
  if (!(dt_ms > 0.0)) return;
  elapsed_ms_ = std::min(ramp_ms_, elapsed_ms_ + dt_ms);
  const double a = elapsed_ms_ / ramp_ms_;
  for (std::size_t i = 0; i < current_.size(); ++i) current_[i] = from_[i] + a * (to_[i] - from_[i]);
}

const Transition& Controller::apply(const ControlEvent& event) {
  if (const auto* tick = std::get_if<Tick>(&event)) {
    t_ms_ += tick->dt_ms;
    track_.advance(tick->dt_ms);
  }
  last_ = step(state_, event, ctx_);
  if (last_.rejected) ++rejected_;
  if (last_.command) {
    log_.push_back(log_entry(t_ms_, state_, last_, ctx_));
    track_.command(*last_.command);
  }
  state_ = last_.state;
  return last_;
}

}  // namespace nm::controller
