#include "neuromanip/serve.hpp"

#include "neuromanip/error.hpp"

#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/signal_set.hpp>
#include <boost/asio/steady_timer.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <json.hpp>

#include <cmath>
#include <deque>

namespace nm::serve {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;
using nlohmann::json;
using signal::GestureLabel;

namespace {

template <class... Fs>
struct overloaded : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
overloaded(Fs...) -> overloaded<Fs...>;

[[noreturn]] void bad(const std::string& what) { throw Error(Errc::Validation, "serve", what); }

json controller_json(const controller::ControllerState& s) {
  json j;
  j["state"] = std::string(controller::state_name(s));
  std::visit(overloaded{
                 [&](const controller::Idle&) {},
                 [&](const controller::Armed& a) {
                   j["object_id"] = a.object_id;
                   j["highlighted"] = a.highlighted;
                 },
                 [&](const controller::Confirming& c) {
                   j["object_id"] = c.object_id;
                   j["label"] = std::string(signal::gesture_name(c.label));
                   j["hold_windows"] = c.hold_windows;
                   j["highlighted"] = c.highlighted;
                 },
                 [&](const controller::Executing& x) {
                   j["object_id"] = x.object_id;
                   j["label"] = std::string(signal::gesture_name(x.label));
                   j["progress"] = x.progress;
                 },
                 [&](const controller::Holding& h) {
                   j["object_id"] = h.object_id;
                   j["label"] = std::string(signal::gesture_name(h.label));
                 },
                 [&](const controller::Releasing& r) { j["progress"] = r.progress; },
             },
             s);
  return j;
}

const grasp::CandidateSet* armed_candidates(const controller::ControllerState& s) {
  if (const auto* a = std::get_if<controller::Armed>(&s)) return &a->candidates;
  if (const auto* c = std::get_if<controller::Confirming>(&s)) return &c->candidates;
  return nullptr;
}

}  // namespace

ClientMessage parse_client_message(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error&) {
    bad("not JSON");
  }
  if (!j.is_object() || !j.contains("type") || !j["type"].is_string()) bad("missing type");
  const auto type = j["type"].get<std::string>();
  if (type == "gaze") {
    if (!j.contains("x") || !j.contains("y") || !j["x"].is_number() || !j["y"].is_number()) bad("gaze needs numeric x and y");
    const double x = j["x"].get<double>(), y = j["y"].get<double>();
    if (!std::isfinite(x) || !std::isfinite(y)) bad("gaze coordinates must be finite");
    return GazeMsg{x, y};
  }
  if (type == "emg_intent") {
    if (!j.contains("gesture") || !j["gesture"].is_number_integer()) bad("emg_intent needs an integer gesture code");
    const auto g = signal::gesture_from_code(j["gesture"].get<int>());
    if (!g) bad("gesture code out of range");
    return IntentMsg{*g};
  }
  if (type == "cycle") return CycleMsg{};
  if (type == "release") return ReleaseMsg{};
  bad("unknown type '" + type + "'");
}

std::string error_message(std::string_view code, std::string_view detail) {
  json j{{"type", "error"}, {"code", code}};
  if (!detail.empty()) j["detail"] = detail;
  return j.dump();
}

std::string state_message(const controller::Controller& ctl, std::optional<int> fixated,
                          const grasp::GraspLibrary& lib, std::uint64_t seq, double t_ms) {
  json j;
  j["type"] = "state";
  j["seq"] = seq;
  j["t_ms"] = t_ms;
  j["controller"] = controller_json(ctl.state());
  j["fixated"] = fixated ? json(*fixated) : json(nullptr);
  json cands = json::array();
  if (const auto* cs = armed_candidates(ctl.state())) {
    for (const auto& c : cs->entries) {
      const auto* p = lib.find(c.pattern_id);
      cands.push_back({{"id", c.pattern_id}, {"label", p ? p->label : ""}, {"score", c.score}});
    }
  }
  j["candidates"] = cands;
  const auto& sp = ctl.setpoints();
  j["setpoints"] = std::vector<double>(sp.begin(), sp.end());
  j["rejected"] = ctl.rejected();
  return j.dump();
}

// ---- service -------------------------------------------------------------

class Session;

struct Server::Loop {
  asio::io_context ioc{1};
};

struct Server::Impl : std::enable_shared_from_this<Server::Impl> {
  asio::io_context& ioc;
  harness::RunConfig cfg;
  harness::World world;
  std::optional<classify::Pipeline> model;
  ServeOptions opts;

  tcp::acceptor acceptor{ioc};
  asio::steady_timer timer{ioc};
  std::vector<std::weak_ptr<Session>> sessions;

  controller::Controller ctl;
  scene::FixationTracker tracker;
  std::optional<std::array<double, 2>> gaze_px;
  GestureLabel intent = GestureLabel::Rest;
  std::uint64_t step_count = 0;
  std::uint64_t decisions = 0;
  std::uint64_t seq = 0;
  bool stopping = false;

  Impl(asio::io_context& io, harness::RunConfig c, harness::World w, std::optional<classify::Pipeline> m,
       ServeOptions o)
      : ioc(io),
        cfg(std::move(c)),
        world(std::move(w)),
        model(std::move(m)),
        opts(o),
        ctl(controller::Context{&world.lib, world.scene.objects, cfg.controller_config()}),
        tracker(world.scene.objects) {}

  void accept();
  void schedule();
  void step();
  void handle(Session& from, const std::string& text);
  void broadcast(const std::string& msg);
  void shutdown();
};

class Session : public std::enable_shared_from_this<Session> {
 public:
  Session(tcp::socket socket, std::shared_ptr<Server::Impl> server)
      : ws_(std::move(socket)), server_(std::move(server)) {}

  void start() {
    http::async_read(ws_.next_layer(), buffer_, req_,
                     [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_request(ec); });
  }

  void send(std::shared_ptr<const std::string> msg) {
    if (closed_) return;
    queue_.push_back(std::move(msg));
    if (queue_.size() == 1) write_next();
  }

  void close() {
    if (closed_ || !open_) {
      closed_ = true;
      beast::error_code ec;
      ws_.next_layer().socket().close(ec);
      return;
    }
    closed_ = true;
    ws_.async_close(websocket::close_code::going_away, [self = shared_from_this()](beast::error_code) {});
  }

 private:
  void on_request(beast::error_code ec) {
    if (ec) return;
    if (!websocket::is_upgrade(req_)) {
      auto res = std::make_shared<http::response<http::string_body>>(http::status::upgrade_required, req_.version());
      res->set(http::field::content_type, "application/json");
      res->body() = R"({"service":"neuromanip","protocol":"websocket"})";
      res->prepare_payload();
      res->keep_alive(false);
      http::async_write(ws_.next_layer(), *res, [self = shared_from_this(), res](beast::error_code, std::size_t) {
        beast::error_code ignored;
        self->ws_.next_layer().socket().shutdown(tcp::socket::shutdown_send, ignored);
      });
      return;
    }
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept(req_, [self = shared_from_this()](beast::error_code ec2) {
      if (ec2) return;
      self->open_ = true;
      self->read();
    });
  }

  void read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        self->closed_ = true;
        return;
      }
      const auto text = beast::buffers_to_string(self->buffer_.data());
      self->buffer_.consume(self->buffer_.size());
      self->server_->handle(*self, text);
      self->read();
    });
  }

  void write_next() {
    ws_.text(true);
    ws_.async_write(asio::buffer(*queue_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        self->closed_ = true;
        self->queue_.clear();
        return;
      }
      self->queue_.pop_front();
      if (!self->queue_.empty()) self->write_next();
    });
  }

  websocket::stream<beast::tcp_stream> ws_;
  std::shared_ptr<Server::Impl> server_;
  beast::flat_buffer buffer_;
  http::request<http::string_body> req_;
  std::deque<std::shared_ptr<const std::string>> queue_;
  bool open_ = false;
  bool closed_ = false;

  friend struct Server::Impl;
};

void Server::Impl::accept() {
  acceptor.async_accept([self = shared_from_this()](beast::error_code ec, tcp::socket sock) {
    if (ec) return;  // closed on shutdown
    auto s = std::make_shared<Session>(std::move(sock), self);
    self->sessions.push_back(s);
    s->start();
    self->accept();
  });
}

void Server::Impl::schedule() {
  timer.expires_after(std::chrono::milliseconds(opts.step_ms));
  timer.async_wait([self = shared_from_this()](beast::error_code ec) {
    if (ec || self->stopping) return;
    self->step();
    self->schedule();
  });
}

// One control period: gaze sample, EMG decision on the stride, tick, and the
// broadcast on its own cadence. Simulated time advances by exactly step_ms.
void Server::Impl::step() {
  ++step_count;
  const double t_ms = static_cast<double>(step_count) * opts.step_ms;
  const auto t_us = static_cast<std::int64_t>(t_ms * 1000.0);

  if (gaze_px) {
    const auto upd = tracker.push(scene::gaze_through_pixel(world.scene.camera, (*gaze_px)[0], (*gaze_px)[1], t_us));
    if (upd.closed) ctl.apply(controller::FixationLost{});
    if (upd.opened) ctl.apply(controller::Fixation{upd.opened->object_id});
  }

  if (static_cast<std::uint64_t>(t_ms) % static_cast<std::uint64_t>(opts.decision_ms) == 0 &&
      intent != GestureLabel::Rest) {
    ++decisions;
    if (model) {
      const auto w = harness::synth_window(intent, opts.noise_sigma, cfg.mains_amp,
                                           harness::mix_seed(cfg.seed, 50, decisions));
      const auto c = model->classify_window(w, classify::Backend::Dense);
      if (c.label != GestureLabel::Rest) ctl.apply(controller::EmgDecision{c.label, c.confidence});
    } else {
      ctl.apply(controller::EmgDecision{intent, 1.0});
    }
  }

  ctl.apply(controller::Tick{static_cast<double>(opts.step_ms)});

  if (static_cast<std::uint64_t>(t_ms) % static_cast<std::uint64_t>(opts.broadcast_ms) == 0) {
    const auto fixated = tracker.fixating() ? tracker.current_object() : std::nullopt;
    broadcast(state_message(ctl, fixated, world.lib, ++seq, t_ms));
  }
}

void Server::Impl::handle(Session& from, const std::string& text) {
  ClientMessage msg;
  try {
    msg = parse_client_message(text);
  } catch (const Error& e) {
    from.send(std::make_shared<const std::string>(error_message("bad_message", e.detail())));
    return;
  }
  std::visit(overloaded{
                 [&](const GazeMsg& g) { gaze_px = std::array<double, 2>{g.x, g.y}; },
                 [&](const IntentMsg& i) { intent = i.gesture; },
                 [&](const CycleMsg&) { ctl.apply(controller::CycleGesture{}); },
                 [&](const ReleaseMsg&) {
                   intent = GestureLabel::Rest;
                   ctl.apply(controller::Release{});
                 },
             },
             msg);
}

void Server::Impl::broadcast(const std::string& msg) {
  const auto shared = std::make_shared<const std::string>(msg);
  std::vector<std::weak_ptr<Session>> alive;
  for (auto& w : sessions) {
    if (auto s = w.lock(); s && !s->closed_) {
      if (s->open_) s->send(shared);
      alive.push_back(w);
    }
  }
  sessions.swap(alive);
}

void Server::Impl::shutdown() {
  if (stopping) return;
  stopping = true;
  beast::error_code ec;
  acceptor.close(ec);
  timer.cancel();
  for (auto& w : sessions)
    if (auto s = w.lock()) s->close();
  // Do not wait forever on clients that never answer the close frame.
  auto guard = std::make_shared<asio::steady_timer>(ioc, std::chrono::milliseconds(250));
  guard->async_wait([self = shared_from_this(), guard](beast::error_code) { self->ioc.stop(); });
}

Server::Server(harness::RunConfig cfg, harness::World world, std::optional<classify::Pipeline> model, ServeOptions opts)
    : loop_(std::make_unique<Loop>()),
      impl_(std::make_shared<Impl>(loop_->ioc, std::move(cfg), std::move(world), std::move(model), opts)) {
  if (opts.step_ms <= 0 || opts.broadcast_ms <= 0 || opts.decision_ms <= 0 || opts.broadcast_ms % opts.step_ms ||
      opts.decision_ms % opts.step_ms) {
    throw Error(Errc::Validation, "serve", "periods must be positive multiples of step_ms");
  }
}

Server::~Server() = default;

int Server::listen() {
  auto& a = impl_->acceptor;
  beast::error_code ec;
  const auto addr = asio::ip::make_address(impl_->opts.host, ec);
  if (ec) throw Error(Errc::Validation, "serve", "bad host '" + impl_->opts.host + "'");
  const tcp::endpoint ep(addr, static_cast<unsigned short>(impl_->opts.port));
  a.open(ep.protocol(), ec);
  if (!ec) a.set_option(asio::socket_base::reuse_address(true), ec);
  if (!ec) a.bind(ep, ec);
  if (ec == asio::error::address_in_use) {
    throw Error(Errc::PortInUse, "serve", "port " + std::to_string(impl_->opts.port) + " is taken");
  }
  if (!ec) a.listen(asio::socket_base::max_listen_connections, ec);
  if (ec) throw Error(Errc::Io, "serve", "cannot listen on port " + std::to_string(impl_->opts.port) + ": " + ec.message());
  return a.local_endpoint().port();
}

void Server::run() {
  if (!impl_->acceptor.is_open()) listen();
  impl_->accept();
  impl_->schedule();
  impl_->ioc.run();
}

void Server::stop() {
  asio::post(impl_->ioc, [impl = impl_] { impl->shutdown(); });
}

void Server::run_until_signal() {
  asio::signal_set signals(impl_->ioc, SIGINT, SIGTERM);
  signals.async_wait([impl = impl_](beast::error_code ec, int) {
    if (!ec) impl->shutdown();
  });
  run();
}

}  // namespace nm::serve
