#pragma once

// Local WebSocket service: clients steer gaze, EMG intent, cycling and release;
// the server runs the control loop and broadcasts its state at 20 Hz.

#include "neuromanip/harness.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

namespace nm::serve {

struct GazeMsg {
  double x = 0.0;
  double y = 0.0;
};
struct IntentMsg {
  signal::GestureLabel gesture = signal::GestureLabel::Rest;
};
struct CycleMsg {};
struct ReleaseMsg {};
using ClientMessage = std::variant<GazeMsg, IntentMsg, CycleMsg, ReleaseMsg>;

// Throws Validation on anything that is not one of the four client messages.
ClientMessage parse_client_message(std::string_view text);
std::string error_message(std::string_view code, std::string_view detail = {});

// One state broadcast. `fixated` is the object under an open fixation.
std::string state_message(const controller::Controller& ctl, std::optional<int> fixated,
                          const grasp::GraspLibrary& lib, std::uint64_t seq, double t_ms);

struct ServeOptions {
  std::string host = "127.0.0.1";
  int port = 8765;          // 0 picks a free port
  int step_ms = 10;         // control loop period
  int broadcast_ms = 50;    // 20 Hz
  int decision_ms = 50;     // one EMG window per stride
  double noise_sigma = 0.05;
};

// Without a model the intent is forwarded as a decision with confidence 1.
class Server {
 public:
  Server(harness::RunConfig cfg, harness::World world, std::optional<classify::Pipeline> model,
         ServeOptions opts = {});
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  // Binds and listens; throws PortInUse. Returns the bound port.
  int listen();
  // Runs the event loop on the calling thread until stop().
  void run();
  // Thread-safe.
  void stop();
  // run() plus SIGINT/SIGTERM handling.
  void run_until_signal();

  struct Loop;
  struct Impl;

 private:
  // The loop outlives impl_ so pending handlers are dropped with it.
  std::unique_ptr<Loop> loop_;
  std::shared_ptr<Impl> impl_;
};

}  // namespace nm::serve
