#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "handover/session.hpp"

namespace handover {

struct ServerConfig {
  std::string address = "127.0.0.1";
  std::uint16_t port = 8765;  // 0 picks a free port
  Mode default_mode = Mode::Preemptive;
  bool stop_on_signals = false;  // SIGINT / SIGTERM call stop()
};

/// WebSocket front end: every connection gets its own session, opened in
/// `default_mode` (reactive when no model is loaded). Text messages are
/// handled in arrival order and each reply is written before the next
/// message is read. A "close" message ends the connection.
class WsServer {
 public:
  WsServer(std::shared_ptr<SessionManager> sessions, ServerConfig config);
  ~WsServer();

  WsServer(const WsServer&) = delete;
  WsServer& operator=(const WsServer&) = delete;

  /// Binds and starts accepting in the background. Throws IoFailure.
  void start();
  /// Stops accepting and closes open connections.
  void stop();
  /// Blocks until stop() is called from another thread.
  void wait();
  std::uint16_t port() const { return bound_port_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::shared_ptr<SessionManager> sessions_;
  ServerConfig config_;
  std::uint16_t bound_port_ = 0;
};

}  // namespace handover
