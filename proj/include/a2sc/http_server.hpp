#pragma once

// HTTP + WebSocket front for a Gateway (Boost.Beast, one thread per
// connection). Requests go to Gateway::handle; GET /ws?kinds=a,b upgrades
// to a WebSocket that streams JSON push frames as text messages.

#include <atomic>
#include <cstdint>
#include <list>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include "a2sc/gateway.hpp"

namespace a2sc {

class HttpServer {
 public:
  /// Port 0 picks a free port.
  HttpServer(Gateway& gateway, std::string address = "127.0.0.1", std::uint16_t port = 8080);
  ~HttpServer();

  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds and starts accepting. Throws Error{config_error} if binding fails.
  void start();
  void stop();
  std::uint16_t port() const noexcept { return port_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  Gateway& gateway_;
  std::string address_;
  std::uint16_t port_;
};

}  // namespace a2sc
