#include "a2sc/http_server.hpp"

#include <algorithm>

#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "a2sc/error.hpp"

namespace a2sc {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

struct HttpServer::Impl {
  asio::io_context io;
  tcp::acceptor acceptor{io};
  std::atomic<bool> stopping{false};
  std::jthread accept_thread;

  std::mutex mutex;
  std::list<std::shared_ptr<tcp::socket>> sockets;
  std::list<std::jthread> workers;
};

namespace {

std::string query_param(std::string_view target, std::string_view key) {
  auto it = std::find(target.begin(), target.end(), '?');
  while (it != target.end()) {
    const auto begin = it + 1;
    it = std::find(begin, target.end(), '&');
    const std::string_view pair(target.data() + (begin - target.begin()), static_cast<std::size_t>(it - begin));
    const auto eq = std::find(pair.begin(), pair.end(), '=');
    if (eq != pair.end() && std::string_view(pair.data(), static_cast<std::size_t>(eq - pair.begin())) == key) {
      return std::string(eq + 1, pair.end());
    }
  }
  return {};
}

void stream_frames(Gateway& gateway, websocket::stream<tcp::socket&>& ws, const std::string& kinds,
                   const std::atomic<bool>& stopping) {
  std::shared_ptr<Subscription> sub;
  try {
    sub = gateway.subscribe(parse_kinds(kinds));
  } catch (const Error& e) {
    ws.close(websocket::close_reason(websocket::close_code::policy_error, e.what()));
    return;
  }
  ws.text(true);
  beast::error_code ec;
  while (!stopping.load()) {
    // Client messages are ignored, but reading them is how a close or ping
    // from the client gets handled.
    if (ws.next_layer().available(ec) > 0) {
      beast::flat_buffer discard;
      ws.read(discard, ec);
      if (ec) break;
      continue;
    }
    if (ec) break;
    auto frame = sub->pop(std::chrono::milliseconds(50));
    if (!frame) continue;
    ws.write(asio::buffer(to_value(*frame).dump()), ec);
    if (ec) break;
  }
  gateway.unsubscribe(sub);
  ws.close(websocket::close_code::going_away, ec);
}

void serve(Gateway& gateway, std::shared_ptr<tcp::socket> socket, const std::atomic<bool>& stopping) {
  beast::flat_buffer buffer;
  beast::error_code ec;
  while (!stopping.load()) {
    http::request<http::string_body> req;
    http::read(*socket, buffer, req, ec);
    if (ec) return;
    const std::string target(req.target());
    if (websocket::is_upgrade(req) && target.rfind("/ws", 0) == 0) {
      websocket::stream<tcp::socket&> ws(*socket);
      ws.accept(req, ec);
      if (ec) return;
      stream_frames(gateway, ws, query_param(target, "kinds"), stopping);
      return;
    }
    const auto reply = gateway.handle(std::string(req.method_string()), target, req.body());
    http::response<http::string_body> res{static_cast<http::status>(reply.status), req.version()};
    res.set(http::field::content_type, "application/json");
    res.set(http::field::access_control_allow_origin, "*");
    res.keep_alive(req.keep_alive());
    res.body() = reply.body.dump();
    res.prepare_payload();
    http::write(*socket, res, ec);
    if (ec || !res.keep_alive()) break;
  }
  socket->shutdown(tcp::socket::shutdown_send, ec);
}

}  // namespace

HttpServer::HttpServer(Gateway& gateway, std::string address, std::uint16_t port)
    : impl_(std::make_unique<Impl>()), gateway_(gateway), address_(std::move(address)), port_(port) {}

HttpServer::~HttpServer() { stop(); }

void HttpServer::start() {
  beast::error_code ec;
  const tcp::endpoint endpoint(asio::ip::make_address(address_, ec), port_);
  if (ec) throw Error(Errc::config_error, "bad listen address " + address_);
  impl_->acceptor.open(endpoint.protocol(), ec);
  if (!ec) impl_->acceptor.set_option(asio::socket_base::reuse_address(true), ec);
  if (!ec) impl_->acceptor.bind(endpoint, ec);
  if (!ec) impl_->acceptor.listen(asio::socket_base::max_listen_connections, ec);
  if (ec) throw Error(Errc::config_error, "cannot listen on " + address_ + ":" + std::to_string(port_) + ": " +
                                              ec.message());
  port_ = impl_->acceptor.local_endpoint().port();
  impl_->accept_thread = std::jthread([this] {
    while (!impl_->stopping.load()) {
      auto socket = std::make_shared<tcp::socket>(impl_->io);
      beast::error_code aec;
      impl_->acceptor.accept(*socket, aec);
      if (aec) {
        if (impl_->stopping.load()) return;
        continue;
      }
      std::lock_guard lock(impl_->mutex);
      impl_->sockets.push_back(socket);
      impl_->workers.emplace_back([this, socket] { serve(gateway_, socket, impl_->stopping); });
    }
  });
}

void HttpServer::stop() {
  if (!impl_ || impl_->stopping.exchange(true)) return;
  beast::error_code ec;
  impl_->acceptor.cancel(ec);
  impl_->acceptor.close(ec);
  // Unblock accept() with a throwaway connection if cancel was not enough.
  {
    tcp::socket poke(impl_->io);
    poke.connect(tcp::endpoint(asio::ip::make_address("127.0.0.1", ec), port_), ec);
  }
  if (impl_->accept_thread.joinable()) impl_->accept_thread.join();
  std::list<std::jthread> workers;
  {
    std::lock_guard lock(impl_->mutex);
    for (auto& s : impl_->sockets) {
      s->shutdown(tcp::socket::shutdown_both, ec);
      s->close(ec);
    }
    workers = std::move(impl_->workers);
  }
  workers.clear();
}

}  // namespace a2sc
