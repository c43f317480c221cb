#pragma once

// Client-facing boundary: order placement, state snapshots and push frames.
// Transport-free; http_server.hpp puts it on a socket.
//
// Frames are {"seq": n, "kind": k, "payload": {...}} with kind one of
// notification, chat, location, sensor, report, status. Every routed
// envelope becomes one chat frame:
//
//   {"sender", "recipient", "performative", "body", "conversation",
//    "protocol", "ontology", "timestamp"}

#include <chrono>
#include <condition_variable>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>

#include "a2sc/runtime.hpp"

namespace a2sc {

struct PushFrame {
  std::uint64_t seq = 0;
  std::string kind;
  Value payload = Value::object();
};

Value to_value(const PushFrame& f);

inline const std::set<std::string> kFrameKinds{"notification", "chat", "location", "sensor", "report", "status"};

/// Frame kind and payload for a system event; nullopt for internal events.
std::optional<PushFrame> frame_for(const SystemEvent& ev);

/// Parses "chat,sensor"; empty means every kind. Throws Error{validation_error}.
std::set<std::string> parse_kinds(std::string_view list);

/// One client's bounded frame queue. Pushing never blocks: when the queue is
/// full the frame is dropped and counted. Sequence numbers are assigned at
/// push, so a drop shows up as a gap.
class Subscription {
 public:
  Subscription(std::set<std::string> kinds, std::size_t capacity);

  bool wants(const std::string& kind) const;
  void push(PushFrame frame);
  /// Waits up to `timeout` for a frame.
  std::optional<PushFrame> pop(std::chrono::milliseconds timeout);
  std::vector<PushFrame> drain();
  std::size_t dropped() const;
  void close();
  bool closed() const;

 private:
  std::set<std::string> kinds_;
  std::size_t capacity_;
  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<PushFrame> queue_;
  std::uint64_t next_seq_ = 1;
  std::size_t dropped_ = 0;
  bool closed_ = false;
};

struct HttpReply {
  int status = 200;
  Value body = Value::object();
};

class Gateway {
 public:
  explicit Gateway(System& system, std::size_t queue_capacity = 4096);
  ~Gateway();

  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  std::shared_ptr<Subscription> subscribe(std::set<std::string> kinds = {});
  void unsubscribe(const std::shared_ptr<Subscription>& s);

  /// Throws Error{validation_error} or Error{system_not_ready}.
  std::string place_order(const Value& body);

  /// Paths: agents, processes, processes/<id>, inventory/<agent>,
  /// deliveries/<tracking>, reports/<tracking>.
  /// Throws Error{not_found}; reports/<tracking> before delivery throws
  /// Error{not_ready}.
  /// With a virtual clock the caller must be the thread driving the system.
  Value get_state(std::string_view path);

  /// Routes a request: POST /orders and GET /<path> as above.
  HttpReply handle(std::string_view method, std::string_view target, std::string_view body);

  Value stats() const;

 private:
  void on_event(const SystemEvent& ev);
  Value agents();

  System& system_;
  std::size_t capacity_;
  std::size_t subscription_ = 0;
  mutable std::mutex mutex_;
  std::vector<std::shared_ptr<Subscription>> subscribers_;
  std::size_t dropped_total_ = 0;
};

}  // namespace a2sc
