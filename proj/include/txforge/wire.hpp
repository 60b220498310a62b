// Copyright 2026 The txforge Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <atomic>
#include <chrono>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "txforge/node.hpp"
#include "txforge/protocol.hpp"

namespace txforge::wire {

/// One-shot HTTP binding of the rpc_* calls:
///   POST /tx, GET /tx/{hash}, GET /state/{contract}[?key=], GET /protocol
class HttpApiServer {
 public:
  explicit HttpApiServer(node::Node& node);
  ~HttpApiServer();
  HttpApiServer(const HttpApiServer&) = delete;
  HttpApiServer& operator=(const HttpApiServer&) = delete;

  /// Binds and serves on a background thread. Port 0 picks a free port.
  /// Returns the bound port; throws std::runtime_error if binding fails.
  int start(const std::string& host, int port);
  void stop();
  int port() const { return port_; }

 private:
  struct Impl;
  node::Node& node_;
  std::unique_ptr<Impl> impl_;
  std::thread thread_;
  int port_ = -1;
};

/// Raw TCP event stream. A client sends one frame
///   {"op": "subscribe", "protocol": "txforge/1", "filter": {...}}
/// and then receives a "subscribed" frame followed by one frame per event.
class EventStreamServer {
 public:
  explicit EventStreamServer(node::Node& node) : node_(node) {}
  ~EventStreamServer();
  EventStreamServer(const EventStreamServer&) = delete;
  EventStreamServer& operator=(const EventStreamServer&) = delete;

  int start(const std::string& host, int port);
  void stop();
  int port() const { return port_; }

 private:
  void accept_loop();
  void serve_client(int fd);

  node::Node& node_;
  int listen_fd_ = -1;
  int port_ = -1;
  std::atomic<bool> running_{false};
  std::thread acceptor_;
  std::mutex clients_mu_;
  std::vector<std::thread> clients_;
};

/// Blocking client for the event stream.
class EventStreamClient {
 public:
  EventStreamClient() = default;
  ~EventStreamClient();
  EventStreamClient(const EventStreamClient&) = delete;
  EventStreamClient& operator=(const EventStreamClient&) = delete;

  /// Connects and subscribes; returns the subscription id reported by the server.
  std::uint64_t connect(const std::string& host, int port, const node::EventFilter& filter);
  /// Next delivery, or nullopt on timeout. Throws on disconnect or error frame.
  std::optional<node::Delivery> next(std::chrono::milliseconds timeout);
  void close();

 private:
  std::optional<protocol::json> read_frame(std::chrono::milliseconds timeout);

  int fd_ = -1;
  protocol::FrameDecoder decoder_;
};

}  // namespace txforge::wire
