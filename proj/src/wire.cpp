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

#include "txforge/wire.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "httplib.h"

namespace txforge::wire {

using protocol::json;

namespace {

void reply_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void reply_error(httplib::Response& res, int status, const std::string& reason,
                 const std::string& message) {
  reply_json(res, status, {{"error", reason}, {"message", message}});
}

bool send_all(int fd, std::string_view data) {
  while (!data.empty()) {
    ssize_t n = ::send(fd, data.data(), data.size(), MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
  return true;
}

bool send_frame(int fd, const json& j) { return send_all(fd, protocol::encode_frame(j.dump())); }

sockaddr_in resolve(const std::string& host, int port) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  const std::string h = host == "localhost" ? "127.0.0.1" : host;
  if (::inet_pton(AF_INET, h.c_str(), &addr.sin_addr) != 1)
    throw std::runtime_error("cannot parse IPv4 address '" + host + "'");
  return addr;
}

}  // namespace

// HttpApiServer ---------------------------------------------------------------

struct HttpApiServer::Impl {
  httplib::Server server;
};

HttpApiServer::HttpApiServer(node::Node& node) : node_(node), impl_(std::make_unique<Impl>()) {
  auto& svr = impl_->server;

  svr.Get("/protocol", [](const httplib::Request&, httplib::Response& res) {
    reply_json(res, 200, {{"protocol", node::kProtocolVersion}});
  });

  svr.Post("/tx", [this](const httplib::Request& req, httplib::Response& res) {
    json body;
    try {
      body = json::parse(req.body);
    } catch (const json::parse_error& e) {
      return reply_error(res, 400, "parse", e.what());
    }
    try {
      const chain::Transaction tx = protocol::transaction_from_json(body);
      const Hash256 h = node_.rpc_submit_transaction(tx);
      reply_json(res, 200, {{"tx_hash", h.to_hex()}, {"protocol", node::kProtocolVersion}});
    } catch (const protocol::ProtocolError& e) {
      reply_error(res, 400, "invalid", e.what());
    } catch (const node::RpcError& e) {
      reply_error(res, e.http_status(), e.reason(), e.what());
    }
  });

  svr.Get(R"(/tx/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    Hash256 h;
    try {
      h = Hash256::from_hex(req.matches[1].str());
    } catch (const std::invalid_argument& e) {
      return reply_error(res, 400, "invalid", e.what());
    }
    reply_json(res, 200, protocol::to_json(node_.rpc_get_transaction_status(h)));
  });

  svr.Get(R"(/state/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    Address contract;
    try {
      contract = Address::from_hex(req.matches[1].str());
    } catch (const std::invalid_argument& e) {
      return reply_error(res, 400, "invalid", e.what());
    }
    json body{{"contract", contract.to_hex()}};
    if (req.has_param("key")) {
      const std::string key = req.get_param_value("key");
      auto v = node_.rpc_get_state(contract, key);
      body["key"] = key;
      body["value"] = v ? protocol::to_json(*v) : json(nullptr);
    } else {
      json values = json::object();
      for (const auto& [k, v] : node_.rpc_get_state(contract)) values[k] = protocol::to_json(v);
      body["values"] = std::move(values);
    }
    reply_json(res, 200, body);
  });
}

HttpApiServer::~HttpApiServer() { stop(); }

int HttpApiServer::start(const std::string& host, int port) {
  auto& svr = impl_->server;
  if (port == 0) {
    port_ = svr.bind_to_any_port(host);
  } else {
    port_ = svr.bind_to_port(host, port) ? port : -1;
  }
  if (port_ < 0) throw std::runtime_error("cannot bind HTTP API on " + host + ":" + std::to_string(port));
  thread_ = std::thread([&svr] { svr.listen_after_bind(); });
  svr.wait_until_ready();
  return port_;
}

void HttpApiServer::stop() {
  if (impl_) impl_->server.stop();
  if (thread_.joinable()) thread_.join();
}

// EventStreamServer -----------------------------------------------------------

EventStreamServer::~EventStreamServer() { stop(); }

int EventStreamServer::start(const std::string& host, int port) {
  sockaddr_in addr = resolve(host, port);
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw std::runtime_error(std::string("socket: ") + std::strerror(errno));
  int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 ||
      ::listen(listen_fd_, 16) != 0) {
    const std::string err = std::strerror(errno);
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw std::runtime_error("cannot listen for events on " + host + ":" + std::to_string(port) +
                             ": " + err);
  }
  socklen_t len = sizeof(addr);
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
  running_ = true;
  acceptor_ = std::thread([this] { accept_loop(); });
  return port_;
}

void EventStreamServer::stop() {
  if (!running_.exchange(false)) return;
  if (acceptor_.joinable()) acceptor_.join();
  std::vector<std::thread> clients;
  {
    std::lock_guard lock(clients_mu_);
    clients.swap(clients_);
  }
  for (auto& t : clients)
    if (t.joinable()) t.join();
  if (listen_fd_ >= 0) ::close(listen_fd_);
  listen_fd_ = -1;
}

void EventStreamServer::accept_loop() {
  while (running_) {
    pollfd pfd{listen_fd_, POLLIN, 0};
    if (::poll(&pfd, 1, 100) <= 0) continue;
    int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) continue;
    std::lock_guard lock(clients_mu_);
    clients_.emplace_back([this, fd] { serve_client(fd); });
  }
}

void EventStreamServer::serve_client(int fd) {
  protocol::FrameDecoder decoder;
  std::optional<std::string> request;
  char buf[4096];
  while (running_ && !request) {
    pollfd pfd{fd, POLLIN, 0};
    if (::poll(&pfd, 1, 100) <= 0) continue;
    ssize_t n = ::recv(fd, buf, sizeof(buf), 0);
    if (n <= 0) {
      ::close(fd);
      return;
    }
    try {
      decoder.feed(std::string_view(buf, static_cast<std::size_t>(n)));
      request = decoder.next();
    } catch (const protocol::ProtocolError& e) {
      send_frame(fd, {{"type", "error"}, {"message", e.what()}});
      ::close(fd);
      return;
    }
  }
  if (!request) {
    ::close(fd);
    return;
  }

  node::EventFilter filter;
  try {
    json j = json::parse(*request);
    if (j.value("op", "") != "subscribe") throw protocol::ProtocolError("expected op 'subscribe'");
    if (j.contains("protocol") && j.at("protocol") != node::kProtocolVersion)
      throw protocol::ProtocolError("unsupported protocol version");
    filter = protocol::filter_from_json(j.contains("filter") ? j.at("filter") : json());
  } catch (const std::exception& e) {
    send_frame(fd, {{"type", "error"}, {"message", e.what()}});
    ::close(fd);
    return;
  }

  node::Subscription sub = node_.subscribe(filter);
  bool ok = send_frame(fd, {{"type", "subscribed"},
                            {"subscription_id", sub.id()},
                            {"protocol", node::kProtocolVersion}});
  while (ok && running_) {
    if (auto d = sub.next(std::chrono::milliseconds(50))) {
      ok = send_frame(fd, protocol::to_json(*d));
      continue;
    }
    pollfd pfd{fd, POLLIN, 0};
    if (::poll(&pfd, 1, 0) > 0) {
      // Clients send nothing after subscribing; readable means closed.
      ssize_t n = ::recv(fd, buf, sizeof(buf), MSG_DONTWAIT);
      if (n <= 0) break;
    }
  }
  ::close(fd);
}

// EventStreamClient -----------------------------------------------------------

EventStreamClient::~EventStreamClient() { close(); }

void EventStreamClient::close() {
  if (fd_ >= 0) ::close(fd_);
  fd_ = -1;
}

std::uint64_t EventStreamClient::connect(const std::string& host, int port,
                                         const node::EventFilter& filter) {
  close();
  sockaddr_in addr = resolve(host, port);
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0 || ::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    close();
    throw std::runtime_error("cannot connect to event stream at " + host + ":" + std::to_string(port));
  }
  json req{{"op", "subscribe"},
           {"protocol", node::kProtocolVersion},
           {"filter", protocol::to_json(filter)}};
  if (!send_frame(fd_, req)) throw std::runtime_error("event stream send failed");
  auto reply = read_frame(std::chrono::milliseconds(5000));
  if (!reply || reply->value("type", "") != "subscribed")
    throw std::runtime_error("subscription refused: " + (reply ? reply->dump() : "timeout"));
  return reply->at("subscription_id").get<std::uint64_t>();
}

std::optional<json> EventStreamClient::read_frame(std::chrono::milliseconds timeout) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  while (true) {
    if (auto frame = decoder_.next()) return json::parse(*frame);
    auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) return std::nullopt;
    pollfd pfd{fd_, POLLIN, 0};
    if (::poll(&pfd, 1, static_cast<int>(left.count())) <= 0) continue;
    char buf[4096];
    ssize_t n = ::recv(fd_, buf, sizeof(buf), 0);
    if (n <= 0) throw std::runtime_error("event stream closed");
    decoder_.feed(std::string_view(buf, static_cast<std::size_t>(n)));
  }
}

std::optional<node::Delivery> EventStreamClient::next(std::chrono::milliseconds timeout) {
  auto j = read_frame(timeout);
  if (!j) return std::nullopt;
  if (j->value("type", "") == "error") throw std::runtime_error(j->value("message", "error"));
  return protocol::delivery_from_json(*j);
}

}  // namespace txforge::wire
