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

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "txforge/chain.hpp"
#include "txforge/events.hpp"
#include "txforge/lifecycle.hpp"

namespace txforge::node {

inline constexpr const char* kProtocolVersion = "txforge/1";

struct EventFilter {
  enum class Kind { kAll, kTx, kEventKind };
  Kind kind = Kind::kAll;
  Hash256 tx;                 // kTx
  EventKind event_kind{};     // kEventKind

  static EventFilter all() { return {}; }
  static EventFilter by_tx(const Hash256& h) { return {Kind::kTx, h, {}}; }
  static EventFilter by_kind(EventKind k) { return {Kind::kEventKind, {}, k}; }

  bool matches(const ChainEvent& e) const;
};

struct SequencedEvent {
  std::uint64_t seq = 0;
  ChainEvent event;
  bool operator==(const SequencedEvent&) const = default;
};

/// Delivered in place of events a slow subscriber could not buffer.
struct LaggedNotice {
  std::uint64_t missed = 0;
  bool operator==(const LaggedNotice&) const = default;
};

using Delivery = std::variant<SequencedEvent, LaggedNotice>;

class EventBus;

/// Handle to a bus subscription; unsubscribes on destruction.
class Subscription {
 public:
  Subscription() = default;
  Subscription(Subscription&& other) noexcept;
  Subscription& operator=(Subscription&& other) noexcept;
  Subscription(const Subscription&) = delete;
  Subscription& operator=(const Subscription&) = delete;
  ~Subscription();

  std::uint64_t id() const { return id_; }
  bool valid() const { return bus_ != nullptr; }

  std::optional<Delivery> try_next();
  /// Blocks up to `timeout`; returns nullopt on timeout or bus shutdown.
  std::optional<Delivery> next(std::chrono::milliseconds timeout);

 private:
  friend class EventBus;
  Subscription(EventBus* bus, std::uint64_t id) : bus_(bus), id_(id) {}

  EventBus* bus_ = nullptr;
  std::uint64_t id_ = 0;
};

/// Append-only event log with filtered, bounded per-subscriber queues.
/// Thread-safe.
class EventBus : public EventSink {
 public:
  explicit EventBus(std::size_t default_capacity = 1024) : default_capacity_(default_capacity) {}
  ~EventBus() override;

  void publish(const ChainEvent& event) override;

  Subscription subscribe(EventFilter filter, std::optional<std::size_t> capacity = std::nullopt);

  std::vector<SequencedEvent> log() const;
  std::size_t size() const;

  /// Wakes every blocked reader; subsequent blocking reads return at once.
  void close();

 private:
  friend class Subscription;
  struct Queue {
    EventFilter filter;
    std::size_t capacity = 0;
    std::deque<SequencedEvent> pending;
    std::uint64_t missed = 0;  // > 0 while lagging
  };

  std::optional<Delivery> pop_locked(Queue& q);
  std::optional<Delivery> try_next(std::uint64_t id);
  std::optional<Delivery> next(std::uint64_t id, std::chrono::milliseconds timeout);
  void unsubscribe(std::uint64_t id);

  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::size_t default_capacity_;
  std::vector<SequencedEvent> log_;
  std::map<std::uint64_t, Queue> queues_;
  std::uint64_t next_id_ = 1;
  bool closed_ = false;
};

/// RPC failure surfaced to clients; `reason` is a stable machine string.
class RpcError : public std::runtime_error {
 public:
  RpcError(std::string reason, const std::string& message, int http_status = 400)
      : std::runtime_error(message), reason_(std::move(reason)), http_status_(http_status) {}
  const std::string& reason() const { return reason_; }
  int http_status() const { return http_status_; }

 private:
  std::string reason_;
  int http_status_;
};

struct TxStatus {
  /// Lifecycle state name, or "unknown" for unseen and dropped transactions.
  std::string lifecycle_state = "unknown";
  std::uint64_t confirmations = 0;
  std::optional<Hash256> block_hash;
};

enum class SubmissionMode {
  kImmediate,  // submitted to the pool right away (Created -> Pending)
  kQueued,     // held at Created for the session runner to traverse
};

struct NodeOptions {
  std::uint64_t confirmations_k = 6;
  std::size_t subscription_capacity = 1024;
};

/// The DApp-facing node: chain, lifecycle controller and event bus behind a
/// single lock. Transitions driven from outside must hold `mutex()`.
class Node {
 public:
  explicit Node(NodeOptions options = {});
  Node(const Node&) = delete;
  Node& operator=(const Node&) = delete;

  std::recursive_mutex& mutex() const { return mu_; }
  chain::Chain& chain() { return chain_; }
  const chain::Chain& chain() const { return chain_; }
  lifecycle::Controller& controller() { return controller_; }
  const lifecycle::Controller& controller() const { return controller_; }
  EventBus& bus() { return bus_; }
  const NodeOptions& options() const { return options_; }

  Hash256 rpc_submit_transaction(const chain::Transaction& tx);
  TxStatus rpc_get_transaction_status(const Hash256& tx_hash) const;
  /// All keys of a contract; an unknown contract yields an empty map.
  chain::ContractState rpc_get_state(const Address& contract) const;
  std::optional<chain::Value> rpc_get_state(const Address& contract, const std::string& key) const;

  Subscription subscribe(EventFilter filter) { return bus_.subscribe(filter); }

  void set_submission_mode(SubmissionMode mode);
  SubmissionMode submission_mode() const;
  /// Oldest queued submission, waiting up to `timeout` for one to arrive.
  std::optional<Hash256> take_queued(std::chrono::milliseconds timeout = std::chrono::milliseconds(0));
  std::size_t queued_count() const;

 private:
  NodeOptions options_;
  mutable std::recursive_mutex mu_;
  chain::Chain chain_;
  EventBus bus_;
  lifecycle::Controller controller_;

  mutable std::mutex queue_mu_;
  std::condition_variable queue_cv_;
  std::deque<Hash256> queued_;
  SubmissionMode mode_ = SubmissionMode::kImmediate;
};

}  // namespace txforge::node
