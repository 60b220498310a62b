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

#include "txforge/node.hpp"

namespace txforge::node {

using lifecycle::LifecycleState;

bool EventFilter::matches(const ChainEvent& e) const {
  switch (kind) {
    case Kind::kAll: return true;
    case Kind::kTx: {
      auto h = event_tx(e);
      return h && *h == tx;
    }
    case Kind::kEventKind: return kind_of(e) == event_kind;
  }
  return false;
}

// Subscription ---------------------------------------------------------------

Subscription::Subscription(Subscription&& other) noexcept : bus_(other.bus_), id_(other.id_) {
  other.bus_ = nullptr;
}

Subscription& Subscription::operator=(Subscription&& other) noexcept {
  if (this != &other) {
    if (bus_) bus_->unsubscribe(id_);
    bus_ = other.bus_;
    id_ = other.id_;
    other.bus_ = nullptr;
  }
  return *this;
}

Subscription::~Subscription() {
  if (bus_) bus_->unsubscribe(id_);
}

std::optional<Delivery> Subscription::try_next() {
  return bus_ ? bus_->try_next(id_) : std::nullopt;
}

std::optional<Delivery> Subscription::next(std::chrono::milliseconds timeout) {
  return bus_ ? bus_->next(id_, timeout) : std::nullopt;
}

// EventBus -------------------------------------------------------------------

EventBus::~EventBus() { close(); }

void EventBus::publish(const ChainEvent& event) {
  {
    std::lock_guard lock(mu_);
    SequencedEvent se{log_.size(), event};
    log_.push_back(se);
    for (auto& [id, q] : queues_) {
      if (!q.filter.matches(event)) continue;
      if (q.missed > 0 || q.pending.size() >= q.capacity) {
        ++q.missed;
      } else {
        q.pending.push_back(se);
      }
    }
  }
  cv_.notify_all();
}

Subscription EventBus::subscribe(EventFilter filter, std::optional<std::size_t> capacity) {
  std::lock_guard lock(mu_);
  const std::uint64_t id = next_id_++;
  Queue q;
  q.filter = filter;
  q.capacity = std::max<std::size_t>(1, capacity.value_or(default_capacity_));
  queues_.emplace(id, std::move(q));
  return Subscription(this, id);
}

std::vector<SequencedEvent> EventBus::log() const {
  std::lock_guard lock(mu_);
  return log_;
}

std::size_t EventBus::size() const {
  std::lock_guard lock(mu_);
  return log_.size();
}

void EventBus::close() {
  {
    std::lock_guard lock(mu_);
    closed_ = true;
  }
  cv_.notify_all();
}

std::optional<Delivery> EventBus::pop_locked(Queue& q) {
  if (!q.pending.empty()) {
    SequencedEvent e = std::move(q.pending.front());
    q.pending.pop_front();
    return e;
  }
  if (q.missed > 0) {
    // The gap is reported where it happened: after everything buffered
    // before it, and nothing after it is queued until this is read.
    LaggedNotice notice{q.missed};
    q.missed = 0;
    return notice;
  }
  return std::nullopt;
}

std::optional<Delivery> EventBus::try_next(std::uint64_t id) {
  std::lock_guard lock(mu_);
  auto it = queues_.find(id);
  if (it == queues_.end()) return std::nullopt;
  return pop_locked(it->second);
}

std::optional<Delivery> EventBus::next(std::uint64_t id, std::chrono::milliseconds timeout) {
  std::unique_lock lock(mu_);
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  while (true) {
    auto it = queues_.find(id);
    if (it == queues_.end()) return std::nullopt;
    if (auto d = pop_locked(it->second)) return d;
    if (closed_) return std::nullopt;
    if (cv_.wait_until(lock, deadline) == std::cv_status::timeout) {
      it = queues_.find(id);
      return it == queues_.end() ? std::nullopt : pop_locked(it->second);
    }
  }
}

void EventBus::unsubscribe(std::uint64_t id) {
  std::lock_guard lock(mu_);
  queues_.erase(id);
}

// Node -----------------------------------------------------------------------

Node::Node(NodeOptions options)
    : options_(options),
      bus_(options.subscription_capacity),
      controller_(chain_, bus_, lifecycle::ControllerOptions{options.confirmations_k}) {}

Hash256 Node::rpc_submit_transaction(const chain::Transaction& tx) {
  std::lock_guard lock(mu_);
  if (controller_.knows(tx.hash) || chain_.in_pool(tx.hash) || chain_.location(tx.hash))
    throw RpcError("duplicate", "transaction " + tx.hash.to_hex() + " already submitted", 409);

  if (submission_mode() == SubmissionMode::kQueued) {
    if (auto next = chain_.next_nonce(tx.sender); next && tx.nonce < *next)
      throw RpcError("nonce too low", "nonce " + std::to_string(tx.nonce) + " already consumed");
    controller_.track(tx);
    {
      std::lock_guard qlock(queue_mu_);
      queued_.push_back(tx.hash);
    }
    queue_cv_.notify_all();
    return tx.hash;
  }

  controller_.track(tx);
  try {
    controller_.advance(tx.hash, LifecycleState::kPending);
  } catch (const lifecycle::LifecycleError& e) {
    controller_.untrack(tx.hash);
    if (e.code() == lifecycle::LifecycleErrc::kRejected) {
      const std::string& reason = e.detail();
      throw RpcError(reason, "transaction rejected: " + reason,
                     reason == "duplicate" ? 409 : 400);
    }
    throw;
  }
  return tx.hash;
}

TxStatus Node::rpc_get_transaction_status(const Hash256& tx_hash) const {
  std::lock_guard lock(mu_);
  TxStatus status;
  if (!controller_.knows(tx_hash)) return status;
  const LifecycleState s = controller_.current_state(tx_hash);
  if (s == LifecycleState::kDropped) return status;
  status.lifecycle_state = lifecycle::to_string(s);
  if (auto loc = chain_.location(tx_hash)) {
    status.confirmations = chain_.confirmations(tx_hash).value_or(0);
    status.block_hash = loc->block_hash;
  }
  return status;
}

chain::ContractState Node::rpc_get_state(const Address& contract) const {
  std::lock_guard lock(mu_);
  auto it = chain_.state().contracts.find(contract);
  return it == chain_.state().contracts.end() ? chain::ContractState{} : it->second;
}

std::optional<chain::Value> Node::rpc_get_state(const Address& contract,
                                                const std::string& key) const {
  std::lock_guard lock(mu_);
  const chain::Value* v = chain_.state().find(contract, key);
  return v ? std::optional<chain::Value>(*v) : std::nullopt;
}

void Node::set_submission_mode(SubmissionMode mode) {
  std::lock_guard lock(queue_mu_);
  mode_ = mode;
}

SubmissionMode Node::submission_mode() const {
  std::lock_guard lock(queue_mu_);
  return mode_;
}

std::optional<Hash256> Node::take_queued(std::chrono::milliseconds timeout) {
  std::unique_lock lock(queue_mu_);
  queue_cv_.wait_for(lock, timeout, [&] { return !queued_.empty(); });
  if (queued_.empty()) return std::nullopt;
  Hash256 h = queued_.front();
  queued_.pop_front();
  return h;
}

std::size_t Node::queued_count() const {
  std::lock_guard lock(queue_mu_);
  return queued_.size();
}

}  // namespace txforge::node
