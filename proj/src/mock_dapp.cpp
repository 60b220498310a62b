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

#include "txforge/mock_dapp.hpp"

#include <array>
#include <functional>

namespace txforge::mock {

using snapshot::json;

const char* to_string(Strategy s) {
  switch (s) {
    case Strategy::kPeriodicPolling: return "polling";
    case Strategy::kPassiveWaiting: return "passive";
    case Strategy::kAggressiveUpdating: return "aggressive";
  }
  return "?";
}

std::optional<Strategy> strategy_from_string(const std::string& s) {
  if (s == "polling") return Strategy::kPeriodicPolling;
  if (s == "passive") return Strategy::kPassiveWaiting;
  if (s == "aggressive") return Strategy::kAggressiveUpdating;
  return std::nullopt;
}

MockDapp::MockDapp(node::Node& node, Clock& clock, MockOptions options)
    : node_(node), clock_(clock), options_(options) {
  if (options_.strategy == Strategy::kPeriodicPolling) {
    if (options_.poll_interval_ms <= 0) throw std::invalid_argument("poll interval must be positive");
    polling_ = true;
    schedule_poll();
  }
  // Polling DApps still watch the hash event; everything else needs the feed.
  sub_ = node_.bus().subscribe(node::EventFilter::all(), std::size_t{1} << 20);
}

MockDapp::~MockDapp() {
  polling_ = false;
  if (poll_task_) clock_.cancel(poll_task_);
}

const std::vector<std::string>& MockDapp::declared_tags() {
  static const std::vector<std::string> tags{"create", "update", "withdraw"};
  return tags;
}

Address MockDapp::contract() {
  std::array<std::uint8_t, 20> b{};
  b[0] = 0xc0;
  b[19] = 0x01;
  return Address(b);
}

chain::Transaction MockDapp::next_transaction(lifecycle::Rng& rng) {
  const std::uint64_t n = serial_++;
  Intent in;
  std::string tag = declared_tags()[rng.below(3)];

  std::vector<std::string> present;
  for (const auto& [k, _] : items_) present.push_back(k);
  // Keys with a transaction still in flight are left alone so effects of
  // different transactions never overlap.
  std::set<std::string> busy;
  for (auto it = in_flight_.begin(); it != in_flight_.end();) {
    const auto& ctl = node_.controller();
    if (!ctl.knows(it->second) || lifecycle::is_terminal(ctl.current_state(it->second))) {
      it = in_flight_.erase(it);
    } else {
      busy.insert(it->first);
      ++it;
    }
  }
  std::erase_if(present, [&](const std::string& k) { return busy.contains(k); });

  if (tag != "create" && present.empty()) tag = "create";
  if (tag == "create") {
    if (options_.key_space == 0) {
      in.key = "k" + std::to_string(n);
    } else {
      std::vector<std::string> free;
      for (std::size_t i = 0; i < options_.key_space; ++i) {
        std::string k = "k" + std::to_string(i);
        if (!items_.contains(k) && !busy.contains(k)) free.push_back(k);
      }
      if (free.empty()) {
        if (present.empty()) throw std::runtime_error("mock key space exhausted");
        tag = "update";
      } else {
        in.key = free[rng.below(free.size())];
      }
    }
  }
  if (tag != "create") in.key = present[rng.below(present.size())];
  in.tag = tag;
  if (tag != "withdraw") in.value = "v" + std::to_string(n);

  std::array<std::uint8_t, 20> sender{};
  sender[0] = 0xd0;
  for (int i = 0; i < 8; ++i) sender[19 - i] = static_cast<std::uint8_t>(n >> (8 * i));
  std::vector<chain::StateOp> payload;
  if (in.value) {
    payload.push_back(chain::SetOp{in.key, *in.value});
  } else {
    payload.push_back(chain::DeleteOp{in.key});
  }
  auto tx = chain::Transaction::make(Address(sender), 0, contract(), std::move(payload), tag);
  in.tx_hash = tx.hash;
  intents_[tx.hash] = in;
  in_flight_[in.key] = tx.hash;
  if (polling_) watching_.insert(tx.hash);
  return tx;
}

const Intent* MockDapp::intent(const Hash256& tx) const {
  auto it = intents_.find(tx);
  return it == intents_.end() ? nullptr : &it->second;
}

void MockDapp::pump() {
  while (auto d = sub_.try_next()) {
    if (const auto* se = std::get_if<node::SequencedEvent>(&*d)) on_event(se->event);
  }
}

void MockDapp::mutate(std::function<void()> f, bool lag) {
  if (lag && options_.bugs.laggy_update_ms > 0) {
    clock_.schedule_after(options_.bugs.laggy_update_ms, std::move(f));
  } else {
    f();
  }
}

void MockDapp::apply(const Intent& in) {
  if (in.value) {
    items_[in.key] = *in.value;
  } else {
    items_.erase(in.key);
  }
}

void MockDapp::on_event(const ChainEvent& e) {
  ++events_seen_;
  const auto tx = event_tx(e);
  if (!tx) return;
  auto it = intents_.find(*tx);
  if (it == intents_.end()) return;
  const Intent in = it->second;
  const Hash256 h = in.tx_hash;
  const std::uint64_t k = node_.options().confirmations_k;
  const auto kind = kind_of(e);

  if (kind == EventKind::kTransactionHash && options_.bugs.type1_premature_update) {
    apply(in);
    premature_.insert(h);
    return;
  }
  if (premature_.contains(h)) return;

  switch (options_.strategy) {
    case Strategy::kPassiveWaiting:
      if (kind == EventKind::kTransactionHash && options_.mark_pending) {
        awaiting_[in.key] = h.to_hex().substr(0, 10);
      } else if (const auto* c = std::get_if<ConfirmationEvent>(&e); c && c->count == k) {
        mutate([this, in] {
          if (!settled_.insert(in.tx_hash).second) return;
          apply(in);
          awaiting_.erase(in.key);
        }, true);
      }
      break;

    case Strategy::kAggressiveUpdating:
      if (const auto* r = std::get_if<ReceiptEvent>(&e); r && r->success) {
        mutate([this, in] {
          std::optional<std::string> prev;
          if (auto f = items_.find(in.key); f != items_.end()) prev = f->second;
          journal_.insert_or_assign(in.tx_hash, prev);
          apply(in);
        }, true);
      } else if (kind == EventKind::kChanged && !options_.bugs.type2_no_rollback) {
        mutate([this, in] {
          auto j = journal_.find(in.tx_hash);
          if (j == journal_.end()) return;
          if (j->second) {
            items_[in.key] = *j->second;
          } else {
            items_.erase(in.key);
          }
          journal_.erase(j);
        }, true);
      } else if (const auto* c = std::get_if<ConfirmationEvent>(&e); c && c->count == k) {
        mutate([this, h] { journal_.erase(h); }, true);
      }
      break;

    case Strategy::kPeriodicPolling:
      break;
  }
}

void MockDapp::schedule_poll() {
  poll_task_ = clock_.schedule_after(options_.poll_interval_ms, [this] {
    if (!polling_) return;
    poll_tick();
    schedule_poll();
  });
}

void MockDapp::poll_tick() {
  ++polls_;
  std::vector<Hash256> done;
  for (const auto& h : watching_) {
    const Intent& in = intents_.at(h);
    if (premature_.contains(h)) continue;
    if (auto v = node_.rpc_get_state(contract(), in.key)) {
      items_[in.key] = chain::render_value(*v);
    } else {
      items_.erase(in.key);
    }
    const std::string st = node_.rpc_get_transaction_status(h).lifecycle_state;
    if (st == "finalized" || (st == "unknown" && node_.controller().knows(h))) done.push_back(h);
  }
  for (const auto& h : done) watching_.erase(h);
}

void MockDapp::restart() {
  ++restarts_;
  if (options_.bugs.rollback_cleared_on_restart) journal_.clear();
}

namespace {

json item_json(const std::string& key, const std::string& value) {
  return {{"value", value}, {"label", key + " = " + value}};
}

}  // namespace

snapshot::Document MockDapp::state() const {
  json items = json::object();
  for (const auto& [k, v] : items_) items[k] = item_json(k, v);
  json awaiting = json::object();
  for (const auto& [k, v] : awaiting_) awaiting[k] = v;
  return {{"items", std::move(items)},
          {"index", items_.size()},
          {"awaiting", std::move(awaiting)},
          {"meta", {{"events_seen", events_seen_}, {"polls", polls_}, {"restarts", restarts_},
                    {"strategy", to_string(options_.strategy)}}}};
}

snapshot::Document MockDapp::state_for(const std::string& key) const {
  json items = json::object();
  if (auto it = items_.find(key); it != items_.end()) items[key] = item_json(key, it->second);
  json awaiting = json::object();
  if (auto it = awaiting_.find(key); it != awaiting_.end()) awaiting[key] = it->second;
  return {{"items", std::move(items)}, {"awaiting", std::move(awaiting)}};
}

}  // namespace txforge::mock
