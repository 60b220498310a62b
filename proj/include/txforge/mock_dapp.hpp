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

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "txforge/clock.hpp"
#include "txforge/lifecycle.hpp"
#include "txforge/node.hpp"
#include "txforge/snapshot.hpp"

namespace txforge::mock {

enum class Strategy { kPeriodicPolling, kPassiveWaiting, kAggressiveUpdating };
const char* to_string(Strategy s);
/// Accepts "polling", "passive", "aggressive".
std::optional<Strategy> strategy_from_string(const std::string& s);

struct BugFlags {
  /// Applies the full effect when the transaction hash comes back.
  bool type1_premature_update = false;
  /// Ignores Changed events.
  bool type2_no_rollback = false;
  /// restart() loses the undo journal.
  bool rollback_cleared_on_restart = false;
  /// Effects triggered by receipts, confirmations and Changed land this
  /// much later. Effects at the transaction hash stay immediate.
  Millis laggy_update_ms = 0;

  bool any() const {
    return type1_premature_update || type2_no_rollback || rollback_cleared_on_restart || laggy_update_ms > 0;
  }
};

struct MockOptions {
  Strategy strategy = Strategy::kPassiveWaiting;
  BugFlags bugs;
  /// Passive waiting only: show an "awaiting" marker while unconfirmed.
  bool mark_pending = false;
  Millis poll_interval_ms = 1000;
  /// Keys are drawn from k0..k{key_space-1}. Zero gives every transaction
  /// a fresh key.
  std::size_t key_space = 16;
};

/// The off-chain effect a mock intends for one of its transactions.
struct Intent {
  Hash256 tx_hash;
  std::string tag;
  std::string key;
  std::optional<std::string> value;  // nullopt deletes
};

/// In-process DApp. Its off-chain document looks like
///   {"items": {key: {"value": v, "label": ...}}, "index": n,
///    "awaiting": {key: tx}, "meta": {...}}
/// where "meta" is bookkeeping excluded by the default field rules.
class MockDapp {
 public:
  MockDapp(node::Node& node, Clock& clock, MockOptions options);
  ~MockDapp();
  MockDapp(const MockDapp&) = delete;
  MockDapp& operator=(const MockDapp&) = delete;

  static const std::vector<std::string>& declared_tags();
  static Address contract();

  const MockOptions& options() const { return options_; }

  /// Builds a value-changing transaction and remembers its intent.
  chain::Transaction next_transaction(lifecycle::Rng& rng);
  const Intent* intent(const Hash256& tx) const;

  /// Reacts to every event delivered since the last call.
  void pump();
  /// One polling round (polling strategy only).
  void poll_tick();
  /// Simulates a page reload.
  void restart();

  snapshot::Document state() const;
  /// The document restricted to one key.
  snapshot::Document state_for(const std::string& key) const;

  std::uint64_t events_seen() const { return events_seen_; }

 private:
  void on_event(const ChainEvent& e);
  void mutate(std::function<void()> f, bool lag);
  void apply(const Intent& in);
  void schedule_poll();

  node::Node& node_;
  Clock& clock_;
  MockOptions options_;
  node::Subscription sub_;
  std::uint64_t poll_task_ = 0;
  bool polling_ = false;

  std::map<Hash256, Intent> intents_;
  std::map<std::string, Hash256> in_flight_;  // key -> latest transaction
  std::uint64_t serial_ = 0;

  std::map<std::string, std::string> items_;
  std::map<std::string, std::string> awaiting_;
  /// Previous value per applied transaction, for reverting.
  std::map<Hash256, std::optional<std::string>> journal_;
  std::set<Hash256> settled_;      // passive: applied at K confirmations
  std::set<Hash256> premature_;    // type1: applied at the hash event
  std::set<Hash256> watching_;     // polling: not yet final
  std::uint64_t events_seen_ = 0;
  std::uint64_t polls_ = 0;
  std::uint64_t restarts_ = 0;
};

}  // namespace txforge::mock
