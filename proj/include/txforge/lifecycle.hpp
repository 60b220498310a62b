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

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "txforge/chain.hpp"
#include "txforge/events.hpp"

namespace txforge::lifecycle {

enum class LifecycleState { kCreated, kPending, kExecuted, kDropped, kReversed, kFinalized };

const char* to_string(LifecycleState s);
std::optional<LifecycleState> state_from_string(const std::string& name);

inline bool is_terminal(LifecycleState s) {
  return s == LifecycleState::kDropped || s == LifecycleState::kFinalized;
}

/// Edges of the transaction lifecycle model:
///   Created->Pending, Pending->Executed, Pending->Dropped, Executed->Reversed,
///   Executed->Finalized, Reversed->Executed, Reversed->Dropped.
bool is_edge(LifecycleState from, LifecycleState to);

struct TraceStep {
  LifecycleState state = LifecycleState::kCreated;
  std::uint32_t visit_index = 1;
  std::uint64_t logical_timestamp = 0;
  std::optional<Hash256> block;
  bool operator==(const TraceStep&) const = default;
};

struct LifecycleTrace {
  Hash256 tx_hash;
  std::vector<TraceStep> steps;
  bool complete = false;

  LifecycleState current() const { return steps.back().state; }
  std::uint32_t visits(LifecycleState s) const;
};

struct TraversalPlan {
  std::vector<LifecycleState> states;

  /// Created -> Pending -> Executed -> Reversed -> Executed -> Finalized.
  static TraversalPlan bug_exposing();
  /// Created -> Pending -> Executed -> Finalized.
  static TraversalPlan normal();

  bool valid() const;
};

struct StochasticProfile {
  double reorg_probability_per_block = 1.0 / 24.43;
  double drop_probability_per_tick = 0.0;
  double execution_probability_per_block = 0.5;
  std::uint64_t rng_seed = 0;

  bool valid() const;
};

struct TransitionRecord {
  Hash256 tx_hash;
  LifecycleState from = LifecycleState::kCreated;
  LifecycleState to = LifecycleState::kCreated;
  std::uint32_t visit_index = 1;
  std::uint64_t logical_timestamp = 0;
  std::optional<Hash256> block;
};

enum class LifecycleErrc {
  kUnknownTx,
  kAlreadyTracked,
  kInvalidEdge,
  kTerminalState,
  kRejected,
  kNotCreated,
  kInvalidPlan,
  kTraversalInFlight,
};

const char* to_string(LifecycleErrc code);

class LifecycleError : public std::runtime_error {
 public:
  LifecycleError(LifecycleErrc code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail),
        code_(code),
        detail_(detail) {}
  LifecycleErrc code() const { return code_; }
  /// For kRejected, the chain's rejection reason verbatim.
  const std::string& detail() const { return detail_; }

 private:
  LifecycleErrc code_;
  std::string detail_;
};

/// Called after each stage of a traversal settles, starting with Created.
/// Throwing aborts the traversal.
struct StageHooks {
  std::function<void(const Hash256& tx, LifecycleState state, std::uint32_t visit)> on_stage;
};

/// Deterministic generator for stochastic mode. Uniform draws are derived
/// from raw 64-bit output so sequences do not depend on the standard
/// library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next();
  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  bool chance(double p) { return uniform() < p; }
  /// Uniform in [0, n).
  std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : next() % n; }

 private:
  std::uint64_t state_;
};

struct ControllerOptions {
  /// Confirmations required before a transaction counts as Finalized.
  std::uint64_t confirmations_k = 6;
};

/// Owns per-transaction lifecycles, realizes each lifecycle edge as a
/// concrete chain action and emits the client-visible events.
class Controller {
 public:
  Controller(chain::Chain& chain, EventSink& sink, ControllerOptions options = {});

  const ControllerOptions& options() const { return options_; }
  chain::Chain& chain() { return chain_; }
  const chain::Chain& chain() const { return chain_; }

  /// Registers a transaction in the Created state without submitting it.
  void track(const chain::Transaction& tx);
  /// Forgets a transaction that never left Created.
  void untrack(const Hash256& tx_hash);

  bool knows(const Hash256& tx_hash) const { return entries_.contains(tx_hash); }
  LifecycleState current_state(const Hash256& tx_hash) const;
  const LifecycleTrace& trace(const Hash256& tx_hash) const;
  const chain::Transaction& transaction(const Hash256& tx_hash) const;
  /// Transactions in tracking order.
  const std::vector<Hash256>& tracked() const { return order_; }

  TransitionRecord advance(const Hash256& tx_hash, LifecycleState target);

  LifecycleTrace run_traversal(const Hash256& tx_hash, const TraversalPlan& plan,
                               const StageHooks& hooks);

  /// Brings a transaction to a terminal state: pooled ones are dropped,
  /// executed ones are confirmed until Finalized.
  void settle(const Hash256& tx_hash);

  /// One block tick of the stochastic mode. All randomness comes from `rng`.
  std::vector<TransitionRecord> stochastic_step(const StochasticProfile& profile, Rng& rng);
  std::uint64_t reorg_count() const { return reorgs_; }

  /// Every transition so far, in order.
  const std::vector<TransitionRecord>& transitions() const { return transitions_; }

 private:
  struct Entry {
    chain::Transaction tx;
    LifecycleTrace trace;
    std::uint64_t confirmations_emitted = 0;
  };

  Entry& entry(const Hash256& tx_hash);
  const Entry& entry(const Hash256& tx_hash) const;
  void record(Entry& e, LifecycleState to, std::optional<Hash256> block,
              std::vector<TransitionRecord>& out);
  void apply_update(const chain::HeadUpdate& update, std::vector<TransitionRecord>& out);
  void emit(const ChainEvent& event) { sink_.publish(event); }

  chain::Chain& chain_;
  EventSink& sink_;
  ControllerOptions options_;
  std::unordered_map<Hash256, Entry, FixedBytesHasher> entries_;
  std::vector<Hash256> order_;
  std::set<Hash256> executed_;  // tracked txs currently Executed
  std::vector<TransitionRecord> transitions_;
  std::optional<Hash256> active_traversal_;
  std::uint64_t reorgs_ = 0;
};

}  // namespace txforge::lifecycle
