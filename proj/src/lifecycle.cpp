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

#include "txforge/lifecycle.hpp"

#include <algorithm>

namespace txforge::lifecycle {

using chain::Chain;
using chain::HeadUpdate;
using S = LifecycleState;

const char* to_string(LifecycleState s) {
  switch (s) {
    case S::kCreated: return "created";
    case S::kPending: return "pending";
    case S::kExecuted: return "executed";
    case S::kDropped: return "dropped";
    case S::kReversed: return "reversed";
    case S::kFinalized: return "finalized";
  }
  return "unknown";
}

std::optional<LifecycleState> state_from_string(const std::string& name) {
  for (auto s : {S::kCreated, S::kPending, S::kExecuted, S::kDropped, S::kReversed, S::kFinalized})
    if (name == to_string(s)) return s;
  return std::nullopt;
}

bool is_edge(LifecycleState from, LifecycleState to) {
  switch (from) {
    case S::kCreated: return to == S::kPending;
    case S::kPending: return to == S::kExecuted || to == S::kDropped;
    case S::kExecuted: return to == S::kReversed || to == S::kFinalized;
    case S::kReversed: return to == S::kExecuted || to == S::kDropped;
    case S::kDropped:
    case S::kFinalized: return false;
  }
  return false;
}

const char* to_string(LifecycleErrc code) {
  switch (code) {
    case LifecycleErrc::kUnknownTx: return "unknown transaction";
    case LifecycleErrc::kAlreadyTracked: return "already tracked";
    case LifecycleErrc::kInvalidEdge: return "invalid edge";
    case LifecycleErrc::kTerminalState: return "terminal state";
    case LifecycleErrc::kRejected: return "rejected";
    case LifecycleErrc::kNotCreated: return "not in created state";
    case LifecycleErrc::kInvalidPlan: return "invalid plan";
    case LifecycleErrc::kTraversalInFlight: return "traversal in flight";
  }
  return "unknown";
}

std::uint32_t LifecycleTrace::visits(LifecycleState s) const {
  return static_cast<std::uint32_t>(
      std::count_if(steps.begin(), steps.end(), [s](const TraceStep& st) { return st.state == s; }));
}

TraversalPlan TraversalPlan::bug_exposing() {
  return {{S::kCreated, S::kPending, S::kExecuted, S::kReversed, S::kExecuted, S::kFinalized}};
}

TraversalPlan TraversalPlan::normal() {
  return {{S::kCreated, S::kPending, S::kExecuted, S::kFinalized}};
}

bool TraversalPlan::valid() const {
  if (states.empty() || states.front() != S::kCreated) return false;
  for (std::size_t i = 1; i < states.size(); ++i)
    if (!is_edge(states[i - 1], states[i])) return false;
  return true;
}

bool StochasticProfile::valid() const {
  auto in_unit = [](double p) { return p >= 0.0 && p <= 1.0; };
  return in_unit(reorg_probability_per_block) && in_unit(drop_probability_per_tick) &&
         in_unit(execution_probability_per_block);
}

std::uint64_t Rng::next() {
  // splitmix64
  std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// ---------------------------------------------------------------------------

Controller::Controller(Chain& chain, EventSink& sink, ControllerOptions options)
    : chain_(chain), sink_(sink), options_(options) {
  if (options_.confirmations_k == 0)
    throw std::invalid_argument("confirmations_k must be at least 1");
}

void Controller::track(const chain::Transaction& tx) {
  if (entries_.contains(tx.hash))
    throw LifecycleError(LifecycleErrc::kAlreadyTracked, tx.hash.to_hex());
  Entry e;
  e.tx = tx;
  e.trace.tx_hash = tx.hash;
  e.trace.steps.push_back(TraceStep{S::kCreated, 1, chain_.head().logical_timestamp, std::nullopt});
  entries_.emplace(tx.hash, std::move(e));
  order_.push_back(tx.hash);
}

void Controller::untrack(const Hash256& tx_hash) {
  const Entry& e = entry(tx_hash);
  if (e.trace.steps.size() != 1)
    throw LifecycleError(LifecycleErrc::kNotCreated, tx_hash.to_hex());
  entries_.erase(tx_hash);
  order_.erase(std::remove(order_.begin(), order_.end(), tx_hash), order_.end());
}

Controller::Entry& Controller::entry(const Hash256& tx_hash) {
  auto it = entries_.find(tx_hash);
  if (it == entries_.end()) throw LifecycleError(LifecycleErrc::kUnknownTx, tx_hash.to_hex());
  return it->second;
}

const Controller::Entry& Controller::entry(const Hash256& tx_hash) const {
  auto it = entries_.find(tx_hash);
  if (it == entries_.end()) throw LifecycleError(LifecycleErrc::kUnknownTx, tx_hash.to_hex());
  return it->second;
}

LifecycleState Controller::current_state(const Hash256& tx_hash) const {
  return entry(tx_hash).trace.current();
}

const LifecycleTrace& Controller::trace(const Hash256& tx_hash) const {
  return entry(tx_hash).trace;
}

const chain::Transaction& Controller::transaction(const Hash256& tx_hash) const {
  return entry(tx_hash).tx;
}

void Controller::record(Entry& e, LifecycleState to, std::optional<Hash256> block,
                        std::vector<TransitionRecord>& out) {
  const LifecycleState from = e.trace.current();
  if (!is_edge(from, to))
    throw std::logic_error(std::string("lifecycle edge ") + to_string(from) + "->" +
                           to_string(to) + " is not part of the model");
  TraceStep step{to, e.trace.visits(to) + 1, chain_.head().logical_timestamp, block};
  e.trace.steps.push_back(step);
  if (is_terminal(to)) e.trace.complete = true;
  if (to == S::kExecuted) {
    executed_.insert(e.tx.hash);
  } else {
    executed_.erase(e.tx.hash);
  }
  TransitionRecord rec{e.tx.hash, from, to, step.visit_index, step.logical_timestamp, block};
  out.push_back(rec);
  transitions_.push_back(rec);
}

void Controller::apply_update(const HeadUpdate& update, std::vector<TransitionRecord>& out) {
  for (const auto& h : update.reversed) {
    auto it = entries_.find(h);
    if (it == entries_.end() || it->second.trace.current() != S::kExecuted) continue;
    const Hash256& orphan = update.reversed_from.at(h);
    record(it->second, S::kReversed, orphan, out);
    it->second.confirmations_emitted = 0;
    emit(ChangedEvent{h, orphan});
  }
  for (const auto& h : update.discarded) {
    auto it = entries_.find(h);
    if (it == entries_.end()) continue;
    Entry& e = it->second;
    if (e.trace.current() == S::kExecuted) {
      // Orphaned, and its nonce slot was taken by the new branch: it is
      // reversed and then silently gone.
      const Hash256& orphan = update.reversed_from.at(h);
      record(e, S::kReversed, orphan, out);
      e.confirmations_emitted = 0;
      emit(ChangedEvent{h, orphan});
    }
    if (e.trace.current() == S::kPending || e.trace.current() == S::kReversed)
      record(e, S::kDropped, std::nullopt, out);
  }

  std::set<Hash256> newly_included(update.included.begin(), update.included.end());
  for (const auto& block_hash : update.connected) {
    const chain::Block& block = *chain_.find_block(block_hash);
    emit(NewBlockEvent{block.hash, block.height});
    for (const auto& tx : block.transactions) {
      if (!newly_included.contains(tx.hash)) continue;
      auto it = entries_.find(tx.hash);
      if (it == entries_.end()) continue;
      Entry& e = it->second;
      if (e.trace.current() != S::kPending && e.trace.current() != S::kReversed) continue;
      record(e, S::kExecuted, block.hash, out);
      e.confirmations_emitted = 0;
      const auto loc = chain_.location(tx.hash);
      emit(ReceiptEvent{tx.hash, block.hash,
                        loc && loc->status == chain::ExecutionStatus::kSuccess});
    }
    for (const auto& h : executed_) {
      Entry& e = entries_.at(h);
      const auto loc = chain_.location(h);
      if (!loc || loc->height >= block.height) continue;
      const std::uint64_t count = std::min(block.height - loc->height, options_.confirmations_k);
      while (e.confirmations_emitted < count) emit(ConfirmationEvent{h, ++e.confirmations_emitted});
    }
  }
}

TransitionRecord Controller::advance(const Hash256& tx_hash, LifecycleState target) {
  Entry& e = entry(tx_hash);
  const LifecycleState from = e.trace.current();
  if (is_terminal(from))
    throw LifecycleError(LifecycleErrc::kTerminalState,
                         tx_hash.to_hex() + " is " + to_string(from));
  if (!is_edge(from, target))
    throw LifecycleError(LifecycleErrc::kInvalidEdge,
                         std::string(to_string(from)) + "->" + to_string(target));

  std::vector<TransitionRecord> out;
  switch (target) {
    case S::kPending: {
      auto outcome = chain_.submit(e.tx);
      if (outcome.kind == chain::SubmitOutcome::Kind::kRejected)
        throw LifecycleError(LifecycleErrc::kRejected, to_string(*outcome.reason));
      if (outcome.replaced) {
        auto old = entries_.find(*outcome.replaced);
        if (old != entries_.end() && (old->second.trace.current() == S::kPending ||
                                      old->second.trace.current() == S::kReversed))
          record(old->second, S::kDropped, std::nullopt, out);
      }
      record(e, S::kPending, std::nullopt, out);
      emit(TransactionHashEvent{tx_hash});
      break;
    }
    case S::kExecuted: {
      const Hash256 h = tx_hash;
      auto mined = chain_.mine_block(chain_.head_hash(), std::span(&h, 1));
      if (mined.update) apply_update(*mined.update, out);
      break;
    }
    case S::kReversed: {
      const auto loc = chain_.location(tx_hash);
      if (!loc) throw std::logic_error("executed transaction is not on the canonical chain");
      auto report = chain_.reorganize(loc->height);
      ++reorgs_;
      apply_update(report, out);
      break;
    }
    case S::kFinalized: {
      while (chain_.confirmations(tx_hash).value_or(0) < options_.confirmations_k) {
        auto mined = chain_.mine_block(chain_.head_hash(), {});
        if (mined.update) apply_update(*mined.update, out);
      }
      record(e, S::kFinalized, chain_.location(tx_hash)->block_hash, out);
      break;
    }
    case S::kDropped: {
      chain_.drop(tx_hash);
      record(e, S::kDropped, std::nullopt, out);
      break;
    }
    case S::kCreated:
      break;
  }

  for (const auto& rec : out)
    if (rec.tx_hash == tx_hash && rec.to == target) return rec;
  throw std::logic_error(std::string("transition to ") + to_string(target) + " did not occur");
}

LifecycleTrace Controller::run_traversal(const Hash256& tx_hash, const TraversalPlan& plan,
                                         const StageHooks& hooks) {
  if (!plan.valid()) throw LifecycleError(LifecycleErrc::kInvalidPlan, "not a walk on the model");
  if (active_traversal_)
    throw LifecycleError(LifecycleErrc::kTraversalInFlight, active_traversal_->to_hex());
  Entry& e = entry(tx_hash);
  if (e.trace.steps.size() != 1 || e.trace.current() != S::kCreated)
    throw LifecycleError(LifecycleErrc::kNotCreated, tx_hash.to_hex());

  active_traversal_ = tx_hash;
  struct Release {
    std::optional<Hash256>& slot;
    ~Release() { slot.reset(); }
  } release{active_traversal_};

  auto fire = [&](LifecycleState s, std::uint32_t visit) {
    if (!hooks.on_stage) return true;
    try {
      hooks.on_stage(tx_hash, s, visit);
      return true;
    } catch (const std::exception&) {
      return false;
    }
  };

  if (!fire(S::kCreated, 1)) {
    entries_.at(tx_hash).trace.complete = false;
    return entries_.at(tx_hash).trace;
  }
  for (std::size_t i = 1; i < plan.states.size(); ++i) {
    TransitionRecord rec = advance(tx_hash, plan.states[i]);
    if (!fire(rec.to, rec.visit_index)) {
      settle(tx_hash);
      Entry& done = entries_.at(tx_hash);
      done.trace.complete = false;
      return done.trace;
    }
  }
  Entry& done = entries_.at(tx_hash);
  done.trace.complete = true;
  return done.trace;
}

void Controller::settle(const Hash256& tx_hash) {
  switch (current_state(tx_hash)) {
    case S::kCreated:
      advance(tx_hash, S::kPending);
      advance(tx_hash, S::kDropped);
      break;
    case S::kPending:
    case S::kReversed:
      advance(tx_hash, S::kDropped);
      break;
    case S::kExecuted:
      advance(tx_hash, S::kFinalized);
      break;
    case S::kDropped:
    case S::kFinalized:
      break;
  }
}

std::vector<TransitionRecord> Controller::stochastic_step(const StochasticProfile& profile,
                                                          Rng& rng) {
  if (!profile.valid()) throw std::invalid_argument("stochastic probabilities must lie in [0,1]");
  std::vector<TransitionRecord> out;

  // 1. Miner selection: each tracked pool transaction is picked with the
  //    execution probability; picks are then trimmed to nonce-contiguous runs.
  std::map<Address, std::vector<const chain::Transaction*>> picked;
  const auto pool = chain_.pool_transactions();
  for (const auto& tx : pool) {
    const bool chosen = rng.chance(profile.execution_probability_per_block);
    if (chosen && entries_.contains(tx.hash)) picked[tx.sender].push_back(&tx);
  }
  std::vector<Hash256> selected;
  for (auto& [sender, txs] : picked) {
    std::sort(txs.begin(), txs.end(),
              [](const auto* a, const auto* b) { return a->nonce < b->nonce; });
    auto next = chain_.next_nonce(sender);
    std::uint64_t want = next ? *next : txs.front()->nonce;
    for (const auto* tx : txs) {
      if (tx->nonce != want) break;
      selected.push_back(tx->hash);
      ++want;
    }
  }
  auto mined = chain_.mine_block(chain_.head_hash(), selected);
  if (mined.update) apply_update(*mined.update, out);

  // 2. Reorganization orphaning the fresh head.
  if (rng.chance(profile.reorg_probability_per_block)) {
    auto report = chain_.reorganize(chain_.height());
    ++reorgs_;
    apply_update(report, out);
  }

  // 3. Silent drops.
  for (const auto& tx : chain_.pool_transactions()) {
    const bool drop = rng.chance(profile.drop_probability_per_tick);
    if (!drop) continue;
    auto it = entries_.find(tx.hash);
    if (it == entries_.end()) continue;
    chain_.drop(tx.hash);
    record(it->second, S::kDropped, std::nullopt, out);
  }

  // 4. Finalization.
  std::vector<Hash256> ready;
  for (const auto& h : executed_)
    if (chain_.confirmations(h).value_or(0) >= options_.confirmations_k) ready.push_back(h);
  for (const auto& h : ready) {
    Entry& e = entries_.at(h);
    record(e, S::kFinalized, chain_.location(h)->block_hash, out);
  }
  return out;
}

}  // namespace txforge::lifecycle
