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

#include <catch_amalgamated.hpp>

#include <map>
#include <set>

#include "test_support.hpp"
#include "txforge/lifecycle.hpp"
#include "txforge/node.hpp"

using namespace txforge;
using lifecycle::LifecycleErrc;
using lifecycle::LifecycleError;
using lifecycle::LifecycleState;
using S = LifecycleState;
using testing::set_tx;

namespace {

struct Rig {
  chain::Chain chain;
  node::EventBus bus;
  lifecycle::Controller ctl{chain, bus};

  std::vector<EventKind> kinds_for(const Hash256& h) const {
    std::vector<EventKind> out;
    for (const auto& se : bus.log())
      if (auto t = event_tx(se.event); t && *t == h) out.push_back(kind_of(se.event));
    return out;
  }
};

const std::vector<S> kAll{S::kCreated,  S::kPending,  S::kExecuted,
                          S::kDropped,  S::kReversed, S::kFinalized};

// Spelled out independently of is_edge.
const std::set<std::pair<S, S>> kEdges{
    {S::kCreated, S::kPending},   {S::kPending, S::kExecuted},  {S::kPending, S::kDropped},
    {S::kExecuted, S::kReversed}, {S::kExecuted, S::kFinalized}, {S::kReversed, S::kExecuted},
    {S::kReversed, S::kDropped},
};

LifecycleErrc errc_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const LifecycleError& e) {
    return e.code();
  }
  FAIL("expected LifecycleError");
  return LifecycleErrc::kUnknownTx;
}

}  // namespace

TEST_CASE("edge table matches the lifecycle model") {
  for (S a : kAll)
    for (S b : kAll) CHECK(lifecycle::is_edge(a, b) == kEdges.contains({a, b}));
  for (S s : kAll) {
    bool has_out = false;
    for (S t : kAll) has_out |= lifecycle::is_edge(s, t);
    CHECK(lifecycle::is_terminal(s) == !has_out);
  }
  for (S s : kAll) CHECK(lifecycle::state_from_string(lifecycle::to_string(s)) == s);
}

TEST_CASE("current_state follows advances") {
  Rig r;
  auto tx = set_tx(1, 0, "k", "v");
  CHECK(errc_of([&] { r.ctl.current_state(tx.hash); }) == LifecycleErrc::kUnknownTx);
  r.ctl.track(tx);
  CHECK(r.ctl.current_state(tx.hash) == S::kCreated);
  CHECK(errc_of([&] { r.ctl.track(tx); }) == LifecycleErrc::kAlreadyTracked);

  r.ctl.advance(tx.hash, S::kPending);
  CHECK(r.ctl.current_state(tx.hash) == S::kPending);
  CHECK(r.chain.in_pool(tx.hash));

  auto rec = r.ctl.advance(tx.hash, S::kExecuted);
  CHECK(rec.from == S::kPending);
  CHECK(rec.to == S::kExecuted);
  REQUIRE(rec.block);
  CHECK(r.chain.location(tx.hash)->block_hash == *rec.block);
  CHECK(r.chain.state().find(testing::addr(0xcc), "k") != nullptr);
}

TEST_CASE("advance rejects non-edges and terminal states") {
  Rig r;
  auto tx = set_tx(1, 0, "k", "v");
  r.ctl.track(tx);
  CHECK(errc_of([&] { r.ctl.advance(tx.hash, S::kExecuted); }) == LifecycleErrc::kInvalidEdge);
  CHECK(errc_of([&] { r.ctl.advance(tx.hash, S::kFinalized); }) == LifecycleErrc::kInvalidEdge);
  r.ctl.advance(tx.hash, S::kPending);
  CHECK(errc_of([&] { r.ctl.advance(tx.hash, S::kReversed); }) == LifecycleErrc::kInvalidEdge);
  r.ctl.advance(tx.hash, S::kDropped);
  CHECK_FALSE(r.chain.in_pool(tx.hash));
  CHECK(errc_of([&] { r.ctl.advance(tx.hash, S::kPending); }) == LifecycleErrc::kTerminalState);
  // The state is unchanged by failed advances.
  CHECK(r.ctl.current_state(tx.hash) == S::kDropped);
  CHECK(r.ctl.trace(tx.hash).steps.size() == 3);
}

TEST_CASE("rejected submission surfaces the chain's reason") {
  Rig r;
  auto a = set_tx(1, 0, "k", "v");
  r.ctl.track(a);
  r.ctl.advance(a.hash, S::kPending);
  r.ctl.advance(a.hash, S::kExecuted);
  auto stale = set_tx(1, 0, "k", "other");
  r.ctl.track(stale);
  try {
    r.ctl.advance(stale.hash, S::kPending);
    FAIL("expected rejection");
  } catch (const LifecycleError& e) {
    CHECK(e.code() == LifecycleErrc::kRejected);
    CHECK(e.detail() == "nonce too low");
  }
  CHECK(r.ctl.current_state(stale.hash) == S::kCreated);
}

TEST_CASE("bug-exposing traversal visits every stage with visit indices") {
  Rig r;
  auto tx = set_tx(1, 0, "k", "v");
  r.ctl.track(tx);
  std::vector<std::pair<S, std::uint32_t>> seen;
  lifecycle::StageHooks hooks{[&](const Hash256& h, S s, std::uint32_t v) {
    CHECK(h == tx.hash);
    seen.emplace_back(s, v);
  }};
  auto trace = r.ctl.run_traversal(tx.hash, lifecycle::TraversalPlan::bug_exposing(), hooks);

  const std::vector<std::pair<S, std::uint32_t>> want{
      {S::kCreated, 1},  {S::kPending, 1}, {S::kExecuted, 1},
      {S::kReversed, 1}, {S::kExecuted, 2}, {S::kFinalized, 1}};
  CHECK(seen == want);
  CHECK(trace.complete);
  REQUIRE(trace.steps.size() == want.size());
  for (std::size_t i = 0; i < want.size(); ++i) {
    CHECK(trace.steps[i].state == want[i].first);
    CHECK(trace.steps[i].visit_index == want[i].second);
    if (i > 0) CHECK(trace.steps[i].logical_timestamp >= trace.steps[i - 1].logical_timestamp);
  }
  CHECK(trace.visits(S::kExecuted) == 2);
  CHECK(r.ctl.reorg_count() == 1);
  CHECK(r.chain.confirmations(tx.hash) >= 6u);

  // The two executions land in different blocks.
  REQUIRE(trace.steps[2].block);
  REQUIRE(trace.steps[4].block);
  CHECK(*trace.steps[2].block != *trace.steps[4].block);

  using K = EventKind;
  std::vector<K> want_events{K::kTransactionHash, K::kReceipt, K::kChanged, K::kReceipt};
  for (int i = 1; i <= 6; ++i) want_events.push_back(K::kConfirmation);
  CHECK(r.kinds_for(tx.hash) == want_events);

  std::vector<std::uint64_t> counts;
  for (const auto& se : r.bus.log())
    if (auto* c = std::get_if<ConfirmationEvent>(&se.event)) counts.push_back(c->count);
  CHECK(counts == std::vector<std::uint64_t>{1, 2, 3, 4, 5, 6});
}

TEST_CASE("pending-dropped plan") {
  Rig r;
  auto tx = set_tx(1, 0, "k", "v");
  r.ctl.track(tx);
  auto trace =
      r.ctl.run_traversal(tx.hash, {{S::kCreated, S::kPending, S::kDropped}}, lifecycle::StageHooks{});
  CHECK(trace.complete);
  CHECK(trace.steps.size() == 3);
  CHECK(trace.current() == S::kDropped);
  // Exactly one event for a dropped transaction.
  CHECK(r.kinds_for(tx.hash) == std::vector<EventKind>{EventKind::kTransactionHash});
}

TEST_CASE("normal plan and invalid plans") {
  Rig r;
  auto tx = set_tx(1, 0, "k", "v");
  r.ctl.track(tx);
  CHECK(errc_of([&] {
          r.ctl.run_traversal(tx.hash, {{S::kCreated, S::kExecuted}}, {});
        }) == LifecycleErrc::kInvalidPlan);
  CHECK(errc_of([&] { r.ctl.run_traversal(tx.hash, {{S::kPending}}, {}); }) ==
        LifecycleErrc::kInvalidPlan);
  CHECK(errc_of([&] { r.ctl.run_traversal(tx.hash, {{}}, {}); }) == LifecycleErrc::kInvalidPlan);
  CHECK(r.ctl.current_state(tx.hash) == S::kCreated);

  auto trace = r.ctl.run_traversal(tx.hash, lifecycle::TraversalPlan::normal(), {});
  CHECK(trace.complete);
  CHECK(trace.steps.size() == 4);
  CHECK(trace.current() == S::kFinalized);
  CHECK(r.ctl.reorg_count() == 0);

  // Traversal requires a transaction still at Created.
  CHECK(errc_of([&] { r.ctl.run_traversal(tx.hash, lifecycle::TraversalPlan::normal(), {}); }) ==
        LifecycleErrc::kNotCreated);
}

TEST_CASE("hook failure settles the transaction and marks the trace incomplete") {
  Rig r;
  auto tx = set_tx(1, 0, "k", "v");
  r.ctl.track(tx);
  lifecycle::StageHooks hooks{[&](const Hash256&, S s, std::uint32_t) {
    if (s == S::kReversed) throw std::runtime_error("capture failed");
  }};
  auto trace = r.ctl.run_traversal(tx.hash, lifecycle::TraversalPlan::bug_exposing(), hooks);
  CHECK_FALSE(trace.complete);
  CHECK(lifecycle::is_terminal(trace.current()));
  // A second traversal on another tx is not blocked by the aborted one.
  auto tx2 = set_tx(2, 0, "k2", "v");
  r.ctl.track(tx2);
  CHECK(r.ctl.run_traversal(tx2.hash, lifecycle::TraversalPlan::normal(), {}).complete);
}

TEST_CASE("finalization waits for exactly K confirmations") {
  for (std::uint64_t k : {1u, 3u, 6u, 12u}) {
    chain::Chain c;
    node::EventBus bus;
    lifecycle::Controller ctl(c, bus, {k});
    auto tx = set_tx(1, 0, "k", "v");
    ctl.track(tx);
    ctl.advance(tx.hash, S::kPending);
    ctl.advance(tx.hash, S::kExecuted);
    CHECK(c.confirmations(tx.hash) == 0u);
    ctl.advance(tx.hash, S::kFinalized);
    CHECK(c.confirmations(tx.hash) == k);
  }
}

TEST_CASE("advance to Executed with a reverted payload still executes") {
  Rig r;
  auto tx = chain::Transaction::make(testing::addr(1), 0, testing::addr(0xcc),
                                     {chain::SetOp{"k", "v"}, chain::FailOp{}}, "fail");
  r.ctl.track(tx);
  r.ctl.advance(tx.hash, S::kPending);
  r.ctl.advance(tx.hash, S::kExecuted);
  CHECK(r.chain.state().find(testing::addr(0xcc), "k") == nullptr);
  bool saw_failed_receipt = false;
  for (const auto& se : r.bus.log())
    if (auto* rc = std::get_if<ReceiptEvent>(&se.event)) saw_failed_receipt |= !rc->success;
  CHECK(saw_failed_receipt);
}

namespace {

struct SoakResult {
  std::vector<std::tuple<std::string, S, S, std::uint32_t>> transitions;
  std::uint64_t reorgs = 0;
  std::vector<std::string> events;
};

SoakResult soak(std::uint64_t seed, const lifecycle::StochasticProfile& profile, int ticks) {
  chain::Chain c;
  node::EventBus bus;
  lifecycle::Controller ctl(c, bus);
  lifecycle::Rng rng(seed);
  lifecycle::Rng arrivals(seed ^ 0x9e3779b97f4a7c15ULL);
  std::map<std::uint8_t, std::uint64_t> nonces;
  SoakResult out;
  for (int t = 0; t < ticks; ++t) {
    if (arrivals.chance(0.7)) {
      auto sender = static_cast<std::uint8_t>(1 + arrivals.below(4));
      auto tx = set_tx(sender, nonces[sender]++, "k" + std::to_string(arrivals.below(8)),
                       std::to_string(t));
      ctl.track(tx);
      ctl.advance(tx.hash, S::kPending);
    }
    for (const auto& rec : ctl.stochastic_step(profile, rng))
      out.transitions.emplace_back(rec.tx_hash.to_hex(), rec.from, rec.to, rec.visit_index);
  }
  out.reorgs = ctl.reorg_count();
  for (const auto& se : bus.log()) out.events.push_back(to_string(kind_of(se.event)));
  return out;
}

}  // namespace

TEST_CASE("stochastic steps are deterministic per seed and respect edges") {
  lifecycle::StochasticProfile p;
  p.reorg_probability_per_block = 0.1;
  p.drop_probability_per_tick = 0.02;
  for (std::uint64_t seed : {1u, 7u, 42u}) {
    auto a = soak(seed, p, 300);
    auto b = soak(seed, p, 300);
    CHECK(a.transitions == b.transitions);
    CHECK(a.events == b.events);
    CHECK(a.reorgs == b.reorgs);
    CHECK(a.reorgs > 0);
    for (const auto& [h, from, to, v] : a.transitions) CHECK(lifecycle::is_edge(from, to));
  }
  CHECK(soak(1, p, 300).transitions != soak(2, p, 300).transitions);
}

TEST_CASE("all-zero profile never moves anything") {
  lifecycle::StochasticProfile p;
  p.reorg_probability_per_block = 0;
  p.drop_probability_per_tick = 0;
  p.execution_probability_per_block = 0;
  CHECK(p.valid());
  auto r = soak(3, p, 100);
  CHECK(r.transitions.empty());
  CHECK(r.reorgs == 0);

  lifecycle::StochasticProfile bad;
  bad.reorg_probability_per_block = 1.5;
  CHECK_FALSE(bad.valid());
}

TEST_CASE("rng is reproducible and uniform draws stay in range") {
  lifecycle::Rng a(99), b(99);
  for (int i = 0; i < 1000; ++i) {
    double u = a.uniform();
    CHECK(u == b.uniform());
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  lifecycle::Rng c(5);
  int hits = 0;
  for (int i = 0; i < 100000; ++i) hits += c.chance(0.25);
  CHECK(hits > 24000);
  CHECK(hits < 26000);
}
