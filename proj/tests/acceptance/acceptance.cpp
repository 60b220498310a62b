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

// Acceptance suite: one PASS or FAIL line per criterion.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "oracle_reference.hpp"
#include "txforge/node.hpp"
#include "txforge/protocol.hpp"
#include "txforge/session.hpp"
#include "unit/test_support.hpp"

using namespace txforge;
using S = lifecycle::LifecycleState;
using oracle::Outcome;

namespace {

nlohmann::json json_of(const chain::OnChainState& s) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [addr, kv] : s.contracts) {
    auto& o = j[addr.to_hex()];
    o = nlohmann::json::object();
    for (const auto& [k, v] : kv) o[k] = protocol::to_json(v);
  }
  return j;
}

struct Check {
  bool ok = true;
  std::string detail;
  void fail(const std::string& why) {
    if (ok) detail = why;
    ok = false;
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "txforge-acceptance";
  std::filesystem::create_directories(dir);
  return dir / name;
}

// 1 ---------------------------------------------------------------------------

Check truth_table() {
  Check c;
  const auto t0 = std::chrono::steady_clock::now();
  const std::string rules = snapshot::FieldRuleSet::defaults().id();
  std::size_t n = 0, agree = 0;
  testing_ref::for_each_assignment([&](const testing_ref::Assignment& a) {
    ++n;
    auto r = oracle::analyze(testing_ref::to_trace(a, rules));
    auto [w1, w2] = testing_ref::expected(a);
    if (r.assertion1.outcome == w1 && r.assertion2.outcome == w2) {
      ++agree;
    } else {
      c.fail(fmt("assignment #%zu disagrees", n));
    }
  });
  const double secs = seconds_since(t0);
  if (n != 729) c.fail(fmt("enumerated %zu assignments, expected 729", n));
  if (secs >= 1.0) c.fail(fmt("took %.3f s", secs));
  if (c.ok) c.detail = fmt("%zu/%zu assignments agree with the brute-force evaluation in %.3f s", agree, n, secs);
  return c;
}

// 2 ---------------------------------------------------------------------------

config::SessionConfig mock_session(const std::string& dapp, std::size_t txs, std::uint64_t seed = 2024,
                                   Millis wait = 2000) {
  auto c = config::parse_yaml(fmt("seed: %llu\nwait_window_ms: %lld\nclock: simulated\ndapp: %s\n",
                                  static_cast<unsigned long long>(seed), static_cast<long long>(wait), dapp.c_str()));
  c.transactions = txs;
  return c;
}

/// Transactions of a logged traverse session that change on-chain values,
/// found by folding their payloads in submission order.
std::set<std::string> value_changing(const std::filesystem::path& log) {
  std::set<std::string> out;
  chain::OnChainState state;
  for (const auto& rec : session::read_log(log).records) {
    if (rec.at("type") != "tx") continue;
    auto tx = protocol::transaction_from_json(rec.at("tx"));
    auto before = state;
    txforge::testing::oracle_apply(state, tx);
    if (!(state == before)) out.insert(tx.hash.to_hex());
  }
  return out;
}

struct MatrixRow {
  std::string name;
  std::string dapp;
  enum class Expect { kType1, kType2, kClean } expect;
};

Check detection_matrix() {
  Check c;
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<MatrixRow> rows{
      {"type1", "{strategy: passive, bugs: {type1_premature_update: true}}", MatrixRow::Expect::kType1},
      {"type2_no_rollback", "{strategy: aggressive, bugs: {type2_no_rollback: true}}", MatrixRow::Expect::kType2},
      {"rollback_cleared_on_restart", "{strategy: aggressive, bugs: {rollback_cleared_on_restart: true}}",
       MatrixRow::Expect::kType2},
      {"polling", "{strategy: polling, poll_interval_ms: 500}", MatrixRow::Expect::kClean},
      {"passive", "{strategy: passive}", MatrixRow::Expect::kClean},
      {"aggressive", "{strategy: aggressive}", MatrixRow::Expect::kClean},
  };
  std::vector<std::string> parts;
  for (const auto& row : rows) {
    const auto log = scratch("matrix-" + row.name + ".jsonl");
    session::RunOptions opt;
    opt.log_path = log;
    const std::size_t n = 120;
    auto result = session::run_session(mock_session(row.dapp, n), opt);
    const auto changing = value_changing(log);
    std::size_t v1 = 0, v2 = 0, hit = 0;
    for (const auto& r : result.reports) {
      const bool a1 = r.assertion1.outcome == Outcome::kViolation;
      const bool a2 = r.assertion2.outcome == Outcome::kViolation;
      v1 += a1;
      v2 += a2;
      if (changing.contains(r.tx_hash.to_hex())) {
        if (row.expect == MatrixRow::Expect::kType1 && a1) ++hit;
        if (row.expect == MatrixRow::Expect::kType2 && a2) ++hit;
      }
    }
    if (result.reports.size() < 100) c.fail(row.name + ": fewer than 100 transactions");
    switch (row.expect) {
      case MatrixRow::Expect::kType1:
        if (changing.empty() || hit != changing.size())
          c.fail(fmt("%s: assertion1 flagged %zu of %zu value-changing txs", row.name.c_str(), hit, changing.size()));
        if (v2 != 0) c.fail(fmt("%s: %zu assertion2 violations", row.name.c_str(), v2));
        parts.push_back(fmt("%s A1 %zu/%zu A2 %zu", row.name.c_str(), hit, changing.size(), v2));
        break;
      case MatrixRow::Expect::kType2:
        if (changing.empty() || hit != changing.size())
          c.fail(fmt("%s: assertion2 flagged %zu of %zu affected txs", row.name.c_str(), hit, changing.size()));
        parts.push_back(fmt("%s A2 %zu/%zu", row.name.c_str(), hit, changing.size()));
        break;
      case MatrixRow::Expect::kClean:
        if (v1 + v2 != 0) c.fail(fmt("%s: %zu violations on a correct mock", row.name.c_str(), v1 + v2));
        parts.push_back(fmt("%s 0/%zu", row.name.c_str(), result.reports.size()));
        break;
    }
  }
  const double secs = seconds_since(t0);
  if (secs >= 30.0) c.fail(fmt("took %.1f s", secs));
  if (c.ok) {
    std::string d;
    for (const auto& p : parts) d += (d.empty() ? "" : "; ") + p;
    c.detail = d + fmt(" (%.1f s)", secs);
  }
  return c;
}

// 3 ---------------------------------------------------------------------------

std::pair<std::size_t, std::size_t> violations(const session::SessionResult& r) {
  return {r.report["counts"]["assertion1_violations"].get<std::size_t>(),
          r.report["counts"]["assertion2_violations"].get<std::size_t>()};
}

Check fp_fn_mechanisms() {
  Check c;
  const std::size_t n = 20;
  // False positive: a correct passive DApp whose pending marker clears 20 s
  // after finalization, captured with a 15 s window.
  auto truth_fp = violations(session::run_session(mock_session("{strategy: passive, mark_pending: true}", n, 3, 15000)));
  auto laggy = session::run_session(
      mock_session("{strategy: passive, mark_pending: true, bugs: {laggy_update_ms: 20000}}", n, 3, 15000));
  auto fp = violations(laggy);
  if (truth_fp != std::pair<std::size_t, std::size_t>{0, 0}) c.fail("the prompt marker DApp is not clean");
  if (fp.first != n) c.fail(fmt("laggy marker: %zu of %zu txs flagged type1", fp.first, n));
  for (const auto& r : laggy.reports) {
    if (r.assertion1.outcome != Outcome::kViolation) continue;
    bool marker = false;
    for (const auto& d : r.assertion1.evidence->diff)
      marker |= snapshot::render_path(d.path).rfind("awaiting.", 0) == 0;
    if (!marker) c.fail("false positive not caused by the pending marker");
  }
  // Waiting longer than the lag removes the false positives.
  auto patient = violations(session::run_session(
      mock_session("{strategy: passive, mark_pending: true, bugs: {laggy_update_ms: 20000}}", n, 3, 25000)));
  if (patient.first != 0) c.fail("a window longer than the lag still reports type1");

  // False negative: a no-rollback DApp whose update lands 40 s after the
  // receipt, after the reversed snapshot has been taken.
  auto truth_fn = violations(session::run_session(
      mock_session("{strategy: aggressive, bugs: {type2_no_rollback: true}}", n, 3, 15000)));
  auto late = violations(session::run_session(
      mock_session("{strategy: aggressive, bugs: {type2_no_rollback: true, laggy_update_ms: 40000}}", n, 3, 15000)));
  if (truth_fn.second != n) c.fail(fmt("prompt no-rollback DApp: %zu of %zu flagged", truth_fn.second, n));
  if (late.second != 0) c.fail(fmt("late no-rollback DApp: %zu type2 reports, expected all missed", late.second));

  if (c.ok)
    c.detail = fmt("laggy marker: %zu/%zu false type1 (0 when prompt, 0 with a 25 s window); "
                   "late update: %zu/%zu type2 missed (%zu/%zu caught when prompt)",
                   fp.first, n, n - late.second, n, truth_fn.second, n);
  return c;
}

// 4 ---------------------------------------------------------------------------

chain::StateOp random_op(std::mt19937_64& rng) {
  const std::string key = "k" + std::to_string(rng() % 3);
  switch (rng() % 10) {
    case 0: return chain::FailOp{};
    case 1:
    case 2: return chain::DeleteOp{key};
    case 3:
    case 4:
    case 5: return chain::IncrementOp{key, static_cast<std::int64_t>(rng() % 9) - 4};
    default: return chain::SetOp{key, std::to_string(rng() % 5)};
  }
}

chain::Transaction random_tx(std::mt19937_64& rng, std::uint8_t sender, std::uint64_t nonce) {
  std::vector<chain::StateOp> ops;
  const int n = 1 + static_cast<int>(rng() % 3);
  for (int i = 0; i < n; ++i) ops.push_back(random_op(rng));
  return chain::Transaction::make(txforge::testing::addr(sender), nonce, txforge::testing::addr(0xcc), std::move(ops));
}

Check reversal_neutrality() {
  Check c;
  std::mt19937_64 rng(20240521);
  const int cases = 1200;
  for (int round = 0; round < cases && c.ok; ++round) {
    std::vector<chain::Transaction> prefix, suffix;
    std::map<std::uint8_t, std::uint64_t> nonces;
    auto next = [&](std::vector<chain::Transaction>& into) {
      const std::uint8_t sender = static_cast<std::uint8_t>(1 + rng() % 3);
      into.push_back(random_tx(rng, sender, nonces[sender]++));
    };
    const int np = static_cast<int>(rng() % 5), ns = static_cast<int>(rng() % 5);
    for (int i = 0; i < np; ++i) next(prefix);
    for (int i = 0; i < ns; ++i) next(suffix);
    const auto t = random_tx(rng, 9, 0);
    const bool reexecute_first = rng() % 2;

    auto run = [&](bool with_t) {
      chain::Chain ch;
      node::EventBus bus;
      lifecycle::Controller ctl(ch, bus);
      auto execute = [&](const chain::Transaction& tx) {
        ctl.track(tx);
        ctl.advance(tx.hash, S::kPending);
        ctl.advance(tx.hash, S::kExecuted);
      };
      for (const auto& tx : prefix) execute(tx);
      if (with_t) {
        execute(t);
        ctl.advance(t.hash, S::kReversed);
        if (reexecute_first) {
          ctl.advance(t.hash, S::kExecuted);
          ctl.advance(t.hash, S::kReversed);
        }
        ctl.advance(t.hash, S::kDropped);
      }
      for (const auto& tx : suffix) execute(tx);
      return snapshot::canonical_dump(json_of(ch.state()));
    };
    const std::string with = run(true);
    const std::string without = run(false);
    std::vector<chain::Transaction> all = prefix;
    all.insert(all.end(), suffix.begin(), suffix.end());
    const std::string folded = snapshot::canonical_dump(json_of(txforge::testing::refold(all)));
    if (with != without) c.fail(fmt("case %d: state differs from the never-submitted run", round));
    if (with != folded) c.fail(fmt("case %d: state differs from the re-fold oracle", round));
  }
  if (c.ok) c.detail = fmt("%d randomized cases bit-identical to the never-submitted baseline and the re-fold", cases);
  return c;
}

// 5 ---------------------------------------------------------------------------

/// A random walk on the lifecycle model from Created to a terminal state.
lifecycle::TraversalPlan random_plan(std::mt19937_64& rng) {
  lifecycle::TraversalPlan p{{S::kCreated, S::kPending}};
  int reversals = 0;
  for (;;) {
    const S at = p.states.back();
    S to;
    switch (at) {
      case S::kPending: to = rng() % 4 == 0 ? S::kDropped : S::kExecuted; break;
      case S::kExecuted: to = (reversals < 3 && rng() % 2) ? S::kReversed : S::kFinalized; break;
      case S::kReversed: to = rng() % 3 == 0 ? S::kDropped : S::kExecuted; break;
      default: return p;
    }
    if (to == S::kReversed) ++reversals;
    p.states.push_back(to);
  }
}

Check event_contract() {
  Check c;
  std::mt19937_64 rng(77);
  const int cases = 600;
  std::size_t dropped_from_pending = 0;
  for (int round = 0; round < cases && c.ok; ++round) {
    const std::uint64_t k = 1 + rng() % 8;
    chain::Chain ch;
    node::EventBus bus;
    lifecycle::Controller ctl(ch, bus, lifecycle::ControllerOptions{k});
    // Unrelated traffic first, so the contract is checked per transaction.
    const int others = static_cast<int>(rng() % 3);
    for (int i = 0; i < others; ++i) {
      auto o = random_tx(rng, 1, static_cast<std::uint64_t>(i));
      ctl.track(o);
      ctl.run_traversal(o.hash, random_plan(rng), {});
    }
    auto tx = random_tx(rng, 9, 0);
    ctl.track(tx);
    const auto plan = random_plan(rng);
    auto sub = bus.subscribe(node::EventFilter::by_tx(tx.hash), 4096);
    const auto trace = ctl.run_traversal(tx.hash, plan, {});

    // Expected events from the trace alone.
    std::vector<ChainEvent> want;
    std::optional<Hash256> last_block;
    for (std::size_t i = 1; i < trace.steps.size(); ++i) {
      const auto& st = trace.steps[i];
      switch (st.state) {
        case S::kPending:
          if (st.visit_index == 1) want.push_back(TransactionHashEvent{tx.hash});
          break;
        case S::kExecuted:
          want.push_back(ReceiptEvent{tx.hash, *st.block, !chain::payload_has_fail(tx.payload)});
          last_block = st.block;
          break;
        case S::kReversed: want.push_back(ChangedEvent{tx.hash, *last_block}); break;
        case S::kFinalized:
          for (std::uint64_t n = 1; n <= k; ++n) want.push_back(ConfirmationEvent{tx.hash, n});
          break;
        default: break;
      }
    }
    std::vector<ChainEvent> got;
    while (auto d = sub.try_next()) {
      if (const auto* se = std::get_if<node::SequencedEvent>(&*d)) {
        got.push_back(se->event);
      } else {
        c.fail("subscriber lagged");
      }
    }
    if (got != want) {
      std::string plan_text;
      for (S s : plan.states) plan_text += std::string(lifecycle::to_string(s)) + " ";
      c.fail(fmt("case %d (K=%llu, plan %s): %zu events, expected %zu", round, static_cast<unsigned long long>(k),
                 plan_text.c_str(), got.size(), want.size()));
    }
    if (plan.states.size() == 3 && plan.states[2] == S::kDropped) {
      ++dropped_from_pending;
      if (got.size() != 1 || kind_of(got[0]) != EventKind::kTransactionHash)
        c.fail("a transaction dropped from pending emitted more than one hash event");
    }
  }
  if (dropped_from_pending == 0) c.fail("no plan dropped from pending");
  if (c.ok)
    c.detail = fmt("%d random plans match the trace-to-event mapping; %zu dropped from pending emitted one hash event",
                   cases, dropped_from_pending);
  return c;
}

// 6 ---------------------------------------------------------------------------

Check calibration() {
  Check c;
  auto cfg = config::parse_yaml(R"(
mode: soak
seed: 1
confirmations: 6
wait_window_ms: 1000
clock: simulated
dapp: {strategy: passive, key_space: 0}
stochastic:
  ticks: 50000
  drop_probability: 0.001
  execution_probability: 0.5
  arrival_probability: 0.5
)");
  cfg.stochastic->reorg_probability = 1.0 / 24.43;
  const auto t0 = std::chrono::steady_clock::now();
  auto r = session::run_session(cfg);
  const double secs = seconds_since(t0);
  const double expected = 2047.0;
  const double lo = expected * 0.9, hi = expected * 1.1;
  if (r.reorgs < lo || r.reorgs > hi) c.fail(fmt("%llu reorgs, outside [%.0f, %.0f]", static_cast<unsigned long long>(r.reorgs), lo, hi));
  if (secs >= 10.0) c.fail(fmt("took %.2f s", secs));
  if (c.ok)
    c.detail = fmt("%llu reorgs in 50000 ticks (expected 2047 +- 10%%), %zu txs, %.2f s",
                   static_cast<unsigned long long>(r.reorgs), r.reports.size(), secs);
  return c;
}

// 7 ---------------------------------------------------------------------------

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

Check determinism() {
  Check c;
  std::size_t bytes = 0;
  for (const char* dapp : {"{strategy: polling, poll_interval_ms: 700}",
                           "{strategy: aggressive, bugs: {rollback_cleared_on_restart: true}}",
                           "{strategy: passive, mark_pending: true, bugs: {laggy_update_ms: 2500}}"}) {
    auto cfg = mock_session(dapp, 60, 99);
    cfg.repetitions = 2;
    std::string reports[2];
    for (int i = 0; i < 2; ++i) {
      const auto dir = scratch("determinism-" + std::to_string(i));
      session::write_outputs(session::run_session(cfg), dir);
      reports[i] = slurp(dir / "report.json");
    }
    if (reports[0].empty() || reports[0] != reports[1]) c.fail(std::string("reports differ for ") + dapp);
    bytes += reports[0].size();
  }
  if (c.ok) c.detail = fmt("3 configurations, report.json byte-identical across runs (%zu bytes)", bytes);
  return c;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Check()>>> criteria{
      {"oracle truth table", truth_table},
      {"detection matrix", detection_matrix},
      {"false positive and false negative mechanisms", fp_fn_mechanisms},
      {"reversal neutrality", reversal_neutrality},
      {"event contract", event_contract},
      {"stochastic calibration", calibration},
      {"determinism", determinism},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    Check c;
    try {
      c = run();
    } catch (const std::exception& e) {
      c.fail(std::string("exception: ") + e.what());
    }
    std::printf("%s %s: %s\n", c.ok ? "PASS" : "FAIL", name.c_str(), c.detail.c_str());
    std::fflush(stdout);
    failed += !c.ok;
  }
  return failed == 0 ? 0 : 1;
}
