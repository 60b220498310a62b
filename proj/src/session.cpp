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

#include "txforge/session.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>

#include "txforge/mock_dapp.hpp"
#include "txforge/node.hpp"
#include "txforge/protocol.hpp"
#include "txforge/wire.hpp"

namespace txforge::session {

using config::SessionConfig;
using config::SourceConfig;
using lifecycle::LifecycleState;
using S = LifecycleState;
using oracle::Outcome;
using oracle::TransactionReport;

namespace {

// Session log ------------------------------------------------------------------

class LogWriter {
 public:
  LogWriter(const std::optional<std::filesystem::path>& path, const SessionConfig& c) {
    if (!path) return;
    if (path->has_parent_path()) std::filesystem::create_directories(path->parent_path());
    out_.open(*path, std::ios::binary | std::ios::trunc);
    if (!out_) throw SessionError(SessionError::Kind::kConfig, "cannot write session log " + path->string());
    out_ << json{{"log_version", kLogVersion}, {"config", config::to_json(c)}, {"seed", c.seed}}.dump() << '\n';
  }

  bool enabled() const { return out_.is_open(); }

  void write(const json& record) {
    if (!out_.is_open()) return;
    out_ << record.dump() << '\n';
    ++count_;
  }

  void finish() {
    if (!out_.is_open()) return;
    out_ << json{{"type", "end"}, {"records", count_}}.dump() << '\n';
    out_.close();
  }

 private:
  std::ofstream out_;
  std::uint64_t count_ = 0;
};

json transition_record(std::size_t run, const lifecycle::TransitionRecord& r, std::optional<std::uint64_t> tick) {
  json j{{"type", "transition"},
         {"run", run},
         {"tx", r.tx_hash.to_hex()},
         {"from", lifecycle::to_string(r.from)},
         {"to", lifecycle::to_string(r.to)},
         {"visit", r.visit_index}};
  if (r.block) j["block"] = r.block->to_hex();
  if (tick) j["tick"] = *tick;
  return j;
}

bool matches(const json& logged, const json& fresh) {
  for (const char* k : {"tx", "from", "to", "visit"})
    if (logged.value(k, json()) != fresh.at(k)) return false;
  return logged.value("block", json()) == fresh.value("block", json());
}

json snapshot_record(std::size_t run, const snapshot::Snapshot& s, const std::string& tag) {
  return {{"type", "snapshot"}, {"run", run}, {"tag", tag}, {"snapshot", snapshot::to_json(s)}};
}

json failure_record(std::size_t run, const Hash256& tx, S state, std::uint32_t visit, const std::string& reason) {
  return {{"type", "capture_failure"}, {"run", run},          {"tx", tx.to_hex()},
          {"state", lifecycle::to_string(state)}, {"visit", visit}, {"reason", reason}};
}

// Wiring -----------------------------------------------------------------------

std::unique_ptr<Clock> make_clock(config::ClockKind k) {
  if (k == config::ClockKind::kWall) return std::make_unique<WallClock>();
  return std::make_unique<SimClock>();
}

std::unique_ptr<snapshot::StateSource> make_source(const SourceConfig& s, mock::MockDapp* mock) {
  switch (s.kind) {
    case SourceConfig::Kind::kInProcess:
      return std::make_unique<snapshot::InProcessSource>([mock] { return mock->state(); },
                                                         [mock](const std::string& k) { return mock->state_for(k); });
    case SourceConfig::Kind::kHttp:
      return std::make_unique<snapshot::HttpSource>(s.host, s.port, s.path, s.timeout_ms);
    case SourceConfig::Kind::kFile:
      return std::make_unique<snapshot::FileSource>(s.path);
  }
  return nullptr;
}

std::unique_ptr<snapshot::CompositeSource> build_source(const SessionConfig& c, mock::MockDapp* mock) {
  auto out = std::make_unique<snapshot::CompositeSource>();
  if (c.sources.empty()) {
    out->add("dapp", make_source(SourceConfig{}, mock));
  } else {
    for (const auto& s : c.sources) out->add(s.name, make_source(s, mock));
  }
  return out;
}

/// Node listeners configured for the session; stopped on destruction.
struct Servers {
  std::unique_ptr<wire::HttpApiServer> http;
  std::unique_ptr<wire::EventStreamServer> events;

  Servers(node::Node& node, const SessionConfig& c, const RunOptions& opt) {
    if (c.node_http) {
      http = std::make_unique<wire::HttpApiServer>(node);
      const int port = http->start(c.node_http->host, c.node_http->port);
      if (opt.progress) opt.progress("node api listening on " + c.node_http->host + ":" + std::to_string(port));
    }
    if (c.node_events) {
      events = std::make_unique<wire::EventStreamServer>(node);
      const int port = events->start(c.node_events->host, c.node_events->port);
      if (opt.progress) opt.progress("event stream listening on " + c.node_events->host + ":" + std::to_string(port));
    }
  }
  ~Servers() {
    if (http) http->stop();
    if (events) events->stop();
  }
};

void check_source(snapshot::StateSource& source) {
  try {
    (void)source.fetch();
  } catch (const snapshot::CaptureError& e) {
    throw SessionError(SessionError::Kind::kSource, "snapshot source " + source.describe() + " unusable: " + e.what());
  }
}

std::uint64_t run_seed(const SessionConfig& c, std::size_t run) { return c.seed + run; }
/// The transaction driver draws from its own stream so arrivals never shift
/// the chain's random choices.
std::uint64_t driver_seed(std::uint64_t seed) { return seed ^ 0x9e3779b97f4a7c15ULL; }

/// Reports keyed by global submission index.
struct Accumulator {
  std::map<std::size_t, std::pair<std::size_t, TransactionReport>> reports;
  std::size_t next_index = 0;
  std::uint64_t reorgs = 0;
  std::set<std::string> declared;
};

// Traverse mode ----------------------------------------------------------------

void traverse_run(const SessionConfig& c, std::size_t run, LogWriter& log, const RunOptions& opt, Accumulator& acc) {
  node::Node node(node::NodeOptions{c.confirmations, 1024});
  auto clock = make_clock(c.clock);
  std::unique_ptr<mock::MockDapp> mock;
  if (c.dapp) mock = std::make_unique<mock::MockDapp>(node, *clock, *c.dapp);
  auto source = build_source(c, mock.get());
  check_source(*source);
  // Queue before listening so no early submission skips its traversal.
  node.set_submission_mode(node::SubmissionMode::kQueued);
  Servers servers(node, c, opt);

  snapshot::SnapshotCollector collector(*clock, *source, c.rule_set(), c.wait_window_ms);
  lifecycle::Rng driver(driver_seed(run_seed(c, run)));
  const oracle::OracleOptions oo{c.strict_pool_visits};
  log.write({{"type", "run"}, {"run", run}, {"seed", run_seed(c, run)}});

  std::size_t done = 0;
  auto last_activity = std::chrono::steady_clock::now();
  for (;;) {
    if (opt.stop && opt.stop()) break;
    std::optional<Hash256> h;
    if (mock) {
      if (done >= c.transactions) break;
      h = node.rpc_submit_transaction(mock->next_transaction(driver));
      (void)node.take_queued();
    } else {
      if (!opt.serve && c.transactions > 0 && done >= c.transactions) break;
      h = node.take_queued(std::chrono::milliseconds(200));
      if (!h) {
        const auto idle = std::chrono::steady_clock::now() - last_activity;
        if (!opt.serve && idle >= std::chrono::milliseconds(c.idle_timeout_ms)) break;
        continue;
      }
      last_activity = std::chrono::steady_clock::now();
    }

    std::unique_lock lock(node.mutex());
    const chain::Transaction tx = node.controller().transaction(*h);
    const std::string tag = mock ? mock->intent(*h)->tag : tx.tag;
    const std::size_t index = acc.next_index++;
    log.write({{"type", "tx"}, {"run", run}, {"index", index}, {"tx", protocol::to_json(tx)}});
    const std::size_t first = node.controller().transitions().size();

    lifecycle::StageHooks hooks;
    hooks.on_stage = [&](const Hash256& id, S state, std::uint32_t visit) {
      lock.unlock();
      struct Relock {
        std::unique_lock<std::recursive_mutex>& l;
        ~Relock() { l.lock(); }
      } relock{lock};
      if (mock) mock->pump();
      try {
        log.write(snapshot_record(run, collector.capture(id, state, visit, tag), tag));
      } catch (const snapshot::CaptureError& e) {
        log.write(failure_record(run, id, state, visit, e.what()));
        if (opt.progress) opt.progress("capture failed at " + std::string(lifecycle::to_string(state)) + ": " + e.what());
      }
      if (mock && state == S::kExecuted && visit == 1) {
        mock->restart();
        log.write({{"type", "restart"}, {"run", run}, {"tx", id.to_hex()}});
      }
    };
    const auto trace = node.controller().run_traversal(*h, lifecycle::TraversalPlan::bug_exposing(), hooks);
    const auto& all = node.controller().transitions();
    for (std::size_t i = first; i < all.size(); ++i)
      if (all[i].tx_hash == *h) log.write(transition_record(run, all[i], std::nullopt));
    lock.unlock();

    collector.set_complete(*h, trace.complete);
    acc.reports.emplace(index, std::make_pair(run, oracle::analyze(*collector.trace(*h), oo)));
    collector.forget(*h);
    ++done;
  }
  if (mock) mock->pump();
  acc.reorgs += node.controller().reorg_count();
  log.write({{"type", "run_end"}, {"run", run}, {"reorgs", node.controller().reorg_count()}});
}

// Soak mode --------------------------------------------------------------------

void soak_run(const SessionConfig& c, std::size_t run, LogWriter& log, const RunOptions& opt, Accumulator& acc) {
  node::Node node(node::NodeOptions{c.confirmations, 1024});
  auto clock = make_clock(c.clock);
  mock::MockDapp mock(node, *clock, *c.dapp);
  auto source = build_source(c, &mock);
  check_source(*source);
  Servers servers(node, c, opt);

  snapshot::SnapshotCollector collector(*clock, *source, c.rule_set(), c.wait_window_ms);
  const std::uint64_t seed = run_seed(c, run);
  lifecycle::Rng chain_rng(seed);
  lifecycle::Rng driver(driver_seed(seed));
  lifecycle::StochasticProfile profile = c.profile();
  profile.rng_seed = seed;
  const oracle::OracleOptions oo{c.strict_pool_visits};
  log.write({{"type", "run"}, {"run", run}, {"seed", seed}});

  struct Open {
    std::size_t index;
    std::string tag;
    std::string key;
  };
  std::map<Hash256, Open> open;

  auto finish = [&](const Hash256& h) {
    auto it = open.find(h);
    acc.reports.emplace(it->second.index, std::make_pair(run, oracle::analyze(*collector.trace(h), oo)));
    collector.forget(h);
    open.erase(it);
  };

  auto read = [&](const Hash256& h, const std::string& scope, S state, std::uint32_t visit,
                  const std::string& tag) -> std::optional<snapshot::Document> {
    try {
      return collector.read_now(scope);
    } catch (const snapshot::CaptureError& e) {
      collector.record_failure(h, state, visit, e.what(), tag);
      log.write(failure_record(run, h, state, visit, e.what()));
      return std::nullopt;
    }
  };

  std::uint64_t tick = 0;
  for (; tick < c.stochastic->ticks; ++tick) {
    if (opt.stop && opt.stop()) break;
    std::unique_lock lock(node.mutex());
    auto recs = node.controller().stochastic_step(profile, chain_rng);

    if (driver.chance(c.stochastic->arrival_probability)) {
      auto tx = mock.next_transaction(driver);
      const mock::Intent& in = *mock.intent(tx.hash);
      const std::size_t index = acc.next_index++;
      open[tx.hash] = {index, in.tag, in.key};
      log.write({{"type", "tx"}, {"run", run}, {"index", index}, {"tick", tick}, {"tx", protocol::to_json(tx)}});
      if (auto doc = read(tx.hash, in.key, S::kCreated, 1, in.tag))
        log.write(snapshot_record(run, collector.store_document(tx.hash, S::kCreated, 1, *doc, in.tag), in.tag));
      node.controller().track(tx);
      recs.push_back(node.controller().advance(tx.hash, S::kPending));
    }
    lock.unlock();

    mock.pump();
    collector.sleep_window();
    std::map<std::string, std::optional<snapshot::Document>> reads;
    for (const auto& r : recs) {
      auto it = open.find(r.tx_hash);
      if (it == open.end()) continue;
      log.write(transition_record(run, r, tick));
      const Open& o = it->second;
      auto cached = reads.find(o.key);
      if (cached == reads.end()) cached = reads.emplace(o.key, read(r.tx_hash, o.key, r.to, r.visit_index, o.tag)).first;
      if (cached->second)
        log.write(snapshot_record(run, collector.store_document(r.tx_hash, r.to, r.visit_index, *cached->second, o.tag), o.tag));
      if (lifecycle::is_terminal(r.to)) {
        collector.set_complete(r.tx_hash, true);
        finish(r.tx_hash);
      }
    }
    if (opt.progress && (tick + 1) % 10000 == 0)
      opt.progress("tick " + std::to_string(tick + 1) + ", reorgs " + std::to_string(node.controller().reorg_count()));
  }
  // Transactions still in flight are analyzed as they stand.
  while (!open.empty()) finish(open.begin()->first);
  acc.reorgs += node.controller().reorg_count();
  log.write({{"type", "run_end"}, {"run", run}, {"ticks", tick}, {"reorgs", node.controller().reorg_count()}});
}

std::vector<std::string> declared_tags(const SessionConfig& c) {
  if (c.dapp) return mock::MockDapp::declared_tags();
  return c.declared_tags;
}

SessionResult finish_result(const SessionConfig& c, Accumulator& acc) {
  SessionResult out;
  out.config = c;
  for (auto& [_, entry] : acc.reports) {
    out.runs.push_back(entry.first);
    out.reports.push_back(std::move(entry.second));
  }
  out.reorgs = acc.reorgs;
  out.report = build_report(c, out.reports, out.runs, declared_tags(c), out.reorgs);
  return out;
}

}  // namespace

bool SessionResult::has_violations() const {
  for (const auto& r : reports)
    if (!r.bugs().empty()) return true;
  return false;
}

SessionResult run_session(const SessionConfig& c, const RunOptions& opt) {
  config::validate(c);
  if (c.mode == config::Mode::kReplay)
    throw SessionError(SessionError::Kind::kConfig, "replay mode needs a session log (txforge replay --log)");
  LogWriter log(opt.log_path, c);
  Accumulator acc;
  for (std::size_t run = 0; run < c.repetitions; ++run) {
    if (opt.stop && opt.stop()) break;
    if (c.mode == config::Mode::kSoak) {
      soak_run(c, run, log, opt, acc);
    } else {
      traverse_run(c, run, log, opt, acc);
    }
  }
  log.finish();
  return finish_result(c, acc);
}

// Replay -----------------------------------------------------------------------

SessionLog read_log(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SessionError(SessionError::Kind::kCorrupt, "cannot read session log " + path.string());
  SessionLog log;
  std::string line;
  std::size_t lineno = 0;
  bool ended = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (ended) throw SessionError(SessionError::Kind::kCorrupt, "records after the end marker at line " + std::to_string(lineno));
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception&) {
      throw SessionError(SessionError::Kind::kCorrupt, "unparseable record at line " + std::to_string(lineno));
    }
    if (lineno == 1) {
      if (!j.is_object() || !j.contains("log_version"))
        throw SessionError(SessionError::Kind::kCorrupt, "missing log header");
      if (j.at("log_version") != kLogVersion)
        throw SessionError(SessionError::Kind::kVersion, "log version " + j.at("log_version").dump() +
                                                             " is not supported (expected " + kLogVersion + ")");
      log.config = j.at("config");
      log.seed = j.at("seed").get<std::uint64_t>();
      continue;
    }
    if (!j.is_object() || !j.contains("type"))
      throw SessionError(SessionError::Kind::kCorrupt, "record without a type at line " + std::to_string(lineno));
    if (j.at("type") == "end") {
      if (j.value("records", std::uint64_t{0}) != log.records.size())
        throw SessionError(SessionError::Kind::kCorrupt, "record count mismatch: log is truncated or edited");
      ended = true;
      continue;
    }
    log.records.push_back(std::move(j));
  }
  if (lineno == 0) throw SessionError(SessionError::Kind::kCorrupt, "empty session log");
  if (!ended) throw SessionError(SessionError::Kind::kCorrupt, "session log is truncated (no end marker)");
  return log;
}

namespace {

struct LoggedTx {
  std::size_t index = 0;
  std::size_t run = 0;
  std::optional<std::uint64_t> tick;
  chain::Transaction tx;
  std::vector<json> transitions;
  snapshot::TransactionSnapshotTrace trace;
};

[[noreturn]] void diverged(const std::string& what) {
  throw SessionError(SessionError::Kind::kDiverged, "replay diverged: " + what);
}

S state_named(const json& j) {
  auto s = lifecycle::state_from_string(j.get<std::string>());
  if (!s) throw SessionError(SessionError::Kind::kCorrupt, "unknown lifecycle state " + j.dump());
  return *s;
}

}  // namespace

SessionResult replay(const std::filesystem::path& log_path, const RunOptions& opt) {
  SessionLog log = read_log(log_path);
  SessionConfig c;
  try {
    c = config::from_json(log.config);
  } catch (const config::ConfigError& e) {
    throw SessionError(SessionError::Kind::kCorrupt, std::string("logged config: ") + e.what());
  }
  const oracle::OracleOptions oo{c.strict_pool_visits};

  // Group the records per run and per transaction.
  std::map<std::size_t, std::vector<LoggedTx>> runs;
  std::map<std::size_t, json> run_ends;
  std::map<std::size_t, std::vector<json>> run_transitions;  // log order
  std::map<Hash256, std::pair<std::size_t, std::size_t>> where;  // tx -> (run, position)
  try {
    for (const auto& r : log.records) {
      const std::string type = r.at("type");
      const std::size_t run = r.at("run").get<std::size_t>();
      if (type == "run") {
        runs[run];
      } else if (type == "run_end") {
        run_ends[run] = r;
      } else if (type == "tx") {
        LoggedTx t;
        t.index = r.at("index").get<std::size_t>();
        t.run = run;
        if (r.contains("tick")) t.tick = r.at("tick").get<std::uint64_t>();
        t.tx = protocol::transaction_from_json(r.at("tx"));
        t.trace.tx_hash = t.tx.hash;
        auto& list = runs[run];
        where[t.tx.hash] = {run, list.size()};
        list.push_back(std::move(t));
      } else if (type == "transition" || type == "snapshot" || type == "capture_failure") {
        const json& ref = type == "snapshot" ? r.at("snapshot").at("tx_hash") : r.at("tx");
        auto w = where.find(Hash256::from_hex(ref.get<std::string>()));
        if (w == where.end()) throw SessionError(SessionError::Kind::kCorrupt, type + " for an unlogged transaction");
        LoggedTx& t = runs[w->second.first][w->second.second];
        if (type == "transition") {
          t.transitions.push_back(r);
          run_transitions[run].push_back(r);
        } else if (type == "snapshot") {
          snapshot::Snapshot s = snapshot::snapshot_from_json(r.at("snapshot"));
          t.trace.tag = r.value("tag", std::string());
          t.trace.snapshots[{s.state, s.visit}] = std::move(s);
        } else {
          t.trace.failures[{state_named(r.at("state")), r.at("visit").get<std::uint32_t>()}] = r.at("reason");
        }
      } else if (type != "restart") {
        throw SessionError(SessionError::Kind::kCorrupt, "unknown record type '" + type + "'");
      }
    }
  } catch (const SessionError&) {
    throw;
  } catch (const std::exception& e) {
    throw SessionError(SessionError::Kind::kCorrupt, std::string("malformed record: ") + e.what());
  }

  Accumulator acc;
  for (auto& [run, txs] : runs) {
    if (opt.stop && opt.stop()) break;
    node::Node node(node::NodeOptions{c.confirmations, 1024});
    auto& ctl = node.controller();
    std::lock_guard lock(node.mutex());

    if (c.mode == config::Mode::kSoak) {
      auto end = run_ends.find(run);
      if (end == run_ends.end()) throw SessionError(SessionError::Kind::kCorrupt, "run without an end record");
      const std::uint64_t seed = run_seed(c, run);
      lifecycle::Rng chain_rng(seed);
      lifecycle::StochasticProfile profile = c.profile();
      profile.rng_seed = seed;
      std::map<std::uint64_t, std::vector<std::size_t>> arrivals;
      std::map<std::uint64_t, std::vector<json>> expected;
      for (std::size_t i = 0; i < txs.size(); ++i) {
        if (!txs[i].tick) throw SessionError(SessionError::Kind::kCorrupt, "soak tx without a tick");
        arrivals[*txs[i].tick].push_back(i);
      }
      for (const auto& tr : run_transitions[run]) expected[tr.at("tick").get<std::uint64_t>()].push_back(tr);
      const std::uint64_t ticks = end->second.at("ticks").get<std::uint64_t>();
      for (std::uint64_t tick = 0; tick < ticks; ++tick) {
        auto recs = ctl.stochastic_step(profile, chain_rng);
        for (std::size_t i : arrivals[tick]) {
          ctl.track(txs[i].tx);
          recs.push_back(ctl.advance(txs[i].tx.hash, S::kPending));
        }
        std::vector<json> fresh;
        for (const auto& r : recs)
          if (where.contains(r.tx_hash)) fresh.push_back(transition_record(run, r, tick));
        auto& want = expected[tick];
        if (fresh.size() != want.size()) diverged("tick " + std::to_string(tick) + " transition count");
        for (std::size_t i = 0; i < fresh.size(); ++i)
          if (!matches(want[i], fresh[i])) diverged("tick " + std::to_string(tick) + ": " + fresh[i].dump());
      }
    } else {
      for (auto& t : txs) {
        ctl.track(t.tx);
        lifecycle::TraversalPlan plan{{S::kCreated}};
        for (const auto& tr : t.transitions) plan.states.push_back(state_named(tr.at("to")));
        if (plan.states.size() > 1) {
          const std::size_t first = ctl.transitions().size();
          ctl.run_traversal(t.tx.hash, plan, {});
          const auto& all = ctl.transitions();
          std::vector<json> fresh;
          for (std::size_t i = first; i < all.size(); ++i)
            if (all[i].tx_hash == t.tx.hash) fresh.push_back(transition_record(run, all[i], std::nullopt));
          if (fresh.size() != t.transitions.size()) diverged("transition count for " + t.tx.hash.to_hex());
          for (std::size_t i = 0; i < fresh.size(); ++i)
            if (!matches(t.transitions[i], fresh[i])) diverged(fresh[i].dump());
        }
      }
    }
    for (auto& t : txs) {
      if (t.trace.tag.empty()) t.trace.tag = t.tx.tag;
      acc.reports.emplace(t.index, std::make_pair(run, oracle::analyze(t.trace, oo)));
    }
    acc.reorgs += ctl.reorg_count();
  }
  return finish_result(c, acc);
}

// Reports ----------------------------------------------------------------------

json build_report(const SessionConfig& c, const std::vector<TransactionReport>& reports,
                  const std::vector<std::size_t>& runs, const std::vector<std::string>& declared,
                  std::uint64_t reorgs) {
  std::size_t per[2][3] = {};
  std::size_t inconclusive = 0;
  std::set<std::string> exercised;
  json txs = json::array();
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    ++per[0][static_cast<int>(r.assertion1.outcome)];
    ++per[1][static_cast<int>(r.assertion2.outcome)];
    if (r.assertion1.outcome == Outcome::kInconclusive || r.assertion2.outcome == Outcome::kInconclusive)
      ++inconclusive;
    if (!r.tag.empty()) exercised.insert(r.tag);
    json j = oracle::to_json(r);
    j["run"] = i < runs.size() ? runs[i] : 0;
    txs.push_back(std::move(j));
  }
  auto outcome_counts = [&](int a) {
    return json{{"pass", per[a][0]}, {"violation", per[a][1]}, {"inconclusive", per[a][2]}};
  };

  const std::set<std::string> decl(declared.begin(), declared.end());
  std::size_t hit = 0;
  json undeclared = json::array();
  for (const auto& t : exercised) {
    if (decl.contains(t)) {
      ++hit;
    } else {
      undeclared.push_back(t);
    }
  }
  json coverage{{"declared", json(std::vector<std::string>(decl.begin(), decl.end()))},
                {"exercised", json(std::vector<std::string>(exercised.begin(), exercised.end()))},
                {"undeclared", undeclared},
                {"covered", hit},
                {"ratio", decl.empty() ? json(nullptr) : json(static_cast<double>(hit) / decl.size())}};

  json groups = json::array();
  for (const auto& g : oracle::group_reports(reports)) groups.push_back(oracle::to_json(g));

  return {{"report_version", kReportVersion},
          {"mode", config::to_string(c.mode)},
          {"seed", c.seed},
          {"runs", c.repetitions},
          {"confirmations", c.confirmations},
          {"wait_window_ms", c.wait_window_ms},
          {"rule_set", c.rule_set().id()},
          {"counts",
           {{"txs_total", reports.size()},
            {"assertion1", outcome_counts(0)},
            {"assertion2", outcome_counts(1)},
            {"assertion1_violations", per[0][1]},
            {"assertion2_violations", per[1][1]},
            {"inconclusive", inconclusive}}},
          {"coverage", std::move(coverage)},
          {"reorgs", reorgs},
          {"groups", std::move(groups)},
          {"transactions", std::move(txs)}};
}

std::string render_summary(const json& report) {
  std::ostringstream out;
  char line[256];
  const json& counts = report.at("counts");
  out << "txforge " << report.value("mode", std::string("?")) << " session, seed " << report.value("seed", 0)
      << ", " << report.value("runs", 1) << " run(s)\n";
  out << "transactions: " << counts.at("txs_total").get<std::size_t>() << "\n";
  for (const char* a : {"assertion1", "assertion2"}) {
    const json& c = counts.at(a);
    std::snprintf(line, sizeof line, "%s: %zu pass, %zu violation, %zu inconclusive\n", a,
                  c.at("pass").get<std::size_t>(), c.at("violation").get<std::size_t>(),
                  c.at("inconclusive").get<std::size_t>());
    out << line;
  }
  out << "reorgs: " << report.value("reorgs", 0) << "\n";
  const json& cov = report.at("coverage");
  out << "coverage: " << cov.at("covered").get<std::size_t>() << "/" << cov.at("declared").size()
      << " declared tags exercised";
  if (!cov.at("exercised").empty()) {
    out << " (";
    bool first = true;
    for (const auto& t : cov.at("exercised")) {
      out << (first ? "" : ", ") << t.get<std::string>();
      first = false;
    }
    out << ")";
  }
  out << "\n";

  const json& groups = report.at("groups");
  out << "\nissues: " << groups.size() << "\n";
  for (const auto& g : groups) {
    const json& rep = g.at("representative");
    out << "  " << g.at("tag").get<std::string>() << "/" << g.at("bug").get<std::string>() << ": "
        << g.at("count").get<std::size_t>() << " transaction(s)\n";
    out << "    e.g. " << g.at("transactions").at(0).get<std::string>().substr(0, 18) << " "
        << rep.at("from").get<std::string>() << " -> " << rep.at("to").get<std::string>();
    std::size_t shown = 0;
    for (const auto& d : rep.at("diff")) {
      if (shown++ == 3) {
        out << " ...";
        break;
      }
      out << (shown == 1 ? ": " : ", ") << d.at("op").get<std::string>() << " " << d.at("path").get<std::string>();
    }
    out << "\n";
  }

  out << "\n";
  std::snprintf(line, sizeof line, "%-4s %-14s %-10s %-13s %-13s %s\n", "run", "tx", "tag", "assertion1",
                "assertion2", "bugs");
  out << line;
  for (const auto& t : report.at("transactions")) {
    std::string bugs;
    for (const auto& b : t.at("bugs")) bugs += (bugs.empty() ? "" : ",") + b.get<std::string>();
    std::string tag = t.at("tag").get<std::string>();
    if (tag.empty()) tag = "untagged";
    std::snprintf(line, sizeof line, "%-4zu %-14s %-10s %-13s %-13s %s\n", t.value("run", std::size_t{0}),
                  t.at("tx_hash").get<std::string>().substr(0, 12).c_str(), tag.substr(0, 10).c_str(),
                  t.at("assertion1").at("outcome").get<std::string>().c_str(),
                  t.at("assertion2").at("outcome").get<std::string>().c_str(), bugs.empty() ? "-" : bugs.c_str());
    out << line;
  }
  return out.str();
}

void write_outputs(const SessionResult& result, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream f(dir / "report.json", std::ios::binary | std::ios::trunc);
    f << result.report.dump(2) << '\n';
    if (!f) throw SessionError(SessionError::Kind::kConfig, "cannot write " + (dir / "report.json").string());
  }
  std::ofstream f(dir / "summary.txt", std::ios::binary | std::ios::trunc);
  f << render_summary(result.report);
  if (!f) throw SessionError(SessionError::Kind::kConfig, "cannot write " + (dir / "summary.txt").string());
}

}  // namespace txforge::session
