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

#include "txforge/oracle.hpp"

#include <algorithm>
#include <map>
#include <sstream>

namespace txforge::oracle {

using S = LifecycleState;
using snapshot::Snapshot;

const char* to_string(Outcome o) {
  switch (o) {
    case Outcome::kPass: return "pass";
    case Outcome::kViolation: return "violation";
    case Outcome::kInconclusive: return "inconclusive";
  }
  return "?";
}

const char* to_string(BugType b) { return b == BugType::kTypeI ? "type1" : "type2"; }

std::string render(const StageRef& s) {
  return std::string(lifecycle::to_string(s.state)) + "#" + std::to_string(s.visit);
}

namespace {

std::string missing(StageRef s) { return "no snapshot at " + render(s); }

/// nullptr with `why` set when any snapshot is absent or the rule sets differ.
bool gather(const TransactionSnapshotTrace& trace, const std::vector<StageRef>& refs,
            std::vector<const Snapshot*>& out, std::string& why) {
  out.clear();
  for (const auto& r : refs) {
    const Snapshot* s = trace.find(r.state, r.visit);
    if (!s) {
      why = missing(r);
      if (auto f = trace.failures.find({r.state, r.visit}); f != trace.failures.end())
        why += " (" + f->second + ")";
      return false;
    }
    out.push_back(s);
  }
  for (std::size_t i = 1; i < out.size(); ++i) {
    if (out[i]->rule_set_id != out[0]->rule_set_id) {
      why = "incomparable rule sets at " + render(refs[0]) + " and " + render(refs[i]);
      return false;
    }
  }
  return true;
}

bool same(const Snapshot* a, const Snapshot* b) {
  return snapshot::documents_equal(a->document, b->document);
}

}  // namespace

Verdict check_assertion1(const TransactionSnapshotTrace& trace) {
  const StageRef c{S::kCreated, 1}, p{S::kPending, 1}, f{S::kFinalized, 1};
  std::vector<const Snapshot*> snaps;
  std::string why;
  if (!gather(trace, {c, p, f}, snaps, why)) return Verdict::inconclusive(why);
  if (same(snaps[0], snaps[2])) return Verdict::pass("no off-chain change between created and finalized");
  if (!same(snaps[1], snaps[2])) return Verdict::pass();
  return Verdict::violation({c, p, snapshot::diff(snaps[0]->document, snaps[1]->document)});
}

Verdict check_assertion2(const TransactionSnapshotTrace& trace, const OracleOptions& opts) {
  const StageRef p{S::kPending, 1}, r{S::kReversed, 1};
  std::vector<const Snapshot*> snaps;
  std::string why;
  if (!gather(trace, {p, r}, snaps, why)) return Verdict::inconclusive(why);
  if (!same(snaps[0], snaps[1]))
    return Verdict::violation({p, r, snapshot::diff(snaps[0]->document, snaps[1]->document)});
  if (opts.strict_pool_visits) {
    for (S state : {S::kPending, S::kReversed}) {
      for (const Snapshot* s : trace.visits(state)) {
        const StageRef ref{state, s->visit};
        if (ref == p) continue;
        if (s->rule_set_id != snaps[0]->rule_set_id)
          return Verdict::inconclusive("incomparable rule sets at " + render(p) + " and " + render(ref));
        if (!same(snaps[0], s)) return Verdict::violation({p, ref, snapshot::diff(snaps[0]->document, s->document)});
      }
    }
  }
  return Verdict::pass();
}

std::vector<BugType> TransactionReport::bugs() const {
  std::vector<BugType> out;
  if (assertion1.outcome == Outcome::kViolation) out.push_back(BugType::kTypeI);
  if (assertion2.outcome == Outcome::kViolation) out.push_back(BugType::kTypeII);
  return out;
}

namespace {

std::string changed_paths(const std::vector<snapshot::DiffEntry>& d) {
  std::string out;
  for (std::size_t i = 0; i < d.size() && i < 4; ++i) {
    if (i) out += ", ";
    out += snapshot::render_path(d[i].path);
  }
  if (d.size() > 4) out += ", ... (" + std::to_string(d.size()) + " changes)";
  return out.empty() ? "(root)" : out;
}

}  // namespace

TransactionReport analyze(const TransactionSnapshotTrace& trace, const OracleOptions& opts) {
  TransactionReport r;
  r.tx_hash = trace.tx_hash;
  r.tag = trace.tag;
  r.assertion1 = check_assertion1(trace);
  r.assertion2 = check_assertion2(trace, opts);
  for (const auto& [stage, reason] : trace.failures)
    r.capture_failures.push_back(render({stage.first, stage.second}) + ": " + reason);

  auto& n = r.narrative;
  switch (r.assertion1.outcome) {
    case Outcome::kViolation:
      n.push_back("type1: the pending view already equals the finalized view; premature update at " +
                  changed_paths(r.assertion1.evidence->diff));
      break;
    case Outcome::kInconclusive:
      n.push_back("assertion1 inconclusive: " + r.assertion1.reason);
      break;
    case Outcome::kPass:
      n.push_back(r.assertion1.reason.empty() ? "assertion1 holds" : "assertion1 holds vacuously: " + r.assertion1.reason);
      break;
  }
  switch (r.assertion2.outcome) {
    case Outcome::kViolation:
      n.push_back("type2: state after reversal differs from the pending view (" +
                  render(r.assertion2.evidence->to) + ") at " + changed_paths(r.assertion2.evidence->diff));
      break;
    case Outcome::kInconclusive:
      n.push_back("assertion2 inconclusive: " + r.assertion2.reason);
      break;
    case Outcome::kPass:
      n.push_back("assertion2 holds");
      break;
  }
  return r;
}

std::vector<BugReport> bug_reports(const TransactionReport& r) {
  std::vector<BugReport> out;
  if (r.assertion1.outcome == Outcome::kViolation)
    out.push_back({BugType::kTypeI, r.tx_hash, r.tag, 1, *r.assertion1.evidence, r.narrative.at(0)});
  if (r.assertion2.outcome == Outcome::kViolation)
    out.push_back({BugType::kTypeII, r.tx_hash, r.tag, 2, *r.assertion2.evidence, r.narrative.at(1)});
  return out;
}

std::vector<ReportGroup> group_reports(const std::vector<TransactionReport>& reports) {
  // Repeated runs may submit the same transaction again; each counts.
  std::map<std::pair<std::string, BugType>, std::vector<std::pair<Hash256, const Evidence*>>> groups;
  for (const auto& r : reports) {
    const std::string tag = r.tag.empty() ? "untagged" : r.tag;
    if (r.assertion1.outcome == Outcome::kViolation)
      groups[{tag, BugType::kTypeI}].emplace_back(r.tx_hash, &*r.assertion1.evidence);
    if (r.assertion2.outcome == Outcome::kViolation)
      groups[{tag, BugType::kTypeII}].emplace_back(r.tx_hash, &*r.assertion2.evidence);
  }
  std::vector<ReportGroup> out;
  for (auto& [key, members] : groups) {
    std::stable_sort(members.begin(), members.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    ReportGroup g{key.first, key.second, {}, *members.front().second};
    for (const auto& [h, _] : members) g.transactions.push_back(h);
    out.push_back(std::move(g));
  }
  return out;
}

json to_json(const Evidence& e) {
  return {{"from", render(e.from)}, {"to", render(e.to)}, {"diff", snapshot::diff_to_json(e.diff)}};
}

json to_json(const Verdict& v) {
  json j{{"outcome", to_string(v.outcome)}};
  if (!v.reason.empty()) j["reason"] = v.reason;
  if (v.evidence) j["evidence"] = to_json(*v.evidence);
  return j;
}

json to_json(const BugReport& b) {
  return {{"bug", to_string(b.bug)},
          {"tx_hash", b.tx_hash.to_hex()},
          {"tag", b.tag},
          {"violated_assertion", b.violated_assertion},
          {"evidence", to_json(b.evidence)},
          {"narrative", b.narrative}};
}

json to_json(const TransactionReport& r) {
  json bugs = json::array();
  for (BugType b : r.bugs()) bugs.push_back(to_string(b));
  json j{{"tx_hash", r.tx_hash.to_hex()},
         {"tag", r.tag},
         {"assertion1", to_json(r.assertion1)},
         {"assertion2", to_json(r.assertion2)},
         {"bugs", std::move(bugs)},
         {"narrative", r.narrative}};
  if (!r.capture_failures.empty()) j["capture_failures"] = r.capture_failures;
  return j;
}

json to_json(const ReportGroup& g) {
  json txs = json::array();
  for (const auto& h : g.transactions) txs.push_back(h.to_hex());
  return {{"tag", g.tag},
          {"bug", to_string(g.bug)},
          {"count", g.transactions.size()},
          {"representative", to_json(g.representative)},
          {"transactions", std::move(txs)}};
}

std::string summary_table(const std::vector<TransactionReport>& reports) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof line, "%-14s %-10s %-13s %-13s %s\n", "tx", "tag", "assertion1", "assertion2", "bugs");
  out << line;
  std::size_t counts[2][3] = {};
  for (const auto& r : reports) {
    std::string bugs;
    for (BugType b : r.bugs()) bugs += (bugs.empty() ? "" : ",") + std::string(to_string(b));
    std::snprintf(line, sizeof line, "%-14s %-10s %-13s %-13s %s\n", r.tx_hash.to_hex().substr(0, 12).c_str(),
                  (r.tag.empty() ? "untagged" : r.tag).substr(0, 10).c_str(), to_string(r.assertion1.outcome),
                  to_string(r.assertion2.outcome), bugs.empty() ? "-" : bugs.c_str());
    out << line;
    ++counts[0][static_cast<int>(r.assertion1.outcome)];
    ++counts[1][static_cast<int>(r.assertion2.outcome)];
  }
  out << "\n";
  for (int a = 0; a < 2; ++a) {
    std::snprintf(line, sizeof line, "assertion%d: %zu pass, %zu violation, %zu inconclusive\n", a + 1, counts[a][0],
                  counts[a][1], counts[a][2]);
    out << line;
  }
  for (const auto& g : group_reports(reports)) {
    std::snprintf(line, sizeof line, "group %s/%s: %zu\n", g.tag.c_str(), to_string(g.bug), g.transactions.size());
    out << line;
  }
  return out.str();
}

}  // namespace txforge::oracle
