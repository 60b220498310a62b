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

#include <optional>
#include <string>
#include <vector>

#include "txforge/snapshot.hpp"

namespace txforge::oracle {

using json = nlohmann::json;
using lifecycle::LifecycleState;
using snapshot::TransactionSnapshotTrace;

enum class Outcome { kPass, kViolation, kInconclusive };
const char* to_string(Outcome o);

/// Type-I: the DApp treated a pending transaction as final.
/// Type-II: the DApp kept a reversed transaction's effect.
enum class BugType { kTypeI, kTypeII };
const char* to_string(BugType b);

struct StageRef {
  LifecycleState state = LifecycleState::kCreated;
  std::uint32_t visit = 1;
  bool operator==(const StageRef&) const = default;
};

std::string render(const StageRef& s);  // e.g. "pending#1"

struct Evidence {
  StageRef from;
  StageRef to;
  std::vector<snapshot::DiffEntry> diff;
};

struct Verdict {
  Outcome outcome = Outcome::kInconclusive;
  std::optional<Evidence> evidence;  // violations only
  std::string reason;                // inconclusive and vacuous passes

  static Verdict pass(std::string note = {}) { return {Outcome::kPass, std::nullopt, std::move(note)}; }
  static Verdict inconclusive(std::string why) { return {Outcome::kInconclusive, std::nullopt, std::move(why)}; }
  static Verdict violation(Evidence e) { return {Outcome::kViolation, std::move(e), {}}; }
};

struct OracleOptions {
  /// Assertion 2 also requires every pool visit (pending and reversed) to
  /// match the first pending snapshot.
  bool strict_pool_visits = false;
};

/// If the transaction changed the DApp's state between Created and
/// Finalized, the Pending snapshot must differ from the Finalized one.
Verdict check_assertion1(const TransactionSnapshotTrace& trace);

/// The snapshot after a reversal must equal the first Pending snapshot.
Verdict check_assertion2(const TransactionSnapshotTrace& trace, const OracleOptions& opts = {});

struct TransactionReport {
  Hash256 tx_hash;
  std::string tag;
  Verdict assertion1;
  Verdict assertion2;
  std::vector<std::string> narrative;
  /// Stages whose capture failed.
  std::vector<std::string> capture_failures;

  std::vector<BugType> bugs() const;
};

TransactionReport analyze(const TransactionSnapshotTrace& trace, const OracleOptions& opts = {});

/// One violated assertion of one transaction.
struct BugReport {
  BugType bug = BugType::kTypeI;
  Hash256 tx_hash;
  std::string tag;
  int violated_assertion = 1;  // 1 for type1, 2 for type2
  Evidence evidence;
  std::string narrative;
};

/// Zero, one or two reports; both assertions are judged independently.
std::vector<BugReport> bug_reports(const TransactionReport& r);

struct ReportGroup {
  std::string tag;  // "untagged" when empty
  BugType bug = BugType::kTypeI;
  std::vector<Hash256> transactions;  // sorted
  /// Evidence of the first member.
  Evidence representative;
};

/// Violations grouped by (tag, bug type); groups and members are sorted.
std::vector<ReportGroup> group_reports(const std::vector<TransactionReport>& reports);

json to_json(const Verdict& v);
json to_json(const TransactionReport& r);
json to_json(const ReportGroup& g);
json to_json(const BugReport& b);
json to_json(const Evidence& e);

/// Fixed-width table: one row per transaction plus totals.
std::string summary_table(const std::vector<TransactionReport>& reports);

}  // namespace txforge::oracle
