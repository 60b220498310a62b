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
#include <memory>
#include <optional>
#include <regex>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "txforge/clock.hpp"
#include "txforge/lifecycle.hpp"
#include "txforge/types.hpp"

namespace txforge::snapshot {

using json = nlohmann::json;

// Documents ------------------------------------------------------------------

/// Off-chain state as a JSON tree. Objects are key-sorted. Numbers keep
/// their kind, so 1 and 1.0 are different values.
using Document = json;

/// Unsigned integers that fit become signed, -0.0 becomes 0.0.
Document canonicalize(const Document& doc);
/// Compact serialization of the canonical form.
std::string canonical_dump(const Document& doc);
/// Strict structural equality: equal canonical dumps.
bool documents_equal(const Document& a, const Document& b);

// Paths ----------------------------------------------------------------------

/// One step into a document: an object key or an array index.
using PathSegment = std::variant<std::string, std::size_t>;
using Path = std::vector<PathSegment>;

/// Renders as `items.a.value`, `list[2].x`. The empty path renders as "".
std::string render_path(const Path& path);

// Field rules ----------------------------------------------------------------

enum class RuleAction { kInclude, kExclude };
enum class PatternKind { kGlob, kRegex };

/// Glob patterns: `*` matches within one dotted segment, `**` matches
/// anything, `?` matches one character other than '.'.
struct FieldRule {
  std::string pattern;
  PatternKind kind = PatternKind::kGlob;
  RuleAction action = RuleAction::kExclude;
  /// Treat a matched list as a multiset: sort elements by canonical dump.
  bool unordered = false;
};

bool glob_match(std::string_view pattern, std::string_view path);

/// Ordered rules; the first rule whose pattern matches a path decides it.
/// Unmatched paths are included.
class FieldRuleSet {
 public:
  FieldRuleSet() : FieldRuleSet(std::vector<FieldRule>{}) {}
  explicit FieldRuleSet(std::vector<FieldRule> rules);

  /// Excludes `meta` and everything under it.
  static FieldRuleSet defaults();

  const std::vector<FieldRule>& rules() const { return rules_; }
  /// Content fingerprint; snapshots are comparable only under equal ids.
  const std::string& id() const { return id_; }

  /// Filtered, canonical copy. Containers left empty by exclusions are
  /// removed as well; containers that were already empty are kept.
  Document apply(const Document& doc) const;

  json to_json() const;
  static FieldRuleSet from_json(const json& j);

 private:
  const FieldRule* match(const std::string& path) const;
  std::optional<Document> filter(const Document& node, Path& path) const;

  std::vector<FieldRule> rules_;
  std::vector<std::optional<std::regex>> compiled_;
  std::string id_;
};

// Diffs ----------------------------------------------------------------------

struct DiffEntry {
  enum class Kind { kAdded, kRemoved, kChanged };
  Kind kind = Kind::kChanged;
  Path path;
  std::optional<Document> before;
  std::optional<Document> after;
};

const char* to_string(DiffEntry::Kind k);

/// Changes that turn `a` into `b`; empty iff the documents are equal.
std::vector<DiffEntry> diff(const Document& a, const Document& b);
Document apply_diff(const Document& base, const std::vector<DiffEntry>& changes);
json diff_to_json(const std::vector<DiffEntry>& changes);

// Capture --------------------------------------------------------------------

enum class CaptureErrorKind { kFetch, kParse, kContentType };
const char* to_string(CaptureErrorKind k);

class CaptureError : public std::runtime_error {
 public:
  CaptureError(CaptureErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}
  CaptureErrorKind kind() const { return kind_; }

 private:
  CaptureErrorKind kind_;
};

/// Where the DApp's off-chain state is read from.
class StateSource {
 public:
  virtual ~StateSource() = default;
  /// Throws CaptureError.
  virtual Document fetch() = 0;
  /// The part of the state relevant to `scope` (a DApp-defined key). Sources
  /// that cannot narrow return everything.
  virtual Document fetch_scoped(const std::string& scope) {
    (void)scope;
    return fetch();
  }
  virtual std::string describe() const = 0;
};

class InProcessSource final : public StateSource {
 public:
  using Reader = std::function<Document()>;
  using ScopedReader = std::function<Document(const std::string&)>;

  explicit InProcessSource(Reader read, ScopedReader scoped = {})
      : read_(std::move(read)), scoped_(std::move(scoped)) {}
  Document fetch() override;
  Document fetch_scoped(const std::string& scope) override;
  std::string describe() const override { return "in-process"; }

 private:
  Reader read_;
  ScopedReader scoped_;
};

/// Several sources combined into one document keyed by source name.
class CompositeSource final : public StateSource {
 public:
  void add(std::string name, std::unique_ptr<StateSource> source);
  std::size_t size() const { return parts_.size(); }
  Document fetch() override;
  Document fetch_scoped(const std::string& scope) override;
  std::string describe() const override;

 private:
  std::vector<std::pair<std::string, std::unique_ptr<StateSource>>> parts_;
};

/// GET on a JSON endpoint; responses must be 200 with a JSON content type.
class HttpSource final : public StateSource {
 public:
  HttpSource(std::string host, int port, std::string path, Millis timeout_ms = 5000);
  Document fetch() override;
  std::string describe() const override;

 private:
  std::string host_;
  int port_;
  std::string path_;
  Millis timeout_ms_;
};

class FileSource final : public StateSource {
 public:
  explicit FileSource(std::string path) : path_(std::move(path)) {}
  Document fetch() override;
  std::string describe() const override { return "file:" + path_; }

 private:
  std::string path_;
};

using lifecycle::LifecycleState;

struct Snapshot {
  Hash256 tx_hash;
  LifecycleState state = LifecycleState::kCreated;
  std::uint32_t visit = 1;
  Millis captured_at = 0;
  std::string rule_set_id;
  Document document;
};

json to_json(const Snapshot& s);
Snapshot snapshot_from_json(const json& j);

/// Per-transaction map from (state, visit) to the snapshot taken there.
struct TransactionSnapshotTrace {
  Hash256 tx_hash;
  std::string tag;
  /// The traversal finished and every stage was captured.
  bool complete = false;
  std::map<std::pair<LifecycleState, std::uint32_t>, Snapshot> snapshots;
  /// Stages whose capture failed, with the reason.
  std::map<std::pair<LifecycleState, std::uint32_t>, std::string> failures;

  const Snapshot* find(LifecycleState s, std::uint32_t visit = 1) const;
  /// Every snapshot for one state, by visit.
  std::vector<const Snapshot*> visits(LifecycleState s) const;
};

/// Waits out the settle window, reads the source and stores a filtered
/// snapshot in the transaction's trace.
class SnapshotCollector {
 public:
  SnapshotCollector(Clock& clock, StateSource& source, FieldRuleSet rules, Millis wait_window_ms);

  /// Throws CaptureError; the failure is also recorded in the trace.
  /// A non-empty `scope` narrows the read (see StateSource::fetch_scoped).
  const Snapshot& capture(const Hash256& tx, LifecycleState state, std::uint32_t visit,
                          const std::string& tag = {}, const std::string& scope = {});
  /// Reads and filters the source now, without waiting.
  Document read_now(const std::string& scope = {});
  /// Stores a document read earlier (several stages sharing one read).
  const Snapshot& store_document(const Hash256& tx, LifecycleState state, std::uint32_t visit,
                                 Document filtered, const std::string& tag = {});
  void sleep_window() { clock_.sleep_for(wait_ms_); }
  void set_complete(const Hash256& tx, bool complete) { trace_for(tx, {}).complete = complete; }
  /// Drops a finished trace to bound memory in long runs.
  void forget(const Hash256& tx) { traces_.erase(tx); }

  /// Stores an externally produced snapshot (replay).
  void store(Snapshot s, const std::string& tag = {});
  void record_failure(const Hash256& tx, LifecycleState state, std::uint32_t visit,
                      const std::string& reason, const std::string& tag = {});

  const FieldRuleSet& rules() const { return rules_; }
  Millis wait_window() const { return wait_ms_; }
  const std::map<Hash256, TransactionSnapshotTrace>& traces() const { return traces_; }
  const TransactionSnapshotTrace* trace(const Hash256& tx) const;

 private:
  TransactionSnapshotTrace& trace_for(const Hash256& tx, const std::string& tag);

  Clock& clock_;
  StateSource& source_;
  FieldRuleSet rules_;
  Millis wait_ms_;
  std::map<Hash256, TransactionSnapshotTrace> traces_;
};

}  // namespace txforge::snapshot
