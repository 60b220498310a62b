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

#include "txforge/snapshot.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "httplib.h"

namespace txforge::snapshot {

// Documents ------------------------------------------------------------------

Document canonicalize(const Document& doc) {
  switch (doc.type()) {
    case json::value_t::object: {
      Document out = json::object();
      for (const auto& [k, v] : doc.items()) out[k] = canonicalize(v);
      return out;
    }
    case json::value_t::array: {
      Document out = json::array();
      for (const auto& v : doc) out.push_back(canonicalize(v));
      return out;
    }
    case json::value_t::number_unsigned: {
      const auto u = doc.get<std::uint64_t>();
      if (u <= static_cast<std::uint64_t>(INT64_MAX)) return static_cast<std::int64_t>(u);
      return doc;
    }
    case json::value_t::number_float: {
      const double d = doc.get<double>();
      return d == 0.0 ? json(0.0) : doc;
    }
    default:
      return doc;
  }
}

std::string canonical_dump(const Document& doc) { return canonicalize(doc).dump(); }

bool documents_equal(const Document& a, const Document& b) {
  return canonical_dump(a) == canonical_dump(b);
}

// Paths ----------------------------------------------------------------------

namespace {

void append_segment(std::string& out, const PathSegment& seg) {
  if (const auto* key = std::get_if<std::string>(&seg)) {
    if (!out.empty()) out.push_back('.');
    out += *key;
  } else {
    out += "[" + std::to_string(std::get<std::size_t>(seg)) + "]";
  }
}

}  // namespace

std::string render_path(const Path& path) {
  std::string out;
  for (const auto& seg : path) append_segment(out, seg);
  return out;
}

// Field rules ----------------------------------------------------------------

bool glob_match(std::string_view pattern, std::string_view path) {
  // memo[i][j]: does pattern[i..] match path[j..]
  const std::size_t P = pattern.size(), S = path.size();
  std::vector<std::int8_t> memo((P + 1) * (S + 1), -1);
  std::function<bool(std::size_t, std::size_t)> go = [&](std::size_t i, std::size_t j) -> bool {
    std::int8_t& m = memo[i * (S + 1) + j];
    if (m >= 0) return m;
    bool r;
    if (i == P) {
      r = j == S;
    } else if (pattern[i] == '*') {
      const bool deep = i + 1 < P && pattern[i + 1] == '*';
      const std::size_t next = i + (deep ? 2 : 1);
      r = go(next, j);
      for (std::size_t k = j; !r && k < S; ++k) {
        if (!deep && path[k] == '.') break;
        r = go(next, k + 1);
      }
    } else if (pattern[i] == '?') {
      r = j < S && path[j] != '.' && go(i + 1, j + 1);
    } else {
      r = j < S && pattern[i] == path[j] && go(i + 1, j + 1);
    }
    m = r ? 1 : 0;
    return r;
  };
  return go(0, 0);
}

FieldRuleSet::FieldRuleSet(std::vector<FieldRule> rules) : rules_(std::move(rules)) {
  for (const auto& r : rules_) {
    if (r.kind == PatternKind::kRegex) {
      try {
        compiled_.emplace_back(std::regex(r.pattern, std::regex::ECMAScript));
      } catch (const std::regex_error& e) {
        throw std::invalid_argument("bad field rule regex '" + r.pattern + "': " + e.what());
      }
    } else {
      compiled_.emplace_back(std::nullopt);
    }
  }
  const std::string digest = sha256("txforge/rules/v1" + to_json().dump()).to_hex();
  id_ = "rules-" + digest.substr(2, 16);
}

FieldRuleSet FieldRuleSet::defaults() {
  return FieldRuleSet({FieldRule{"meta", PatternKind::kGlob, RuleAction::kExclude, false}});
}

const FieldRule* FieldRuleSet::match(const std::string& path) const {
  for (std::size_t i = 0; i < rules_.size(); ++i) {
    const bool hit = compiled_[i] ? std::regex_match(path, *compiled_[i])
                                  : glob_match(rules_[i].pattern, path);
    if (hit) return &rules_[i];
  }
  return nullptr;
}

std::optional<Document> FieldRuleSet::filter(const Document& node, Path& path) const {
  const FieldRule* rule = nullptr;
  if (!path.empty()) {
    rule = match(render_path(path));
    if (rule && rule->action == RuleAction::kExclude) return std::nullopt;
  }
  if (node.is_object()) {
    Document out = json::object();
    for (const auto& [k, v] : node.items()) {
      path.emplace_back(k);
      if (auto child = filter(v, path)) out[k] = std::move(*child);
      path.pop_back();
    }
    if (!node.empty() && out.empty()) return std::nullopt;
    return out;
  }
  if (node.is_array()) {
    Document out = json::array();
    for (std::size_t i = 0; i < node.size(); ++i) {
      path.emplace_back(i);
      if (auto child = filter(node[i], path)) out.push_back(std::move(*child));
      path.pop_back();
    }
    if (!node.empty() && out.empty()) return std::nullopt;
    if (rule && rule->unordered) {
      std::vector<std::pair<std::string, Document>> keyed;
      for (auto& v : out) keyed.emplace_back(v.dump(), std::move(v));
      std::sort(keyed.begin(), keyed.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
      out = json::array();
      for (auto& [_, v] : keyed) out.push_back(std::move(v));
    }
    return out;
  }
  return canonicalize(node);
}

Document FieldRuleSet::apply(const Document& doc) const {
  Path path;
  if (auto out = filter(doc, path)) return *out;
  return doc.is_array() ? json::array() : json::object();
}

json FieldRuleSet::to_json() const {
  json out = json::array();
  for (const auto& r : rules_) {
    out.push_back({{"pattern", r.pattern},
                   {"kind", r.kind == PatternKind::kGlob ? "glob" : "regex"},
                   {"action", r.action == RuleAction::kInclude ? "include" : "exclude"},
                   {"unordered", r.unordered}});
  }
  return out;
}

FieldRuleSet FieldRuleSet::from_json(const json& j) {
  if (!j.is_array()) throw std::invalid_argument("field rules must be a list");
  std::vector<FieldRule> rules;
  for (const auto& r : j) {
    if (!r.is_object() || !r.contains("pattern") || !r.at("pattern").is_string())
      throw std::invalid_argument("field rule needs a string 'pattern'");
    FieldRule rule;
    rule.pattern = r.at("pattern").get<std::string>();
    const std::string kind = r.value("kind", "glob");
    if (kind == "glob") {
      rule.kind = PatternKind::kGlob;
    } else if (kind == "regex") {
      rule.kind = PatternKind::kRegex;
    } else {
      throw std::invalid_argument("field rule kind must be glob or regex, got '" + kind + "'");
    }
    const std::string action = r.value("action", "exclude");
    if (action == "include") {
      rule.action = RuleAction::kInclude;
    } else if (action == "exclude") {
      rule.action = RuleAction::kExclude;
    } else {
      throw std::invalid_argument("field rule action must be include or exclude, got '" + action + "'");
    }
    rule.unordered = r.value("unordered", false);
    rules.push_back(std::move(rule));
  }
  return FieldRuleSet(std::move(rules));
}

// Diffs ----------------------------------------------------------------------

const char* to_string(DiffEntry::Kind k) {
  switch (k) {
    case DiffEntry::Kind::kAdded: return "added";
    case DiffEntry::Kind::kRemoved: return "removed";
    case DiffEntry::Kind::kChanged: return "changed";
  }
  return "?";
}

namespace {

void diff_into(const Document& a, const Document& b, Path& path, std::vector<DiffEntry>& out) {
  using K = DiffEntry::Kind;
  if (a.is_object() && b.is_object()) {
    for (const auto& [k, v] : a.items()) {
      path.emplace_back(k);
      if (auto it = b.find(k); it != b.end()) {
        diff_into(v, *it, path, out);
      } else {
        out.push_back({K::kRemoved, path, canonicalize(v), std::nullopt});
      }
      path.pop_back();
    }
    for (const auto& [k, v] : b.items()) {
      if (a.contains(k)) continue;
      path.emplace_back(k);
      out.push_back({K::kAdded, path, std::nullopt, canonicalize(v)});
      path.pop_back();
    }
    return;
  }
  if (a.is_array() && b.is_array()) {
    const std::size_t common = std::min(a.size(), b.size());
    for (std::size_t i = 0; i < common; ++i) {
      path.emplace_back(i);
      diff_into(a[i], b[i], path, out);
      path.pop_back();
    }
    for (std::size_t i = common; i < a.size(); ++i) {
      path.emplace_back(i);
      out.push_back({K::kRemoved, path, canonicalize(a[i]), std::nullopt});
      path.pop_back();
    }
    for (std::size_t i = common; i < b.size(); ++i) {
      path.emplace_back(i);
      out.push_back({K::kAdded, path, std::nullopt, canonicalize(b[i])});
      path.pop_back();
    }
    return;
  }
  if (!documents_equal(a, b)) out.push_back({K::kChanged, path, canonicalize(a), canonicalize(b)});
}

Document* walk(Document& doc, const Path& path, std::size_t depth) {
  Document* node = &doc;
  for (std::size_t i = 0; i < depth; ++i) {
    if (const auto* key = std::get_if<std::string>(&path[i])) {
      if (!node->is_object() || !node->contains(*key))
        throw std::invalid_argument("diff path not found: " + render_path(path));
      node = &(*node)[*key];
    } else {
      const std::size_t idx = std::get<std::size_t>(path[i]);
      if (!node->is_array() || idx >= node->size())
        throw std::invalid_argument("diff path not found: " + render_path(path));
      node = &(*node)[idx];
    }
  }
  return node;
}

}  // namespace

std::vector<DiffEntry> diff(const Document& a, const Document& b) {
  std::vector<DiffEntry> out;
  Path path;
  diff_into(a, b, path, out);
  return out;
}

Document apply_diff(const Document& base, const std::vector<DiffEntry>& changes) {
  using K = DiffEntry::Kind;
  Document doc = canonicalize(base);
  std::vector<const DiffEntry*> removed, added;
  for (const auto& c : changes) {
    if (c.kind == K::kChanged) {
      if (c.path.empty()) {
        doc = *c.after;
      } else {
        *walk(doc, c.path, c.path.size()) = *c.after;
      }
    } else {
      (c.kind == K::kRemoved ? removed : added).push_back(&c);
    }
  }
  // Removing from the highest index down keeps earlier indices valid.
  std::sort(removed.begin(), removed.end(), [](auto* x, auto* y) { return x->path > y->path; });
  for (const auto* c : removed) {
    Document* parent = walk(doc, c->path, c->path.size() - 1);
    const auto& last = c->path.back();
    if (const auto* key = std::get_if<std::string>(&last)) {
      parent->erase(*key);
    } else {
      parent->erase(std::get<std::size_t>(last));
    }
  }
  std::sort(added.begin(), added.end(), [](auto* x, auto* y) { return x->path < y->path; });
  for (const auto* c : added) {
    Document* parent = walk(doc, c->path, c->path.size() - 1);
    const auto& last = c->path.back();
    if (const auto* key = std::get_if<std::string>(&last)) {
      (*parent)[*key] = *c->after;
    } else {
      const std::size_t idx = std::get<std::size_t>(last);
      if (!parent->is_array() || idx > parent->size())
        throw std::invalid_argument("diff insertion out of range: " + render_path(c->path));
      parent->insert(parent->begin() + static_cast<std::ptrdiff_t>(idx), *c->after);
    }
  }
  return doc;
}

json diff_to_json(const std::vector<DiffEntry>& changes) {
  json out = json::array();
  for (const auto& c : changes) {
    json e{{"op", to_string(c.kind)}, {"path", render_path(c.path)}};
    if (c.before) e["before"] = *c.before;
    if (c.after) e["after"] = *c.after;
    out.push_back(std::move(e));
  }
  return out;
}

// Capture --------------------------------------------------------------------

const char* to_string(CaptureErrorKind k) {
  switch (k) {
    case CaptureErrorKind::kFetch: return "fetch";
    case CaptureErrorKind::kParse: return "parse";
    case CaptureErrorKind::kContentType: return "content_type";
  }
  return "?";
}

namespace {

template <typename F>
Document guarded(F&& f) {
  try {
    return f();
  } catch (const CaptureError&) {
    throw;
  } catch (const std::exception& e) {
    throw CaptureError(CaptureErrorKind::kFetch, e.what());
  }
}

}  // namespace

Document InProcessSource::fetch() { return guarded(read_); }

Document InProcessSource::fetch_scoped(const std::string& scope) {
  if (!scoped_ || scope.empty()) return fetch();
  return guarded([&] { return scoped_(scope); });
}

void CompositeSource::add(std::string name, std::unique_ptr<StateSource> source) {
  parts_.emplace_back(std::move(name), std::move(source));
}

Document CompositeSource::fetch() {
  if (parts_.size() == 1) return parts_.front().second->fetch();
  Document out = json::object();
  for (auto& [name, src] : parts_) out[name] = src->fetch();
  return out;
}

Document CompositeSource::fetch_scoped(const std::string& scope) {
  if (parts_.size() == 1) return parts_.front().second->fetch_scoped(scope);
  Document out = json::object();
  for (auto& [name, src] : parts_) out[name] = src->fetch_scoped(scope);
  return out;
}

std::string CompositeSource::describe() const {
  std::string out;
  for (const auto& [name, src] : parts_) out += (out.empty() ? "" : ", ") + name + "=" + src->describe();
  return out;
}

HttpSource::HttpSource(std::string host, int port, std::string path, Millis timeout_ms)
    : host_(std::move(host)), port_(port), path_(std::move(path)), timeout_ms_(timeout_ms) {}

std::string HttpSource::describe() const {
  return "http://" + host_ + ":" + std::to_string(port_) + path_;
}

Document HttpSource::fetch() {
  httplib::Client cli(host_, port_);
  const auto t = std::chrono::milliseconds(timeout_ms_);
  cli.set_connection_timeout(t);
  cli.set_read_timeout(t);
  auto res = cli.Get(path_);
  if (!res) throw CaptureError(CaptureErrorKind::kFetch, describe() + ": " + httplib::to_string(res.error()));
  if (res->status != 200)
    throw CaptureError(CaptureErrorKind::kFetch, describe() + ": HTTP " + std::to_string(res->status));
  std::string type = res->get_header_value("Content-Type");
  std::transform(type.begin(), type.end(), type.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (type.rfind("application/json", 0) != 0)
    throw CaptureError(CaptureErrorKind::kContentType, describe() + ": got '" + type + "'");
  try {
    return json::parse(res->body);
  } catch (const json::parse_error& e) {
    throw CaptureError(CaptureErrorKind::kParse, describe() + ": " + e.what());
  }
}

Document FileSource::fetch() {
  std::ifstream in(path_);
  if (!in) throw CaptureError(CaptureErrorKind::kFetch, "cannot open " + path_);
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return json::parse(buf.str());
  } catch (const json::parse_error& e) {
    throw CaptureError(CaptureErrorKind::kParse, path_ + ": " + e.what());
  }
}

json to_json(const Snapshot& s) {
  return {{"tx_hash", s.tx_hash.to_hex()},
          {"state", lifecycle::to_string(s.state)},
          {"visit", s.visit},
          {"captured_at_ms", s.captured_at},
          {"rule_set_id", s.rule_set_id},
          {"document", s.document}};
}

Snapshot snapshot_from_json(const json& j) {
  Snapshot s;
  s.tx_hash = Hash256::from_hex(j.at("tx_hash").get<std::string>());
  auto st = lifecycle::state_from_string(j.at("state").get<std::string>());
  if (!st) throw std::invalid_argument("unknown lifecycle state in snapshot");
  s.state = *st;
  s.visit = j.at("visit").get<std::uint32_t>();
  s.captured_at = j.at("captured_at_ms").get<Millis>();
  s.rule_set_id = j.at("rule_set_id").get<std::string>();
  s.document = canonicalize(j.at("document"));
  return s;
}

const Snapshot* TransactionSnapshotTrace::find(LifecycleState s, std::uint32_t visit) const {
  auto it = snapshots.find({s, visit});
  return it == snapshots.end() ? nullptr : &it->second;
}

std::vector<const Snapshot*> TransactionSnapshotTrace::visits(LifecycleState s) const {
  std::vector<const Snapshot*> out;
  for (auto it = snapshots.lower_bound({s, 0}); it != snapshots.end() && it->first.first == s; ++it)
    out.push_back(&it->second);
  return out;
}

SnapshotCollector::SnapshotCollector(Clock& clock, StateSource& source, FieldRuleSet rules,
                                     Millis wait_window_ms)
    : clock_(clock), source_(source), rules_(std::move(rules)), wait_ms_(wait_window_ms) {
  if (wait_window_ms < 0) throw std::invalid_argument("wait window must be non-negative");
}

TransactionSnapshotTrace& SnapshotCollector::trace_for(const Hash256& tx, const std::string& tag) {
  auto& t = traces_[tx];
  t.tx_hash = tx;
  if (!tag.empty()) t.tag = tag;
  return t;
}

const Snapshot& SnapshotCollector::capture(const Hash256& tx, LifecycleState state,
                                           std::uint32_t visit, const std::string& tag,
                                           const std::string& scope) {
  clock_.sleep_for(wait_ms_);
  Document filtered;
  try {
    filtered = read_now(scope);
  } catch (const CaptureError& e) {
    record_failure(tx, state, visit, e.what(), tag);
    throw;
  }
  return store_document(tx, state, visit, std::move(filtered), tag);
}

Document SnapshotCollector::read_now(const std::string& scope) {
  return rules_.apply(scope.empty() ? source_.fetch() : source_.fetch_scoped(scope));
}

const Snapshot& SnapshotCollector::store_document(const Hash256& tx, LifecycleState state,
                                                  std::uint32_t visit, Document filtered,
                                                  const std::string& tag) {
  auto& t = trace_for(tx, tag);
  t.failures.erase({state, visit});
  auto& slot = t.snapshots[{state, visit}];
  slot = Snapshot{tx, state, visit, clock_.now(), rules_.id(), std::move(filtered)};
  return slot;
}

void SnapshotCollector::store(Snapshot s, const std::string& tag) {
  auto& t = trace_for(s.tx_hash, tag);
  t.snapshots[{s.state, s.visit}] = std::move(s);
}

void SnapshotCollector::record_failure(const Hash256& tx, LifecycleState state, std::uint32_t visit,
                                       const std::string& reason, const std::string& tag) {
  trace_for(tx, tag).failures[{state, visit}] = reason;
}

const TransactionSnapshotTrace* SnapshotCollector::trace(const Hash256& tx) const {
  auto it = traces_.find(tx);
  return it == traces_.end() ? nullptr : &it->second;
}

}  // namespace txforge::snapshot
