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

#include "txforge/config.hpp"

#include <yaml-cpp/yaml.h>

#include <fstream>
#include <set>
#include <sstream>

namespace txforge::config {

const char* to_string(Mode m) {
  switch (m) {
    case Mode::kTraverse: return "traverse";
    case Mode::kSoak: return "soak";
    case Mode::kReplay: return "replay";
  }
  return "?";
}

const char* to_string(ClockKind c) { return c == ClockKind::kSimulated ? "simulated" : "wall"; }

snapshot::FieldRuleSet SessionConfig::rule_set() const {
  return field_rules ? snapshot::FieldRuleSet(*field_rules) : snapshot::FieldRuleSet::defaults();
}

lifecycle::StochasticProfile SessionConfig::profile() const {
  lifecycle::StochasticProfile p;
  if (stochastic) {
    p.reorg_probability_per_block = stochastic->reorg_probability;
    p.drop_probability_per_tick = stochastic->drop_probability;
    p.execution_probability_per_block = stochastic->execution_probability;
  }
  p.rng_seed = seed;
  return p;
}

namespace {

/// Typed, key-checked access to one JSON object of the config.
class Section {
 public:
  Section(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected a mapping");
  }
  ~Section() noexcept(false) {
    if (std::uncaught_exceptions()) return;
    for (const auto& [k, _] : j_.items())
      if (!seen_.contains(k)) throw ConfigError(where_ + ": unknown key '" + k + "'");
  }

  bool has(const std::string& k) {
    seen_.insert(k);
    return j_.contains(k) && !j_.at(k).is_null();
  }
  const json& raw(const std::string& k) {
    seen_.insert(k);
    return j_.at(k);
  }
  std::string path(const std::string& k) const { return where_.empty() ? k : where_ + "." + k; }

  template <typename T>
  void get(const std::string& k, T& out) {
    if (!has(k)) return;
    const json& v = j_.at(k);
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(path(k) + ": expected true or false");
      out = v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError(path(k) + ": expected a string");
      out = v.get<std::string>();
    } else if constexpr (std::is_same_v<T, double>) {
      if (!v.is_number()) throw ConfigError(path(k) + ": expected a number");
      out = v.get<double>();
    } else if constexpr (std::is_unsigned_v<T>) {
      if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0))
        throw ConfigError(path(k) + ": expected a non-negative integer");
      out = static_cast<T>(v.get<std::uint64_t>());
    } else {
      if (!v.is_number_integer()) throw ConfigError(path(k) + ": expected an integer");
      out = static_cast<T>(v.get<std::int64_t>());
    }
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

std::string render_endpoint(const Endpoint& e) { return e.host + ":" + std::to_string(e.port); }

SourceConfig source_from_json(const json& j, const std::string& where) {
  Section s(j, where);
  SourceConfig src;
  std::string kind = "in_process";
  s.get("kind", kind);
  s.get("name", src.name);
  s.get("timeout_ms", src.timeout_ms);
  if (kind == "in_process") {
    src.kind = SourceConfig::Kind::kInProcess;
  } else if (kind == "http") {
    if (!s.has("url")) throw ConfigError(where + ": http source needs 'url'");
    std::string url;
    s.get("url", url);
    SourceConfig parsed = parse_http_url(url);
    src.kind = SourceConfig::Kind::kHttp;
    src.host = parsed.host;
    src.port = parsed.port;
    src.path = parsed.path;
  } else if (kind == "file") {
    if (!s.has("path")) throw ConfigError(where + ": file source needs 'path'");
    src.kind = SourceConfig::Kind::kFile;
    s.get("path", src.path);
  } else {
    throw ConfigError(where + ".kind: expected in_process, http or file, got '" + kind + "'");
  }
  return src;
}

json source_to_json(const SourceConfig& s) {
  json j{{"name", s.name}, {"timeout_ms", s.timeout_ms}};
  switch (s.kind) {
    case SourceConfig::Kind::kInProcess: j["kind"] = "in_process"; break;
    case SourceConfig::Kind::kHttp:
      j["kind"] = "http";
      j["url"] = "http://" + s.host + ":" + std::to_string(s.port) + s.path;
      break;
    case SourceConfig::Kind::kFile:
      j["kind"] = "file";
      j["path"] = s.path;
      break;
  }
  return j;
}

mock::MockOptions dapp_from_json(const json& j) {
  Section s(j, "dapp");
  mock::MockOptions o;
  std::string strategy = "passive";
  s.get("strategy", strategy);
  auto st = mock::strategy_from_string(strategy);
  if (!st) throw ConfigError("dapp.strategy: expected polling, passive or aggressive, got '" + strategy + "'");
  o.strategy = *st;
  s.get("mark_pending", o.mark_pending);
  s.get("poll_interval_ms", o.poll_interval_ms);
  s.get("key_space", o.key_space);
  if (s.has("bugs")) {
    Section b(s.raw("bugs"), "dapp.bugs");
    b.get("type1_premature_update", o.bugs.type1_premature_update);
    b.get("type2_no_rollback", o.bugs.type2_no_rollback);
    b.get("rollback_cleared_on_restart", o.bugs.rollback_cleared_on_restart);
    b.get("laggy_update_ms", o.bugs.laggy_update_ms);
  }
  return o;
}

json dapp_to_json(const mock::MockOptions& o) {
  return {{"strategy", mock::to_string(o.strategy)},
          {"mark_pending", o.mark_pending},
          {"poll_interval_ms", o.poll_interval_ms},
          {"key_space", o.key_space},
          {"bugs",
           {{"type1_premature_update", o.bugs.type1_premature_update},
            {"type2_no_rollback", o.bugs.type2_no_rollback},
            {"rollback_cleared_on_restart", o.bugs.rollback_cleared_on_restart},
            {"laggy_update_ms", o.bugs.laggy_update_ms}}}};
}

}  // namespace

Endpoint parse_endpoint(const std::string& text) {
  const auto colon = text.rfind(':');
  if (colon == std::string::npos || colon == 0) throw ConfigError("expected host:port, got '" + text + "'");
  Endpoint e;
  e.host = text.substr(0, colon);
  const std::string port = text.substr(colon + 1);
  try {
    std::size_t used = 0;
    e.port = std::stoi(port, &used);
    if (used != port.size() || e.port < 0 || e.port > 65535) throw std::out_of_range("port");
  } catch (const std::exception&) {
    throw ConfigError("bad port in '" + text + "'");
  }
  return e;
}

SourceConfig parse_http_url(const std::string& url) {
  const std::string scheme = "http://";
  if (url.rfind(scheme, 0) != 0) throw ConfigError("only http:// urls are supported, got '" + url + "'");
  const std::string rest = url.substr(scheme.size());
  const auto slash = rest.find('/');
  const std::string hostport = slash == std::string::npos ? rest : rest.substr(0, slash);
  SourceConfig s;
  s.kind = SourceConfig::Kind::kHttp;
  if (hostport.find(':') == std::string::npos) {
    s.host = hostport;
    s.port = 80;
  } else {
    Endpoint e = parse_endpoint(hostport);
    s.host = e.host;
    s.port = e.port;
  }
  if (s.host.empty()) throw ConfigError("missing host in '" + url + "'");
  s.path = slash == std::string::npos ? "/" : rest.substr(slash);
  return s;
}

SessionConfig from_json(const json& j) {
  Section s(j, "");
  SessionConfig c;
  if (s.has("mode")) {
    std::string m;
    s.get("mode", m);
    if (m == "traverse") {
      c.mode = Mode::kTraverse;
    } else if (m == "soak") {
      c.mode = Mode::kSoak;
    } else if (m == "replay") {
      c.mode = Mode::kReplay;
    } else {
      throw ConfigError("mode: expected traverse, soak or replay, got '" + m + "'");
    }
  }
  s.get("seed", c.seed);
  s.get("confirmations", c.confirmations);
  s.get("wait_window_ms", c.wait_window_ms);
  if (s.has("clock")) {
    std::string k;
    s.get("clock", k);
    if (k == "simulated") {
      c.clock = ClockKind::kSimulated;
    } else if (k == "wall") {
      c.clock = ClockKind::kWall;
    } else {
      throw ConfigError("clock: expected simulated or wall, got '" + k + "'");
    }
  }
  if (s.has("field_rules")) {
    try {
      c.field_rules = snapshot::FieldRuleSet::from_json(s.raw("field_rules")).rules();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("field_rules: ") + e.what());
    }
  }
  s.get("strict_pool_visits", c.strict_pool_visits);
  if (s.has("dapp")) c.dapp = dapp_from_json(s.raw("dapp"));
  if (s.has("sources")) {
    const json& list = s.raw("sources");
    if (!list.is_array()) throw ConfigError("sources: expected a list");
    for (std::size_t i = 0; i < list.size(); ++i)
      c.sources.push_back(source_from_json(list[i], "sources[" + std::to_string(i) + "]"));
  }
  if (s.has("stochastic")) {
    Section st(s.raw("stochastic"), "stochastic");
    StochasticConfig sc;
    st.get("ticks", sc.ticks);
    st.get("reorg_probability", sc.reorg_probability);
    st.get("drop_probability", sc.drop_probability);
    st.get("execution_probability", sc.execution_probability);
    st.get("arrival_probability", sc.arrival_probability);
    c.stochastic = sc;
  }
  if (s.has("node")) {
    Section n(s.raw("node"), "node");
    std::string addr;
    if (n.has("http")) {
      n.get("http", addr);
      c.node_http = parse_endpoint(addr);
    }
    if (n.has("events")) {
      n.get("events", addr);
      c.node_events = parse_endpoint(addr);
    }
  }
  s.get("output", c.output_dir);
  s.get("transactions", c.transactions);
  s.get("repetitions", c.repetitions);
  s.get("idle_timeout_ms", c.idle_timeout_ms);
  if (s.has("declared_tags")) {
    const json& tags = s.raw("declared_tags");
    if (!tags.is_array()) throw ConfigError("declared_tags: expected a list");
    for (const auto& t : tags) {
      if (!t.is_string()) throw ConfigError("declared_tags: expected strings");
      c.declared_tags.push_back(t.get<std::string>());
    }
  }
  return c;
}

json to_json(const SessionConfig& c) {
  json j{{"mode", to_string(c.mode)},
         {"seed", c.seed},
         {"confirmations", c.confirmations},
         {"wait_window_ms", c.wait_window_ms},
         {"clock", to_string(c.clock)},
         {"strict_pool_visits", c.strict_pool_visits},
         {"output", c.output_dir},
         {"transactions", c.transactions},
         {"repetitions", c.repetitions},
         {"idle_timeout_ms", c.idle_timeout_ms}};
  if (c.field_rules) j["field_rules"] = snapshot::FieldRuleSet(*c.field_rules).to_json();
  if (c.dapp) j["dapp"] = dapp_to_json(*c.dapp);
  j["sources"] = json::array();
  for (const auto& s : c.sources) j["sources"].push_back(source_to_json(s));
  if (c.stochastic) {
    j["stochastic"] = {{"ticks", c.stochastic->ticks},
                       {"reorg_probability", c.stochastic->reorg_probability},
                       {"drop_probability", c.stochastic->drop_probability},
                       {"execution_probability", c.stochastic->execution_probability},
                       {"arrival_probability", c.stochastic->arrival_probability}};
  }
  if (c.node_http || c.node_events) {
    j["node"] = json::object();
    if (c.node_http) j["node"]["http"] = render_endpoint(*c.node_http);
    if (c.node_events) j["node"]["events"] = render_endpoint(*c.node_events);
  }
  if (!c.declared_tags.empty()) j["declared_tags"] = c.declared_tags;
  return j;
}

namespace {

json scalar(const YAML::Node& n) {
  const std::string& text = n.Scalar();
  if (n.Tag() == "!") return text;  // quoted
  if (text == "~" || text == "null" || text.empty()) return nullptr;
  bool b;
  if (YAML::convert<bool>::decode(n, b)) return b;
  try {
    std::size_t used = 0;
    if (!text.empty() && text[0] != '+') {
      if (text[0] == '-') {
        long long v = std::stoll(text, &used);
        if (used == text.size()) return static_cast<std::int64_t>(v);
      } else {
        unsigned long long v = std::stoull(text, &used);
        if (used == text.size()) return static_cast<std::uint64_t>(v);
      }
    }
  } catch (const std::exception&) {
  }
  try {
    std::size_t used = 0;
    double d = std::stod(text, &used);
    if (used == text.size()) return d;
  } catch (const std::exception&) {
  }
  return text;
}

json convert(const YAML::Node& n) {
  switch (n.Type()) {
    case YAML::NodeType::Null:
    case YAML::NodeType::Undefined: return nullptr;
    case YAML::NodeType::Scalar: return scalar(n);
    case YAML::NodeType::Sequence: {
      json out = json::array();
      for (const auto& e : n) out.push_back(convert(e));
      return out;
    }
    case YAML::NodeType::Map: {
      json out = json::object();
      for (const auto& kv : n) out[kv.first.as<std::string>()] = convert(kv.second);
      return out;
    }
  }
  return nullptr;
}

}  // namespace

json yaml_to_json(const std::string& text) {
  try {
    return convert(YAML::Load(text));
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("yaml: ") + e.what());
  }
}

SessionConfig parse_yaml(const std::string& text) {
  json j = yaml_to_json(text);
  if (j.is_null()) j = json::object();
  SessionConfig c = from_json(j);
  validate(c);
  return c;
}

SessionConfig load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_yaml(buf.str());
}

void validate(const SessionConfig& c) {
  if (c.confirmations == 0) throw ConfigError("confirmations must be at least 1");
  if (c.wait_window_ms < 0) throw ConfigError("wait_window_ms must not be negative");
  if (c.repetitions == 0) throw ConfigError("repetitions must be at least 1");
  if (c.mode == Mode::kSoak) {
    if (!c.stochastic) throw ConfigError("soak mode requires a 'stochastic' section");
    if (!c.dapp) throw ConfigError("soak mode drives the in-process mock and requires a 'dapp' section");
    if (!c.profile().valid()) throw ConfigError("stochastic probabilities must lie in [0, 1]");
    const double a = c.stochastic->arrival_probability;
    if (!(a >= 0.0 && a <= 1.0)) throw ConfigError("stochastic.arrival_probability must lie in [0, 1]");
  }
  if (c.dapp) {
    if (c.dapp->strategy == mock::Strategy::kPeriodicPolling && c.dapp->poll_interval_ms <= 0)
      throw ConfigError("dapp.poll_interval_ms must be positive");
    if (c.dapp->bugs.laggy_update_ms < 0) throw ConfigError("dapp.bugs.laggy_update_ms must not be negative");
  }
  std::set<std::string> names;
  for (const auto& s : c.sources) {
    if (!names.insert(s.name).second) throw ConfigError("duplicate source name '" + s.name + "'");
    if (s.kind == SourceConfig::Kind::kInProcess && !c.dapp)
      throw ConfigError("source '" + s.name + "' is in_process but there is no 'dapp' section");
  }
  if (!c.dapp && c.sources.empty())
    throw ConfigError("an out-of-process DApp needs at least one http or file source");
  if (c.field_rules) {
    try {
      snapshot::FieldRuleSet check(*c.field_rules);
    } catch (const std::exception& e) {
      throw ConfigError(std::string("field_rules: ") + e.what());
    }
  }
}

}  // namespace txforge::config
