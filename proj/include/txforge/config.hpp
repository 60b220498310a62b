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
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "txforge/clock.hpp"
#include "txforge/lifecycle.hpp"
#include "txforge/mock_dapp.hpp"
#include "txforge/snapshot.hpp"

namespace txforge::config {

using json = nlohmann::json;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Mode { kTraverse, kSoak, kReplay };
enum class ClockKind { kSimulated, kWall };
const char* to_string(Mode m);
const char* to_string(ClockKind c);

struct SourceConfig {
  enum class Kind { kInProcess, kHttp, kFile };
  Kind kind = Kind::kInProcess;
  std::string name = "dapp";
  std::string host;  // http
  int port = 0;      // http
  std::string path;  // http: request path; file: file path
  Millis timeout_ms = 5000;
};

struct StochasticConfig {
  std::uint64_t ticks = 1000;
  double reorg_probability = 1.0 / 24.43;
  double drop_probability = 0.0;
  double execution_probability = 0.5;
  /// Chance per tick that the driver submits a new transaction.
  double arrival_probability = 0.5;
};

struct Endpoint {
  std::string host = "127.0.0.1";
  int port = 0;
};

struct SessionConfig {
  Mode mode = Mode::kTraverse;
  std::uint64_t seed = 0;
  std::uint64_t confirmations = 6;
  Millis wait_window_ms = 1000;
  ClockKind clock = ClockKind::kSimulated;
  /// Empty means the default rule set.
  std::optional<std::vector<snapshot::FieldRule>> field_rules;
  bool strict_pool_visits = false;
  /// The in-process mock. Absent when the DApp runs out of process.
  std::optional<mock::MockOptions> dapp;
  std::vector<SourceConfig> sources;
  std::optional<StochasticConfig> stochastic;
  std::optional<Endpoint> node_http;
  std::optional<Endpoint> node_events;
  std::string output_dir = "txforge-out";
  std::size_t transactions = 100;
  std::size_t repetitions = 1;
  /// External DApps: stop after this long without a new submission.
  Millis idle_timeout_ms = 30000;
  /// Tags the DApp is expected to exercise; the mock declares its own.
  std::vector<std::string> declared_tags;

  snapshot::FieldRuleSet rule_set() const;
  lifecycle::StochasticProfile profile() const;
};

/// Throws ConfigError. Unknown keys are errors.
SessionConfig from_json(const json& j);
json to_json(const SessionConfig& c);

/// YAML scalars become booleans, integers or floats when they parse as
/// such; quoted scalars stay strings.
json yaml_to_json(const std::string& text);
SessionConfig parse_yaml(const std::string& text);
SessionConfig load(const std::filesystem::path& path);

/// Cross-field checks; throws ConfigError.
void validate(const SessionConfig& c);

/// "host:port", port may be 0.
Endpoint parse_endpoint(const std::string& text);
/// "http://host:port/path".
SourceConfig parse_http_url(const std::string& url);

}  // namespace txforge::config
