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
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "txforge/config.hpp"
#include "txforge/oracle.hpp"

namespace txforge::session {

using json = nlohmann::json;

inline constexpr const char* kLogVersion = "txforge-log/1";
inline constexpr const char* kReportVersion = "txforge-report/1";

/// Operational failure: unreachable source, bad log, replay divergence.
class SessionError : public std::runtime_error {
 public:
  enum class Kind { kSource, kCorrupt, kVersion, kDiverged, kConfig };
  SessionError(Kind kind, const std::string& message) : std::runtime_error(message), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct RunOptions {
  /// JSONL session log; nothing is recorded when unset.
  std::optional<std::filesystem::path> log_path;
  /// Polled between transactions; returning true ends the session early.
  std::function<bool()> stop;
  /// External DApps: keep waiting for submissions, ignoring the idle timeout
  /// and the transaction limit.
  bool serve = false;
  std::function<void(const std::string&)> progress;
};

struct SessionResult {
  config::SessionConfig config;
  /// Submission order across all runs.
  std::vector<oracle::TransactionReport> reports;
  /// Repetition index of each report.
  std::vector<std::size_t> runs;
  std::uint64_t reorgs = 0;
  json report;

  bool has_violations() const;
  /// 0 clean, 2 violations.
  int exit_code() const { return has_violations() ? 2 : 0; }
};

SessionResult run_session(const config::SessionConfig& config, const RunOptions& options = {});

struct SessionLog {
  json config;
  std::uint64_t seed = 0;
  std::vector<json> records;
};

/// Throws SessionError (kVersion, kCorrupt).
SessionLog read_log(const std::filesystem::path& path);

/// Re-executes the logged chain transitions and re-analyzes with the logged
/// snapshots. Throws SessionError on a corrupt log or diverging replay.
SessionResult replay(const std::filesystem::path& log_path, const RunOptions& options = {});

/// The report document. Contains no wall-clock data.
json build_report(const config::SessionConfig& config, const std::vector<oracle::TransactionReport>& reports,
                  const std::vector<std::size_t>& runs, const std::vector<std::string>& declared_tags,
                  std::uint64_t reorgs);

/// Human summary rendered from a report document.
std::string render_summary(const json& report);

/// Writes report.json and summary.txt into `dir`.
void write_outputs(const SessionResult& result, const std::filesystem::path& dir);

}  // namespace txforge::session
