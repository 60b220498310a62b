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

// Brute-force reference for the two assertions, shared by the unit tests
// and the acceptance suite. Each of the six traversal stages holds one of
// three values: absent, document X or document Y.

#include <array>
#include <functional>
#include <utility>

#include "txforge/oracle.hpp"

namespace testing_ref {

using txforge::oracle::Outcome;
using S = txforge::lifecycle::LifecycleState;

/// Stage order: created, pending, executed#1, reversed, executed#2, finalized.
using Assignment = std::array<int, 6>;  // 0 absent, 1 X, 2 Y

inline constexpr std::array<std::pair<S, std::uint32_t>, 6> kStages{{
    {S::kCreated, 1}, {S::kPending, 1}, {S::kExecuted, 1},
    {S::kReversed, 1}, {S::kExecuted, 2}, {S::kFinalized, 1}}};

inline void for_each_assignment(const std::function<void(const Assignment&)>& f) {
  Assignment a{};
  for (int code = 0; code < 729; ++code) {
    int c = code;
    for (int i = 0; i < 6; ++i) {
      a[i] = c % 3;
      c /= 3;
    }
    f(a);
  }
}

inline txforge::snapshot::TransactionSnapshotTrace to_trace(const Assignment& a, const std::string& rules) {
  using txforge::snapshot::json;
  txforge::snapshot::TransactionSnapshotTrace t;
  t.tx_hash = txforge::sha256(std::string_view("reference"));
  for (int i = 0; i < 6; ++i) {
    if (a[i] == 0) continue;
    json doc = a[i] == 1 ? json{{"v", 1}} : json{{"v", 2}};
    auto [s, visit] = kStages[i];
    t.snapshots[{s, visit}] = {t.tx_hash, s, visit, 0, rules, doc};
  }
  return t;
}

/// Direct transcription of the two implications over stage values.
inline std::pair<Outcome, Outcome> expected(const Assignment& a) {
  const int c = a[0], p = a[1], r = a[3], f = a[5];
  Outcome one;
  if (c == 0 || p == 0 || f == 0) {
    one = Outcome::kInconclusive;
  } else {
    const bool premise = c != f;
    const bool conclusion = p != f;
    one = (!premise || conclusion) ? Outcome::kPass : Outcome::kViolation;
  }
  Outcome two;
  if (p == 0 || r == 0) {
    two = Outcome::kInconclusive;
  } else {
    two = p == r ? Outcome::kPass : Outcome::kViolation;
  }
  return {one, two};
}

}  // namespace testing_ref
