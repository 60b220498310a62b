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

#include "txforge/events.hpp"

namespace txforge {

const char* to_string(EventKind kind) {
  switch (kind) {
    case EventKind::kTransactionHash: return "transaction_hash";
    case EventKind::kReceipt: return "receipt";
    case EventKind::kConfirmation: return "confirmation";
    case EventKind::kChanged: return "changed";
    case EventKind::kNewBlock: return "new_block";
  }
  return "unknown";
}

std::optional<EventKind> event_kind_from_string(const std::string& name) {
  for (auto k : {EventKind::kTransactionHash, EventKind::kReceipt, EventKind::kConfirmation,
                 EventKind::kChanged, EventKind::kNewBlock})
    if (name == to_string(k)) return k;
  return std::nullopt;
}

std::optional<Hash256> event_tx(const ChainEvent& e) {
  return std::visit(
      [](const auto& ev) -> std::optional<Hash256> {
        if constexpr (std::is_same_v<std::decay_t<decltype(ev)>, NewBlockEvent>) {
          return std::nullopt;
        } else {
          return ev.tx_hash;
        }
      },
      e);
}

}  // namespace txforge
