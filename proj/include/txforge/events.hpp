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
#include <optional>
#include <string>
#include <variant>

#include "txforge/types.hpp"

namespace txforge {

/// Emitted on the first entry into Pending only.
struct TransactionHashEvent {
  Hash256 tx_hash;
  bool operator==(const TransactionHashEvent&) const = default;
};

/// Emitted on each entry into Executed.
struct ReceiptEvent {
  Hash256 tx_hash;
  Hash256 block_hash;
  bool success = true;
  bool operator==(const ReceiptEvent&) const = default;
};

/// One per canonical block mined atop the transaction's block, counts 1..K.
struct ConfirmationEvent {
  Hash256 tx_hash;
  std::uint64_t count = 0;
  bool operator==(const ConfirmationEvent&) const = default;
};

/// Emitted on entry into Reversed.
struct ChangedEvent {
  Hash256 tx_hash;
  Hash256 orphaned_block_hash;
  bool operator==(const ChangedEvent&) const = default;
};

struct NewBlockEvent {
  Hash256 block_hash;
  std::uint64_t height = 0;
  bool operator==(const NewBlockEvent&) const = default;
};

// There is deliberately no event for Dropped.
using ChainEvent =
    std::variant<TransactionHashEvent, ReceiptEvent, ConfirmationEvent, ChangedEvent, NewBlockEvent>;

enum class EventKind { kTransactionHash, kReceipt, kConfirmation, kChanged, kNewBlock };

inline EventKind kind_of(const ChainEvent& e) { return static_cast<EventKind>(e.index()); }

const char* to_string(EventKind kind);
std::optional<EventKind> event_kind_from_string(const std::string& name);

/// The transaction an event concerns; NewBlock concerns none.
std::optional<Hash256> event_tx(const ChainEvent& e);

/// Receives events in emission order from the lifecycle controller.
class EventSink {
 public:
  virtual ~EventSink() = default;
  virtual void publish(const ChainEvent& event) = 0;
};

}  // namespace txforge
