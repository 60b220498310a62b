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
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "txforge/types.hpp"

namespace txforge::chain {

// ---------------------------------------------------------------------------
// State operations and on-chain state
// ---------------------------------------------------------------------------

struct SetOp {
  std::string key;
  std::string value;
  bool operator==(const SetOp&) const = default;
};

struct DeleteOp {
  std::string key;
  bool operator==(const DeleteOp&) const = default;
};

struct IncrementOp {
  std::string key;
  std::int64_t amount = 0;
  bool operator==(const IncrementOp&) const = default;
};

/// Marks the whole transaction as reverting.
struct FailOp {
  bool operator==(const FailOp&) const = default;
};

using StateOp = std::variant<SetOp, DeleteOp, IncrementOp, FailOp>;

/// Stored values are either 64-bit signed integers or strings.
using Value = std::variant<std::int64_t, std::string>;

using ContractState = std::map<std::string, Value>;

struct OnChainState {
  std::map<Address, ContractState> contracts;

  bool operator==(const OnChainState&) const = default;

  /// Returns nullptr when the contract or key is absent.
  const Value* find(const Address& contract, const std::string& key) const;
};

enum class ExecutionStatus { kSuccess, kFailed };

/// Applies `payload` to `state` atomically. A payload that contains FailOp,
/// increments a non-integer value, or overflows leaves `state` untouched and
/// reports kFailed.
ExecutionStatus apply_payload(OnChainState& state, const Address& target,
                              std::span<const StateOp> payload);

/// Canonical byte encoding of a state, suitable for bit-exact comparison.
std::string encode_state(const OnChainState& state);

std::string render_value(const Value& v);

// ---------------------------------------------------------------------------
// Transactions and blocks
// ---------------------------------------------------------------------------

struct Transaction {
  Hash256 hash;
  Address sender;
  std::uint64_t nonce = 0;
  Address target;
  std::vector<StateOp> payload;
  /// Label of the originating DApp functionality; not part of the hash.
  std::string tag;

  /// Builds a transaction and fills in its hash.
  static Transaction make(const Address& sender, std::uint64_t nonce, const Address& target,
                          std::vector<StateOp> payload, std::string tag = {});

  bool operator==(const Transaction&) const = default;
};

Hash256 transaction_hash(const Address& sender, std::uint64_t nonce, const Address& target,
                         std::span<const StateOp> payload);

bool payload_has_fail(std::span<const StateOp> payload);

struct Block {
  Hash256 hash;
  Hash256 parent_hash;
  std::uint64_t height = 0;
  std::vector<Transaction> transactions;
  std::uint64_t logical_timestamp = 0;
};

Hash256 block_hash(const Hash256& parent_hash, std::uint64_t height,
                   std::span<const Transaction> transactions, std::uint64_t logical_timestamp);

// ---------------------------------------------------------------------------
// Errors and outcomes
// ---------------------------------------------------------------------------

enum class ChainErrc {
  kUnknownParent,
  kUnknownBlock,
  kTxNotInPool,
  kDuplicateTxInRequest,
  kNonceGap,
  kInvalidForkHeight,
  kTimestampNotMonotonic,
};

const char* to_string(ChainErrc code);

class ChainError : public std::runtime_error {
 public:
  ChainError(ChainErrc code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}
  ChainErrc code() const { return code_; }

 private:
  ChainErrc code_;
};

enum class RejectReason {
  kDuplicate,    // hash already in the pool or on the canonical chain
  kNonceTooLow,  // (sender, nonce) already consumed on the canonical chain
};

const char* to_string(RejectReason reason);

struct SubmitOutcome {
  enum class Kind { kAccepted, kReplaced, kRejected };
  Kind kind = Kind::kAccepted;
  std::optional<Hash256> replaced;      // kReplaced
  std::optional<RejectReason> reason;   // kRejected

  static SubmitOutcome accepted() { return {}; }
  static SubmitOutcome replaced_tx(const Hash256& old) { return {Kind::kReplaced, old, {}}; }
  static SubmitOutcome rejected(RejectReason r) { return {Kind::kRejected, {}, r}; }
};

/// What changed when the canonical head moved. For a plain extension only
/// `connected` and `included` are populated.
struct HeadUpdate {
  Hash256 old_head;
  Hash256 new_head;
  std::optional<Hash256> fork_point;          // set when blocks were invalidated
  std::vector<Hash256> invalidated;           // old canonical blocks, ascending height
  std::vector<Hash256> connected;             // newly canonical blocks, ascending height
  std::vector<Hash256> included;              // txs in `connected` that were not canonical before
  std::vector<Hash256> reversed;              // txs put back into the pool
  std::map<Hash256, Hash256> reversed_from;   // reversed tx -> the invalidated block it lived in
  std::vector<Hash256> discarded;             // orphaned or pooled txs whose nonce slot is now taken

  bool is_reorg() const { return !invalidated.empty(); }
};

using ReorgReport = HeadUpdate;

struct MineResult {
  Block block;
  /// Set when the new block became the canonical head.
  std::optional<HeadUpdate> update;
};

struct TxLocation {
  Hash256 block_hash;
  std::uint64_t height = 0;
  ExecutionStatus status = ExecutionStatus::kSuccess;
};

/// Deterministic head choice over a set of blocks: keep the incumbent while
/// it has maximal height, otherwise the lexicographically smallest hash among
/// the highest candidates.
const Block* choose_head(const Block* incumbent, std::span<const Block* const> candidates);

// ---------------------------------------------------------------------------
// Chain: block tree + transaction pool + incrementally maintained state
// ---------------------------------------------------------------------------

/// Single-writer simulated blockchain. Mutations must be serialized by the
/// owner; const members are safe to call concurrently on an unchanging chain.
class Chain {
 public:
  Chain();

  // Mutations ---------------------------------------------------------------

  SubmitOutcome submit(const Transaction& tx);

  /// Mines a block on `parent` holding the given pool transactions. A block
  /// that does not become canonical leaves the pool unchanged.
  MineResult mine_block(const Hash256& parent, std::span<const Hash256> tx_hashes,
                        std::optional<std::uint64_t> logical_timestamp = std::nullopt);

  /// Orphans the canonical blocks at heights >= fork_height by mining a
  /// strictly longer branch from the canonical block at fork_height - 1.
  /// Each entry of `competing_txs_per_block` names transactions (from the
  /// pool or from the orphaned segment) for one competing block; the branch
  /// is padded with empty blocks until it outgrows the old head.
  ReorgReport reorganize(std::uint64_t fork_height,
                         std::span<const std::vector<Hash256>> competing_txs_per_block = {});

  /// Silently removes a transaction from the pool.
  void drop(const Hash256& tx_hash);

  // Queries -----------------------------------------------------------------

  /// Pure re-fold of payloads along genesis -> head.
  OnChainState compute_state(const Hash256& head) const;

  std::optional<std::uint64_t> confirmations(const Hash256& tx_hash) const;

  const OnChainState& state() const { return state_; }
  const Hash256& genesis_hash() const { return canonical_.front(); }
  const Hash256& head_hash() const { return canonical_.back(); }
  const Block& head() const { return blocks_.at(head_hash()); }
  std::uint64_t height() const { return canonical_.size() - 1; }

  const Block* find_block(const Hash256& hash) const;
  const Hash256& canonical_at(std::uint64_t height) const { return canonical_.at(height); }
  bool is_canonical(const Hash256& block_hash) const;
  std::size_t block_count() const { return blocks_.size(); }

  std::optional<TxLocation> location(const Hash256& tx_hash) const;
  bool in_pool(const Hash256& tx_hash) const { return pool_index_.contains(tx_hash); }
  const Transaction* find_pool_tx(const Hash256& tx_hash) const;
  /// Pool contents in insertion order.
  std::vector<Transaction> pool_transactions() const;
  std::size_t pool_size() const { return pool_index_.size(); }

  /// Next nonce a sender must use on the canonical chain, if it has sent any.
  std::optional<std::uint64_t> next_nonce(const Address& sender) const;

 private:
  struct PoolKey {
    Address sender;
    std::uint64_t nonce = 0;
    auto operator<=>(const PoolKey&) const = default;
  };
  struct PoolEntry {
    Transaction tx;
    std::uint64_t seq = 0;
  };
  struct StateUndo {
    Address contract;
    std::string key;
    std::optional<Value> prior;
  };
  struct BlockUndo {
    std::vector<StateUndo> state;
    std::vector<std::pair<Address, std::optional<std::uint64_t>>> nonces;
  };

  const Block& append_block(const Hash256& parent, std::vector<Transaction> txs,
                            std::optional<std::uint64_t> logical_timestamp);
  void check_nonces(const Block& parent, std::span<const Transaction> txs) const;
  HeadUpdate switch_head(const Hash256& new_head);
  void connect_block(const Block& block);
  std::vector<Transaction> disconnect_head();

  void pool_insert(const Transaction& tx);
  void pool_erase(const Hash256& tx_hash);

  std::unordered_map<Hash256, Block, FixedBytesHasher> blocks_;
  std::vector<Hash256> canonical_;  // index == height
  std::unordered_map<Hash256, TxLocation, FixedBytesHasher> tx_location_;
  std::unordered_map<Hash256, BlockUndo, FixedBytesHasher> undo_;
  std::unordered_map<Address, std::uint64_t, FixedBytesHasher> next_nonce_;
  OnChainState state_;
  std::uint64_t tick_ = 0;

  std::map<PoolKey, PoolEntry> pool_;
  std::map<std::uint64_t, PoolKey> pool_order_;
  std::unordered_map<Hash256, PoolKey, FixedBytesHasher> pool_index_;
  std::uint64_t pool_seq_ = 0;
};

}  // namespace txforge::chain
