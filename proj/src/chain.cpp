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

#include "txforge/chain.hpp"

#include <algorithm>
#include <charconv>
#include <set>
#include <unordered_set>

namespace txforge::chain {

namespace {

// Canonical byte encoding helpers (see docs/encoding.md).
void put_u8(std::string& out, std::uint8_t v) { out.push_back(static_cast<char>(v)); }

void put_u32(std::string& out, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) put_u8(out, static_cast<std::uint8_t>(v >> shift));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int shift = 56; shift >= 0; shift -= 8) put_u8(out, static_cast<std::uint8_t>(v >> shift));
}

void put_bytes(std::string& out, std::span<const std::uint8_t> bytes) {
  out.append(reinterpret_cast<const char*>(bytes.data()), bytes.size());
}

void put_str(std::string& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out += s;
}

void put_op(std::string& out, const StateOp& op) {
  std::visit(
      [&](const auto& o) {
        using T = std::decay_t<decltype(o)>;
        if constexpr (std::is_same_v<T, SetOp>) {
          put_u8(out, 0x01);
          put_str(out, o.key);
          put_str(out, o.value);
        } else if constexpr (std::is_same_v<T, DeleteOp>) {
          put_u8(out, 0x02);
          put_str(out, o.key);
        } else if constexpr (std::is_same_v<T, IncrementOp>) {
          put_u8(out, 0x03);
          put_str(out, o.key);
          put_u64(out, static_cast<std::uint64_t>(o.amount));
        } else {
          put_u8(out, 0x04);
        }
      },
      op);
}

void put_value(std::string& out, const Value& v) {
  if (const auto* i = std::get_if<std::int64_t>(&v)) {
    put_u8(out, 0x01);
    put_u64(out, static_cast<std::uint64_t>(*i));
  } else {
    put_u8(out, 0x02);
    put_str(out, std::get<std::string>(v));
  }
}

std::optional<std::int64_t> as_integer(const Value& v) {
  if (const auto* i = std::get_if<std::int64_t>(&v)) return *i;
  const auto& s = std::get<std::string>(v);
  std::int64_t parsed = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), parsed);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return parsed;
}

struct StateChange {
  std::string key;
  std::optional<Value> prior;
};

ExecutionStatus execute(OnChainState& state, const Address& target,
                        std::span<const StateOp> payload, std::vector<StateChange>* undo) {
  if (payload_has_fail(payload)) return ExecutionStatus::kFailed;

  const ContractState* contract = nullptr;
  if (auto it = state.contracts.find(target); it != state.contracts.end()) contract = &it->second;

  std::map<std::string, std::optional<Value>> overlay;
  auto current = [&](const std::string& key) -> std::optional<Value> {
    if (auto it = overlay.find(key); it != overlay.end()) return it->second;
    if (contract) {
      if (auto it = contract->find(key); it != contract->end()) return it->second;
    }
    return std::nullopt;
  };

  for (const auto& op : payload) {
    if (const auto* set = std::get_if<SetOp>(&op)) {
      overlay[set->key] = Value(set->value);
    } else if (const auto* del = std::get_if<DeleteOp>(&op)) {
      overlay[del->key] = std::nullopt;
    } else if (const auto* inc = std::get_if<IncrementOp>(&op)) {
      std::int64_t base = 0;
      if (auto cur = current(inc->key)) {
        auto parsed = as_integer(*cur);
        if (!parsed) return ExecutionStatus::kFailed;
        base = *parsed;
      }
      std::int64_t sum = 0;
      if (__builtin_add_overflow(base, inc->amount, &sum)) return ExecutionStatus::kFailed;
      overlay[inc->key] = Value(sum);
    }
  }

  if (overlay.empty()) return ExecutionStatus::kSuccess;
  auto& target_state = state.contracts[target];
  for (auto& [key, value] : overlay) {
    auto it = target_state.find(key);
    if (undo) {
      undo->push_back({key, it == target_state.end() ? std::nullopt
                                                     : std::optional<Value>(it->second)});
    }
    if (value) {
      target_state.insert_or_assign(key, std::move(*value));
    } else if (it != target_state.end()) {
      target_state.erase(it);
    }
  }
  if (target_state.empty()) state.contracts.erase(target);
  return ExecutionStatus::kSuccess;
}

}  // namespace

const Value* OnChainState::find(const Address& contract, const std::string& key) const {
  auto c = contracts.find(contract);
  if (c == contracts.end()) return nullptr;
  auto k = c->second.find(key);
  return k == c->second.end() ? nullptr : &k->second;
}

bool payload_has_fail(std::span<const StateOp> payload) {
  return std::any_of(payload.begin(), payload.end(),
                     [](const StateOp& op) { return std::holds_alternative<FailOp>(op); });
}

ExecutionStatus apply_payload(OnChainState& state, const Address& target,
                              std::span<const StateOp> payload) {
  return execute(state, target, payload, nullptr);
}

std::string encode_state(const OnChainState& state) {
  std::string out;
  put_u32(out, static_cast<std::uint32_t>(state.contracts.size()));
  for (const auto& [address, contract] : state.contracts) {
    put_bytes(out, address.span());
    put_u32(out, static_cast<std::uint32_t>(contract.size()));
    for (const auto& [key, value] : contract) {
      put_str(out, key);
      put_value(out, value);
    }
  }
  return out;
}

std::string render_value(const Value& v) {
  if (const auto* i = std::get_if<std::int64_t>(&v)) return std::to_string(*i);
  return std::get<std::string>(v);
}

Hash256 transaction_hash(const Address& sender, std::uint64_t nonce, const Address& target,
                         std::span<const StateOp> payload) {
  std::string buf = "txforge/tx/v1";
  put_bytes(buf, sender.span());
  put_u64(buf, nonce);
  put_bytes(buf, target.span());
  put_u32(buf, static_cast<std::uint32_t>(payload.size()));
  for (const auto& op : payload) put_op(buf, op);
  return sha256(buf);
}

Transaction Transaction::make(const Address& sender, std::uint64_t nonce, const Address& target,
                              std::vector<StateOp> payload, std::string tag) {
  Transaction tx;
  tx.sender = sender;
  tx.nonce = nonce;
  tx.target = target;
  tx.payload = std::move(payload);
  tx.tag = std::move(tag);
  tx.hash = transaction_hash(tx.sender, tx.nonce, tx.target, tx.payload);
  return tx;
}

Hash256 block_hash(const Hash256& parent_hash, std::uint64_t height,
                   std::span<const Transaction> transactions, std::uint64_t logical_timestamp) {
  std::string buf = "txforge/block/v1";
  put_bytes(buf, parent_hash.span());
  put_u64(buf, height);
  put_u64(buf, logical_timestamp);
  put_u32(buf, static_cast<std::uint32_t>(transactions.size()));
  for (const auto& tx : transactions) put_bytes(buf, tx.hash.span());
  return sha256(buf);
}

const char* to_string(ChainErrc code) {
  switch (code) {
    case ChainErrc::kUnknownParent: return "unknown parent";
    case ChainErrc::kUnknownBlock: return "unknown block";
    case ChainErrc::kTxNotInPool: return "not in pool";
    case ChainErrc::kDuplicateTxInRequest: return "duplicate transaction in request";
    case ChainErrc::kNonceGap: return "nonce gap";
    case ChainErrc::kInvalidForkHeight: return "invalid fork height";
    case ChainErrc::kTimestampNotMonotonic: return "timestamp not monotonic";
  }
  return "unknown";
}

const char* to_string(RejectReason reason) {
  switch (reason) {
    case RejectReason::kDuplicate: return "duplicate";
    case RejectReason::kNonceTooLow: return "nonce too low";
  }
  return "unknown";
}

const Block* choose_head(const Block* incumbent, std::span<const Block* const> candidates) {
  std::uint64_t max_height = incumbent ? incumbent->height : 0;
  for (const Block* b : candidates) max_height = std::max(max_height, b->height);
  if (incumbent && incumbent->height == max_height) return incumbent;
  const Block* best = nullptr;
  for (const Block* b : candidates) {
    if (b->height != max_height) continue;
    if (!best || b->hash < best->hash) best = b;
  }
  return best ? best : incumbent;
}

// ---------------------------------------------------------------------------

Chain::Chain() {
  Block genesis;
  genesis.hash = block_hash(genesis.parent_hash, 0, {}, 0);
  canonical_.push_back(genesis.hash);
  undo_.emplace(genesis.hash, BlockUndo{});
  blocks_.emplace(genesis.hash, std::move(genesis));
}

SubmitOutcome Chain::submit(const Transaction& tx) {
  if (tx.hash != transaction_hash(tx.sender, tx.nonce, tx.target, tx.payload))
    throw std::invalid_argument("transaction hash does not match its fields");
  if (pool_index_.contains(tx.hash) || tx_location_.contains(tx.hash))
    return SubmitOutcome::rejected(RejectReason::kDuplicate);
  if (auto next = next_nonce(tx.sender); next && tx.nonce < *next)
    return SubmitOutcome::rejected(RejectReason::kNonceTooLow);

  if (auto it = pool_.find(PoolKey{tx.sender, tx.nonce}); it != pool_.end()) {
    Hash256 old = it->second.tx.hash;
    pool_erase(old);
    pool_insert(tx);
    return SubmitOutcome::replaced_tx(old);
  }
  pool_insert(tx);
  return SubmitOutcome::accepted();
}

MineResult Chain::mine_block(const Hash256& parent, std::span<const Hash256> tx_hashes,
                             std::optional<std::uint64_t> logical_timestamp) {
  std::vector<Transaction> txs;
  txs.reserve(tx_hashes.size());
  std::unordered_set<Hash256, FixedBytesHasher> seen;
  for (const auto& h : tx_hashes) {
    if (!seen.insert(h).second)
      throw ChainError(ChainErrc::kDuplicateTxInRequest, h.to_hex());
    const Transaction* tx = find_pool_tx(h);
    if (!tx) throw ChainError(ChainErrc::kTxNotInPool, h.to_hex());
    txs.push_back(*tx);
  }
  const Block& block = append_block(parent, std::move(txs), logical_timestamp);
  MineResult result{block, std::nullopt};
  if (block.height > height()) result.update = switch_head(block.hash);
  return result;
}

ReorgReport Chain::reorganize(std::uint64_t fork_height,
                              std::span<const std::vector<Hash256>> competing_txs_per_block) {
  const std::uint64_t old_height = height();
  if (fork_height == 0 || fork_height > old_height)
    throw ChainError(ChainErrc::kInvalidForkHeight,
                     "fork height " + std::to_string(fork_height) + " with canonical height " +
                         std::to_string(old_height));

  auto resolve = [&](const Hash256& h) -> Transaction {
    if (const Transaction* tx = find_pool_tx(h)) return *tx;
    if (auto loc = location(h); loc && loc->height >= fork_height) {
      for (const auto& tx : blocks_.at(loc->block_hash).transactions)
        if (tx.hash == h) return tx;
    }
    throw ChainError(ChainErrc::kTxNotInPool, h.to_hex());
  };

  const std::size_t count = std::max<std::size_t>(competing_txs_per_block.size(),
                                                  old_height - fork_height + 2);
  Hash256 parent = canonical_.at(fork_height - 1);
  for (std::size_t i = 0; i < count; ++i) {
    std::vector<Transaction> txs;
    if (i < competing_txs_per_block.size()) {
      std::unordered_set<Hash256, FixedBytesHasher> seen;
      for (const auto& h : competing_txs_per_block[i]) {
        if (!seen.insert(h).second)
          throw ChainError(ChainErrc::kDuplicateTxInRequest, h.to_hex());
        txs.push_back(resolve(h));
      }
    }
    parent = append_block(parent, std::move(txs), std::nullopt).hash;
  }
  return switch_head(parent);
}

void Chain::drop(const Hash256& tx_hash) {
  if (!in_pool(tx_hash)) throw ChainError(ChainErrc::kTxNotInPool, tx_hash.to_hex());
  pool_erase(tx_hash);
}

OnChainState Chain::compute_state(const Hash256& head) const {
  std::vector<const Block*> path;
  const Block* cur = find_block(head);
  if (!cur) throw ChainError(ChainErrc::kUnknownBlock, head.to_hex());
  while (cur) {
    path.push_back(cur);
    cur = cur->height == 0 ? nullptr : find_block(cur->parent_hash);
  }
  OnChainState state;
  for (auto it = path.rbegin(); it != path.rend(); ++it)
    for (const auto& tx : (*it)->transactions) apply_payload(state, tx.target, tx.payload);
  return state;
}

std::optional<std::uint64_t> Chain::confirmations(const Hash256& tx_hash) const {
  auto it = tx_location_.find(tx_hash);
  if (it == tx_location_.end()) return std::nullopt;
  return height() - it->second.height;
}

const Block* Chain::find_block(const Hash256& hash) const {
  auto it = blocks_.find(hash);
  return it == blocks_.end() ? nullptr : &it->second;
}

bool Chain::is_canonical(const Hash256& block_hash) const {
  const Block* b = find_block(block_hash);
  return b && b->height < canonical_.size() && canonical_[b->height] == block_hash;
}

std::optional<TxLocation> Chain::location(const Hash256& tx_hash) const {
  auto it = tx_location_.find(tx_hash);
  if (it == tx_location_.end()) return std::nullopt;
  return it->second;
}

const Transaction* Chain::find_pool_tx(const Hash256& tx_hash) const {
  auto it = pool_index_.find(tx_hash);
  return it == pool_index_.end() ? nullptr : &pool_.at(it->second).tx;
}

std::vector<Transaction> Chain::pool_transactions() const {
  std::vector<Transaction> out;
  out.reserve(pool_order_.size());
  for (const auto& [seq, key] : pool_order_) out.push_back(pool_.at(key).tx);
  return out;
}

std::optional<std::uint64_t> Chain::next_nonce(const Address& sender) const {
  auto it = next_nonce_.find(sender);
  if (it == next_nonce_.end()) return std::nullopt;
  return it->second;
}

// ---------------------------------------------------------------------------

const Block& Chain::append_block(const Hash256& parent_hash, std::vector<Transaction> txs,
                                 std::optional<std::uint64_t> logical_timestamp) {
  const Block* parent = find_block(parent_hash);
  if (!parent) throw ChainError(ChainErrc::kUnknownParent, parent_hash.to_hex());
  check_nonces(*parent, txs);

  std::uint64_t ts = 0;
  if (logical_timestamp) {
    if (*logical_timestamp <= parent->logical_timestamp)
      throw ChainError(ChainErrc::kTimestampNotMonotonic,
                       std::to_string(*logical_timestamp) + " <= parent " +
                           std::to_string(parent->logical_timestamp));
    ts = *logical_timestamp;
  } else {
    ts = std::max(tick_, parent->logical_timestamp) + 1;
  }
  tick_ = std::max(tick_, ts);

  Block block;
  block.parent_hash = parent_hash;
  block.height = parent->height + 1;
  block.transactions = std::move(txs);
  block.logical_timestamp = ts;
  block.hash = block_hash(block.parent_hash, block.height, block.transactions, ts);
  auto [it, inserted] = blocks_.try_emplace(block.hash, std::move(block));
  return it->second;
}

void Chain::check_nonces(const Block& parent, std::span<const Transaction> txs) const {
  if (txs.empty()) return;
  std::map<Address, std::optional<std::uint64_t>> expected;
  for (const auto& tx : txs) expected.emplace(tx.sender, std::nullopt);

  if (parent.hash == head_hash()) {
    for (auto& [sender, next] : expected) next = next_nonce(sender);
  } else {
    std::size_t unresolved = expected.size();
    const Block* cur = &parent;
    while (cur && unresolved > 0) {
      for (auto it = cur->transactions.rbegin(); it != cur->transactions.rend(); ++it) {
        auto e = expected.find(it->sender);
        if (e != expected.end() && !e->second) {
          e->second = it->nonce + 1;
          --unresolved;
        }
      }
      cur = cur->height == 0 ? nullptr : find_block(cur->parent_hash);
    }
  }

  for (const auto& tx : txs) {
    auto& next = expected.at(tx.sender);
    if (next && tx.nonce != *next)
      throw ChainError(ChainErrc::kNonceGap, "sender " + tx.sender.to_hex() + " expected nonce " +
                                                 std::to_string(*next) + ", got " +
                                                 std::to_string(tx.nonce));
    next = tx.nonce + 1;
  }
}

HeadUpdate Chain::switch_head(const Hash256& new_head) {
  HeadUpdate update;
  update.old_head = head_hash();
  update.new_head = new_head;

  std::vector<const Block*> branch;
  const Block* cur = &blocks_.at(new_head);
  while (!is_canonical(cur->hash)) {
    branch.push_back(cur);
    cur = &blocks_.at(cur->parent_hash);
  }
  const Hash256 fork = cur->hash;
  std::reverse(branch.begin(), branch.end());

  std::vector<std::pair<Transaction, Hash256>> orphaned;
  while (head_hash() != fork) {
    Hash256 gone = head_hash();
    update.invalidated.push_back(gone);
    auto txs = disconnect_head();
    for (auto it = txs.rbegin(); it != txs.rend(); ++it) orphaned.emplace_back(*it, gone);
  }
  std::reverse(update.invalidated.begin(), update.invalidated.end());
  std::reverse(orphaned.begin(), orphaned.end());
  if (!update.invalidated.empty()) update.fork_point = fork;

  std::unordered_set<Hash256, FixedBytesHasher> orphaned_hashes;
  for (const auto& [tx, from] : orphaned) orphaned_hashes.insert(tx.hash);

  std::set<Address> touched;
  for (const Block* b : branch) {
    connect_block(*b);
    update.connected.push_back(b->hash);
    for (const auto& tx : b->transactions) {
      touched.insert(tx.sender);
      if (!orphaned_hashes.contains(tx.hash)) update.included.push_back(tx.hash);
    }
  }

  for (const auto& [tx, from] : orphaned) {
    if (tx_location_.contains(tx.hash)) continue;  // re-included on the new branch
    update.reversed_from.emplace(tx.hash, from);
    auto next = next_nonce(tx.sender);
    if ((next && tx.nonce < *next) || pool_.contains(PoolKey{tx.sender, tx.nonce})) {
      update.discarded.push_back(tx.hash);
      continue;
    }
    pool_insert(tx);
    update.reversed.push_back(tx.hash);
  }

  for (const auto& sender : touched) {
    const std::uint64_t next = next_nonce_.at(sender);
    auto it = pool_.lower_bound(PoolKey{sender, 0});
    std::vector<Hash256> stale;
    for (; it != pool_.end() && it->first.sender == sender && it->first.nonce < next; ++it)
      stale.push_back(it->second.tx.hash);
    for (const auto& h : stale) {
      pool_erase(h);
      update.discarded.push_back(h);
    }
  }
  return update;
}

void Chain::connect_block(const Block& block) {
  BlockUndo undo;
  for (const auto& tx : block.transactions) {
    undo.nonces.emplace_back(tx.sender, next_nonce(tx.sender));
    next_nonce_[tx.sender] = tx.nonce + 1;

    std::vector<StateChange> changes;
    ExecutionStatus status = execute(state_, tx.target, tx.payload, &changes);
    for (auto& c : changes) undo.state.push_back({tx.target, std::move(c.key), std::move(c.prior)});
    tx_location_[tx.hash] = TxLocation{block.hash, block.height, status};
    if (pool_index_.contains(tx.hash)) pool_erase(tx.hash);
  }
  canonical_.push_back(block.hash);
  undo_[block.hash] = std::move(undo);
}

std::vector<Transaction> Chain::disconnect_head() {
  const Block& block = blocks_.at(head_hash());
  auto node = undo_.extract(block.hash);
  BlockUndo& undo = node.mapped();
  for (auto it = undo.state.rbegin(); it != undo.state.rend(); ++it) {
    auto& contract = state_.contracts[it->contract];
    if (it->prior) {
      contract.insert_or_assign(it->key, *it->prior);
    } else {
      contract.erase(it->key);
    }
    if (contract.empty()) state_.contracts.erase(it->contract);
  }
  for (auto it = undo.nonces.rbegin(); it != undo.nonces.rend(); ++it) {
    if (it->second) {
      next_nonce_[it->first] = *it->second;
    } else {
      next_nonce_.erase(it->first);
    }
  }
  for (const auto& tx : block.transactions) tx_location_.erase(tx.hash);
  canonical_.pop_back();
  return block.transactions;
}

void Chain::pool_insert(const Transaction& tx) {
  PoolKey key{tx.sender, tx.nonce};
  const std::uint64_t seq = pool_seq_++;
  pool_.insert_or_assign(key, PoolEntry{tx, seq});
  pool_order_.emplace(seq, key);
  pool_index_.insert_or_assign(tx.hash, key);
}

void Chain::pool_erase(const Hash256& tx_hash) {
  auto idx = pool_index_.find(tx_hash);
  if (idx == pool_index_.end()) return;
  auto entry = pool_.find(idx->second);
  pool_order_.erase(entry->second.seq);
  pool_.erase(entry);
  pool_index_.erase(idx);
}

}  // namespace txforge::chain
