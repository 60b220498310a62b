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

#include "txforge/protocol.hpp"

namespace txforge::protocol {

namespace {

template <typename T>
T parse_hex(const json& j, const char* field) {
  if (!j.contains(field) || !j.at(field).is_string())
    throw ProtocolError(std::string("missing or non-string field '") + field + "'");
  try {
    return T::from_hex(j.at(field).get<std::string>());
  } catch (const std::invalid_argument& e) {
    throw ProtocolError(std::string("field '") + field + "': " + e.what());
  }
}

const std::string& require_string(const json& j, const char* field) {
  if (!j.contains(field) || !j.at(field).is_string())
    throw ProtocolError(std::string("missing or non-string field '") + field + "'");
  return j.at(field).get_ref<const std::string&>();
}

std::int64_t require_int(const json& j, const char* field) {
  if (!j.contains(field) || !j.at(field).is_number_integer())
    throw ProtocolError(std::string("missing or non-integer field '") + field + "'");
  if (j.at(field).is_number_unsigned() &&
      j.at(field).get<std::uint64_t>() > static_cast<std::uint64_t>(INT64_MAX))
    throw ProtocolError(std::string("field '") + field + "' out of range");
  return j.at(field).get<std::int64_t>();
}

}  // namespace

json to_json(const chain::StateOp& op) {
  return std::visit(
      [](const auto& o) -> json {
        using T = std::decay_t<decltype(o)>;
        if constexpr (std::is_same_v<T, chain::SetOp>) {
          return {{"op", "set"}, {"key", o.key}, {"value", o.value}};
        } else if constexpr (std::is_same_v<T, chain::DeleteOp>) {
          return {{"op", "delete"}, {"key", o.key}};
        } else if constexpr (std::is_same_v<T, chain::IncrementOp>) {
          return {{"op", "increment"}, {"key", o.key}, {"amount", o.amount}};
        } else {
          return {{"op", "fail"}};
        }
      },
      op);
}

chain::StateOp op_from_json(const json& j) {
  if (!j.is_object()) throw ProtocolError("payload entries must be objects");
  const std::string& op = require_string(j, "op");
  if (op == "set") return chain::SetOp{require_string(j, "key"), require_string(j, "value")};
  if (op == "delete") return chain::DeleteOp{require_string(j, "key")};
  if (op == "increment") return chain::IncrementOp{require_string(j, "key"), require_int(j, "amount")};
  if (op == "fail") return chain::FailOp{};
  throw ProtocolError("unknown op '" + op + "'");
}

json to_json(const chain::Value& v) {
  if (const auto* i = std::get_if<std::int64_t>(&v)) return *i;
  return std::get<std::string>(v);
}

chain::Value value_from_json(const json& j) {
  if (j.is_string()) return j.get<std::string>();
  if (j.is_number_integer()) return j.get<std::int64_t>();
  throw ProtocolError("values are strings or integers");
}

json to_json(const chain::Transaction& tx) {
  json payload = json::array();
  for (const auto& op : tx.payload) payload.push_back(to_json(op));
  return {{"tx_hash", tx.hash.to_hex()},
          {"sender", tx.sender.to_hex()},
          {"nonce", tx.nonce},
          {"target", tx.target.to_hex()},
          {"payload", std::move(payload)},
          {"tag", tx.tag}};
}

chain::Transaction transaction_from_json(const json& j) {
  if (!j.is_object()) throw ProtocolError("transaction must be an object");
  const Address sender = parse_hex<Address>(j, "sender");
  const Address target = parse_hex<Address>(j, "target");
  const std::int64_t nonce = require_int(j, "nonce");
  if (nonce < 0) throw ProtocolError("nonce must be non-negative");
  if (!j.contains("payload") || !j.at("payload").is_array())
    throw ProtocolError("missing array field 'payload'");
  std::vector<chain::StateOp> payload;
  for (const auto& op : j.at("payload")) payload.push_back(op_from_json(op));
  std::string tag;
  if (j.contains("tag") && !j.at("tag").is_null()) tag = require_string(j, "tag");
  return chain::Transaction::make(sender, static_cast<std::uint64_t>(nonce), target,
                                  std::move(payload), std::move(tag));
}

json to_json(const ChainEvent& e) {
  json j = std::visit(
      [](const auto& ev) -> json {
        using T = std::decay_t<decltype(ev)>;
        if constexpr (std::is_same_v<T, TransactionHashEvent>) {
          return {{"tx_hash", ev.tx_hash.to_hex()}};
        } else if constexpr (std::is_same_v<T, ReceiptEvent>) {
          return {{"tx_hash", ev.tx_hash.to_hex()},
                  {"block_hash", ev.block_hash.to_hex()},
                  {"status", ev.success ? "success" : "failed"}};
        } else if constexpr (std::is_same_v<T, ConfirmationEvent>) {
          return {{"tx_hash", ev.tx_hash.to_hex()}, {"count", ev.count}};
        } else if constexpr (std::is_same_v<T, ChangedEvent>) {
          return {{"tx_hash", ev.tx_hash.to_hex()},
                  {"orphaned_block_hash", ev.orphaned_block_hash.to_hex()}};
        } else {
          return {{"block_hash", ev.block_hash.to_hex()}, {"height", ev.height}};
        }
      },
      e);
  j["type"] = to_string(kind_of(e));
  return j;
}

ChainEvent event_from_json(const json& j) {
  if (!j.is_object()) throw ProtocolError("event must be an object");
  const std::string& type = require_string(j, "type");
  auto kind = event_kind_from_string(type);
  if (!kind) throw ProtocolError("unknown event type '" + type + "'");
  switch (*kind) {
    case EventKind::kTransactionHash:
      return TransactionHashEvent{parse_hex<Hash256>(j, "tx_hash")};
    case EventKind::kReceipt: {
      const std::string& status = require_string(j, "status");
      if (status != "success" && status != "failed") throw ProtocolError("bad receipt status");
      return ReceiptEvent{parse_hex<Hash256>(j, "tx_hash"), parse_hex<Hash256>(j, "block_hash"),
                          status == "success"};
    }
    case EventKind::kConfirmation:
      return ConfirmationEvent{parse_hex<Hash256>(j, "tx_hash"),
                               static_cast<std::uint64_t>(require_int(j, "count"))};
    case EventKind::kChanged:
      return ChangedEvent{parse_hex<Hash256>(j, "tx_hash"),
                          parse_hex<Hash256>(j, "orphaned_block_hash")};
    case EventKind::kNewBlock:
      return NewBlockEvent{parse_hex<Hash256>(j, "block_hash"),
                           static_cast<std::uint64_t>(require_int(j, "height"))};
  }
  throw ProtocolError("unreachable event kind");
}

json to_json(const node::Delivery& d) {
  if (const auto* lag = std::get_if<node::LaggedNotice>(&d))
    return {{"type", "lagged"}, {"missed", lag->missed}};
  const auto& se = std::get<node::SequencedEvent>(d);
  json j = to_json(se.event);
  j["seq"] = se.seq;
  return j;
}

node::Delivery delivery_from_json(const json& j) {
  if (j.is_object() && j.value("type", "") == "lagged")
    return node::LaggedNotice{static_cast<std::uint64_t>(require_int(j, "missed"))};
  return node::SequencedEvent{static_cast<std::uint64_t>(require_int(j, "seq")),
                              event_from_json(j)};
}

json to_json(const node::TxStatus& s) {
  return {{"lifecycle_state", s.lifecycle_state},
          {"confirmations", s.confirmations},
          {"block_hash", s.block_hash ? json(s.block_hash->to_hex()) : json(nullptr)}};
}

json to_json(const node::EventFilter& f) {
  switch (f.kind) {
    case node::EventFilter::Kind::kAll: return {{"kind", "all"}};
    case node::EventFilter::Kind::kTx: return {{"kind", "tx"}, {"tx_hash", f.tx.to_hex()}};
    case node::EventFilter::Kind::kEventKind:
      return {{"kind", "event"}, {"event", to_string(f.event_kind)}};
  }
  return {};
}

node::EventFilter filter_from_json(const json& j) {
  if (j.is_null()) return node::EventFilter::all();
  if (!j.is_object()) throw ProtocolError("filter must be an object");
  const std::string kind = j.value("kind", "all");
  if (kind == "all") return node::EventFilter::all();
  if (kind == "tx") return node::EventFilter::by_tx(parse_hex<Hash256>(j, "tx_hash"));
  if (kind == "event") {
    auto k = event_kind_from_string(require_string(j, "event"));
    if (!k) throw ProtocolError("unknown event kind in filter");
    return node::EventFilter::by_kind(*k);
  }
  throw ProtocolError("unknown filter kind '" + kind + "'");
}

std::string encode_frame(std::string_view payload) {
  if (payload.size() > kMaxFrameBytes) throw ProtocolError("frame too large");
  std::string out;
  out.reserve(4 + payload.size());
  const auto n = static_cast<std::uint32_t>(payload.size());
  out.push_back(static_cast<char>((n >> 24) & 0xff));
  out.push_back(static_cast<char>((n >> 16) & 0xff));
  out.push_back(static_cast<char>((n >> 8) & 0xff));
  out.push_back(static_cast<char>(n & 0xff));
  out.append(payload);
  return out;
}

void FrameDecoder::feed(std::string_view bytes) { buffer_.append(bytes); }

std::optional<std::string> FrameDecoder::next() {
  if (buffer_.size() < 4) return std::nullopt;
  std::uint32_t n = 0;
  for (int i = 0; i < 4; ++i) n = (n << 8) | static_cast<std::uint8_t>(buffer_[i]);
  if (n > kMaxFrameBytes) throw ProtocolError("frame too large");
  if (buffer_.size() < 4 + static_cast<std::size_t>(n)) return std::nullopt;
  std::string payload = buffer_.substr(4, n);
  buffer_.erase(0, 4 + static_cast<std::size_t>(n));
  return payload;
}

}  // namespace txforge::protocol
