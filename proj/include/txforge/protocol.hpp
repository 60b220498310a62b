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

// JSON encodings of the node wire protocol. docs/protocol.md is the
// normative description; field names are snake_case and every hash or
// address is 0x-prefixed lowercase hex.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "txforge/chain.hpp"
#include "txforge/events.hpp"
#include "txforge/node.hpp"

namespace txforge::protocol {

using json = nlohmann::json;

/// Malformed message; the text is suitable for an error response.
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

json to_json(const chain::StateOp& op);
chain::StateOp op_from_json(const json& j);

json to_json(const chain::Value& v);
chain::Value value_from_json(const json& j);

/// {"tx_hash", "sender", "nonce", "target", "payload", "tag"}
json to_json(const chain::Transaction& tx);
/// Accepts the submission body; any "tx_hash" present is ignored and
/// recomputed from the fields.
chain::Transaction transaction_from_json(const json& j);

json to_json(const ChainEvent& e);
ChainEvent event_from_json(const json& j);

json to_json(const node::Delivery& d);
node::Delivery delivery_from_json(const json& j);

json to_json(const node::TxStatus& s);
json to_json(const node::EventFilter& f);
node::EventFilter filter_from_json(const json& j);

// Length-delimited framing for the event stream: a 4-byte big-endian byte
// count followed by that many bytes of UTF-8 JSON.
inline constexpr std::size_t kMaxFrameBytes = 16u << 20;

std::string encode_frame(std::string_view payload);

class FrameDecoder {
 public:
  /// Appends raw bytes; throws ProtocolError on an oversized frame.
  void feed(std::string_view bytes);
  /// Next complete frame payload, if one is buffered.
  std::optional<std::string> next();
  std::size_t buffered() const { return buffer_.size(); }

 private:
  std::string buffer_;
};

}  // namespace txforge::protocol
