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

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

namespace txforge {

/// Fixed-width byte identifier rendered as 0x-prefixed lowercase hex.
template <std::size_t N, typename Tag>
class FixedBytes {
 public:
  static constexpr std::size_t kSize = N;

  constexpr FixedBytes() = default;
  explicit constexpr FixedBytes(const std::array<std::uint8_t, N>& bytes) : bytes_(bytes) {}

  /// Parses "0x" + 2N lowercase or uppercase hex digits. Throws std::invalid_argument.
  static FixedBytes from_hex(std::string_view text);

  std::string to_hex() const;

  const std::array<std::uint8_t, N>& bytes() const { return bytes_; }
  std::span<const std::uint8_t, N> span() const { return bytes_; }

  bool is_zero() const {
    for (auto b : bytes_)
      if (b != 0) return false;
    return true;
  }

  auto operator<=>(const FixedBytes&) const = default;
  bool operator==(const FixedBytes&) const = default;

 private:
  std::array<std::uint8_t, N> bytes_{};
};

namespace detail {

inline int hex_nibble(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

}  // namespace detail

template <std::size_t N, typename Tag>
FixedBytes<N, Tag> FixedBytes<N, Tag>::from_hex(std::string_view text) {
  if (text.size() != 2 + 2 * N || text[0] != '0' || (text[1] != 'x' && text[1] != 'X'))
    throw std::invalid_argument("expected 0x-prefixed hex of " + std::to_string(N) +
                                " bytes: '" + std::string(text) + "'");
  std::array<std::uint8_t, N> out{};
  for (std::size_t i = 0; i < N; ++i) {
    int hi = detail::hex_nibble(text[2 + 2 * i]);
    int lo = detail::hex_nibble(text[3 + 2 * i]);
    if (hi < 0 || lo < 0)
      throw std::invalid_argument("invalid hex digit in '" + std::string(text) + "'");
    out[i] = static_cast<std::uint8_t>((hi << 4) | lo);
  }
  return FixedBytes(out);
}

template <std::size_t N, typename Tag>
std::string FixedBytes<N, Tag>::to_hex() const {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 + 2 * N);
  out += "0x";
  for (auto b : bytes_) {
    out += kDigits[b >> 4];
    out += kDigits[b & 0x0f];
  }
  return out;
}

struct HashTag {};
struct AddressTag {};

using Hash256 = FixedBytes<32, HashTag>;
using Address = FixedBytes<20, AddressTag>;

/// SHA-256 of an arbitrary byte string.
Hash256 sha256(std::span<const std::uint8_t> data);
Hash256 sha256(std::string_view data);

struct FixedBytesHasher {
  template <std::size_t N, typename Tag>
  std::size_t operator()(const FixedBytes<N, Tag>& v) const noexcept {
    std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
    for (auto b : v.bytes()) {
      h ^= b;
      h *= 1099511628211ULL;
    }
    return static_cast<std::size_t>(h);
  }
};

}  // namespace txforge
