#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <cstring>
#include <optional>
#include <string>
#include <string_view>

namespace crowdsense {

/// 128-bit anonymized identifier. The tag keeps device and user hashes from
/// being mixed up at compile time.
template <class Tag> struct Hash128 {
  std::array<std::uint8_t, 16> bytes{};

  std::string hex() const {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string out(32, '0');
    for (std::size_t i = 0; i < bytes.size(); ++i) {
      out[2 * i] = kDigits[bytes[i] >> 4];
      out[2 * i + 1] = kDigits[bytes[i] & 0x0f];
    }
    return out;
  }

  /// Accepts exactly 32 lowercase hex digits.
  static std::optional<Hash128> from_hex(std::string_view text) {
    if (text.size() != 32) {
      return std::nullopt;
    }
    auto nibble = [](char c) -> int {
      if (c >= '0' && c <= '9') return c - '0';
      if (c >= 'a' && c <= 'f') return c - 'a' + 10;
      return -1;
    };
    Hash128 h;
    for (std::size_t i = 0; i < 16; ++i) {
      const int hi = nibble(text[2 * i]);
      const int lo = nibble(text[2 * i + 1]);
      if (hi < 0 || lo < 0) {
        return std::nullopt;
      }
      h.bytes[i] = static_cast<std::uint8_t>((hi << 4) | lo);
    }
    return h;
  }

  std::uint64_t prefix64() const {
    std::uint64_t v;
    std::memcpy(&v, bytes.data(), sizeof v);
    return v;
  }

  auto operator<=>(const Hash128 &) const = default;
  bool operator==(const Hash128 &) const = default;
};

struct DeviceTag {};
struct UserTag {};
using DeviceHash = Hash128<DeviceTag>;
using UserHash = Hash128<UserTag>;

struct Hash128Hasher {
  template <class Tag> std::size_t operator()(const Hash128<Tag> &h) const noexcept {
    // Already uniformly distributed; no need to mix.
    return static_cast<std::size_t>(h.prefix64());
  }
};

} // namespace crowdsense
