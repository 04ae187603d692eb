#pragma once

#include "crowdsense/ingest/records.hpp"

#include <string>
#include <string_view>
#include <unordered_map>

namespace crowdsense::ingest {

/// Keyed hash of an identifier: HMAC-SHA256(salt, id) truncated to 128 bits.
std::array<std::uint8_t, 16> keyed_hash128(std::string_view salt, std::string_view id);

/// Anonymizes controller records with a secret salt. Memoizes identifiers it
/// has already seen, since the same devices reappear every sample.
/// Not thread-safe; use one instance per ingest loop.
class Anonymizer {
public:
  /// Throws ValidationError on an empty salt.
  explicit Anonymizer(std::string salt);

  DeviceHash device_hash(std::string_view mac);
  UserHash user_hash(std::string_view user_id);
  AnonRecord anonymize(const RawRecord &record);

  void clear_cache();

private:
  std::string salt_;
  std::unordered_map<std::string, DeviceHash> devices_;
  std::unordered_map<std::string, UserHash> users_;
};

/// Stateless convenience form.
AnonRecord anonymize(const RawRecord &record, std::string_view salt);

} // namespace crowdsense::ingest
