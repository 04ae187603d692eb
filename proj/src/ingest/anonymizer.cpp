#include "crowdsense/ingest/anonymizer.hpp"

#include "crowdsense/core/error.hpp"

#include <openssl/evp.h>
#include <openssl/hmac.h>

#include <algorithm>

namespace crowdsense::ingest {

std::array<std::uint8_t, 16> keyed_hash128(std::string_view salt, std::string_view id) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  HMAC(EVP_sha256(), salt.data(), static_cast<int>(salt.size()),
       reinterpret_cast<const unsigned char *>(id.data()), id.size(), digest, &len);
  std::array<std::uint8_t, 16> out{};
  std::copy_n(digest, out.size(), out.begin());
  return out;
}

Anonymizer::Anonymizer(std::string salt) : salt_(std::move(salt)) {
  if (salt_.empty()) {
    throw ValidationError("anonymization salt must not be empty");
  }
}

DeviceHash Anonymizer::device_hash(std::string_view mac) {
  const std::string key(mac);
  if (auto it = devices_.find(key); it != devices_.end()) return it->second;
  DeviceHash h{keyed_hash128(salt_, mac)};
  devices_.emplace(key, h);
  return h;
}

UserHash Anonymizer::user_hash(std::string_view user_id) {
  const std::string key(user_id);
  if (auto it = users_.find(key); it != users_.end()) return it->second;
  UserHash h{keyed_hash128(salt_, user_id)};
  users_.emplace(key, h);
  return h;
}

AnonRecord Anonymizer::anonymize(const RawRecord &r) {
  return AnonRecord{r.timestamp, device_hash(r.mac), user_hash(r.user_id),
                    Symbol::intern(r.ap_name), Symbol::intern(r.network_name)};
}

void Anonymizer::clear_cache() {
  devices_.clear();
  users_.clear();
}

AnonRecord anonymize(const RawRecord &record, std::string_view salt) {
  if (salt.empty()) {
    throw ValidationError("anonymization salt must not be empty");
  }
  return AnonRecord{record.timestamp, DeviceHash{keyed_hash128(salt, record.mac)},
                    UserHash{keyed_hash128(salt, record.user_id)},
                    Symbol::intern(record.ap_name), Symbol::intern(record.network_name)};
}

} // namespace crowdsense::ingest
