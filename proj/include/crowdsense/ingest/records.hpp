#pragma once

#include "crowdsense/core/hash128.hpp"
#include "crowdsense/core/symbol.hpp"
#include "crowdsense/core/time.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace crowdsense::ingest {

/// One row as delivered by the network controller, before anonymization.
struct RawRecord {
  Timestamp timestamp = 0;
  std::string mac;
  std::string ip;
  std::string ap_name;
  std::string network_name;
  std::string user_id;
  std::optional<std::string> device_type;
  std::optional<std::string> wifi_protocol;
};

/// One anonymized device-to-AP association. Raw mac, ip and user id are gone.
struct AnonRecord {
  Timestamp timestamp = 0;
  DeviceHash device;
  UserHash user;
  Symbol ap_id;
  Symbol network;

  bool operator==(const AnonRecord &) const = default;
};

/// Every association captured at one sampling instant. Records are sorted by
/// device hash and no device appears twice.
struct Snapshot {
  Timestamp sampled_at = 0;
  std::vector<AnonRecord> records;

  const AnonRecord *find(const DeviceHash &device) const;
};

struct IngestStats {
  std::size_t records_in = 0;
  std::size_t records_rejected = 0;
  std::size_t records_committed = 0;
  std::size_t snapshots_committed = 0;

  IngestStats &operator+=(const IngestStats &other) {
    records_in += other.records_in;
    records_rejected += other.records_rejected;
    records_committed += other.records_committed;
    snapshots_committed += other.snapshots_committed;
    return *this;
  }
  bool operator==(const IngestStats &) const = default;
};

} // namespace crowdsense::ingest
