#pragma once

#include "crowdsense/core/time.hpp"
#include "crowdsense/ingest/records.hpp"

#include <istream>
#include <string>
#include <vector>

namespace crowdsense::ingest {

struct FormatConfig {
  char delimiter = ',';
  TimeFormat time_format;
};

/// Header names, matched case-insensitively after trimming.
inline constexpr const char *kColumnDateTime = "date time";
inline constexpr const char *kColumnMac = "mac address";
inline constexpr const char *kColumnIp = "ip address";
inline constexpr const char *kColumnAp = "ap name";
inline constexpr const char *kColumnNetwork = "network name";
inline constexpr const char *kColumnUser = "user id";
inline constexpr const char *kColumnDeviceType = "device type";
inline constexpr const char *kColumnWifiProtocol = "wifi protocol";

struct RowRejection {
  std::size_t line = 0; ///< 1-based line number in the input, header is line 1
  std::string reason;
};

/// Rows sharing an identical timestamp.
struct CandidateSnapshot {
  Timestamp timestamp = 0;
  std::vector<RawRecord> records;
};

struct ParseResult {
  std::vector<CandidateSnapshot> snapshots; ///< ascending by timestamp
  std::vector<RowRejection> rejections;
  std::size_t rows = 0;

  std::size_t record_count() const;
};

/// Throws ParseError when the header is missing a mandatory column. Bad rows
/// are reported in `rejections` and do not abort the file.
ParseResult parse_snapshot_file(std::istream &in, const FormatConfig &config = {});
ParseResult parse_snapshot_text(const std::string &text, const FormatConfig &config = {});

/// Writes the header plus one row per record in controller column order.
std::string format_snapshot_header(char delimiter = ',');
void append_snapshot_row(std::string &out, const RawRecord &record, const FormatConfig &config);

} // namespace crowdsense::ingest
