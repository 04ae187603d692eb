#include "crowdsense/ingest/parser.hpp"

#include "crowdsense/core/csv.hpp"
#include "crowdsense/core/error.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <optional>
#include <sstream>

namespace crowdsense::ingest {

std::size_t ParseResult::record_count() const {
  std::size_t n = 0;
  for (const auto &s : snapshots) n += s.records.size();
  return n;
}

namespace {

struct ColumnMap {
  std::size_t datetime, mac, ip, ap, network, user;
  std::optional<std::size_t> device_type, wifi_protocol;
  std::size_t required_width;
};

ColumnMap map_header(const std::vector<std::string> &header) {
  auto find = [&](const char *name) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (csv::lower(csv::trim(header[i])) == name) return i;
    }
    return std::nullopt;
  };
  std::string missing;
  auto require = [&](const char *name) -> std::size_t {
    auto idx = find(name);
    if (!idx) {
      missing += missing.empty() ? "" : ", ";
      missing += name;
      return 0;
    }
    return *idx;
  };
  ColumnMap m{};
  m.datetime = require(kColumnDateTime);
  m.mac = require(kColumnMac);
  m.ip = require(kColumnIp);
  m.ap = require(kColumnAp);
  m.network = require(kColumnNetwork);
  m.user = require(kColumnUser);
  if (!missing.empty()) {
    throw ParseError("snapshot file header is missing mandatory column(s): " + missing);
  }
  m.device_type = find(kColumnDeviceType);
  m.wifi_protocol = find(kColumnWifiProtocol);
  m.required_width = 1 + std::max({m.datetime, m.mac, m.ip, m.ap, m.network, m.user});
  return m;
}

std::optional<std::string> validate(const RawRecord &r) {
  if (r.mac.empty()) return "empty MAC address";
  if (r.user_id.empty()) return "empty user ID";
  if (std::count(r.ap_name.begin(), r.ap_name.end(), '-') < 2) {
    return "AP name '" + r.ap_name + "' does not follow AP-<building>-<suffix>";
  }
  return std::nullopt;
}

} // namespace

ParseResult parse_snapshot_file(std::istream &in, const FormatConfig &config) {
  ParseResult result;
  std::string line;
  std::size_t line_no = 0;
  std::optional<ColumnMap> columns;
  std::map<Timestamp, std::vector<RawRecord>> grouped;

  while (std::getline(in, line)) {
    ++line_no;
    if (!columns) {
      if (line_no == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) {
        line.erase(0, 3);
      }
      if (csv::trim(line).empty()) {
        continue;
      }
      columns = map_header(csv::split(line, config.delimiter));
      continue;
    }
    if (csv::trim(line).empty()) {
      continue;
    }
    ++result.rows;
    const auto fields = csv::split(line, config.delimiter);
    if (fields.size() < columns->required_width) {
      result.rejections.push_back({line_no, "expected at least " +
                                                std::to_string(columns->required_width) +
                                                " fields, got " +
                                                std::to_string(fields.size())});
      continue;
    }
    const auto ts = config.time_format.parse(fields[columns->datetime]);
    if (!ts) {
      result.rejections.push_back(
          {line_no, "unparseable timestamp '" + fields[columns->datetime] + "'"});
      continue;
    }
    RawRecord rec;
    rec.timestamp = *ts;
    rec.mac = csv::trim(fields[columns->mac]);
    rec.ip = csv::trim(fields[columns->ip]);
    rec.ap_name = csv::trim(fields[columns->ap]);
    rec.network_name = csv::trim(fields[columns->network]);
    rec.user_id = csv::trim(fields[columns->user]);
    auto optional_field = [&](const std::optional<std::size_t> &idx) -> std::optional<std::string> {
      if (!idx || *idx >= fields.size()) return std::nullopt;
      auto v = csv::trim(fields[*idx]);
      if (v.empty()) return std::nullopt;
      return v;
    };
    rec.device_type = optional_field(columns->device_type);
    rec.wifi_protocol = optional_field(columns->wifi_protocol);
    if (auto problem = validate(rec)) {
      result.rejections.push_back({line_no, *problem});
      continue;
    }
    grouped[rec.timestamp].push_back(std::move(rec));
  }
  if (!columns) {
    throw ParseError("snapshot file has no header row");
  }
  result.snapshots.reserve(grouped.size());
  for (auto &[ts, records] : grouped) {
    result.snapshots.push_back({ts, std::move(records)});
  }
  return result;
}

ParseResult parse_snapshot_text(const std::string &text, const FormatConfig &config) {
  std::istringstream in(text);
  return parse_snapshot_file(in, config);
}

std::string format_snapshot_header(char delimiter) {
  const std::array<const char *, 6> names{"date time", "MAC address", "IP address",
                                          "AP name",   "network name", "user ID"};
  std::string out;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (i) out.push_back(delimiter);
    out += names[i];
  }
  out.push_back('\n');
  return out;
}

void append_snapshot_row(std::string &out, const RawRecord &r, const FormatConfig &config) {
  const char d = config.delimiter;
  out += config.time_format.format(r.timestamp);
  out.push_back(d);
  out += csv::escape(r.mac, d);
  out.push_back(d);
  out += csv::escape(r.ip, d);
  out.push_back(d);
  out += csv::escape(r.ap_name, d);
  out.push_back(d);
  out += csv::escape(r.network_name, d);
  out.push_back(d);
  out += csv::escape(r.user_id, d);
  out.push_back('\n');
}

} // namespace crowdsense::ingest
