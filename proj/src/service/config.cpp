#include "crowdsense/service/config.hpp"

#include "crowdsense/core/error.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <set>

namespace crowdsense::service {

namespace {

const std::set<std::string> kKeys{"source", "interval", "salt", "timestamp_format",
                                  "store_dir", "topology_dir", "bind", "port", "theme",
                                  "refresh_interval", "token", "graph_from", "graph_to"};

Timestamp parse_time_value(const nlohmann::json &v, const std::string &key) {
  if (v.is_number_integer()) return v.get<Timestamp>();
  if (v.is_string()) {
    if (auto t = parse_iso8601(v.get<std::string>())) return *t;
  }
  throw ValidationError("config: " + key + " is not a timestamp");
}

std::int64_t parse_int(const std::string &text, const std::string &key) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(text, &used);
    if (used == text.size()) return v;
  } catch (const std::exception &) {
  }
  throw ValidationError("config: " + key + " must be an integer, got '" + text + "'");
}

} // namespace

void Config::validate() const {
  if (interval < 1) throw ValidationError("config: interval must be at least 1 second");
  if (refresh_interval < kMinute)
    throw ValidationError("config: refresh_interval must be at least 60 seconds");
  if (port < 0 || port > 65535) throw ValidationError("config: port out of range");
  if (store_dir.empty()) throw ValidationError("config: store_dir is empty");
  if (graph_from && graph_to && *graph_from >= *graph_to)
    throw ValidationError("config: graph_from must precede graph_to");
  (void)TimeFormat(timestamp_format);
}

std::optional<std::string> system_env(const std::string &name) {
  if (const char *v = std::getenv(name.c_str())) return std::string(v);
  return std::nullopt;
}

Config config_from_json(const nlohmann::json &j, Config c) {
  if (!j.is_object()) throw ValidationError("config: expected a JSON object");
  for (const auto &[key, value] : j.items()) {
    if (!kKeys.count(key)) throw ValidationError("config: unknown key '" + key + "'");
  }
  try {
    if (j.contains("source")) c.source = j["source"].get<std::string>();
    if (j.contains("interval")) c.interval = j["interval"].get<Timestamp>();
    if (j.contains("salt")) c.salt = j["salt"].get<std::string>();
    if (j.contains("timestamp_format")) c.timestamp_format = j["timestamp_format"].get<std::string>();
    if (j.contains("store_dir")) c.store_dir = j["store_dir"].get<std::string>();
    if (j.contains("topology_dir")) c.topology_dir = j["topology_dir"].get<std::string>();
    if (j.contains("bind")) c.bind = j["bind"].get<std::string>();
    if (j.contains("port")) c.port = j["port"].get<int>();
    if (j.contains("theme")) c.theme = j["theme"].get<std::string>();
    if (j.contains("refresh_interval")) c.refresh_interval = j["refresh_interval"].get<Timestamp>();
    if (j.contains("token") && !j["token"].is_null()) c.token = j["token"].get<std::string>();
    if (j.contains("graph_from")) c.graph_from = parse_time_value(j["graph_from"], "graph_from");
    if (j.contains("graph_to")) c.graph_to = parse_time_value(j["graph_to"], "graph_to");
  } catch (const nlohmann::json::exception &e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  return c;
}

Config load_config(const std::optional<std::filesystem::path> &file, const EnvLookup &env) {
  Config c;
  if (file) {
    std::ifstream in(*file);
    if (!in) throw ValidationError("config: cannot read " + file->string());
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error &e) {
      throw ValidationError("config: " + file->string() + ": " + e.what());
    }
    c = config_from_json(j, c);
  }
  for (const auto &key : kKeys) {
    std::string name = "CROWDSENSE_";
    for (const char ch : key) name.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(ch))));
    const auto value = env(name);
    if (!value) continue;
    if (key == "source") c.source = *value;
    else if (key == "interval") c.interval = parse_int(*value, key);
    else if (key == "salt") c.salt = *value;
    else if (key == "timestamp_format") c.timestamp_format = *value;
    else if (key == "store_dir") c.store_dir = *value;
    else if (key == "topology_dir") c.topology_dir = *value;
    else if (key == "bind") c.bind = *value;
    else if (key == "port") c.port = static_cast<int>(parse_int(*value, key));
    else if (key == "theme") c.theme = *value;
    else if (key == "refresh_interval") c.refresh_interval = parse_int(*value, key);
    else if (key == "token") c.token = *value;
    else if (key == "graph_from") c.graph_from = parse_time_value(*value, key);
    else if (key == "graph_to") c.graph_to = parse_time_value(*value, key);
  }
  c.validate();
  return c;
}

} // namespace crowdsense::service
