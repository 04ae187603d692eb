#pragma once

#include "crowdsense/core/time.hpp"

#include <json.hpp>

#include <filesystem>
#include <functional>
#include <optional>
#include <string>

namespace crowdsense::service {

/// Runtime settings. Every key can come from a JSON file and be overridden by
/// an environment variable named `CROWDSENSE_<KEY>` (upper case), e.g.
/// `CROWDSENSE_STORE_DIR`.
struct Config {
  std::string source;       ///< controller URL or snapshot file; empty disables polling
  Timestamp interval = 60;  ///< seconds between polls
  std::string salt;
  std::string timestamp_format = "%d/%m/%Y %H:%M:%S";
  std::filesystem::path store_dir = "store";
  std::filesystem::path topology_dir; ///< aps.csv and themes.csv; defaults to store_dir
  std::string bind = "127.0.0.1";
  int port = 8080;
  std::string theme; ///< active theme; first theme when empty
  Timestamp refresh_interval = 10 * kMinute;
  std::optional<std::string> token;
  std::optional<Timestamp> graph_from;
  std::optional<Timestamp> graph_to;

  /// Throws ValidationError for out-of-range values.
  void validate() const;
  std::filesystem::path topology_path() const {
    return topology_dir.empty() ? store_dir : topology_dir;
  }
};

using EnvLookup = std::function<std::optional<std::string>(const std::string &name)>;

/// Reads the process environment.
std::optional<std::string> system_env(const std::string &name);

/// Defaults, then the JSON file (if given), then environment overrides.
/// Throws ValidationError on unreadable files, unknown keys or bad values.
Config load_config(const std::optional<std::filesystem::path> &file,
                   const EnvLookup &env = system_env);

Config config_from_json(const nlohmann::json &j, Config base = {});

} // namespace crowdsense::service
