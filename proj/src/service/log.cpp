#include "crowdsense/service/log.hpp"

#include "crowdsense/core/time.hpp"

#include <chrono>
#include <cstdio>
#include <mutex>

namespace crowdsense::service {

void log(std::string_view level, std::string_view message, const nlohmann::json &fields) {
  static std::mutex mutex;
  const auto now = std::chrono::system_clock::now().time_since_epoch();
  nlohmann::json line{{"ts", to_iso8601(std::chrono::duration_cast<std::chrono::seconds>(now).count())},
                      {"level", level},
                      {"msg", message}};
  if (fields.is_object()) {
    for (const auto &[k, v] : fields.items()) line[k] = v;
  }
  const std::string text = line.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) + "\n";
  std::lock_guard lock(mutex);
  std::fputs(text.c_str(), stderr);
}

} // namespace crowdsense::service
