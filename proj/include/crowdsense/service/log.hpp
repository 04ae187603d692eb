#pragma once

#include <json.hpp>

#include <string_view>

namespace crowdsense::service {

/// One JSON object per line on stderr: `{"ts", "level", "msg", ...fields}`.
void log(std::string_view level, std::string_view message, const nlohmann::json &fields = {});

} // namespace crowdsense::service
