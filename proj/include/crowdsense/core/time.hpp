#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace crowdsense {

/// UTC epoch seconds.
using Timestamp = std::int64_t;

inline constexpr Timestamp kMinute = 60;
inline constexpr Timestamp kHour = 60 * kMinute;
inline constexpr Timestamp kDay = 24 * kHour;
inline constexpr Timestamp kWeek = 7 * kDay;

struct CivilTime {
  int year = 1970;
  int month = 1;
  int day = 1;
  int hour = 0;
  int minute = 0;
  int second = 0;
};

std::optional<Timestamp> from_civil(const CivilTime &civil);
CivilTime to_civil(Timestamp t);

/// Largest multiple of `step` not greater than `t` (works for negative t).
constexpr Timestamp floor_to(Timestamp t, Timestamp step) {
  const Timestamp r = t % step;
  return r < 0 ? t - r - step : t - r;
}

constexpr Timestamp ceil_to(Timestamp t, Timestamp step) {
  const Timestamp f = floor_to(t, step);
  return f == t ? t : f + step;
}

constexpr Timestamp day_start(Timestamp t) { return floor_to(t, kDay); }

/// 0 = Monday ... 6 = Sunday.
constexpr int weekday(Timestamp t) {
  const Timestamp days = floor_to(t, kDay) / kDay;
  // 1970-01-01 was a Thursday.
  return static_cast<int>(((days % 7) + 7 + 3) % 7);
}

/// Monday 00:00 of the week containing t.
constexpr Timestamp week_start(Timestamp t) {
  return day_start(t) - weekday(t) * kDay;
}

/// strftime-like pattern supporting %d %m %Y %H %M %S and %%.
/// Default is the controller's day-first layout, e.g. `02/07/2020 10:00:01`.
class TimeFormat {
public:
  static constexpr std::string_view kDefaultPattern = "%d/%m/%Y %H:%M:%S";

  TimeFormat() : TimeFormat(std::string(kDefaultPattern)) {}
  explicit TimeFormat(std::string pattern);

  std::optional<Timestamp> parse(std::string_view text) const;
  std::string format(Timestamp t) const;
  const std::string &pattern() const { return pattern_; }

private:
  std::string pattern_;
};

/// `2020-07-02T10:00:01Z`
std::string to_iso8601(Timestamp t);

/// Accepts `YYYY-MM-DD`, `YYYY-MM-DDTHH:MM`, `YYYY-MM-DDTHH:MM:SS`, with an
/// optional trailing `Z`, or a plain integer of epoch seconds.
std::optional<Timestamp> parse_iso8601(std::string_view text);

} // namespace crowdsense
