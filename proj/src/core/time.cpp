#include "crowdsense/core/time.hpp"

#include "crowdsense/core/error.hpp"

#include <charconv>
#include <chrono>
#include <cstdio>

namespace crowdsense {

std::optional<Timestamp> from_civil(const CivilTime &c) {
  using namespace std::chrono;
  const year_month_day ymd{year{c.year}, month{static_cast<unsigned>(c.month)},
                           day{static_cast<unsigned>(c.day)}};
  if (!ymd.ok() || c.hour < 0 || c.hour > 23 || c.minute < 0 || c.minute > 59 ||
      c.second < 0 || c.second > 59) {
    return std::nullopt;
  }
  const auto days = sys_days{ymd}.time_since_epoch().count();
  return static_cast<Timestamp>(days) * kDay + c.hour * kHour + c.minute * kMinute +
         c.second;
}

CivilTime to_civil(Timestamp t) {
  using namespace std::chrono;
  const Timestamp day0 = floor_to(t, kDay);
  const Timestamp secs = t - day0;
  const year_month_day ymd{sys_days{days{day0 / kDay}}};
  CivilTime c;
  c.year = static_cast<int>(ymd.year());
  c.month = static_cast<int>(static_cast<unsigned>(ymd.month()));
  c.day = static_cast<int>(static_cast<unsigned>(ymd.day()));
  c.hour = static_cast<int>(secs / kHour);
  c.minute = static_cast<int>((secs % kHour) / kMinute);
  c.second = static_cast<int>(secs % kMinute);
  return c;
}

TimeFormat::TimeFormat(std::string pattern) : pattern_(std::move(pattern)) {
  for (std::size_t i = 0; i < pattern_.size(); ++i) {
    if (pattern_[i] != '%') continue;
    if (i + 1 == pattern_.size() || std::string_view("dmYHMS%").find(pattern_[i + 1]) == std::string_view::npos)
      throw ValidationError("unsupported time format '" + pattern_ + "'");
    ++i;
  }
}

namespace {

bool read_number(std::string_view text, std::size_t &pos, int max_digits, int &out) {
  std::size_t end = pos;
  while (end < text.size() && end - pos < static_cast<std::size_t>(max_digits) &&
         text[end] >= '0' && text[end] <= '9') {
    ++end;
  }
  if (end == pos) {
    return false;
  }
  std::from_chars(text.data() + pos, text.data() + end, out);
  pos = end;
  return true;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

} // namespace

std::optional<Timestamp> TimeFormat::parse(std::string_view raw) const {
  const std::string_view text = trim(raw);
  CivilTime c;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < pattern_.size(); ++i) {
    const char ch = pattern_[i];
    if (ch == '%' && i + 1 < pattern_.size()) {
      const char spec = pattern_[++i];
      bool ok = true;
      switch (spec) {
      case 'd': ok = read_number(text, pos, 2, c.day); break;
      case 'm': ok = read_number(text, pos, 2, c.month); break;
      case 'Y': ok = read_number(text, pos, 4, c.year); break;
      case 'H': ok = read_number(text, pos, 2, c.hour); break;
      case 'M': ok = read_number(text, pos, 2, c.minute); break;
      case 'S': ok = read_number(text, pos, 2, c.second); break;
      case '%':
        ok = pos < text.size() && text[pos] == '%';
        ++pos;
        break;
      default: return std::nullopt;
      }
      if (!ok) {
        return std::nullopt;
      }
    } else {
      if (pos >= text.size() || text[pos] != ch) {
        return std::nullopt;
      }
      ++pos;
    }
  }
  if (pos != text.size()) {
    return std::nullopt;
  }
  return from_civil(c);
}

std::string TimeFormat::format(Timestamp t) const {
  const CivilTime c = to_civil(t);
  std::string out;
  char buf[8];
  for (std::size_t i = 0; i < pattern_.size(); ++i) {
    const char ch = pattern_[i];
    if (ch != '%' || i + 1 == pattern_.size()) {
      out.push_back(ch);
      continue;
    }
    switch (pattern_[++i]) {
    case 'd': std::snprintf(buf, sizeof buf, "%02d", c.day); break;
    case 'm': std::snprintf(buf, sizeof buf, "%02d", c.month); break;
    case 'Y': std::snprintf(buf, sizeof buf, "%04d", c.year); break;
    case 'H': std::snprintf(buf, sizeof buf, "%02d", c.hour); break;
    case 'M': std::snprintf(buf, sizeof buf, "%02d", c.minute); break;
    case 'S': std::snprintf(buf, sizeof buf, "%02d", c.second); break;
    default: std::snprintf(buf, sizeof buf, "%%"); break;
    }
    out += buf;
  }
  return out;
}

std::string to_iso8601(Timestamp t) {
  static const TimeFormat iso{"%Y-%m-%dT%H:%M:%SZ"};
  return iso.format(t);
}

std::optional<Timestamp> parse_iso8601(std::string_view text) {
  text = trim(text);
  if (!text.empty() && text.back() == 'Z') {
    text.remove_suffix(1);
  }
  if (!text.empty() && text.find_first_not_of("-0123456789") == std::string_view::npos &&
      text.find('-', 1) == std::string_view::npos) {
    Timestamp v = 0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec == std::errc{} && res.ptr == text.data() + text.size()) {
      return v;
    }
  }
  for (const char *pattern : {"%Y-%m-%dT%H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M:%S",
                              "%Y-%m-%d"}) {
    if (auto t = TimeFormat{pattern}.parse(text)) {
      return t;
    }
  }
  return std::nullopt;
}

} // namespace crowdsense
