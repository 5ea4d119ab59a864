#pragma once

#include <memory>
#include <string>
#include <string_view>

namespace shotlog {

// Wall-clock instants are seconds since 1970-01-01T00:00:00Z.
using UnixSeconds = double;

struct LocalDateTime {
  int year = 1970, month = 1, day = 1;
  int hour = 0, minute = 0;
  double second = 0.0;
  // 0 = Sunday .. 6 = Saturday.
  int weekday = 4;
  // Offset from UTC in seconds, east positive.
  int utc_offset_s = 0;
};

// POSIX TZ rule with east-positive offsets, e.g.
// "CET+01CEST+01,M3.5.0/02:00,M10.5.0/03:00", or "UTC".
class TimeZone {
public:
  // Throws ConfigError on an unparseable rule.
  explicit TimeZone(std::string rule);
  static TimeZone utc() { return TimeZone("UTC"); }

  const std::string& rule() const noexcept { return rule_; }
  LocalDateTime to_local(UnixSeconds t) const;
  // Local wall-clock fields to an instant; an ambiguous DST fold resolves to
  // the first occurrence. Throws ValidationError for a skipped local time.
  UnixSeconds from_local(int year, int month, int day, int hour, int minute, double second) const;

private:
  struct Impl;
  std::string rule_;
  std::shared_ptr<const Impl> impl_;
};

// "YYYY-MM-DDTHH:MM:SS[.fff][Z|+HH:MM|-HH:MM]"; without a suffix the time is
// local to `zone`. Throws ValidationError on malformed text.
UnixSeconds parse_iso8601(std::string_view text, const TimeZone& zone);
// Local time with numeric offset and millisecond precision.
std::string format_iso8601(UnixSeconds t, const TimeZone& zone);

// Mon-Fri 07:00 <= local time < 19:00.
bool within_permitted_hours(UnixSeconds t, const TimeZone& zone);
// Both ends on the same permitted local weekday, start >= 07:00, end <= 19:00.
bool within_permitted_hours(UnixSeconds start, UnixSeconds end, const TimeZone& zone);

} // namespace shotlog
