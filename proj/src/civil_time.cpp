#include "shotlog/civil_time.hpp"

#include "shotlog/error.hpp"

#include <boost/date_time/local_time/local_time.hpp>
#include <fmt/format.h>

#include <cmath>
#include <regex>

namespace shotlog {

namespace bl = boost::local_time;
namespace bp = boost::posix_time;
namespace bg = boost::gregorian;

struct TimeZone::Impl {
  bl::time_zone_ptr zone;
};

namespace {

const bp::ptime kEpoch(bg::date(1970, 1, 1));

bp::ptime to_ptime(UnixSeconds t) {
  const double whole = std::floor(t);
  const auto micros = static_cast<long long>(std::llround((t - whole) * 1e6));
  return kEpoch + bp::seconds(static_cast<long>(whole)) + bp::microseconds(micros);
}

UnixSeconds from_ptime(const bp::ptime& p) {
  const bp::time_duration d = p - kEpoch;
  return static_cast<double>(d.total_microseconds()) / 1e6;
}

} // namespace

TimeZone::TimeZone(std::string rule) : rule_(std::move(rule)) {
  const std::string spec = rule_ == "UTC" || rule_ == "Z" ? std::string("UTC+00") : rule_;
  try {
    impl_ = std::make_shared<Impl>(Impl{bl::time_zone_ptr(new bl::posix_time_zone(spec))});
  } catch (const std::exception& e) {
    throw ConfigError(fmt::format("invalid timezone rule '{}': {}", rule_, e.what()));
  }
}

LocalDateTime TimeZone::to_local(UnixSeconds t) const {
  const bp::ptime utc = to_ptime(t);
  const bl::local_date_time ldt(utc, impl_->zone);
  const bp::ptime local = ldt.local_time();
  const bg::date d = local.date();
  const bp::time_duration tod = local.time_of_day();
  LocalDateTime r;
  r.year = d.year();
  r.month = d.month();
  r.day = d.day();
  r.hour = static_cast<int>(tod.hours());
  r.minute = static_cast<int>(tod.minutes());
  r.second = static_cast<double>(tod.seconds()) + static_cast<double>(tod.fractional_seconds()) /
                                                      static_cast<double>(bp::time_duration::ticks_per_second());
  r.weekday = d.day_of_week().as_number();
  r.utc_offset_s = static_cast<int>((local - utc).total_seconds());
  return r;
}

UnixSeconds TimeZone::from_local(int year, int month, int day, int hour, int minute, double second) const {
  bg::date d;
  try {
    d = bg::date(static_cast<unsigned short>(year), static_cast<unsigned short>(month),
                 static_cast<unsigned short>(day));
  } catch (const std::exception& e) {
    throw ValidationError(fmt::format("invalid date {:04}-{:02}-{:02}: {}", year, month, day, e.what()));
  }
  const bp::time_duration td = bp::hours(hour) + bp::minutes(minute) +
                               bp::microseconds(static_cast<long long>(std::llround(second * 1e6)));
  try {
    return from_ptime(bl::local_date_time(d, td, impl_->zone, bl::local_date_time::EXCEPTION_ON_ERROR).utc_time());
  } catch (const bl::ambiguous_result&) {
    return from_ptime(bl::local_date_time(d, td, impl_->zone, true).utc_time());
  } catch (const bl::time_label_invalid&) {
    throw ValidationError(fmt::format("local time {:04}-{:02}-{:02} {:02}:{:02} does not exist in '{}'", year, month,
                                      day, hour, minute, rule_));
  }
}

UnixSeconds parse_iso8601(std::string_view text, const TimeZone& zone) {
  static const std::regex re(R"((\d{4})-(\d{2})-(\d{2})[T ](\d{2}):(\d{2}):(\d{2}(?:\.\d+)?)(Z|[+-]\d{2}:?\d{2})?)");
  std::cmatch m;
  if (!std::regex_match(text.data(), text.data() + text.size(), m, re))
    throw ValidationError(fmt::format("not an ISO 8601 timestamp: '{}'", text));
  const int year = std::stoi(m[1]), month = std::stoi(m[2]), day = std::stoi(m[3]);
  const int hour = std::stoi(m[4]), minute = std::stoi(m[5]);
  const double second = std::stod(m[6]);
  if (hour > 23 || minute > 59 || second >= 60.0)
    throw ValidationError(fmt::format("time of day out of range in '{}'", text));
  if (!m[7].matched) return zone.from_local(year, month, day, hour, minute, second);
  int offset_s = 0;
  const std::string suffix = m[7];
  if (suffix != "Z") {
    const int oh = std::stoi(suffix.substr(1, 2));
    const int om = std::stoi(suffix.substr(suffix.size() - 2));
    if (oh > 23 || om > 59) throw ValidationError(fmt::format("UTC offset out of range in '{}'", text));
    offset_s = (suffix[0] == '-' ? -1 : 1) * (oh * 3600 + om * 60);
  }
  return TimeZone::utc().from_local(year, month, day, hour, minute, second) - offset_s;
}

std::string format_iso8601(UnixSeconds t, const TimeZone& zone) {
  // Round to milliseconds first so the fields never show 60.000 seconds.
  const double rounded = std::round(t * 1000.0) / 1000.0;
  const LocalDateTime l = zone.to_local(rounded);
  const int off = std::abs(l.utc_offset_s);
  return fmt::format("{:04}-{:02}-{:02}T{:02}:{:02}:{:06.3f}{}{:02}:{:02}", l.year, l.month, l.day, l.hour, l.minute,
                     l.second, l.utc_offset_s < 0 ? '-' : '+', off / 3600, off % 3600 / 60);
}

namespace {

bool permitted_day(const LocalDateTime& l) { return l.weekday >= 1 && l.weekday <= 5; }

double seconds_of_day(const LocalDateTime& l) { return l.hour * 3600.0 + l.minute * 60.0 + l.second; }

} // namespace

bool within_permitted_hours(UnixSeconds t, const TimeZone& zone) {
  const LocalDateTime l = zone.to_local(t);
  const double s = seconds_of_day(l);
  return permitted_day(l) && s >= 7 * 3600.0 && s < 19 * 3600.0;
}

bool within_permitted_hours(UnixSeconds start, UnixSeconds end, const TimeZone& zone) {
  const LocalDateTime a = zone.to_local(start), b = zone.to_local(end);
  const bool same_day = a.year == b.year && a.month == b.month && a.day == b.day;
  return same_day && permitted_day(a) && seconds_of_day(a) >= 7 * 3600.0 && seconds_of_day(b) <= 19 * 3600.0;
}

} // namespace shotlog
