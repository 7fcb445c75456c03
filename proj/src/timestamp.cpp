#include "scr/timestamp.hpp"

#include <cctype>
#include <cstdio>

#include "scr/error.hpp"

namespace scr {

namespace {

// Days since 1970-01-01 for a proleptic Gregorian date (H. Hinnant's
// days_from_civil).
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m > 2 ? m - 3 : m + 9) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, std::int64_t& y, unsigned& m, unsigned& d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = doy - (153 * mp + 2) / 5 + 1;
  m = mp < 10 ? mp + 3 : mp - 9;
  y += m <= 2;
}

bool digits(std::string_view s, std::size_t at, std::size_t n, int& out) {
  if (at + n > s.size()) return false;
  out = 0;
  for (std::size_t i = at; i < at + n; ++i) {
    if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
    out = out * 10 + (s[i] - '0');
  }
  return true;
}

bool leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

}  // namespace

Timestamp parse_timestamp(std::string_view text) {
  int y, mo, d, h = 0, mi = 0, s = 0;
  bool ok = digits(text, 0, 4, y) && text.size() >= 10 && text[4] == '-' && digits(text, 5, 2, mo) &&
            text[7] == '-' && digits(text, 8, 2, d);
  if (ok && text.size() > 10) {
    ok = text.size() == 20 && (text[10] == 'T' || text[10] == ' ') && digits(text, 11, 2, h) && text[13] == ':' &&
         digits(text, 14, 2, mi) && text[16] == ':' && digits(text, 17, 2, s) && text[19] == 'Z';
  }
  static constexpr int kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  ok = ok && mo >= 1 && mo <= 12 && d >= 1 && d <= kDays[mo - 1] + (mo == 2 && leap(y) ? 1 : 0) && h < 24 &&
       mi < 60 && s < 60;
  if (!ok) throw usage_error("invalid timestamp '" + std::string(text) + "' (expected YYYY-MM-DDTHH:MM:SSZ)");
  auto days = days_from_civil(y, unsigned(mo), unsigned(d));
  return Timestamp{std::chrono::seconds{days * 86400 + h * 3600 + mi * 60 + s}};
}

std::string format_timestamp(Timestamp t) {
  auto secs = t.time_since_epoch().count();
  auto days = secs >= 0 ? secs / 86400 : (secs - 86399) / 86400;
  auto rem = secs - days * 86400;
  std::int64_t y;
  unsigned m, d;
  civil_from_days(days, y, m, d);
  char buf[96];
  std::snprintf(buf, sizeof buf, "%04lld-%02u-%02uT%02lld:%02lld:%02lldZ", static_cast<long long>(y), m, d,
                static_cast<long long>(rem / 3600), static_cast<long long>(rem % 3600 / 60),
                static_cast<long long>(rem % 60));
  return buf;
}

std::string format_date(Timestamp t) { return format_timestamp(t).substr(0, 10); }

Timestamp now_utc() { return std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now()); }

}  // namespace scr
