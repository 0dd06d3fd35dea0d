#include "retina/service/clock.hpp"

#include <chrono>
#include <cstdio>

namespace retina::service {

namespace {

using namespace std::chrono;

bool digits(std::string_view s) {
  for (char c : s)
    if (c < '0' || c > '9') return false;
  return !s.empty();
}

int num(std::string_view s) {
  int v = 0;
  for (char c : s) v = v * 10 + (c - '0');
  return v;
}

}  // namespace

Clock system_clock() {
  return [] { return duration_cast<seconds>(std::chrono::system_clock::now().time_since_epoch()).count(); };
}

Clock frozen_clock(std::int64_t t) {
  return [t] { return t; };
}

std::string format_date(std::int64_t day) {
  const year_month_day ymd{sys_days{days{day}}};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()));
  return buf;
}

std::string format_timestamp(std::int64_t t) {
  const auto day = day_of(t);
  const auto s = t - day * 86400;
  char buf[16];
  std::snprintf(buf, sizeof buf, " %02d:%02d:%02d", static_cast<int>(s / 3600), static_cast<int>(s / 60 % 60),
                static_cast<int>(s % 60));
  return format_date(day) + buf;
}

std::optional<std::int64_t> parse_date(std::string_view text) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
  const auto y = text.substr(0, 4), m = text.substr(5, 2), d = text.substr(8, 2);
  if (!digits(y) || !digits(m) || !digits(d)) return std::nullopt;
  const year_month_day ymd{year{num(y)}, month{static_cast<unsigned>(num(m))}, day{static_cast<unsigned>(num(d))}};
  if (!ymd.ok()) return std::nullopt;
  return sys_days{ymd}.time_since_epoch().count();
}

std::optional<std::int64_t> parse_timestamp(std::string_view text) {
  if (!text.empty() && text.back() == 'Z') text.remove_suffix(1);
  if (text.size() != 19 || (text[10] != ' ' && text[10] != 'T') || text[13] != ':' || text[16] != ':')
    return std::nullopt;
  const auto day = parse_date(text.substr(0, 10));
  const auto h = text.substr(11, 2), mi = text.substr(14, 2), s = text.substr(17, 2);
  if (!day || !digits(h) || !digits(mi) || !digits(s)) return std::nullopt;
  if (num(h) > 23 || num(mi) > 59 || num(s) > 59) return std::nullopt;
  return *day * 86400 + num(h) * 3600 + num(mi) * 60 + num(s);
}

}  // namespace retina::service
