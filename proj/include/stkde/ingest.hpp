#pragma once

#include "stkde/domain.hpp"
#include "stkde/error.hpp"
#include "stkde/format.hpp"

#include <charconv>
#include <chrono>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace stkde {

//! Seconds since 1970-01-01T00:00:00Z.
using EpochSeconds = std::int64_t;

enum class TimestampFormat
{
  epoch_seconds,
  iso8601
};

namespace detail {

inline std::string_view trim(std::string_view s)
{
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
    s.remove_prefix(1);
  while (!s.empty() &&
         (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' ||
          s.back() == '\n'))
    s.remove_suffix(1);
  return s;
}

template<class T>
std::optional<T> parse_number(std::string_view s)
{
  s = trim(s);
  if (!s.empty() && s.front() == '+')
    s.remove_prefix(1);
  T value{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    return std::nullopt;
  return value;
}

inline std::optional<int> fixed_digits(std::string_view s,
                                       std::size_t pos,
                                       std::size_t n)
{
  if (pos + n > s.size())
    return std::nullopt;
  int v = 0;
  for (std::size_t i = pos; i < pos + n; ++i) {
    if (s[i] < '0' || s[i] > '9')
      return std::nullopt;
    v = v * 10 + (s[i] - '0');
  }
  return v;
}

inline std::vector<std::string_view> split_csv_line(std::string_view line)
{
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(trim(line.substr(start)));
      break;
    }
    fields.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
  return fields;
}

} // namespace detail

//! Parses `YYYY-MM-DD[T ]HH:MM[:SS[.fff]][Z|+HH:MM|-HH:MM]`. Fractional
//! seconds are truncated.
inline std::optional<EpochSeconds> parse_iso8601(std::string_view s)
{
  using namespace std::chrono;
  s = detail::trim(s);
  const auto yy = detail::fixed_digits(s, 0, 4);
  const auto mo = detail::fixed_digits(s, 5, 2);
  const auto dd = detail::fixed_digits(s, 8, 2);
  if (!yy || !mo || !dd || s.size() < 16 || s[4] != '-' || s[7] != '-' ||
      (s[10] != 'T' && s[10] != ' ') || s[13] != ':')
    return std::nullopt;
  const auto hh = detail::fixed_digits(s, 11, 2);
  const auto mi = detail::fixed_digits(s, 14, 2);
  if (!hh || !mi || *hh > 23 || *mi > 59)
    return std::nullopt;
  std::size_t pos = 16;
  int ss = 0;
  if (pos < s.size() && s[pos] == ':') {
    const auto sec = detail::fixed_digits(s, pos + 1, 2);
    if (!sec || *sec > 60)
      return std::nullopt;
    ss = *sec;
    pos += 3;
    if (pos < s.size() && s[pos] == '.') {
      ++pos;
      const std::size_t digits_start = pos;
      while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9')
        ++pos;
      if (pos == digits_start)
        return std::nullopt;
    }
  }
  int offset_seconds = 0;
  if (pos < s.size()) {
    if (s[pos] == 'Z' && pos + 1 == s.size()) {
      ++pos;
    } else if ((s[pos] == '+' || s[pos] == '-') && pos + 6 == s.size() &&
               s[pos + 3] == ':') {
      const auto oh = detail::fixed_digits(s, pos + 1, 2);
      const auto om = detail::fixed_digits(s, pos + 4, 2);
      if (!oh || !om)
        return std::nullopt;
      offset_seconds = (*oh * 3600 + *om * 60) * (s[pos] == '-' ? -1 : 1);
      pos += 6;
    } else {
      return std::nullopt;
    }
  }
  const year_month_day date{ year{ *yy },
                             month{ static_cast<unsigned>(*mo) },
                             day{ static_cast<unsigned>(*dd) } };
  if (!date.ok())
    return std::nullopt;
  const auto days = sys_days{ date }.time_since_epoch().count();
  return static_cast<EpochSeconds>(days) * 86400 + *hh * 3600 + *mi * 60 + ss -
         offset_seconds;
}

inline std::optional<EpochSeconds> parse_timestamp(std::string_view s,
                                                   TimestampFormat format)
{
  if (format == TimestampFormat::epoch_seconds)
    return detail::parse_number<EpochSeconds>(s);
  return parse_iso8601(s);
}

//! Integer (optionally signed) → epoch seconds; anything else → ISO-8601.
inline TimestampFormat detect_timestamp_format(std::string_view sample)
{
  sample = detail::trim(sample);
  if (!sample.empty() && (sample.front() == '-' || sample.front() == '+'))
    sample.remove_prefix(1);
  if (sample.empty())
    return TimestampFormat::iso8601;
  for (char c : sample) {
    if (c < '0' || c > '9')
      return TimestampFormat::iso8601;
  }
  return TimestampFormat::epoch_seconds;
}

//! Accepts either representation for a single value (used for config epochs).
inline EpochSeconds parse_epoch(std::string_view s)
{
  const auto v = parse_timestamp(s, detect_timestamp_format(s));
  if (!v)
    throw ConfigError("cannot parse epoch timestamp '" + std::string(s) + "'");
  return *v;
}

inline HourIndex hour_of(EpochSeconds timestamp, EpochSeconds epoch)
{
  const EpochSeconds d = timestamp - epoch;
  // floor division
  return HourIndex(d >= 0 ? d / 3600 : -((-d + 3599) / 3600));
}

struct RawRecord
{
  std::string timestamp;
  std::string x;
  std::string y;
};

struct IngestResult
{
  EventStore store;
  std::size_t dropped_outside{ 0 };
  std::size_t dropped_malformed{ 0 };
  std::size_t dropped_before_epoch{ 0 };

  std::size_t dropped() const
  {
    return dropped_outside + dropped_malformed + dropped_before_epoch;
  }
};

//! Bins raw records into hourly periods. Records outside the box, with
//! unparseable fields, or earlier than the epoch are dropped and counted.
//! The timestamp format is detected once from the first record.
inline IngestResult ingest_events(const std::vector<RawRecord>& records,
                                  const BoundingBox& box,
                                  EpochSeconds epoch)
{
  IngestResult result;
  std::vector<Event> events;
  events.reserve(records.size());
  const TimestampFormat format =
    records.empty() ? TimestampFormat::epoch_seconds
                    : detect_timestamp_format(records.front().timestamp);
  std::int64_t max_period = -1;
  for (const auto& r : records) {
    const auto ts = parse_timestamp(r.timestamp, format);
    const auto x = detail::parse_number<double>(r.x);
    const auto y = detail::parse_number<double>(r.y);
    if (!ts || !x || !y || !std::isfinite(*x) || !std::isfinite(*y)) {
      ++result.dropped_malformed;
      continue;
    }
    if (*ts < epoch) {
      ++result.dropped_before_epoch;
      continue;
    }
    const SpatialPoint p{ *x, *y };
    if (!box.contains(p)) {
      ++result.dropped_outside;
      continue;
    }
    const HourIndex h = hour_of(*ts, epoch);
    max_period = std::max(max_period, h.value());
    events.push_back(Event{ p, h });
  }
  if (events.empty())
    throw NoDataError("no events left after filtering (" +
                      std::to_string(result.dropped()) + " dropped)");
  result.store =
    EventStore(std::move(events), HourRange{ HourIndex(0), HourIndex(max_period + 1) });
  return result;
}

inline constexpr std::string_view event_csv_header = "timestamp,x_km,y_km";

inline std::vector<RawRecord> read_event_records(std::istream& in)
{
  std::string line;
  if (!std::getline(in, line))
    throw FormatError("event file is empty; expected header '" +
                      std::string(event_csv_header) + "'");
  auto header = detail::split_csv_line(line);
  if (header.size() != 3 || header[0] != "timestamp" || header[1] != "x_km" ||
      header[2] != "y_km")
    throw FormatError("malformed event header '" + std::string(detail::trim(line)) +
                      "'; expected '" + std::string(event_csv_header) + "'");
  std::vector<RawRecord> records;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty())
      continue;
    auto f = detail::split_csv_line(line);
    if (f.size() != 3) {
      // keep as malformed so it is counted by ingest_events
      records.push_back(RawRecord{ std::string(line), "", "" });
      continue;
    }
    records.push_back(
      RawRecord{ std::string(f[0]), std::string(f[1]), std::string(f[2]) });
  }
  return records;
}

inline IngestResult read_event_csv(std::istream& in,
                                   const BoundingBox& box,
                                   EpochSeconds epoch)
{
  return ingest_events(read_event_records(in), box, epoch);
}

//! Writes integer epoch-second timestamps at the start of each event's hour,
//! coordinates with 17 significant digits.
inline void write_event_csv(std::ostream& out,
                            const EventStore& store,
                            EpochSeconds epoch)
{
  out << event_csv_header << '\n';
  for (const auto& e : store.events()) {
    out << (epoch + e.period.value() * 3600) << ',' << fmt_double(e.location.x)
        << ',' << fmt_double(e.location.y) << '\n';
  }
}

} // namespace stkde
