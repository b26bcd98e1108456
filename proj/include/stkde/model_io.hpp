#pragma once

#include "stkde/error.hpp"
#include "stkde/format.hpp"
#include "stkde/ingest.hpp"
#include "stkde/predictor.hpp"

#include <cstdint>
#include <istream>
#include <iterator>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace stkde {

inline constexpr int model_format_version = 1;

//! 64-bit FNV-1a.
inline std::uint64_t fnv1a64(std::string_view bytes)
{
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

namespace detail {

inline std::string hex64(std::uint64_t v)
{
  static constexpr char digits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<std::size_t>(i)] = digits[v & 0xf];
    v >>= 4;
  }
  return s;
}

inline std::vector<double> parse_doubles(const std::string& key, std::string_view text)
{
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    while (pos < text.size() && text[pos] == ' ')
      ++pos;
    if (pos >= text.size())
      break;
    auto end = text.find(' ', pos);
    if (end == std::string_view::npos)
      end = text.size();
    const auto v = parse_number<double>(text.substr(pos, end - pos));
    if (!v)
      throw ModelFileError("model file: bad number in '" + key + "'");
    out.push_back(*v);
    pos = end;
  }
  return out;
}

} // namespace detail

//! Text model file: one `key = value` per line, decimal numbers with 17
//! significant digits, terminated by a checksum line covering every byte
//! before it. The event window is not stored.
inline std::string serialize_model(const FittedModel& m)
{
  std::ostringstream os;
  auto d = [](double v) { return fmt_double(v); };
  const auto& r = m.region();
  const auto& box = r.box();
  os << "format = stkde-model\n";
  os << "version = " << model_format_version << '\n';
  os << "kernel = " << to_string(m.kernel) << '\n';
  os << "bandwidth = " << d(m.bandwidth.h11()) << ' ' << d(m.bandwidth.h12()) << ' '
     << d(m.bandwidth.h22()) << '\n';
  os << "max_lag = " << m.max_lag() << '\n';
  os << "interpolate = " << (m.weights.options().interpolate ? 1 : 0) << '\n';
  os << "omission_threshold = " << d(m.weights.options().omission_threshold) << '\n';
  os << "region.box = " << d(box.x_min) << ' ' << d(box.x_max) << ' ' << d(box.y_min)
     << ' ' << d(box.y_max) << '\n';
  os << "region.grid = " << r.rows() << ' ' << r.cols() << '\n';
  os << "region.resolution = " << d(r.resolution()) << '\n';
  os << "cells = " << r.cell_count() << '\n';
  os << "# cell.i = scale serial_decay seasonal_decay daily_trough weekly_trough\n"
        "#          daily_period weekly_period normalization sse iterations fallback\n";
  const auto params = m.weights.params();
  for (std::size_t c = 0; c < params.size(); ++c) {
    const auto& p = params[c];
    const FitResult fit = c < m.fits.size() ? m.fits[c] : FitResult{ p };
    os << "cell." << c << " = " << d(p.scale) << ' ' << d(p.serial_decay) << ' '
       << d(p.seasonal_decay) << ' ' << d(p.daily_trough) << ' ' << d(p.weekly_trough) << ' ' << d(p.daily_period) << ' '
       << d(p.weekly_period) << ' ' << d(m.weights.normalization(c)) << ' '
       << d(fit.sse) << ' ' << fit.iterations << ' ' << (fit.fallback ? 1 : 0) << '\n';
  }
  std::string body = os.str();
  body += "checksum = fnv1a64:" + detail::hex64(fnv1a64(body)) + "\n";
  return body;
}

inline void save_model(std::ostream& out, const FittedModel& m)
{
  out << serialize_model(m);
}

inline FittedModel parse_model(const std::string& text)
{
  const auto marker = text.rfind("checksum = fnv1a64:");
  if (marker == std::string::npos || (marker != 0 && text[marker - 1] != '\n'))
    throw ModelFileError("model file: checksum failure (missing checksum line)");
  const std::string body = text.substr(0, marker);
  std::string stored = text.substr(marker + 19);
  while (!stored.empty() && (stored.back() == '\n' || stored.back() == '\r'))
    stored.pop_back();
  if (stored != detail::hex64(fnv1a64(body)))
    throw ModelFileError("model file: checksum failure");

  std::map<std::string, std::string> kv;
  std::istringstream is(body);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#')
      continue;
    const auto eq = line.find(" = ");
    if (eq == std::string::npos)
      throw ModelFileError("model file: malformed line '" + line + "'");
    kv[line.substr(0, eq)] = line.substr(eq + 3);
  }
  auto get = [&](const std::string& key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end())
      throw ModelFileError("model file: missing key '" + key + "'");
    return it->second;
  };
  auto nums = [&](const std::string& key, std::size_t n) {
    auto v = detail::parse_doubles(key, get(key));
    if (v.size() != n)
      throw ModelFileError("model file: '" + key + "' needs " + std::to_string(n) +
                           " values");
    return v;
  };
  if (get("format") != "stkde-model")
    throw ModelFileError("model file: unknown format '" + get("format") + "'");
  if (get("version") != std::to_string(model_format_version))
    throw ModelFileError("model file: version mismatch (file " + get("version") +
                         ", supported " + std::to_string(model_format_version) + ")");

  const auto box = nums("region.box", 4);
  const auto grid = nums("region.grid", 2);
  const StudyRegion region(BoundingBox{ box[0], box[1], box[2], box[3] },
                           static_cast<std::size_t>(grid[0]),
                           static_cast<std::size_t>(grid[1]),
                           nums("region.resolution", 1)[0]);
  const auto cells = static_cast<std::size_t>(nums("cells", 1)[0]);
  if (cells != region.cell_count())
    throw ModelFileError("model file: cell count does not match the grid");

  FittedModel m;
  std::vector<WeightParams> params;
  for (std::size_t c = 0; c < cells; ++c) {
    const auto v = nums("cell." + std::to_string(c), 11);
    WeightParams p{ v[0], v[1], v[2], v[3], v[4], v[5], v[6] };
    params.push_back(p);
    m.fits.push_back(FitResult{ p, v[8], static_cast<int>(v[9]), v[10] != 0.0 });
  }
  WeightOptions opts;
  opts.interpolate = get("interpolate") == "1";
  opts.omission_threshold = nums("omission_threshold", 1)[0];
  m.weights = WeightModel(region,
                          std::move(params),
                          static_cast<std::int64_t>(nums("max_lag", 1)[0]),
                          opts);
  m.kernel = kernel_from_string(get("kernel"));
  const auto h = nums("bandwidth", 3);
  m.bandwidth = Bandwidth(h[0], h[1], h[2]);
  return m;
}

inline FittedModel load_model(std::istream& in)
{
  const std::string text{ std::istreambuf_iterator<char>(in),
                          std::istreambuf_iterator<char>() };
  return parse_model(text);
}

} // namespace stkde
