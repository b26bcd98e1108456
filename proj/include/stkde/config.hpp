#pragma once

#include "stkde/baselines.hpp"
#include "stkde/domain.hpp"
#include "stkde/error.hpp"
#include "stkde/evaluation.hpp"
#include "stkde/ingest.hpp"
#include "stkde/kernel.hpp"
#include "stkde/simulator.hpp"
#include "stkde/weight_function.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace stkde {

/// Flat `key = value` file with `[section]` headers. Keys that are never
/// read are reported by reject_unknown() so typos do not pass silently.
class IniFile
{
public:
  static IniFile parse(std::istream& in, const std::string& source = "<config>")
  {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
      pt::ini_parser::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
      throw ConfigError(source + ": " + e.message() + " (line " + std::to_string(e.line()) +
                        ")");
    }
    IniFile ini;
    ini.source_ = source;
    for (const auto& [section, body] : tree) {
      if (body.empty()) {
        throw ConfigError(source + ": key '" + section +
                          "' must belong to a [section]");
      }
      auto& keys = ini.values_[section];
      for (const auto& [key, value] : body)
        keys[key] = value.data();
    }
    return ini;
  }

  static IniFile load(const std::filesystem::path& path)
  {
    std::ifstream in(path);
    if (!in)
      throw ConfigError("cannot open config file '" + path.string() + "'");
    return parse(in, path.string());
  }

  const std::string& source() const { return source_; }

  bool has_section(const std::string& section) const { return values_.count(section) != 0; }

  std::vector<std::string> sections_with_prefix(const std::string& prefix) const
  {
    std::vector<std::string> out;
    for (const auto& [name, keys] : values_)
      if (name.rfind(prefix, 0) == 0)
        out.push_back(name);
    return out;
  }

  std::optional<std::string> raw(const std::string& section, const std::string& key) const
  {
    auto s = values_.find(section);
    if (s == values_.end())
      return std::nullopt;
    auto k = s->second.find(key);
    if (k == s->second.end())
      return std::nullopt;
    used_.insert(section + "." + key);
    return std::string(detail::trim(k->second));
  }

  template<class T>
  std::optional<T> find(const std::string& section, const std::string& key) const
  {
    const auto text = raw(section, key);
    if (!text)
      return std::nullopt;
    return convert<T>(section, key, *text);
  }

  template<class T>
  T get(const std::string& section, const std::string& key, T fallback) const
  {
    return find<T>(section, key).value_or(fallback);
  }

  template<class T>
  T require(const std::string& section, const std::string& key) const
  {
    auto v = find<T>(section, key);
    if (!v)
      throw ConfigError(source_ + ": missing required key '" + section + "." + key + "'");
    return *v;
  }

  //! Whitespace-separated numbers; `count` of them when count > 0.
  std::optional<std::vector<double>> numbers(const std::string& section,
                                             const std::string& key,
                                             std::size_t count = 0) const
  {
    const auto text = raw(section, key);
    if (!text)
      return std::nullopt;
    std::vector<double> out;
    std::string_view rest = *text;
    while (!(rest = detail::trim(rest)).empty()) {
      const auto end = rest.find_first_of(" \t,");
      const auto word = rest.substr(0, end);
      out.push_back(convert<double>(section, key, std::string(word)));
      rest = end == std::string_view::npos ? std::string_view{} : rest.substr(end + 1);
    }
    if (count > 0 && out.size() != count)
      throw ConfigError(source_ + ": '" + section + "." + key + "' needs " +
                        std::to_string(count) + " numbers");
    return out;
  }

  void reject_unknown() const
  {
    for (const auto& [section, keys] : values_)
      for (const auto& [key, value] : keys)
        if (!used_.count(section + "." + key))
          throw ConfigError(source_ + ": unknown key '" + section + "." + key + "'");
  }

private:
  template<class T>
  T convert(const std::string& section, const std::string& key, const std::string& text) const
  {
    auto fail = [&]() -> T {
      throw ConfigError(source_ + ": cannot parse '" + section + "." + key + "' value '" +
                        text + "'");
    };
    if constexpr (std::is_same_v<T, std::string>) {
      return text;
    } else if constexpr (std::is_same_v<T, bool>) {
      if (text == "true" || text == "1" || text == "yes" || text == "on")
        return true;
      if (text == "false" || text == "0" || text == "no" || text == "off")
        return false;
      return fail();
    } else {
      const auto v = detail::parse_number<T>(text);
      if (!v)
        return fail();
      if constexpr (std::is_floating_point_v<T>)
        if (!std::isfinite(*v))
          return fail();
      return *v;
    }
  }

  std::string source_;
  std::map<std::string, std::map<std::string, std::string>> values_;
  mutable std::set<std::string> used_;
};

//! Environment variable naming the config file used when --config is absent.
inline constexpr const char* config_env_var = "STKDE_CONFIG";

inline std::optional<std::filesystem::path> default_config_path()
{
  if (const char* p = std::getenv(config_env_var); p && *p)
    return std::filesystem::path(p);
  return std::nullopt;
}

struct RunConfig
{
  BoundingBox box{};
  std::size_t cells{ 21 };
  std::optional<std::size_t> rows;
  std::optional<std::size_t> cols;
  double resolution{ 1.0 };

  ModelSettings settings{};
  WeightOptions weight_options{};
  MedicConfig medic{};

  std::string events_path;
  std::string epoch{ "0" };
  std::optional<HourRange> training;

  std::optional<HourRange> test;
  std::vector<Method> methods{ all_methods.begin(), all_methods.end() };
  double target_retained{ 200.0 };
  std::optional<double> threshold;
  double floor{ density_floor };

  StudyRegion region() const
  {
    if (rows || cols) {
      if (!rows || !cols)
        throw ConfigError("region.rows and region.cols must be given together");
      return StudyRegion(box, *rows, *cols, resolution);
    }
    return StudyRegion::with_cell_count(box, cells, resolution);
  }

  EpochSeconds epoch_seconds() const { return parse_epoch(epoch); }

  BacktestPlan plan(const EventStore& store) const
  {
    BacktestPlan p;
    p.training = training.value_or(HourRange{ store.coverage().begin, test ? test->begin : store.coverage().end });
    if (!test)
      throw ConfigError("evaluation needs 'evaluate.test = <first hour> <end hour>'");
    p.test = *test;
    p.methods = methods;
    p.settings = settings;
    p.omission_threshold = threshold.value_or(0.0);
    p.target_retained = threshold ? 0.0 : target_retained;
    p.medic = medic;
    p.floor = floor;
    return p;
  }
};

namespace detail {

inline BoundingBox read_box(const IniFile& ini, const std::string& section)
{
  const auto v = ini.numbers(section, "box", 4);
  if (!v)
    throw ConfigError(ini.source() + ": missing required key '" + section +
                      ".box' (x_min x_max y_min y_max, km)");
  BoundingBox b{ (*v)[0], (*v)[1], (*v)[2], (*v)[3] };
  b.validate();
  return b;
}

inline std::optional<HourRange> read_range(const IniFile& ini,
                                           const std::string& section,
                                           const std::string& key)
{
  const auto v = ini.numbers(section, key, 2);
  if (!v)
    return std::nullopt;
  const HourRange r{ HourIndex(static_cast<std::int64_t>((*v)[0])),
                     HourIndex(static_cast<std::int64_t>((*v)[1])) };
  if (r.empty())
    throw ConfigError(ini.source() + ": '" + section + "." + key + "' is an empty range");
  return r;
}

} // namespace detail

//! Reads [region], [model], [fit], [medic], [data] and [evaluate].
inline RunConfig parse_run_config(const IniFile& ini)
{
  RunConfig c;
  c.box = detail::read_box(ini, "region");
  c.cells = ini.get<std::size_t>("region", "cells", c.cells);
  c.rows = ini.find<std::size_t>("region", "rows");
  c.cols = ini.find<std::size_t>("region", "cols");
  c.resolution = ini.get("region", "resolution", c.resolution);

  auto& s = c.settings;
  s.max_lag = ini.get<std::int64_t>("model", "max_lag", s.max_lag);
  if (s.max_lag < 1)
    throw ConfigError("model.max_lag must be at least 1");
  s.fit.daily_period = ini.get("model", "daily_period", s.fit.daily_period);
  s.fit.weekly_period = ini.get("model", "weekly_period", s.fit.weekly_period);
  if (const auto k = ini.find<std::string>("model", "kernel"))
    s.kernel = kernel_from_string(*k);
  if (const auto h = ini.numbers("model", "bandwidth", 3))
    s.bandwidth = Bandwidth((*h)[0], (*h)[1], (*h)[2]);
  s.min_events = ini.get<std::size_t>("model", "min_events", s.min_events);
  c.weight_options.interpolate = ini.get("model", "interpolate", false);
  c.weight_options.omission_threshold = ini.get("model", "omission_threshold", 0.0);
  if (c.weight_options.omission_threshold < 0.0)
    throw ConfigError("model.omission_threshold must be non-negative");

  s.fit.starts = ini.get("fit", "starts", s.fit.starts);
  s.fit.max_iterations = ini.get("fit", "max_iterations", s.fit.max_iterations);
  s.fit.tolerance = ini.get("fit", "tolerance", s.fit.tolerance);
  s.fit.seed = ini.get<std::uint64_t>("fit", "seed", s.fit.seed);
  s.threads = ini.get<std::size_t>("fit", "threads", s.threads);
  if (s.fit.starts < 1 || s.fit.max_iterations < 1 || !(s.fit.tolerance > 0.0))
    throw ConfigError("fit.starts, fit.max_iterations and fit.tolerance must be positive");

  c.medic.cell_size = ini.get("medic", "cell_size", c.medic.cell_size);
  c.medic.lookback_weeks = ini.get("medic", "lookback_weeks", c.medic.lookback_weeks);
  c.medic.lookback_years = ini.get("medic", "lookback_years", c.medic.lookback_years);
  if (const auto a = ini.numbers("medic", "anchor", 2))
    c.medic.anchor = SpatialPoint{ (*a)[0], (*a)[1] };
  try {
    c.medic.validate();
  } catch (const SpecError& e) {
    throw ConfigError(e.what());
  }

  c.events_path = ini.get<std::string>("data", "events", "");
  c.epoch = ini.get<std::string>("data", "epoch", c.epoch);
  c.training = detail::read_range(ini, "data", "training");

  c.test = detail::read_range(ini, "evaluate", "test");
  if (const auto m = ini.find<std::string>("evaluate", "methods")) {
    c.methods.clear();
    std::string_view rest = *m;
    while (!rest.empty()) {
      const auto comma = rest.find(',');
      const auto word = detail::trim(rest.substr(0, comma));
      if (!word.empty())
        c.methods.push_back(method_from_string(word));
      rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
    }
  }
  c.target_retained = ini.get("evaluate", "target_retained", c.target_retained);
  c.threshold = ini.find<double>("evaluate", "threshold");
  c.floor = ini.get("evaluate", "density_floor", c.floor);
  if (!(c.floor > 0.0))
    throw ConfigError("evaluate.density_floor must be positive");
  ini.reject_unknown();
  return c;
}

inline RunConfig load_run_config(const std::filesystem::path& path)
{
  return parse_run_config(IniFile::load(path));
}

struct ScenarioFile
{
  ScenarioSpec spec;
  std::string epoch{ "0" };
};

//! Reads [scenario] plus one [component.<name>] section per component, in
//! lexicographic order of the section names.
inline ScenarioFile parse_scenario(const IniFile& ini)
{
  ScenarioFile f;
  auto& s = f.spec;
  const std::string sec = "scenario";
  s.box = detail::read_box(ini, sec);
  s.rate = ini.get(sec, "rate", s.rate);
  s.rate_daily_amplitude = ini.get(sec, "rate_daily_amplitude", s.rate_daily_amplitude);
  s.rate_daily_phase = ini.get(sec, "rate_daily_phase", s.rate_daily_phase);
  s.horizon = ini.require<std::int64_t>(sec, "horizon");
  s.seed = ini.get<std::uint64_t>(sec, "seed", s.seed);
  s.daily_period = ini.get(sec, "daily_period", s.daily_period);
  s.weekly_period = ini.get(sec, "weekly_period", s.weekly_period);
  s.max_rejection = ini.get(sec, "max_rejection", s.max_rejection);
  f.epoch = ini.get<std::string>(sec, "epoch", f.epoch);

  for (const auto& name : ini.sections_with_prefix("component.")) {
    ComponentSpec c;
    const auto shape = ini.get<std::string>(name, "shape", "gaussian");
    if (shape == "gaussian")
      c.shape = ComponentShape::gaussian;
    else if (shape == "uniform")
      c.shape = ComponentShape::uniform;
    else
      throw ConfigError(name + ".shape must be 'gaussian' or 'uniform'");
    if (c.shape == ComponentShape::gaussian) {
      const auto center = ini.numbers(name, "center", 2);
      const auto cov = ini.numbers(name, "covariance", 3);
      if (!center || !cov)
        throw ConfigError(name + ": gaussian components need 'center' and 'covariance'");
      c.center = { (*center)[0], (*center)[1] };
      c.var_x = (*cov)[0];
      c.cov_xy = (*cov)[1];
      c.var_y = (*cov)[2];
    }
    c.base = ini.get(name, "base", c.base);
    c.daily_amplitude = ini.get(name, "daily_amplitude", c.daily_amplitude);
    c.daily_phase = ini.get(name, "daily_phase", c.daily_phase);
    c.weekly_amplitude = ini.get(name, "weekly_amplitude", c.weekly_amplitude);
    c.weekly_phase = ini.get(name, "weekly_phase", c.weekly_phase);
    c.ar_coefficient = ini.get(name, "ar_coefficient", c.ar_coefficient);
    c.ar_sigma = ini.get(name, "ar_sigma", c.ar_sigma);
    s.components.push_back(c);
  }
  ini.reject_unknown();
  s.validate();
  return f;
}

inline ScenarioFile load_scenario(const std::filesystem::path& path)
{
  return parse_scenario(IniFile::load(path));
}

} // namespace stkde
