#pragma once

#include "stkde/config.hpp"
#include "stkde/evaluation.hpp"
#include "stkde/export.hpp"
#include "stkde/ingest.hpp"
#include "stkde/model_io.hpp"
#include "stkde/simulator.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

namespace stkde {

namespace fs = std::filesystem;

namespace detail {

inline std::ofstream open_output(const fs::path& path)
{
  if (path.has_parent_path())
    fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw ConfigError("cannot write '" + path.string() + "'");
  return out;
}

template<class Writer>
void write_file(const fs::path& path, Writer&& writer)
{
  auto out = open_output(path);
  writer(out);
  out.flush();
  if (!out)
    throw ConfigError("failed writing '" + path.string() + "'");
}

inline double seconds_since(std::chrono::steady_clock::time_point start)
{
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

} // namespace detail

inline IngestResult load_events(const fs::path& path,
                                const BoundingBox& box,
                                EpochSeconds epoch,
                                std::ostream& log)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw ConfigError("cannot open event file '" + path.string() + "'");
  auto r = read_event_csv(in, box, epoch);
  log << "read " << r.store.size() << " events from " << path.string() << " (dropped "
      << r.dropped_outside << " outside the box, " << r.dropped_malformed << " malformed, "
      << r.dropped_before_epoch << " before the epoch)\n";
  return r;
}

//! Fits bandwidth and weight curves, then writes model.stkde, fit.csv,
//! acf.csv and summary.txt into `out_dir`.
inline ModelFit cmd_fit(const RunConfig& config,
                        const fs::path& events_path,
                        const fs::path& out_dir,
                        std::ostream& log)
{
  const auto region = config.region();
  const auto data = load_events(events_path, region.box(), config.epoch_seconds(), log);
  const HourRange training = config.training.value_or(data.store.coverage());
  const auto start = std::chrono::steady_clock::now();
  ModelFit fit = fit_model(data.store, region, training, config.settings);
  fit.model.weights = fit.model.weights.with_options(config.weight_options);
  log << "fitted " << region.cell_count() << " cells over hours [" << training.begin.value()
      << ", " << training.end.value() << ") in " << fmt_fixed(detail::seconds_since(start), 2)
      << " s; " << fit.weights.fallback_count() << " fallback cell(s)\n";

  detail::write_file(out_dir / "model.stkde", [&](std::ostream& o) { save_model(o, fit.model); });
  detail::write_file(out_dir / "fit.csv", [&](std::ostream& o) { write_fit_csv(o, fit.weights); });
  detail::write_file(out_dir / "acf.csv", [&](std::ostream& o) { write_acf_csv(o, fit.weights); });
  detail::write_file(out_dir / "summary.txt", [&](std::ostream& o) { write_fit_summary(o, fit); });
  return fit;
}

struct PredictOptions
{
  std::string epoch{ "0" };
  std::optional<double> threshold;
  bool interpolate{ false };
  std::optional<double> resolution;
  std::size_t threads{ 1 };
};

//! Writes grid_<hour>.csv and grid_<hour>.json for every target hour.
inline std::vector<DensityGrid> cmd_predict(const fs::path& model_path,
                                            const fs::path& events_path,
                                            const std::vector<HourIndex>& targets,
                                            const fs::path& out_dir,
                                            const PredictOptions& opts,
                                            std::ostream& log)
{
  std::ifstream in(model_path, std::ios::binary);
  if (!in)
    throw ConfigError("cannot open model file '" + model_path.string() + "'");
  FittedModel fitted = load_model(in);
  WeightOptions w = fitted.weights.options();
  if (opts.threshold)
    w.omission_threshold = *opts.threshold;
  if (opts.interpolate)
    w.interpolate = true;
  fitted.weights = fitted.weights.with_options(w);
  const double resolution = opts.resolution.value_or(fitted.region().resolution());

  const auto data =
    load_events(events_path, fitted.region().box(), parse_epoch(opts.epoch), log);
  const DensityModel model(std::move(fitted), data.store);
  std::vector<DensityGrid> grids;
  for (const HourIndex t : targets) {
    const auto start = std::chrono::steady_clock::now();
    const auto forecast = model.forecast(t);
    auto grid = evaluate_grid(model.fitted().region().box(), resolution, forecast, opts.threads);
    log << "hour " << t.value() << ": " << forecast.size() << " of " << forecast.window_size
        << " window events retained (" << forecast.omitted << " omitted), " << grid.nx << "x"
        << grid.ny << " grid, integral " << fmt_fixed(grid.integral(), 6) << ", "
        << fmt_fixed(detail::seconds_since(start), 3) << " s\n";
    const std::string stem = "grid_" + std::to_string(t.value());
    detail::write_file(out_dir / (stem + ".csv"), [&](std::ostream& o) { write_grid_csv(o, grid); });
    detail::write_file(out_dir / (stem + ".json"), [&](std::ostream& o) {
      o << grid_metadata(grid, t, resolution, forecast).dump(2) << '\n';
    });
    grids.push_back(std::move(grid));
  }
  return grids;
}

//! Runs the backtest described by the config and writes report.csv,
//! per_hour.csv, table.txt, timing.csv and, when fitted, model.stkde.
inline EvaluationReport cmd_evaluate(const RunConfig& config,
                                     const fs::path& events_path,
                                     const fs::path& out_dir,
                                     std::ostream& log)
{
  const auto region = config.region();
  const auto data = load_events(events_path, region.box(), config.epoch_seconds(), log);
  const auto plan = config.plan(data.store);
  log << "backtest: training [" << plan.training.begin.value() << ", "
      << plan.training.end.value() << "), test [" << plan.test.begin.value() << ", "
      << plan.test.end.value() << "), " << plan.methods.size() << " method(s)\n";
  const auto report = run_backtest(data.store, region, plan);
  for (const auto& m : report.methods)
    log << method_key(m.method) << ": " << fmt_fixed(m.score.average, 4) << " over "
        << m.score.events << " events, " << m.score.fallbacks << " fallback hour(s), "
        << fmt_fixed(m.score.seconds, 2) << " s\n";

  detail::write_file(out_dir / "report.csv", [&](std::ostream& o) { write_report_csv(o, report); });
  detail::write_file(out_dir / "per_hour.csv", [&](std::ostream& o) { write_per_hour_csv(o, report); });
  detail::write_file(out_dir / "table.txt", [&](std::ostream& o) { write_table(o, report); });
  detail::write_file(out_dir / "timing.csv", [&](std::ostream& o) { write_timing_csv(o, report); });
  if (report.model)
    detail::write_file(out_dir / "model.stkde", [&](std::ostream& o) { save_model(o, *report.model); });
  return report;
}

//! Writes events.csv, truth.json and mixing.csv.
inline Simulation cmd_simulate(const ScenarioFile& scenario,
                               const fs::path& out_dir,
                               std::ostream& log)
{
  auto sim = simulate(scenario.spec);
  log << "simulated " << sim.store.size() << " events over " << scenario.spec.horizon
      << " hours; rejection rate " << fmt_double(sim.rejection_rate(), 4) << '\n';
  const EpochSeconds epoch = parse_epoch(scenario.epoch);
  detail::write_file(out_dir / "events.csv",
                     [&](std::ostream& o) { write_event_csv(o, sim.store, epoch); });
  detail::write_file(out_dir / "truth.json", [&](std::ostream& o) {
    o << simulation_metadata(sim).dump(2) << '\n';
  });
  detail::write_file(out_dir / "mixing.csv", [&](std::ostream& o) { write_mixing_csv(o, sim.truth); });
  return sim;
}

//! Parses "12", "12,40" or "100:110" (half-open) into target hours.
inline std::vector<HourIndex> parse_targets(std::string_view text)
{
  std::vector<HourIndex> out;
  auto bad = [&] { return ConfigError("cannot parse target hours '" + std::string(text) + "'"); };
  std::string_view rest = text;
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    const auto item = detail::trim(rest.substr(0, comma));
    rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
    if (item.empty())
      throw bad();
    const auto colon = item.find(':');
    if (colon == std::string_view::npos) {
      const auto v = detail::parse_number<std::int64_t>(item);
      if (!v)
        throw bad();
      out.emplace_back(*v);
    } else {
      const auto a = detail::parse_number<std::int64_t>(item.substr(0, colon));
      const auto b = detail::parse_number<std::int64_t>(item.substr(colon + 1));
      if (!a || !b || *b <= *a)
        throw bad();
      for (std::int64_t t = *a; t < *b; ++t)
        out.emplace_back(t);
    }
  }
  if (out.empty())
    throw bad();
  return out;
}

} // namespace stkde
