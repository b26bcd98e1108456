#pragma once

#include "stkde/evaluation.hpp"
#include "stkde/format.hpp"
#include "stkde/predictor.hpp"
#include "stkde/simulator.hpp"
#include "stkde/weight_estimation.hpp"

#include <json.hpp>

#include <ostream>

namespace stkde {

// Density grid: one `x_km,y_km,density` row per grid cell centre, rows of
// constant y from y_min upwards.
inline void write_grid_csv(std::ostream& out, const DensityGrid& grid)
{
  out << "x_km,y_km,density\n";
  for (std::size_t j = 0; j < grid.ny; ++j)
    for (std::size_t i = 0; i < grid.nx; ++i)
      out << fmt_double(grid.x_center(i)) << ',' << fmt_double(grid.y_center(j)) << ','
          << fmt_double(grid.at(i, j)) << '\n';
}

inline nlohmann::ordered_json grid_metadata(const DensityGrid& grid,
                                            HourIndex target,
                                            double resolution,
                                            const HourForecast& forecast)
{
  nlohmann::ordered_json j;
  j["target_hour"] = target.value();
  j["resolution_per_km"] = resolution;
  j["nx"] = grid.nx;
  j["ny"] = grid.ny;
  j["box"] = { grid.box.x_min, grid.box.x_max, grid.box.y_min, grid.box.y_max };
  j["integral"] = grid.integral();
  j["window_events"] = forecast.window_size;
  j["retained_events"] = forecast.size();
  j["omitted_events"] = forecast.omitted;
  return j;
}

inline void write_fit_csv(std::ostream& out, const WeightFit& fit)
{
  out << "cell,events,degenerate,fallback,included_lags,sse,iterations,scale,serial_decay,"
         "seasonal_decay,daily_trough,weekly_trough\n";
  for (const auto& c : fit.cells) {
    const auto& p = c.fit.params;
    out << c.cell << ',' << c.events << ',' << (c.degenerate ? 1 : 0) << ','
        << (c.fit.fallback ? 1 : 0) << ',' << (c.degenerate ? 0 : c.acf.included_lags())
        << ',' << fmt_double(c.fit.sse) << ',' << c.fit.iterations << ','
        << fmt_double(p.scale) << ',' << fmt_double(p.serial_decay) << ','
        << fmt_double(p.seasonal_decay) << ',' << fmt_double(p.daily_trough) << ',' << fmt_double(p.weekly_trough) << '\n';
  }
}

// Long format; the pooled citywide curve uses cell id "pooled".
inline void write_acf_csv(std::ostream& out, const WeightFit& fit)
{
  out << "cell,lag,acf,pairs,reliable\n";
  auto rows = [&out](const std::string& id, const AcfCurve& a) {
    for (std::size_t l = 0; l < a.values.size(); ++l)
      out << id << ',' << (l + 1) << ',' << fmt_double(a.values[l]) << ','
          << a.pair_counts[l] << ',' << (a.reliable[l] ? 1 : 0) << '\n';
  };
  for (const auto& c : fit.cells)
    if (!c.degenerate)
      rows(std::to_string(c.cell), c.acf);
  rows("pooled", fit.pooled_acf);
}

inline void write_fit_summary(std::ostream& out, const ModelFit& m)
{
  const auto& region = m.model.region();
  const auto& h = m.model.bandwidth;
  out << "cells: " << region.cell_count() << " (" << region.rows() << " x " << region.cols()
      << "), max lag " << m.model.max_lag() << " h, kernel " << to_string(m.model.kernel)
      << '\n';
  out << "bandwidth [km^2]: h11 " << fmt_fixed(h.h11(), 5) << ", h12 " << fmt_fixed(h.h12(), 5)
      << ", h22 " << fmt_fixed(h.h22(), 5) << '\n';
  out << "fallback cells: " << m.weights.fallback_count() << '\n';
  auto right = [](std::string s, std::size_t w) {
    if (s.size() < w)
      s.insert(0, w - s.size(), ' ');
    return s;
  };
  out << "cell  events  fallback   serial  seasonal  daily_tr  weekly_tr  sse\n";
  for (const auto& c : m.weights.cells) {
    const auto& p = c.fit.params;
    out << right(std::to_string(c.cell), 4) << right(std::to_string(c.events), 8)
        << right(c.fit.fallback ? "yes" : "no", 10) << right(fmt_fixed(p.serial_decay, 5), 9)
        << right(fmt_fixed(p.seasonal_decay, 5), 10) << right(fmt_fixed(p.daily_trough, 5), 10)
        << right(fmt_fixed(p.weekly_trough, 5), 11) << "  " << fmt_double(c.fit.sse, 4) << '\n';
  }
}

//! Per-hour rate and mixing weights of a simulation's ground truth.
inline void write_mixing_csv(std::ostream& out, const GroundTruth& truth)
{
  out << "hour,rate";
  for (std::size_t k = 0; k < truth.components(); ++k)
    out << ",weight_" << k;
  out << '\n';
  for (std::int64_t t = 0; t < truth.horizon(); ++t) {
    out << t << ',' << fmt_double(truth.rate(HourIndex(t)));
    for (double w : truth.mixing(HourIndex(t)))
      out << ',' << fmt_double(w);
    out << '\n';
  }
}

inline nlohmann::ordered_json simulation_metadata(const Simulation& sim)
{
  const auto& spec = sim.truth.spec();
  nlohmann::ordered_json j;
  j["seed"] = spec.seed;
  j["horizon_hours"] = spec.horizon;
  j["events"] = sim.store.size();
  j["draws"] = sim.draws;
  j["rejected"] = sim.rejected;
  j["rejection_rate"] = sim.rejection_rate();
  j["box"] = { spec.box.x_min, spec.box.x_max, spec.box.y_min, spec.box.y_max };
  j["daily_period"] = spec.daily_period;
  j["weekly_period"] = spec.weekly_period;
  auto& comps = j["components"] = nlohmann::ordered_json::array();
  for (const auto& c : spec.components) {
    nlohmann::ordered_json e;
    e["shape"] = c.shape == ComponentShape::gaussian ? "gaussian" : "uniform";
    e["center"] = { c.center.x, c.center.y };
    e["covariance"] = { c.var_x, c.cov_xy, c.var_y };
    e["boundary_mass_bound"] = boundary_mass_bound(c, spec.box);
    comps.push_back(e);
  }
  return j;
}

} // namespace stkde
