#pragma once

#include "stkde/domain.hpp"
#include "stkde/error.hpp"
#include "stkde/nelder_mead.hpp"
#include "stkde/parallel.hpp"
#include "stkde/weight_function.hpp"

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace stkde {

//! Per-period share of one cell's events in the citywide total; missing when
//! the period has no events at all.
struct ShareSeries
{
  std::size_t cell{ 0 };
  HourRange range{};
  std::vector<std::optional<double>> values;
};

//! Share series for every cell over `training`.
inline std::vector<ShareSeries> share_series(const EventStore& store,
                                             const StudyRegion& region,
                                             HourRange training)
{
  if (training.empty())
    throw PreconditionError("training range is empty");
  const std::size_t C = region.cell_count();
  const auto T = static_cast<std::size_t>(training.size());
  std::vector<ShareSeries> out(C);
  for (std::size_t c = 0; c < C; ++c) {
    out[c].cell = c;
    out[c].range = training;
    out[c].values.assign(T, std::nullopt);
  }
  std::vector<std::size_t> counts(C);
  for (std::size_t t = 0; t < T; ++t) {
    const auto events = store.period(training.begin + static_cast<std::int64_t>(t));
    if (events.empty())
      continue;
    std::fill(counts.begin(), counts.end(), 0);
    for (const auto& e : events)
      ++counts[region.cell_of(e.location)];
    const double n = static_cast<double>(events.size());
    for (std::size_t c = 0; c < C; ++c)
      out[c].values[t] = static_cast<double>(counts[c]) / n;
  }
  return out;
}

//! Sample autocorrelation A(l) for l = 1..L; index l-1. Lags with fewer than
//! the minimum number of complete pairs are flagged unreliable and excluded
//! from fitting.
struct AcfCurve
{
  std::size_t cell{ 0 };
  std::vector<double> values;
  std::vector<std::size_t> pair_counts;
  std::vector<bool> reliable;

  std::int64_t max_lag() const { return static_cast<std::int64_t>(values.size()); }
  std::size_t included_lags() const
  {
    return static_cast<std::size_t>(std::count(reliable.begin(), reliable.end(), true));
  }
};

//! Biased sample ACF with the global mean of the observed values. The lag-l
//! numerator sums only over pairs where both ends are observed; the
//! denominator is the full sum of squared deviations.
inline AcfCurve sample_acf(const ShareSeries& series,
                           std::int64_t max_lag,
                           std::size_t min_pairs = 30)
{
  const auto& v = series.values;
  if (max_lag < 1)
    throw PreconditionError("maximum lag must be at least 1");
  if (static_cast<std::int64_t>(v.size()) < max_lag + 2)
    throw PreconditionError("share series of cell " + std::to_string(series.cell) +
                            " has " + std::to_string(v.size()) +
                            " periods; need at least L + 2 = " +
                            std::to_string(max_lag + 2));
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& x : v) {
    if (x) {
      sum += *x;
      ++n;
    }
  }
  if (n == 0)
    throw DegenerateSeriesError("share series of cell " +
                                std::to_string(series.cell) + " has no observations");
  const double mean = sum / static_cast<double>(n);
  std::vector<double> centered(v.size(), 0.0);
  std::vector<char> present(v.size(), 0);
  double denom = 0.0, squares = 0.0;
  for (std::size_t t = 0; t < v.size(); ++t) {
    if (v[t]) {
      centered[t] = *v[t] - mean;
      present[t] = 1;
      denom += centered[t] * centered[t];
      squares += *v[t] * *v[t];
    }
  }
  // a constant series leaves only rounding residue from the mean
  if (!(denom > 1e-20 * squares))
    throw DegenerateSeriesError("share series of cell " +
                                std::to_string(series.cell) + " has zero variance");

  AcfCurve curve;
  curve.cell = series.cell;
  const auto L = static_cast<std::size_t>(max_lag);
  curve.values.resize(L);
  curve.pair_counts.resize(L);
  curve.reliable.resize(L);
  for (std::size_t l = 1; l <= L; ++l) {
    double num = 0.0;
    std::size_t pairs = 0;
    for (std::size_t t = 0; t + l < v.size(); ++t) {
      if (present[t] && present[t + l]) {
        num += centered[t] * centered[t + l];
        ++pairs;
      }
    }
    curve.values[l - 1] = num / denom;
    curve.pair_counts[l - 1] = pairs;
    curve.reliable[l - 1] = pairs >= min_pairs;
  }
  return curve;
}

inline AcfCurve positive_part(AcfCurve curve)
{
  for (auto& a : curve.values)
    a = std::max(a, 0.0);
  return curve;
}

struct FitOptions
{
  int starts{ 16 };
  int max_iterations{ 500 };
  double tolerance{ 1e-5 };
  std::uint64_t seed{ 0 };
  double daily_period{ 24.0 };
  double weekly_period{ 168.0 };
};

struct FitResult
{
  //! scale is expressed against the normalised curve: scale * w(l) / sum(w)
  //! approximates the target.
  WeightParams params{};
  double sse{ 0.0 };
  int iterations{ 0 };
  bool fallback{ false };
};

class FitFailedError : public Error
{
public:
  FitFailedError(const std::string& what, FitResult best)
    : Error(ErrorCategory::numerical, what)
    , best_(best)
  {}
  const FitResult& best_partial() const { return best_; }

private:
  FitResult best_;
};

namespace detail {

// Portable uniform draw in [0, 1): the standard distributions are
// implementation-defined, the engine is not.
inline double unit_uniform(std::mt19937_64& rng)
{
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double halton(std::size_t index, std::size_t base)
{
  double f = 1.0, r = 0.0;
  while (index > 0) {
    f /= static_cast<double>(base);
    r += f * static_cast<double>(index % base);
    index /= base;
  }
  return r;
}

//! Rotated Halton points in [0.05, 0.95]^4.
inline std::vector<std::array<double, 4>> multistart_points(int count,
                                                            std::uint64_t seed)
{
  std::mt19937_64 rng(seed);
  std::array<double, 4> shift;
  for (auto& s : shift)
    s = unit_uniform(rng);
  constexpr std::array<std::size_t, 4> bases{ 2, 3, 5, 7 };
  std::vector<std::array<double, 4>> pts(static_cast<std::size_t>(count));
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t d = 0; d < 4; ++d) {
      double h = halton(i + 1, bases[d]) + shift[d];
      h -= std::floor(h);
      pts[i][d] = 0.05 + 0.9 * h;
    }
  }
  return pts;
}

} // namespace detail

//! Fits the decay and trough parameters so that scale * w(l) matches a
//! non-negative ACF over its reliable lags. scale is solved in closed form for every candidate; the
//! shape parameters come from multi-start bounded Nelder-Mead.
inline FitResult fit_weight_params(const AcfCurve& target, const FitOptions& opts = {})
{
  const std::size_t L = target.values.size();
  std::vector<std::int64_t> lags;
  std::vector<double> a;
  for (std::size_t l = 1; l <= L; ++l) {
    if (target.reliable[l - 1]) {
      lags.push_back(static_cast<std::int64_t>(l));
      a.push_back(target.values[l - 1]);
    }
  }
  if (lags.size() < 100)
    throw PreconditionError("fitting needs at least 100 reliable lags, got " +
                            std::to_string(lags.size()));

  double energy = 0.0;
  for (double v : a)
    energy += v * v;
  if (energy == 0.0) {
    // Nothing to match: every shape fits. Take the flat curve (serial_decay = 1).
    FitResult r;
    r.params = WeightParams{ 0.0, 1.0, 0.0, 1.0, 1.0, opts.daily_period, opts.weekly_period };
    return r;
  }

  // Seasonal phases depend only on the lag; tabulate them once.
  std::vector<double> daily(lags.size()), weekly(lags.size());
  for (std::size_t k = 0; k < lags.size(); ++k) {
    daily[k] = detail::seasonal_phase(static_cast<double>(lags[k]), opts.daily_period);
    weekly[k] = detail::seasonal_phase(static_cast<double>(lags[k]), opts.weekly_period);
  }
  std::vector<double> w(lags.size());
  auto curve = [&](const std::array<double, 4>& q) {
    for (std::size_t k = 0; k < lags.size(); ++k) {
      const double l = static_cast<double>(lags[k]);
      w[k] = std::pow(q[0], l) + std::pow(q[1], l) * std::pow(q[2], daily[k]) *
                                     std::pow(q[3], weekly[k]);
    }
  };
  auto scale_and_sse = [&](const std::array<double, 4>& q) {
    curve(q);
    double aw = 0.0, ww = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) {
      aw += a[k] * w[k];
      ww += w[k] * w[k];
    }
    const double scale = ww > 0.0 ? std::max(0.0, aw / ww) : 0.0;
    double sse = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) {
      const double e = a[k] - scale * w[k];
      sse += e * e;
    }
    return std::pair<double, double>{ scale, sse };
  };
  // The simplex lives on u in [0,1]^4, mapped monotonically onto the same
  // box for q. The map stretches the regions that matter: decay rates close
  // to 1 and seasonal troughs close to 0.
  auto to_params = [](const std::array<double, 4>& u) {
    return std::array<double, 4>{ 1.0 - (1.0 - u[0]) * (1.0 - u[0]),
                                  1.0 - (1.0 - u[1]) * (1.0 - u[1]),
                                  u[2] * u[2],
                                  u[3] * u[3] };
  };
  auto objective = [&](const std::array<double, 4>& u) {
    return scale_and_sse(to_params(u)).second;
  };

  const std::array<double, 4> lower{ 0.0, 0.0, 0.0, 0.0 };
  const std::array<double, 4> upper{ 1.0, 1.0, 1.0, 1.0 };
  NelderMeadOptions nm;
  nm.x_tolerance = opts.tolerance;

  bool have_best = false;
  std::array<double, 4> best_x{};
  double best_sse = std::numeric_limits<double>::infinity();
  int total_iterations = 0;
  for (const auto& start : detail::multistart_points(opts.starts, opts.seed)) {
    // Restart from the incumbent until the per-start budget is spent or a
    // restart no longer moves; plain Nelder-Mead stalls on the narrow
    // valleys the seasonal terms create.
    std::array<double, 4> x = start;
    double fx = std::numeric_limits<double>::infinity();
    int budget = opts.max_iterations;
    double step = 0.1;
    while (budget > 0) {
      nm.max_iterations = budget;
      nm.initial_step = step;
      const auto r = nelder_mead_bounded<4>(objective, x, lower, upper, nm);
      budget -= std::max(r.iterations, 1);
      total_iterations += r.iterations;
      const bool improved = r.value < fx;
      if (r.value <= fx) {
        x = r.x;
        fx = r.value;
      }
      if (!r.converged || !improved || r.iterations == 0)
        break;
      step = 0.05;
    }
    const bool better =
      !have_best || fx < best_sse || (fx == best_sse && x[0] > best_x[0]);
    if (std::isfinite(fx) && better) {
      have_best = true;
      best_x = x;
      best_sse = fx;
    }
  }

  FitResult result;
  result.iterations = total_iterations;
  if (!have_best) {
    result.sse = std::numeric_limits<double>::infinity();
    throw FitFailedError("weight fit failed on every start for cell " +
                           std::to_string(target.cell),
                         result);
  }
  best_x = to_params(best_x);
  const auto [scale, sse] = scale_and_sse(best_x);
  WeightParams p{ 0.0, best_x[0], best_x[1], best_x[2], best_x[3],
                  opts.daily_period, opts.weekly_period };
  p.scale = scale * weight_area(p, static_cast<std::int64_t>(L));
  result.params = p;
  result.sse = sse;
  return result;
}

struct CellFit
{
  std::size_t cell{ 0 };
  std::size_t events{ 0 };
  bool degenerate{ false };
  //! Raw sample ACF; empty when the share series was degenerate.
  AcfCurve acf;
  FitResult fit;
};

struct WeightFit
{
  WeightModel model;
  std::vector<CellFit> cells;
  AcfCurve pooled_acf;
  FitResult pooled_fit;

  std::size_t fallback_count() const
  {
    return static_cast<std::size_t>(std::count_if(
      cells.begin(), cells.end(), [](const CellFit& c) { return c.fit.fallback; }));
  }
};

//! Event-count-weighted average of per-cell ACFs, lag by lag over the cells
//! where that lag is reliable.
inline AcfCurve pooled_acf(const std::vector<CellFit>& cells, std::int64_t max_lag)
{
  const auto L = static_cast<std::size_t>(max_lag);
  AcfCurve pooled;
  pooled.cell = std::numeric_limits<std::size_t>::max();
  pooled.values.assign(L, 0.0);
  pooled.pair_counts.assign(L, 0);
  pooled.reliable.assign(L, false);
  std::vector<double> mass(L, 0.0);
  for (const auto& c : cells) {
    if (c.degenerate)
      continue;
    for (std::size_t l = 0; l < L; ++l) {
      if (!c.acf.reliable[l])
        continue;
      const double m = static_cast<double>(c.events);
      pooled.values[l] += m * c.acf.values[l];
      mass[l] += m;
      pooled.pair_counts[l] = std::max(pooled.pair_counts[l], c.acf.pair_counts[l]);
    }
  }
  for (std::size_t l = 0; l < L; ++l) {
    if (mass[l] > 0.0) {
      pooled.values[l] /= mass[l];
      pooled.reliable[l] = true;
    }
  }
  return pooled;
}

//! Fits every cell's weight curve from the training range. Cells with fewer
//! than `min_events` events, a degenerate share series, or a failed fit take
//! the fit of the pooled citywide ACF and are flagged as fallbacks.
inline WeightFit fit_all_cells(const EventStore& store,
                               const StudyRegion& region,
                               HourRange training,
                               std::int64_t max_lag,
                               std::size_t min_events,
                               const FitOptions& opts = {},
                               std::size_t threads = 1)
{
  if (training.size() < max_lag + 168)
    throw PreconditionError("training range spans " + std::to_string(training.size()) +
                            " hours; weight fitting needs at least L + 168 = " +
                            std::to_string(max_lag + 168));
  const auto series = share_series(store, region, training);
  const std::size_t C = region.cell_count();

  WeightFit out;
  out.cells.resize(C);
  for (std::size_t c = 0; c < C; ++c)
    out.cells[c].cell = c;
  for (const auto& e : store.window(training))
    ++out.cells[region.cell_of(e.location)].events;

  parallel_for(C, threads, [&](std::size_t c) {
    try {
      out.cells[c].acf = sample_acf(series[c], max_lag);
    } catch (const DegenerateSeriesError&) {
      out.cells[c].degenerate = true;
    }
  });
  if (std::all_of(out.cells.begin(), out.cells.end(), [](const CellFit& c) {
        return c.degenerate;
      }))
    throw DegenerateSeriesError(
      "every cell's share series is constant; weight fitting needs at least two "
      "cells with varying demand shares");

  out.pooled_acf = pooled_acf(out.cells, max_lag);
  try {
    out.pooled_fit = fit_weight_params(positive_part(out.pooled_acf), opts);
  } catch (const PreconditionError& e) {
    throw FitFailedError(std::string("citywide fallback fit failed: ") + e.what(), {});
  }
  out.pooled_fit.fallback = true;

  parallel_for(C, threads, [&](std::size_t c) {
    auto& cell = out.cells[c];
    const bool usable = !cell.degenerate && cell.events >= min_events &&
                        cell.acf.included_lags() >= 100;
    if (usable) {
      try {
        cell.fit = fit_weight_params(positive_part(cell.acf), opts);
        return;
      } catch (const FitFailedError&) {
      }
    }
    cell.fit = out.pooled_fit;
  });

  std::vector<WeightParams> params;
  params.reserve(C);
  for (const auto& c : out.cells)
    params.push_back(c.fit.params);
  out.model = WeightModel(region, std::move(params), max_lag);
  return out;
}

} // namespace stkde
