#pragma once

#include "stkde/domain.hpp"
#include "stkde/error.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

namespace stkde {

//! Parameters of one cell's temporal weight curve
//!
//!   w(l) = serial_decay^l
//!        + seasonal_decay^l * daily_trough^(sin^2(pi l / daily_period))
//!                           * weekly_trough^(sin^2(pi l / weekly_period)).
//!
//! `serial_decay` carries short-term serial dependence. The two troughs set
//! how far the weight drops between daily and weekly peaks, and
//! `seasonal_decay` discounts the seasonal term with age. `scale` is found
//! while fitting the curve to an autocorrelation function; it is kept for
//! diagnostics and never enters prediction weights.
struct WeightParams
{
  double scale{ 1.0 };
  double serial_decay{ 0.0 };
  double seasonal_decay{ 0.0 };
  double daily_trough{ 1.0 };
  double weekly_trough{ 1.0 };
  double daily_period{ 24.0 };
  double weekly_period{ 168.0 };

  void validate() const
  {
    auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!unit(serial_decay) || !unit(seasonal_decay) || !unit(daily_trough) || !unit(weekly_trough))
      throw SpecError("weight decay and trough parameters must lie in [0, 1]");
    if (!(scale >= 0.0) || !std::isfinite(scale))
      throw SpecError("weight scale scale must be finite and non-negative");
    if (!(daily_period > 0.0) || !(weekly_period > 0.0) ||
        !std::isfinite(daily_period) || !std::isfinite(weekly_period))
      throw SpecError("seasonal periods must be positive");
  }

  friend bool operator==(const WeightParams&, const WeightParams&) = default;
};

namespace detail {

// sin^2(pi * lag / period) with the phase reduced first, so whole periods
// give exactly 0 (a stray 1e-32 would turn 0^s into 0 instead of 1).
inline double seasonal_phase(double lag, double period)
{
  const double r = std::fmod(lag, period);
  if (r == 0.0)
    return 0.0;
  const double s = std::sin(std::numbers::pi * (r / period));
  return s * s;
}

} // namespace detail

//! Unnormalised weight of an observation `lag` hours old; lies in [0, 2] and
//! equals 2 at lag 0 (0^0 is taken as 1).
inline double eval_raw_weight(const WeightParams& p, std::int64_t lag)
{
  if (lag < 0)
    throw LagOutOfRangeError("negative lag " + std::to_string(lag));
  const double l = static_cast<double>(lag);
  const double daily = detail::seasonal_phase(l, p.daily_period);
  const double weekly = detail::seasonal_phase(l, p.weekly_period);
  return std::pow(p.serial_decay, l) +
         std::pow(p.seasonal_decay, l) * std::pow(p.daily_trough, daily) * std::pow(p.weekly_trough, weekly);
}

//! Sum of raw weights over lags 1..max_lag.
inline double weight_area(const WeightParams& p, std::int64_t max_lag)
{
  double area = 0.0;
  for (std::int64_t l = 1; l <= max_lag; ++l)
    area += eval_raw_weight(p, l);
  return area;
}

struct WeightOptions
{
  bool interpolate{ false };
  double omission_threshold{ 0.0 };

  friend bool operator==(const WeightOptions&, const WeightOptions&) = default;
};

//! Bilinear blend of the four cell centres surrounding a point. Outside the
//! outermost centres the nearest centre's value is used.
struct BilinearStencil
{
  std::array<std::size_t, 4> cells{};
  std::array<double, 4> coefficients{};
};

inline BilinearStencil bilinear_stencil(const StudyRegion& region,
                                        const SpatialPoint& p)
{
  auto axis = [](double v, double lo, double step, std::size_t n) {
    // continuous index in centre coordinates, clamped to the outer centres
    double g = (v - lo) / step - 0.5;
    g = std::clamp(g, 0.0, static_cast<double>(n - 1));
    std::size_t i0 = static_cast<std::size_t>(std::floor(g));
    if (n > 1 && i0 > n - 2)
      i0 = n - 2;
    if (n == 1)
      return std::pair<std::size_t, double>{ 0, 0.0 };
    return std::pair<std::size_t, double>{ i0, g - static_cast<double>(i0) };
  };
  const auto& box = region.box();
  const auto [c0, fx] = axis(p.x, box.x_min, region.cell_width(), region.cols());
  const auto [r0, fy] = axis(p.y, box.y_min, region.cell_height(), region.rows());
  const std::size_t c1 = region.cols() > 1 ? c0 + 1 : c0;
  const std::size_t r1 = region.rows() > 1 ? r0 + 1 : r0;
  const std::size_t cols = region.cols();
  BilinearStencil s;
  s.cells = { r0 * cols + c0, r0 * cols + c1, r1 * cols + c0, r1 * cols + c1 };
  s.coefficients = { (1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy };
  return s;
}

//! Per-cell weight curves over a study region, normalised so each cell's
//! weights over lags 1..L sum to one. Immutable after construction.
class WeightModel
{
public:
  WeightModel() = default;

  WeightModel(StudyRegion region,
              std::vector<WeightParams> params,
              std::int64_t max_lag,
              WeightOptions options = {})
    : region_(std::move(region))
    , params_(std::move(params))
    , max_lag_(max_lag)
    , options_(options)
  {
    if (params_.size() != region_.cell_count())
      throw SpecError("weight model needs one parameter set per cell (" +
                      std::to_string(region_.cell_count()) + "), got " +
                      std::to_string(params_.size()));
    if (max_lag_ < 1)
      throw SpecError("maximum lag must be at least 1");
    if (!(options_.omission_threshold >= 0.0))
      throw SpecError("omission threshold must be non-negative");
    const auto L = static_cast<std::size_t>(max_lag_);
    normalization_.resize(params_.size());
    table_.resize(params_.size() * L);
    for (std::size_t c = 0; c < params_.size(); ++c) {
      params_[c].validate();
      double area = 0.0;
      for (std::size_t l = 1; l <= L; ++l) {
        const double w = eval_raw_weight(params_[c], static_cast<std::int64_t>(l));
        table_[c * L + (l - 1)] = w;
        area += w;
      }
      if (!(area > 0.0))
        throw SpecError("weight curve of cell " + std::to_string(c) +
                        " vanishes on every lag");
      normalization_[c] = area;
      for (std::size_t l = 0; l < L; ++l)
        table_[c * L + l] /= area;
    }
  }

  const StudyRegion& region() const { return region_; }
  std::span<const WeightParams> params() const { return params_; }
  std::int64_t max_lag() const { return max_lag_; }
  const WeightOptions& options() const { return options_; }
  double normalization(std::size_t cell) const { return normalization_.at(cell); }

  //! Same curves under a different interpolation / threshold policy.
  WeightModel with_options(WeightOptions options) const
  {
    if (!(options.omission_threshold >= 0.0))
      throw SpecError("omission threshold must be non-negative");
    WeightModel copy = *this;
    copy.options_ = options;
    return copy;
  }

  //! Normalised w_c(lag) for lag in 1..L.
  double normalized(std::size_t cell, std::int64_t lag) const
  {
    return table_[cell * static_cast<std::size_t>(max_lag_) +
                  static_cast<std::size_t>(lag - 1)];
  }

  //! Weight of an event for predicting `target`, after interpolation and
  //! the omission threshold.
  double eval(const Event& event, HourIndex target) const
  {
    const std::int64_t lag = target - event.period;
    if (lag < 1 || lag > max_lag_)
      throw LagOutOfRangeError("lag " + std::to_string(lag) +
                               " outside (0, " + std::to_string(max_lag_) + "]");
    double w;
    if (options_.interpolate) {
      const auto s = bilinear_stencil(region_, event.location);
      w = 0.0;
      for (std::size_t k = 0; k < 4; ++k)
        w += s.coefficients[k] * normalized(s.cells[k], lag);
    } else {
      w = normalized(region_.cell_of(event.location), lag);
    }
    return w < options_.omission_threshold ? 0.0 : w;
  }

private:
  StudyRegion region_{};
  std::vector<WeightParams> params_;
  std::int64_t max_lag_{ 1 };
  WeightOptions options_{};
  std::vector<double> normalization_;
  std::vector<double> table_;
};

inline double eval_weight(const WeightModel& model,
                          const Event& event,
                          HourIndex target)
{
  return model.eval(event, target);
}

struct WeightedEvent
{
  Event event;
  double weight;
};

struct RetainedWindow
{
  std::vector<WeightedEvent> events;
  std::size_t window_size{ 0 };
  std::size_t omitted{ 0 };
};

//! Events of the L hours before `target` with their weights; zero-weight
//! events (including thresholded ones) are omitted and counted.
inline RetainedWindow retained_window(const WeightModel& model,
                                     const EventStore& store,
                                     HourIndex target)
{
  if (target.value() < 1)
    throw PreconditionError("target hour must be at least 1");
  RetainedWindow out;
  const auto window = store.window(HourRange{ target - model.max_lag(), target });
  out.window_size = window.size();
  out.events.reserve(window.size());
  for (const auto& e : window) {
    const double w = model.eval(e, target);
    if (w > 0.0)
      out.events.push_back(WeightedEvent{ e, w });
    else
      ++out.omitted;
  }
  return out;
}

} // namespace stkde
