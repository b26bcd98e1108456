#pragma once

#include "stkde/domain.hpp"
#include "stkde/error.hpp"
#include "stkde/kernel.hpp"
#include "stkde/predictor.hpp"

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

namespace stkde {

//! Hours per week and per 52-week "year" used to align historical hours.
inline constexpr std::int64_t hours_per_week = 168;
inline constexpr std::int64_t hours_per_year = 52 * hours_per_week;

struct MedicConfig
{
  double cell_size{ 1.0 };
  int lookback_weeks{ 4 };
  int lookback_years{ 2 };
  //! Grid origin; defaults to the box's lower-left corner.
  std::optional<SpatialPoint> anchor;

  void validate() const
  {
    if (!(cell_size > 0.0))
      throw SpecError("MEDIC cell size must be positive");
    if (lookback_weeks < 1)
      throw SpecError("MEDIC needs at least one lookback week");
    if (lookback_years < 0 || lookback_years > 2)
      throw SpecError("MEDIC lookback years must be in 0..2");
  }
};

//! Historical hours averaged by MEDIC for `target`, restricted to the store's
//! coverage: the same hour in each of the previous `weeks` weeks, plus, for
//! each earlier year, the same hour of that year's week and the following
//! weeks (k = 0..weeks-1).
inline std::vector<HourIndex> medic_lookback_hours(const EventStore& store,
                                                   const MedicConfig& config,
                                                   HourIndex target)
{
  std::vector<HourIndex> hours;
  const HourRange cov = store.coverage();
  for (int k = 1; k <= config.lookback_weeks; ++k) {
    const HourIndex h = target - k * hours_per_week;
    if (cov.contains(h))
      hours.push_back(h);
  }
  for (int y = 1; y <= config.lookback_years; ++y) {
    for (int k = 0; k < config.lookback_weeks; ++k) {
      const HourIndex h = target - y * hours_per_year - k * hours_per_week;
      if (cov.contains(h))
        hours.push_back(h);
    }
  }
  return hours;
}

//! Piecewise-constant MEDIC density over square cells clipped to the box.
class MedicSurface
{
public:
  MedicSurface(const BoundingBox& box, const MedicConfig& config)
    : box_(box)
    , size_(config.cell_size)
  {
    const SpatialPoint anchor = config.anchor.value_or(SpatialPoint{ box.x_min, box.y_min });
    first_col_ = static_cast<std::int64_t>(std::floor((box.x_min - anchor.x) / size_));
    first_row_ = static_cast<std::int64_t>(std::floor((box.y_min - anchor.y) / size_));
    anchor_ = anchor;
    const auto last_col =
      static_cast<std::int64_t>(std::ceil((box.x_max - anchor.x) / size_));
    const auto last_row =
      static_cast<std::int64_t>(std::ceil((box.y_max - anchor.y) / size_));
    cols_ = static_cast<std::size_t>(std::max<std::int64_t>(1, last_col - first_col_));
    rows_ = static_cast<std::size_t>(std::max<std::int64_t>(1, last_row - first_row_));
    values_.assign(rows_ * cols_, 0.0);
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool uniform() const { return uniform_; }

  std::size_t cell_of(const SpatialPoint& p) const
  {
    auto index = [&](double v, double a, std::int64_t first, std::size_t n) {
      auto k = static_cast<std::int64_t>(std::floor((v - a) / size_)) - first;
      return static_cast<std::size_t>(
        std::clamp<std::int64_t>(k, 0, static_cast<std::int64_t>(n) - 1));
    };
    return index(p.y, anchor_.y, first_row_, rows_) * cols_ +
           index(p.x, anchor_.x, first_col_, cols_);
  }

  //! Area of cell `c` inside the box.
  double cell_area(std::size_t c) const
  {
    const auto r = static_cast<std::int64_t>(c / cols_) + first_row_;
    const auto k = static_cast<std::int64_t>(c % cols_) + first_col_;
    const double x0 = std::max(box_.x_min, anchor_.x + static_cast<double>(k) * size_);
    const double x1 = std::min(box_.x_max, anchor_.x + static_cast<double>(k + 1) * size_);
    const double y0 = std::max(box_.y_min, anchor_.y + static_cast<double>(r) * size_);
    const double y1 = std::min(box_.y_max, anchor_.y + static_cast<double>(r + 1) * size_);
    return std::max(0.0, x1 - x0) * std::max(0.0, y1 - y0);
  }

  //! Averaged count per cell before normalisation.
  std::span<const double> averaged_counts() const { return counts_; }

  //! Turns averaged counts into a density over the box; an all-zero surface
  //! becomes the uniform density.
  void set_counts(std::vector<double> counts)
  {
    counts_ = std::move(counts);
    double mass = 0.0;
    for (std::size_t c = 0; c < counts_.size(); ++c)
      mass += std::max(counts_[c], 0.0) * cell_area(c);
    uniform_ = !(mass > 0.0);
    for (std::size_t c = 0; c < counts_.size(); ++c)
      values_[c] = uniform_ ? 1.0 / box_.area() : std::max(counts_[c], 0.0) / mass;
  }

  double cell_density(std::size_t c) const { return values_[c]; }

  double operator()(const SpatialPoint& p) const
  {
    if (!box_.contains(p))
      return 0.0;
    return values_[cell_of(p)];
  }

private:
  BoundingBox box_;
  double size_;
  SpatialPoint anchor_{};
  std::int64_t first_col_{ 0 };
  std::int64_t first_row_{ 0 };
  std::size_t rows_{ 1 };
  std::size_t cols_{ 1 };
  std::vector<double> counts_;
  std::vector<double> values_;
  bool uniform_{ false };
};

//! MEDIC: per cell, the mean count over the corresponding historical hours.
inline MedicSurface medic_predict(const EventStore& store,
                                  const BoundingBox& box,
                                  const MedicConfig& config,
                                  HourIndex target)
{
  config.validate();
  const auto hours = medic_lookback_hours(store, config, target);
  if (hours.empty())
    throw NoDataError("MEDIC: no lookback hour for hour " +
                      std::to_string(target.value()) + " lies inside the data");
  MedicSurface surface(box, config);
  std::vector<double> counts(surface.rows() * surface.cols(), 0.0);
  for (const HourIndex h : hours) {
    for (const auto& e : store.period(h)) {
      if (box.contains(e.location))
        counts[surface.cell_of(e.location)] += 1.0;
    }
  }
  for (auto& c : counts)
    c /= static_cast<double>(hours.size());
  surface.set_counts(std::move(counts));
  return surface;
}

namespace detail {

inline WeightedKde unweighted_kde(std::span<const Event> events,
                                  const KernelEvaluator& kernel)
{
  std::vector<SpatialPoint> pts;
  pts.reserve(events.size());
  for (const auto& e : events)
    pts.push_back(e.location);
  return WeightedKde(kernel, std::move(pts));
}

} // namespace detail

//! Unweighted KDE of the hour before `target`.
inline WeightedKde naive_recent_hour(const EventStore& store,
                                     const KernelEvaluator& kernel,
                                     HourIndex target)
{
  const auto events = store.period(target - 1);
  if (events.empty())
    throw NoDataError("no events in hour " + std::to_string(target.value() - 1));
  return detail::unweighted_kde(events, kernel);
}

//! Unweighted KDE of the `max_lag` hours before `target`.
inline WeightedKde naive_equal_weights(const EventStore& store,
                                       const KernelEvaluator& kernel,
                                       std::int64_t max_lag,
                                       HourIndex target)
{
  const auto events = store.window(HourRange{ target - max_lag, target });
  if (events.empty())
    throw NoDataError("no events in the " + std::to_string(max_lag) +
                      "-hour window before hour " + std::to_string(target.value()));
  return detail::unweighted_kde(events, kernel);
}

} // namespace stkde
