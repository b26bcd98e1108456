#pragma once

#include "stkde/error.hpp"

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace stkde {

//! Planar location in kilometres.
struct SpatialPoint
{
  double x{ 0.0 };
  double y{ 0.0 };

  bool finite() const { return std::isfinite(x) && std::isfinite(y); }
  friend bool operator==(const SpatialPoint&, const SpatialPoint&) = default;
};

//! Index of a one-hour period counted from the dataset epoch.
class HourIndex
{
public:
  constexpr HourIndex() = default;
  constexpr explicit HourIndex(std::int64_t value)
    : value_(value)
  {}

  constexpr std::int64_t value() const { return value_; }

  friend constexpr auto operator<=>(HourIndex, HourIndex) = default;
  friend constexpr HourIndex operator+(HourIndex h, std::int64_t hours)
  {
    return HourIndex(h.value_ + hours);
  }
  friend constexpr HourIndex operator-(HourIndex h, std::int64_t hours)
  {
    return HourIndex(h.value_ - hours);
  }
  //! Lag in hours between two periods.
  friend constexpr std::int64_t operator-(HourIndex a, HourIndex b)
  {
    return a.value_ - b.value_;
  }

private:
  std::int64_t value_{ 0 };
};

//! Half-open range of hourly periods [begin, end).
struct HourRange
{
  HourIndex begin;
  HourIndex end;

  constexpr std::int64_t size() const
  {
    return std::max<std::int64_t>(0, end - begin);
  }
  constexpr bool empty() const { return size() == 0; }
  constexpr bool contains(HourIndex h) const { return begin <= h && h < end; }
  constexpr HourRange intersect(HourRange other) const
  {
    HourRange r{ std::max(begin, other.begin), std::min(end, other.end) };
    if (r.end < r.begin)
      r.end = r.begin;
    return r;
  }
  friend constexpr bool operator==(HourRange, HourRange) = default;
};

struct Event
{
  SpatialPoint location;
  HourIndex period;

  friend bool operator==(const Event&, const Event&) = default;
};

struct BoundingBox
{
  double x_min{ 0.0 };
  double x_max{ 1.0 };
  double y_min{ 0.0 };
  double y_max{ 1.0 };

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double area() const { return width() * height(); }
  bool contains(const SpatialPoint& p) const
  {
    return p.x >= x_min && p.x <= x_max && p.y >= y_min && p.y <= y_max;
  }
  void validate() const
  {
    if (!(std::isfinite(x_min) && std::isfinite(x_max) &&
          std::isfinite(y_min) && std::isfinite(y_max)))
      throw SpecError("bounding box has non-finite coordinates");
    if (!(width() > 0.0) || !(height() > 0.0))
      throw SpecError("bounding box must have positive width and height");
  }
  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

//! Study area: bounding box, the coarse cell grid that carries the temporal
//! weight functions, and the resolution of the fine density-export grid.
//!
//! Cells are numbered row-major with row 0 at y_min and column 0 at x_min.
//! Cells are half-open [lo, hi) on both axes, except that the outermost cells
//! are closed at x_max / y_max, so the grid partitions the box exactly.
class StudyRegion
{
public:
  StudyRegion() = default;
  StudyRegion(BoundingBox box,
              std::size_t rows,
              std::size_t cols,
              double resolution = 1.0)
    : box_(box)
    , rows_(rows)
    , cols_(cols)
    , resolution_(resolution)
  {
    box_.validate();
    if (rows_ < 1 || cols_ < 1)
      throw SpecError("cell grid needs at least one row and one column");
    if (!(resolution_ > 0.0) || !std::isfinite(resolution_))
      throw SpecError("evaluation-grid resolution must be positive");
  }

  //! Grid with `cells` cells whose factorisation rows x cols gives cells that
  //! are as close to square as possible for this box.
  static StudyRegion with_cell_count(BoundingBox box,
                                     std::size_t cells,
                                     double resolution = 1.0)
  {
    box.validate();
    if (cells < 1)
      throw SpecError("cell count must be positive");
    std::size_t best_rows = 1;
    double best_score = INFINITY;
    for (std::size_t r = 1; r <= cells; ++r) {
      if (cells % r != 0)
        continue;
      const std::size_t c = cells / r;
      const double aspect =
        std::abs(std::log((box.width() / c) / (box.height() / r)));
      if (aspect < best_score - 1e-12) {
        best_score = aspect;
        best_rows = r;
      }
    }
    return StudyRegion(box, best_rows, cells / best_rows, resolution);
  }

  const BoundingBox& box() const { return box_; }
  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t cell_count() const { return rows_ * cols_; }
  double resolution() const { return resolution_; }
  double cell_width() const { return box_.width() / cols_; }
  double cell_height() const { return box_.height() / rows_; }

  //! x coordinate of the boundary left of column `i` (i in 0..cols).
  double col_edge(std::size_t i) const
  {
    return i >= cols_ ? box_.x_max
                      : box_.x_min + box_.width() * static_cast<double>(i) /
                                       static_cast<double>(cols_);
  }
  double row_edge(std::size_t j) const
  {
    return j >= rows_ ? box_.y_max
                      : box_.y_min + box_.height() * static_cast<double>(j) /
                                       static_cast<double>(rows_);
  }

  std::size_t col_of(double x) const
  {
    return locate(x, box_.x_min, box_.width(), cols_, [this](std::size_t i) {
      return col_edge(i);
    });
  }
  std::size_t row_of(double y) const
  {
    return locate(y, box_.y_min, box_.height(), rows_, [this](std::size_t j) {
      return row_edge(j);
    });
  }

  std::size_t cell_of(const SpatialPoint& p) const
  {
    if (!p.finite() || !box_.contains(p))
      throw OutOfDomainError("point (" + std::to_string(p.x) + ", " +
                             std::to_string(p.y) +
                             ") lies outside the study region");
    return row_of(p.y) * cols_ + col_of(p.x);
  }

  SpatialPoint cell_center(std::size_t cell) const
  {
    const std::size_t r = cell / cols_;
    const std::size_t c = cell % cols_;
    return { 0.5 * (col_edge(c) + col_edge(c + 1)),
             0.5 * (row_edge(r) + row_edge(r + 1)) };
  }

  friend bool operator==(const StudyRegion&, const StudyRegion&) = default;

private:
  template<class Edge>
  static std::size_t locate(double v,
                            double lo,
                            double extent,
                            std::size_t n,
                            Edge edge)
  {
    double guess = std::floor((v - lo) / extent * static_cast<double>(n));
    std::size_t i = guess <= 0.0 ? 0
                    : guess >= static_cast<double>(n - 1)
                      ? n - 1
                      : static_cast<std::size_t>(guess);
    // Repair rounding so the result agrees with the explicit edge tests.
    while (i > 0 && v < edge(i))
      --i;
    while (i + 1 < n && v >= edge(i + 1))
      ++i;
    return i;
  }

  BoundingBox box_{};
  std::size_t rows_{ 1 };
  std::size_t cols_{ 1 };
  double resolution_{ 1.0 };
};

//! Events sorted by period with an hourly offset index. Immutable after
//! construction.
class EventStore
{
public:
  EventStore() = default;

  //! `coverage` is the span of hours the data describes; hours inside it
  //! without events have n_t = 0. Every event must fall inside it.
  EventStore(std::vector<Event> events, HourRange coverage)
    : events_(std::move(events))
    , coverage_(coverage)
  {
    std::stable_sort(events_.begin(),
                     events_.end(),
                     [](const Event& a, const Event& b) {
                       return a.period < b.period;
                     });
    for (const auto& e : events_) {
      if (!coverage_.contains(e.period))
        throw std::invalid_argument("event period outside store coverage");
    }
    offsets_.assign(static_cast<std::size_t>(coverage_.size()) + 1, 0);
    std::size_t k = 0;
    for (std::int64_t h = 0; h < coverage_.size(); ++h) {
      offsets_[static_cast<std::size_t>(h)] = k;
      const HourIndex period = coverage_.begin + h;
      while (k < events_.size() && events_[k].period == period)
        ++k;
    }
    offsets_.back() = events_.size();
  }

  //! Coverage spans from the earliest to the latest event period.
  static EventStore from_events(std::vector<Event> events)
  {
    if (events.empty())
      return EventStore({}, HourRange{});
    auto [lo, hi] = std::minmax_element(
      events.begin(), events.end(), [](const Event& a, const Event& b) {
        return a.period < b.period;
      });
    HourRange span{ lo->period, hi->period + 1 };
    return EventStore(std::move(events), span);
  }

  std::size_t size() const { return events_.size(); }
  bool empty() const { return events_.empty(); }
  HourRange coverage() const { return coverage_; }
  std::span<const Event> events() const { return events_; }

  //! n_t; zero outside the coverage.
  std::size_t count(HourIndex period) const
  {
    if (!coverage_.contains(period))
      return 0;
    const auto i = static_cast<std::size_t>(period - coverage_.begin);
    return offsets_[i + 1] - offsets_[i];
  }

  //! All events with period in [range.begin, range.end).
  std::span<const Event> window(HourRange range) const
  {
    const HourRange r = range.intersect(coverage_);
    if (r.empty())
      return {};
    const auto a = static_cast<std::size_t>(r.begin - coverage_.begin);
    const auto b = static_cast<std::size_t>(r.end - coverage_.begin);
    return std::span<const Event>(events_).subspan(offsets_[a],
                                                   offsets_[b] - offsets_[a]);
  }

  std::span<const Event> period(HourIndex h) const
  {
    return window(HourRange{ h, h + 1 });
  }

  friend bool operator==(const EventStore& a, const EventStore& b)
  {
    return a.coverage_ == b.coverage_ && a.events_ == b.events_;
  }

private:
  std::vector<Event> events_;
  HourRange coverage_{};
  std::vector<std::size_t> offsets_{ 0 };
};

} // namespace stkde
