#pragma once

#include "stkde/domain.hpp"
#include "stkde/error.hpp"
#include "stkde/kernel.hpp"
#include "stkde/parallel.hpp"
#include "stkde/weight_estimation.hpp"
#include "stkde/weight_function.hpp"

#include <cmath>
#include <span>
#include <vector>

namespace stkde {

//! Floor applied to predictive densities before taking logs (km^-2).
inline constexpr double density_floor = 1e-12;

//! sum_i w_i K_H(s - s_i) / sum_i w_i over a fixed set of points.
class WeightedKde
{
public:
  WeightedKde(KernelEvaluator kernel,
              std::vector<SpatialPoint> points,
              std::vector<double> weights)
    : kernel_(kernel)
    , points_(std::move(points))
    , weights_(std::move(weights))
  {
    if (points_.size() != weights_.size())
      throw std::invalid_argument("one weight per point required");
    for (double w : weights_)
      total_ += w;
    if (points_.empty() || !(total_ > 0.0))
      throw NoDataError("kernel density estimate has no positively weighted points");
    if (kernel_.kind() == KernelKind::epanechnikov)
      support_ = kernel_.bandwidth().extent(1.0);
  }

  //! Equal weights.
  WeightedKde(KernelEvaluator kernel, std::vector<SpatialPoint> points)
    : WeightedKde(kernel, points, std::vector<double>(points.size(), 1.0))
  {}

  double operator()(const SpatialPoint& q) const
  {
    double sum = 0.0;
    if (kernel_.kind() == KernelKind::epanechnikov) {
      // points outside the support's bounding box contribute exactly zero
      for (std::size_t i = 0; i < points_.size(); ++i) {
        const double dx = q.x - points_[i].x;
        const double dy = q.y - points_[i].y;
        if (std::abs(dx) > support_[0] || std::abs(dy) > support_[1])
          continue;
        sum += weights_[i] * kernel_(dx, dy);
      }
    } else {
      for (std::size_t i = 0; i < points_.size(); ++i)
        sum += weights_[i] * kernel_(q.x - points_[i].x, q.y - points_[i].y);
    }
    return sum / total_;
  }

  std::size_t size() const { return points_.size(); }
  std::span<const SpatialPoint> points() const { return points_; }
  std::span<const double> weights() const { return weights_; }
  const KernelEvaluator& kernel() const { return kernel_; }

private:
  KernelEvaluator kernel_;
  std::vector<SpatialPoint> points_;
  std::vector<double> weights_;
  double total_{ 0.0 };
  std::array<double, 2> support_{ 0.0, 0.0 };
};

//! Everything that is estimated offline and persisted in a model file.
struct FittedModel
{
  WeightModel weights;
  KernelKind kernel{ KernelKind::gaussian };
  Bandwidth bandwidth{};
  //! Per-cell fit diagnostics (may be empty for hand-built models).
  std::vector<FitResult> fits;

  const StudyRegion& region() const { return weights.region(); }
  std::int64_t max_lag() const { return weights.max_lag(); }
};

//! Predictive density for one target hour.
struct HourForecast
{
  WeightedKde kde;
  std::size_t window_size{ 0 };
  std::size_t omitted{ 0 };

  double operator()(const SpatialPoint& q) const { return kde(q); }
  std::size_t size() const { return kde.size(); }
};

//! A fitted model bound to the events it predicts from. Does not own the
//! store; the store must outlive the model.
class DensityModel
{
public:
  DensityModel(FittedModel fitted, const EventStore& store)
    : fitted_(std::move(fitted))
    , store_(&store)
    , kernel_(fitted_.kernel, fitted_.bandwidth)
  {}

  const FittedModel& fitted() const { return fitted_; }
  const EventStore& store() const { return *store_; }
  const KernelEvaluator& kernel() const { return kernel_; }
  std::int64_t max_lag() const { return fitted_.max_lag(); }

  //! Throws NoDataError when no event of the window keeps a positive weight.
  HourForecast forecast(HourIndex target) const
  {
    auto window = retained_window(fitted_.weights, *store_, target);
    if (window.events.empty())
      throw NoDataError("no retained events in the " +
                        std::to_string(max_lag()) + "-hour window before hour " +
                        std::to_string(target.value()));
    std::vector<SpatialPoint> points;
    std::vector<double> weights;
    points.reserve(window.events.size());
    weights.reserve(window.events.size());
    for (const auto& we : window.events) {
      points.push_back(we.event.location);
      weights.push_back(we.weight);
    }
    return HourForecast{ WeightedKde(kernel_, std::move(points), std::move(weights)),
                         window.window_size,
                         window.omitted };
  }

private:
  FittedModel fitted_;
  const EventStore* store_;
  KernelEvaluator kernel_;
};

inline double predict_density(const DensityModel& model,
                              HourIndex target,
                              const SpatialPoint& query)
{
  return model.forecast(target)(query);
}

//! Densities at the centres of a regular grid over a box. `values` is
//! row-major with row 0 at y_min.
struct DensityGrid
{
  BoundingBox box{};
  std::size_t nx{ 0 };
  std::size_t ny{ 0 };
  std::vector<double> values;

  double dx() const { return box.width() / static_cast<double>(nx); }
  double dy() const { return box.height() / static_cast<double>(ny); }
  double cell_area() const { return dx() * dy(); }
  double x_center(std::size_t i) const
  {
    return box.x_min + (static_cast<double>(i) + 0.5) * dx();
  }
  double y_center(std::size_t j) const
  {
    return box.y_min + (static_cast<double>(j) + 0.5) * dy();
  }
  double at(std::size_t i, std::size_t j) const { return values[j * nx + i]; }

  //! Midpoint-rule integral over the box.
  double integral() const
  {
    double s = 0.0;
    for (double v : values)
      s += v;
    return s * cell_area();
  }
};

//! Evaluates `density` at the centres of a grid with `resolution` cells per
//! km (at least one cell per axis).
template<class Density>
DensityGrid evaluate_grid(const BoundingBox& box,
                          double resolution,
                          const Density& density,
                          std::size_t threads = 1)
{
  if (!(resolution > 0.0))
    throw SpecError("grid resolution must be positive");
  DensityGrid g;
  g.box = box;
  g.nx = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(box.width() * resolution)));
  g.ny = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(box.height() * resolution)));
  g.values.assign(g.nx * g.ny, 0.0);
  parallel_for(g.ny, threads, [&](std::size_t j) {
    const double y = g.y_center(j);
    for (std::size_t i = 0; i < g.nx; ++i)
      g.values[j * g.nx + i] = density(SpatialPoint{ g.x_center(i), y });
  });
  return g;
}

inline DensityGrid predict_grid(const DensityModel& model,
                                HourIndex target,
                                double resolution,
                                std::size_t threads = 1)
{
  const auto f = model.forecast(target);
  return evaluate_grid(model.fitted().region().box(), resolution, f, threads);
}

} // namespace stkde
