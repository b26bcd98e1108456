#pragma once

#include "stkde/domain.hpp"
#include "stkde/error.hpp"

#include <boost/random/normal_distribution.hpp>
#include <boost/random/poisson_distribution.hpp>
#include <boost/random/uniform_01.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace stkde {

enum class ComponentShape
{
  gaussian,
  uniform
};

//! One spatial mixture component with its own mixing-weight dynamics. The
//! component's logit at hour t is
//!   base + daily_amplitude * sin(2 pi t / T1 + daily_phase)
//!        + weekly_amplitude * sin(2 pi t / T2 + weekly_phase) + e_t,
//! with AR(1) noise e_t = ar_coefficient * e_{t-1} + ar_sigma * z_t.
//! Mixing weights are the softmax of the logits.
struct ComponentSpec
{
  ComponentShape shape{ ComponentShape::gaussian };
  SpatialPoint center{};
  double var_x{ 1.0 };
  double cov_xy{ 0.0 };
  double var_y{ 1.0 };
  double base{ 0.0 };
  double daily_amplitude{ 0.0 };
  double daily_phase{ 0.0 };
  double weekly_amplitude{ 0.0 };
  double weekly_phase{ 0.0 };
  double ar_coefficient{ 0.0 };
  double ar_sigma{ 0.0 };
};

namespace detail {

inline double normal_cdf(double z)
{
  return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

} // namespace detail

//! Upper bound (union over the four sides) on a Gaussian component's mass
//! outside the box.
inline double boundary_mass_bound(const ComponentSpec& c, const BoundingBox& box)
{
  if (c.shape == ComponentShape::uniform)
    return 0.0;
  const double sx = std::sqrt(c.var_x), sy = std::sqrt(c.var_y);
  return detail::normal_cdf((box.x_min - c.center.x) / sx) +
         detail::normal_cdf((c.center.x - box.x_max) / sx) +
         detail::normal_cdf((box.y_min - c.center.y) / sy) +
         detail::normal_cdf((c.center.y - box.y_max) / sy);
}

struct ScenarioSpec
{
  BoundingBox box{};
  std::vector<ComponentSpec> components;
  //! Aggregate intensity delta_t = rate + rate_daily_amplitude * sin(2 pi t / T1
  //! + rate_daily_phase), clamped at zero (events per hour).
  double rate{ 23.0 };
  double rate_daily_amplitude{ 0.0 };
  double rate_daily_phase{ 0.0 };
  std::int64_t horizon{ 0 };
  std::uint64_t seed{ 0 };
  double daily_period{ 24.0 };
  double weekly_period{ 168.0 };
  //! Largest admissible boundary-rejection mass per component.
  double max_rejection{ 0.01 };

  void validate() const
  {
    box.validate();
    if (components.empty())
      throw SpecError("scenario needs at least one component");
    if (!(rate >= 0.0) || !std::isfinite(rate) || !std::isfinite(rate_daily_amplitude))
      throw SpecError("scenario rate must be finite and non-negative");
    if (horizon < 0)
      throw SpecError("scenario horizon must be non-negative");
    for (std::size_t k = 0; k < components.size(); ++k) {
      const auto& c = components[k];
      const std::string id = "component " + std::to_string(k);
      if (c.shape == ComponentShape::gaussian) {
        const double det = c.var_x * c.var_y - c.cov_xy * c.cov_xy;
        if (!(c.var_x > 0.0) || !(c.var_y > 0.0) || !(det > 0.0))
          throw SpecError(id + ": degenerate covariance");
        if (boundary_mass_bound(c, box) >= max_rejection)
          throw SpecError(id + ": more than " + std::to_string(max_rejection * 100) +
                          "% of its mass may fall outside the box");
      }
      if (!(std::abs(c.ar_coefficient) < 1.0) || !(c.ar_sigma >= 0.0))
        throw SpecError(id + ": AR(1) noise needs |coefficient| < 1 and sigma >= 0");
    }
  }
};

//! Ground-truth hourly densities f_t of a simulated scenario.
class GroundTruth
{
public:
  GroundTruth() = default;
  GroundTruth(ScenarioSpec spec, std::vector<double> mixing, std::vector<double> rates)
    : spec_(std::move(spec))
    , mixing_(std::move(mixing))
    , rates_(std::move(rates))
  {
    for (const auto& c : spec_.components) {
      const double det = c.var_x * c.var_y - c.cov_xy * c.cov_xy;
      norms_.push_back(c.shape == ComponentShape::uniform
                         ? 1.0 / spec_.box.area()
                         : 1.0 / (2.0 * std::numbers::pi * std::sqrt(det)));
      inv_.push_back({ c.var_y / det, -c.cov_xy / det, c.var_x / det });
    }
  }

  const ScenarioSpec& spec() const { return spec_; }
  std::int64_t horizon() const { return spec_.horizon; }
  std::size_t components() const { return spec_.components.size(); }

  std::span<const double> mixing(HourIndex t) const
  {
    const std::size_t K = components();
    return std::span<const double>(mixing_).subspan(static_cast<std::size_t>(t.value()) * K, K);
  }
  double rate(HourIndex t) const { return rates_.at(static_cast<std::size_t>(t.value())); }

  //! Untruncated mixture density (km^-2); rejection keeps the lost mass
  //! below the scenario's admissible rejection rate.
  double density(HourIndex t, const SpatialPoint& p) const
  {
    if (t.value() < 0 || t.value() >= horizon())
      throw OutOfDomainError("hour " + std::to_string(t.value()) +
                             " outside the simulated horizon");
    const auto pi = mixing(t);
    double f = 0.0;
    for (std::size_t k = 0; k < pi.size(); ++k)
      f += pi[k] * component_density(k, p);
    return f;
  }

  double component_density(std::size_t k, const SpatialPoint& p) const
  {
    const auto& c = spec_.components[k];
    if (c.shape == ComponentShape::uniform)
      return spec_.box.contains(p) ? norms_[k] : 0.0;
    const double dx = p.x - c.center.x, dy = p.y - c.center.y;
    const auto& m = inv_[k];
    return norms_[k] * std::exp(-0.5 * (m[0] * dx * dx + 2.0 * m[1] * dx * dy + m[2] * dy * dy));
  }

  //! Density functor for one hour, matching the forecaster interface.
  auto forecast(HourIndex t) const
  {
    return [this, t](const SpatialPoint& p) { return density(t, p); };
  }

private:
  ScenarioSpec spec_{};
  std::vector<double> mixing_;
  std::vector<double> rates_;
  std::vector<double> norms_;
  std::vector<std::array<double, 3>> inv_;
};

struct Simulation
{
  EventStore store;
  GroundTruth truth;
  std::size_t draws{ 0 };
  std::size_t rejected{ 0 };

  double rejection_rate() const
  {
    return draws == 0 ? 0.0 : static_cast<double>(rejected) / static_cast<double>(draws);
  }
};

//! Draws n_t ~ Poisson(delta_t) events per hour, each i.i.d. from that hour's
//! mixture; Gaussian draws outside the box are rejected and redrawn. A single
//! seeded stream drives everything, so the output depends only on the spec.
inline Simulation simulate(const ScenarioSpec& spec)
{
  spec.validate();
  const std::size_t K = spec.components.size();
  const auto H = static_cast<std::size_t>(spec.horizon);
  std::mt19937_64 rng(spec.seed);
  boost::random::normal_distribution<double> normal(0.0, 1.0);
  boost::random::uniform_01<double> unit;

  std::vector<double> noise(K, 0.0);
  for (std::size_t k = 0; k < K; ++k) {
    const auto& c = spec.components[k];
    if (c.ar_sigma > 0.0)
      noise[k] = normal(rng) * c.ar_sigma / std::sqrt(1.0 - c.ar_coefficient * c.ar_coefficient);
  }
  std::vector<std::array<double, 3>> chol(K);
  for (std::size_t k = 0; k < K; ++k) {
    const auto& c = spec.components[k];
    if (c.shape == ComponentShape::gaussian) {
      const double l11 = std::sqrt(c.var_x);
      const double l21 = c.cov_xy / l11;
      chol[k] = { l11, l21, std::sqrt(c.var_y - l21 * l21) };
    }
  }

  Simulation sim;
  std::vector<double> mixing(H * K);
  std::vector<double> rates(H);
  std::vector<Event> events;
  events.reserve(static_cast<std::size_t>(spec.rate * static_cast<double>(H) * 1.05) + 16);
  std::vector<double> logits(K);
  const double two_pi = 2.0 * std::numbers::pi;
  for (std::size_t t = 0; t < H; ++t) {
    const double td = static_cast<double>(t);
    double top = -INFINITY;
    for (std::size_t k = 0; k < K; ++k) {
      const auto& c = spec.components[k];
      if (t > 0)
        noise[k] = c.ar_coefficient * noise[k] + c.ar_sigma * normal(rng);
      logits[k] = c.base +
                  c.daily_amplitude * std::sin(two_pi * td / spec.daily_period + c.daily_phase) +
                  c.weekly_amplitude * std::sin(two_pi * td / spec.weekly_period + c.weekly_phase) +
                  noise[k];
      top = std::max(top, logits[k]);
    }
    double z = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      mixing[t * K + k] = std::exp(logits[k] - top);
      z += mixing[t * K + k];
    }
    for (std::size_t k = 0; k < K; ++k)
      mixing[t * K + k] /= z;

    const double delta = std::max(
      0.0, spec.rate + spec.rate_daily_amplitude *
                         std::sin(two_pi * td / spec.daily_period + spec.rate_daily_phase));
    rates[t] = delta;
    if (delta <= 0.0)
      continue;
    boost::random::poisson_distribution<int, double> poisson(delta);
    const int n = poisson(rng);
    for (int i = 0; i < n; ++i) {
      const double u = unit(rng);
      std::size_t k = 0;
      double acc = mixing[t * K];
      while (k + 1 < K && u >= acc)
        acc += mixing[t * K + ++k];
      const auto& c = spec.components[k];
      SpatialPoint p;
      for (;;) {
        ++sim.draws;
        if (c.shape == ComponentShape::uniform) {
          p.x = spec.box.x_min + unit(rng) * spec.box.width();
          p.y = spec.box.y_min + unit(rng) * spec.box.height();
        } else {
          const double z1 = normal(rng), z2 = normal(rng);
          p.x = c.center.x + chol[k][0] * z1;
          p.y = c.center.y + chol[k][1] * z1 + chol[k][2] * z2;
        }
        if (spec.box.contains(p))
          break;
        ++sim.rejected;
      }
      events.push_back(Event{ p, HourIndex(static_cast<std::int64_t>(t)) });
    }
  }
  sim.store = EventStore(std::move(events), HourRange{ HourIndex(0), HourIndex(spec.horizon) });
  sim.truth = GroundTruth(spec, std::move(mixing), std::move(rates));
  return sim;
}

//! Mean log ground-truth density of the events in `test` (floored like the
//! forecasts). An upper bound, in expectation, on any forecaster's score.
inline double truth_log_score(const GroundTruth& truth,
                              const EventStore& store,
                              HourRange test,
                              double floor = 1e-12)
{
  const auto events = store.window(test);
  if (events.empty())
    throw EmptyTestError("no test events in the requested range");
  double s = 0.0;
  for (const auto& e : events)
    s += std::log(std::max(truth.density(e.period, e.location), floor));
  return s / static_cast<double>(events.size());
}

} // namespace stkde
