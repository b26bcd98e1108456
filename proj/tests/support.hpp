#pragma once

#include "stkde/stkde.hpp"

#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

namespace stkde::fixtures {

inline constexpr std::int64_t city_training_hours = 16 * 168;
inline constexpr std::int64_t city_test_hours = 8 * 168;

inline HourRange city_training() { return { HourIndex(0), HourIndex(city_training_hours) }; }
inline HourRange city_test()
{
  return { HourIndex(city_training_hours), HourIndex(city_training_hours + city_test_hours) };
}

//! 36 x 24 km city on a 2 x 3 cell grid. One Gaussian hotspot per cell, each
//! with its own daily, weekly and AR(1) share dynamics, over a thin uniform
//! background. 23 events per hour on average.
inline ScenarioSpec planted_city(std::uint64_t seed)
{
  ScenarioSpec s;
  s.box = { 0.0, 36.0, 0.0, 24.0 };
  s.rate = 23.0;
  s.horizon = city_training_hours + city_test_hours;
  s.seed = seed;
  const double pi = std::numbers::pi;
  auto hotspot = [](double x, double y, double var) {
    ComponentSpec c;
    c.center = { x, y };
    c.var_x = var;
    c.var_y = var;
    return c;
  };
  // downtown: daily cycle on top of persistent short-term swings
  auto c0 = hotspot(11, 7, 4.0);
  c0.base = 0.6;
  c0.daily_amplitude = 0.45;
  c0.ar_coefficient = 0.95;
  c0.ar_sigma = 0.3;
  // nightlife: opposite daily phase plus a weekend bump
  auto c1 = hotspot(24, 7, 3.5);
  c1.daily_amplitude = 0.4;
  c1.daily_phase = pi;
  c1.weekly_amplitude = 0.3;
  c1.weekly_phase = 0.5 * pi;
  c1.ar_coefficient = 0.93;
  c1.ar_sigma = 0.3;
  // slowly drifting share, serial dependence only
  auto c2 = hotspot(31, 12, 4.0);
  c2.ar_coefficient = 0.97;
  c2.ar_sigma = 0.25;
  // weekday commuter area
  auto c3 = hotspot(7, 13, 3.5);
  c3.weekly_amplitude = 0.45;
  c3.daily_amplitude = 0.25;
  c3.daily_phase = 0.5 * pi;
  c3.ar_coefficient = 0.94;
  c3.ar_sigma = 0.3;
  // mixed daily and weekly seasonality
  auto c4 = hotspot(12.5, 17, 4.0);
  c4.daily_amplitude = 0.35;
  c4.daily_phase = -0.5 * pi;
  c4.weekly_amplitude = 0.3;
  c4.weekly_phase = pi;
  c4.ar_coefficient = 0.9;
  c4.ar_sigma = 0.35;
  // residential, weak dynamics
  auto c5 = hotspot(25, 18, 4.5);
  c5.base = 0.3;
  c5.daily_amplitude = 0.3;
  c5.ar_coefficient = 0.92;
  c5.ar_sigma = 0.25;
  ComponentSpec background;
  background.shape = ComponentShape::uniform;
  background.base = -1.5;
  s.components = { c0, c1, c2, c3, c4, c5, background };
  return s;
}

inline StudyRegion city_region() { return StudyRegion({ 0.0, 36.0, 0.0, 24.0 }, 2, 3, 1.0); }

//! Random points from a unit normal scaled by `sd` around `center`.
inline std::vector<SpatialPoint> gaussian_points(std::size_t n,
                                                 SpatialPoint center,
                                                 double sd,
                                                 std::uint64_t seed)
{
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<SpatialPoint> pts(n);
  for (auto& p : pts)
    p = { center.x + sd * z(rng), center.y + sd * z(rng) };
  return pts;
}

} // namespace stkde::fixtures
