#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>

namespace stkde {

struct NelderMeadOptions
{
  int max_iterations{ 500 };
  //! Stop once every vertex is within this distance (max-norm) of the best.
  double x_tolerance{ 1e-5 };
  double initial_step{ 0.1 };
};

template<std::size_t N>
struct NelderMeadResult
{
  std::array<double, N> x{};
  double value{ std::numeric_limits<double>::quiet_NaN() };
  int iterations{ 0 };
  bool converged{ false };
};

//! Nelder-Mead on a box. Trial points are projected onto [lower, upper];
//! non-finite objective values are treated as +inf.
template<std::size_t N, class F>
NelderMeadResult<N> nelder_mead_bounded(F&& f,
                                        std::array<double, N> start,
                                        const std::array<double, N>& lower,
                                        const std::array<double, N>& upper,
                                        const NelderMeadOptions& opts = {})
{
  using Point = std::array<double, N>;
  constexpr double alpha = 1.0, gamma = 2.0, rho = 0.5, sigma = 0.5;

  auto project = [&](Point p) {
    for (std::size_t i = 0; i < N; ++i)
      p[i] = std::clamp(p[i], lower[i], upper[i]);
    return p;
  };
  auto eval = [&](const Point& p) {
    const double v = f(p);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  };

  std::array<Point, N + 1> simplex;
  std::array<double, N + 1> values;
  simplex[0] = project(start);
  for (std::size_t i = 0; i < N; ++i) {
    Point p = simplex[0];
    const double span = upper[i] - lower[i];
    double step = opts.initial_step * span;
    if (p[i] + step > upper[i])
      step = -step;
    p[i] += step;
    simplex[i + 1] = project(p);
  }
  for (std::size_t i = 0; i <= N; ++i)
    values[i] = eval(simplex[i]);

  std::array<std::size_t, N + 1> order;
  NelderMeadResult<N> result;
  int it = 0;
  for (; it < opts.max_iterations; ++it) {
    std::iota(order.begin(), order.end(), std::size_t{ 0 });
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return values[a] < values[b];
    });
    const std::size_t best = order[0];
    const std::size_t worst = order[N];
    const std::size_t second = order[N - 1];

    double spread = 0.0;
    for (std::size_t k = 1; k <= N; ++k)
      for (std::size_t i = 0; i < N; ++i)
        spread = std::max(spread, std::abs(simplex[order[k]][i] - simplex[best][i]));
    if (spread < opts.x_tolerance) {
      result.converged = true;
      break;
    }

    Point centroid{};
    for (std::size_t k = 0; k < N; ++k)
      for (std::size_t i = 0; i < N; ++i)
        centroid[i] += simplex[order[k]][i] / static_cast<double>(N);

    auto along = [&](double t) {
      Point p;
      for (std::size_t i = 0; i < N; ++i)
        p[i] = centroid[i] + t * (simplex[worst][i] - centroid[i]);
      return project(p);
    };

    const Point reflected = along(-alpha);
    const double fr = eval(reflected);
    if (fr < values[best]) {
      const Point expanded = along(-alpha * gamma);
      const double fe = eval(expanded);
      if (fe < fr) {
        simplex[worst] = expanded;
        values[worst] = fe;
      } else {
        simplex[worst] = reflected;
        values[worst] = fr;
      }
      continue;
    }
    if (fr < values[second]) {
      simplex[worst] = reflected;
      values[worst] = fr;
      continue;
    }
    // contraction: outside if the reflection helped at all, else inside
    const bool outside = fr < values[worst];
    const Point contracted = along(outside ? -rho : rho);
    const double fc = eval(contracted);
    if (fc < (outside ? fr : values[worst])) {
      simplex[worst] = contracted;
      values[worst] = fc;
      continue;
    }
    for (std::size_t k = 0; k <= N; ++k) {
      if (k == best)
        continue;
      for (std::size_t i = 0; i < N; ++i)
        simplex[k][i] = simplex[best][i] + sigma * (simplex[k][i] - simplex[best][i]);
      simplex[k] = project(simplex[k]);
      values[k] = eval(simplex[k]);
    }
  }

  std::size_t best = 0;
  for (std::size_t k = 1; k <= N; ++k)
    if (values[k] < values[best])
      best = k;
  result.x = simplex[best];
  result.value = values[best];
  result.iterations = it;
  return result;
}

} // namespace stkde
