#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

using namespace stkde;

namespace {

struct Uniform
{
  double value;
  auto operator()(HourIndex) const
  {
    return [v = value](const SpatialPoint&) { return v; };
  }
};

struct SmallCity
{
  Simulation sim;
  StudyRegion region = fixtures::city_region();
  SmallCity()
  {
    auto spec = fixtures::planted_city(21);
    spec.horizon = 1100;
    sim = simulate(spec);
  }
  BacktestPlan plan(std::vector<Method> methods) const
  {
    BacktestPlan p;
    p.training = { HourIndex(0), HourIndex(900) };
    p.test = { HourIndex(900), HourIndex(1100) };
    p.methods = std::move(methods);
    p.settings.max_lag = 336;
    p.settings.min_events = 100;
    p.target_retained = 150;
    return p;
  }
};

const SmallCity& small_city()
{
  static const SmallCity c;
  return c;
}

} // namespace

TEST(AverageLogScore, UniformOnUnitBoxScoresZero)
{
  const auto pts = fixtures::gaussian_points(400, { 0.5, 0.5 }, 0.1, 51);
  std::vector<Event> ev;
  for (std::size_t i = 0; i < pts.size(); ++i)
    ev.push_back({ pts[i], HourIndex(static_cast<std::int64_t>(i % 10)) });
  const EventStore store(ev, { HourIndex(0), HourIndex(10) });
  const BoundingBox box{ 0, 1, 0, 1 };
  const auto s = average_log_score(Uniform{ 1.0 }, store, { HourIndex(0), HourIndex(10) }, box);
  EXPECT_EQ(s.average, 0.0);
  EXPECT_EQ(s.events + s.skipped, 400u);
  EXPECT_EQ(s.fallbacks, 0u);
}

TEST(AverageLogScore, SinglePointAtKernelMode)
{
  const EventStore store({ Event{ { 2, 2 }, HourIndex(1) } }, { HourIndex(0), HourIndex(2) });
  const KernelEvaluator k(KernelKind::gaussian, Bandwidth());
  auto f = [&](HourIndex) { return WeightedKde(k, { SpatialPoint{ 2, 2 } }); };
  const auto s = average_log_score(f, store, { HourIndex(1), HourIndex(2) }, { 0, 4, 0, 4 });
  EXPECT_NEAR(s.average, std::log(1.0 / (2.0 * std::numbers::pi)), 1e-12);
  EXPECT_NEAR(s.average, -1.8379, 1e-4);
  EXPECT_EQ(s.per_hour.at(0).support, 1u);
}

TEST(AverageLogScore, EmptyTestRejected)
{
  const EventStore store({ Event{ { 2, 2 }, HourIndex(1) } }, { HourIndex(0), HourIndex(5) });
  EXPECT_THROW(average_log_score(Uniform{ 1.0 }, store, { HourIndex(2), HourIndex(2) }, { 0, 4, 0, 4 }),
               EmptyTestError);
  EXPECT_THROW(average_log_score(Uniform{ 1.0 }, store, { HourIndex(2), HourIndex(5) }, { 0, 4, 0, 4 }),
               EmptyTestError);
}

TEST(AverageLogScore, NoDataHoursUseUniformFallback)
{
  std::vector<Event> ev{ { { 1, 1 }, HourIndex(0) }, { { 1, 1 }, HourIndex(1) }, { { 3, 3 }, HourIndex(1) } };
  const EventStore store(ev, { HourIndex(0), HourIndex(2) });
  auto f = [](HourIndex u) {
    if (u == HourIndex(1))
      throw NoDataError("nothing");
    return [](const SpatialPoint&) { return 0.5; };
  };
  const auto s = average_log_score(f, store, { HourIndex(0), HourIndex(2) }, { 0, 4, 0, 4 });
  EXPECT_EQ(s.fallbacks, 1u);
  EXPECT_EQ(s.hours, 2u);
  EXPECT_NEAR(s.average, (std::log(0.5) + 2.0 * std::log(1.0 / 16.0)) / 3.0, 1e-12);
}

TEST(AverageLogScore, FlooringIsMonotone)
{
  const auto& c = small_city();
  const KernelEvaluator k(KernelKind::gaussian, Bandwidth::diagonal(0.05, 0.05));
  auto f = [&](HourIndex u) { return naive_recent_hour(c.sim.store, k, u); };
  const HourRange test{ HourIndex(1000), HourIndex(1100) };
  const auto lo = average_log_score(f, c.sim.store, test, c.region.box(), 1e-12);
  const auto hi = average_log_score(f, c.sim.store, test, c.region.box(), 1e-4);
  ASSERT_EQ(lo.per_hour.size(), hi.per_hour.size());
  for (std::size_t i = 0; i < lo.per_hour.size(); ++i)
    ASSERT_GE(hi.per_hour[i].mean_log_density, lo.per_hour[i].mean_log_density);
  EXPECT_GT(hi.average, lo.average);  // a narrow bandwidth leaves many events floored
}

TEST(AverageLogScore, FloorOnlyTouchesSmallDensities)
{
  // density proportional to x, so events near x = 0 fall under the floor
  std::vector<Event> ev;
  for (int i = 0; i < 200; ++i)
    ev.push_back({ { 0.005 * i, 0.5 }, HourIndex(i % 4) });
  const EventStore store(ev, { HourIndex(0), HourIndex(4) });
  auto f = [](HourIndex) { return [](const SpatialPoint& p) { return 1e-3 * p.x; }; };
  for (double floor : { 1e-12, 1e-5, 1e-4 }) {
    double expect = 0.0;
    for (const auto& e : ev)
      expect += std::log(std::max(1e-3 * e.location.x, floor)) / 200.0;
    const auto s = average_log_score(f, store, { HourIndex(0), HourIndex(4) }, { 0, 1, 0, 1 }, floor);
    EXPECT_NEAR(s.average, expect, 1e-12) << floor;
  }
}

TEST(AverageLogScore, PerHourSeriesSumsToTotal)
{
  const auto& c = small_city();
  const KernelEvaluator k(KernelKind::gaussian, Bandwidth::diagonal(1, 1));
  auto f = [&](HourIndex u) { return naive_equal_weights(c.sim.store, k, 100, u); };
  const auto s = average_log_score(f, c.sim.store, { HourIndex(900), HourIndex(1100) }, c.region.box());
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& h : s.per_hour) {
    total += h.mean_log_density * static_cast<double>(h.events);
    n += h.events;
  }
  EXPECT_EQ(n, s.events);
  EXPECT_NEAR(total / static_cast<double>(n), s.average, 1e-9);
  EXPECT_EQ(s.events + s.skipped, c.sim.store.window({ HourIndex(900), HourIndex(1100) }).size());
}

TEST(AverageLogScore, IndependentOfHourOrderAndThreads)
{
  // hours scored on several threads, or re-aggregated in reverse order,
  // give the same total
  const auto& c = small_city();
  const KernelEvaluator k(KernelKind::gaussian, Bandwidth::diagonal(1, 1));
  auto f = [&](HourIndex u) { return naive_recent_hour(c.sim.store, k, u); };
  const HourRange test{ HourIndex(900), HourIndex(1100) };
  const auto a = average_log_score(f, c.sim.store, test, c.region.box(), density_floor, 1);
  const auto b = average_log_score(f, c.sim.store, test, c.region.box(), density_floor, 3);
  EXPECT_EQ(a.average, b.average);

  double shuffled = 0.0;
  std::size_t n = 0;
  for (auto it = a.per_hour.rbegin(); it != a.per_hour.rend(); ++it) {
    shuffled += it->mean_log_density * static_cast<double>(it->events);
    n += it->events;
  }
  EXPECT_NEAR(shuffled / static_cast<double>(n), a.average, 1e-12);
}

TEST(CalibrateThreshold, HitsTargetOnAverage)
{
  const auto& c = small_city();
  ModelSettings s;
  s.max_lag = 336;
  s.min_events = 100;
  const auto fit = fit_model(c.sim.store, c.region, { HourIndex(0), HourIndex(900) }, s);
  const double o = calibrate_threshold(fit.model.weights, c.sim.store, { HourIndex(0), HourIndex(900) }, 150);
  const auto thresholded = fit.model.weights.with_options({ false, o });
  double kept = 0.0;
  const int samples = 64;
  for (int i = 0; i < samples; ++i) {
    const HourIndex u(336 + i * (900 - 336) / samples);
    kept += static_cast<double>(retained_window(thresholded, c.sim.store, u).events.size());
  }
  EXPECT_NEAR(kept / samples, 150.0, 5.0);
  EXPECT_EQ(calibrate_threshold(fit.model.weights, c.sim.store, { HourIndex(0), HourIndex(900) }, 1e9), 0.0);
}

TEST(BacktestPlan, ValidationErrors)
{
  const auto& c = small_city();
  auto p = c.plan({ Method::medic });
  p.test = { HourIndex(900), HourIndex(900) };
  EXPECT_THROW(p.validate(c.sim.store), EmptyTestError);
  p = c.plan({ Method::medic });
  p.training = { HourIndex(0), HourIndex(950) };
  EXPECT_THROW(p.validate(c.sim.store), PreconditionError);
  p = c.plan({ Method::medic });
  p.training = { HourIndex(0), HourIndex(200) };
  p.test = { HourIndex(200), HourIndex(300) };
  EXPECT_THROW(p.validate(c.sim.store), PreconditionError);
}

TEST(RunBacktest, ZeroMethodsGiveEmptyReport)
{
  const auto& c = small_city();
  const auto r = run_backtest(c.sim.store, c.region, c.plan({}));
  EXPECT_TRUE(r.methods.empty());
  EXPECT_FALSE(r.model.has_value());
}

TEST(RunBacktest, DuplicateMethodsScoreIdentically)
{
  const auto& c = small_city();
  const auto r = run_backtest(c.sim.store, c.region,
                              c.plan({ Method::naive_recent_hour, Method::medic, Method::naive_recent_hour }));
  ASSERT_EQ(r.methods.size(), 3u);
  EXPECT_EQ(r.methods[0].score.average, r.methods[2].score.average);
  EXPECT_FALSE(r.model.has_value());
}

TEST(RunBacktest, AllMethodsOrderedAndBelowTruth)
{
  const auto& c = small_city();
  auto plan = c.plan({ all_methods.begin(), all_methods.end() });
  const auto r = run_backtest(c.sim.store, c.region, plan);
  ASSERT_EQ(r.methods.size(), 6u);
  ASSERT_TRUE(r.model.has_value());
  const double truth = truth_log_score(c.sim.truth, c.sim.store, plan.test);
  for (const auto& m : r.methods) {
    EXPECT_LT(m.score.average, truth) << method_key(m.method);
    EXPECT_EQ(m.score.events, r.methods[0].score.events);
  }
  auto score = [&](Method m) {
    for (const auto& x : r.methods)
      if (x.method == m)
        return x.score.average;
    return 0.0;
  };
  EXPECT_GT(score(Method::stkde), score(Method::medic));
  EXPECT_GT(score(Method::stkde), score(Method::naive_recent_hour));
  const auto& thr = r.methods[2].score;
  EXPECT_NEAR(thr.mean_support(), 150.0, 30.0);
  EXPECT_GT(r.methods[0].score.mean_support(), 3000.0);

  std::ostringstream table;
  write_table(table, r);
  const std::string text = table.str();
  for (const Method m : all_methods)
    EXPECT_NE(text.find(std::string(method_label(m))), std::string::npos);

  std::ostringstream csv;
  write_report_csv(csv, r);
  const std::string rows = csv.str();
  EXPECT_EQ(std::count(rows.begin(), rows.end(), '\n'), 7);
}

TEST(Methods, KeysRoundTrip)
{
  for (const Method m : all_methods)
    EXPECT_EQ(method_from_string(method_key(m)), m);
  EXPECT_THROW(method_from_string("gmm"), ConfigError);
}
