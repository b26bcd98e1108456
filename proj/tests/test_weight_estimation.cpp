#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace stkde;

namespace {

ShareSeries make_series(std::vector<std::optional<double>> v)
{
  ShareSeries s;
  s.range = { HourIndex(0), HourIndex(static_cast<std::int64_t>(v.size())) };
  s.values = std::move(v);
  return s;
}

// Direct double loop over (t, t + l) pairs, written independently of the
// library's centring and masking.
std::vector<double> brute_force_acf(const std::vector<std::optional<double>>& v, int L)
{
  double sum = 0.0;
  int n = 0;
  for (const auto& x : v)
    if (x) {
      sum += *x;
      ++n;
    }
  const double mean = sum / n;
  double den = 0.0;
  for (const auto& x : v)
    if (x)
      den += (*x - mean) * (*x - mean);
  std::vector<double> out(static_cast<std::size_t>(L));
  for (int l = 1; l <= L; ++l) {
    double num = 0.0;
    for (std::size_t s = 0; s + static_cast<std::size_t>(l) < v.size(); ++s) {
      const auto& a = v[s];
      const auto& b = v[s + static_cast<std::size_t>(l)];
      if (a && b)
        num += (*a - mean) * (*b - mean);
    }
    out[static_cast<std::size_t>(l - 1)] = num / den;
  }
  return out;
}

AcfCurve curve_from(const WeightParams& p, int L, double scale)
{
  AcfCurve a;
  for (int l = 1; l <= L; ++l) {
    a.values.push_back(scale * eval_raw_weight(p, l));
    a.pair_counts.push_back(1000);
    a.reliable.push_back(true);
  }
  return a;
}

double relative_l2(const std::vector<double>& a, const std::vector<double>& b)
{
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num / den);
}

std::vector<double> fitted_curve(const FitResult& f, int L)
{
  const double area = weight_area(f.params, L);
  std::vector<double> out;
  for (int l = 1; l <= L; ++l)
    out.push_back(f.params.scale * eval_raw_weight(f.params, l) / area);
  return out;
}

double correlation(const std::vector<double>& a, const std::vector<double>& b)
{
  const auto n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i] / n;
    mb += b[i] / n;
  }
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

} // namespace

TEST(ShareSeries, DirectRatioAndMissingPeriods)
{
  const StudyRegion region({ 0, 2, 0, 1 }, 1, 2);
  std::vector<Event> ev{ { { 0.5, 0.5 }, HourIndex(0) },
                         { { 0.2, 0.5 }, HourIndex(0) },
                         { { 0.7, 0.1 }, HourIndex(0) },
                         { { 1.5, 0.5 }, HourIndex(0) },
                         { { 1.5, 0.5 }, HourIndex(2) } };
  const EventStore store(ev, { HourIndex(0), HourIndex(3) });
  const auto s = share_series(store, region, { HourIndex(0), HourIndex(3) });
  ASSERT_EQ(s.size(), 2u);
  EXPECT_DOUBLE_EQ(*s[0].values[0], 0.75);
  EXPECT_DOUBLE_EQ(*s[1].values[0], 0.25);
  EXPECT_FALSE(s[0].values[1].has_value());
  EXPECT_FALSE(s[1].values[1].has_value());
  EXPECT_DOUBLE_EQ(*s[1].values[2], 1.0);
}

TEST(ShareSeries, MatchesRecountAndSumsToOne)
{
  auto spec = fixtures::planted_city(9);
  spec.horizon = 500;
  spec.rate = 3.0;
  const auto sim = simulate(spec);
  const auto region = fixtures::city_region();
  const HourRange range{ HourIndex(0), HourIndex(500) };
  const auto s = share_series(sim.store, region, range);
  for (std::int64_t t = 0; t < 500; ++t) {
    const auto events = sim.store.period(HourIndex(t));
    double total = 0.0;
    for (std::size_t c = 0; c < region.cell_count(); ++c) {
      const auto& v = s[c].values[static_cast<std::size_t>(t)];
      if (events.empty()) {
        ASSERT_FALSE(v.has_value());
        continue;
      }
      std::size_t count = 0;
      for (const auto& e : events)
        count += region.cell_of(e.location) == c;
      ASSERT_DOUBLE_EQ(*v, static_cast<double>(count) / static_cast<double>(events.size()));
      total += *v;
    }
    if (!events.empty()) {
      ASSERT_NEAR(total, 1.0, 1e-9);
    }
  }
}

TEST(ShareSeries, EmptyRangeRejected)
{
  const EventStore store({}, { HourIndex(0), HourIndex(0) });
  EXPECT_THROW(share_series(store, StudyRegion({ 0, 1, 0, 1 }, 1, 1), {}), PreconditionError);
}

TEST(SampleAcf, HandExample)
{
  const auto a = sample_acf(make_series({ 1.0, 2.0, 3.0, 4.0 }), 1);
  EXPECT_DOUBLE_EQ(a.values[0], 0.25);
  EXPECT_EQ(a.pair_counts[0], 3u);
  EXPECT_FALSE(a.reliable[0]);
}

TEST(SampleAcf, ConstantSeriesIsDegenerate)
{
  EXPECT_THROW(sample_acf(make_series(std::vector<std::optional<double>>(50, 0.3)), 5),
               DegenerateSeriesError);
  EXPECT_THROW(sample_acf(make_series(std::vector<std::optional<double>>(50)), 5),
               DegenerateSeriesError);
}

TEST(SampleAcf, TooShortSeriesRejected)
{
  EXPECT_THROW(sample_acf(make_series({ 1.0, 2.0, 3.0 }), 2), PreconditionError);
}

TEST(SampleAcf, MatchesBruteForceWithMissingValues)
{
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 5; ++rep) {
    std::vector<std::optional<double>> v(2000);
    for (auto& x : v)
      if (u(rng) >= 0.05)
        x = u(rng);
    const auto a = sample_acf(make_series(v), 200);
    const auto b = brute_force_acf(v, 200);
    for (std::size_t l = 0; l < 200; ++l) {
      ASSERT_NEAR(a.values[l], b[l], 1e-12);
      ASSERT_LE(std::abs(a.values[l]), 1.0 + 1e-9);
    }
  }
}

TEST(SampleAcf, SparseLagsFlaggedUnreliable)
{
  std::vector<std::optional<double>> v(200);
  for (std::size_t t = 0; t < 200; t += 7)
    v[t] = static_cast<double>(t % 3);
  const auto a = sample_acf(make_series(v), 50, 30);
  for (std::size_t l = 0; l < 50; ++l)
    EXPECT_EQ(a.reliable[l], a.pair_counts[l] >= 30);
  EXPECT_EQ(a.pair_counts[0], 0u);
  EXPECT_EQ(a.pair_counts[6], 28u);
  EXPECT_FALSE(a.reliable[6]);
}

TEST(SampleAcf, Ar1CoefficientRecovered)
{
  std::mt19937_64 rng(22);
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<std::optional<double>> v(10000);
  double x = 0.0;
  for (auto& s : v) {
    x = 0.8 * x + z(rng);
    s = x;
  }
  const auto a = sample_acf(make_series(v), 5);
  EXPECT_NEAR(a.values[0], 0.8, 0.05);
  EXPECT_NEAR(a.values[1], 0.64, 0.05);
}

TEST(PositivePart, ClampsElementwise)
{
  AcfCurve a;
  a.values = { 0.5, -0.2, 0.1 };
  a.pair_counts = { 40, 40, 10 };
  a.reliable = { true, true, false };
  const auto p = positive_part(a);
  EXPECT_EQ(p.values, (std::vector<double>{ 0.5, 0.0, 0.1 }));
  EXPECT_EQ(p.reliable, a.reliable);

  a.values = { -0.5, -0.2, -0.1 };
  EXPECT_EQ(positive_part(a).values, (std::vector<double>{ 0, 0, 0 }));

  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  AcfCurve r;
  for (int i = 0; i < 500; ++i) {
    r.values.push_back(u(rng));
    r.pair_counts.push_back(100);
    r.reliable.push_back(true);
  }
  const auto rp = positive_part(r);
  for (std::size_t i = 0; i < r.values.size(); ++i)
    ASSERT_EQ(rp.values[i], std::max(r.values[i], 0.0));
}

TEST(FitWeightParams, PureDecayRecovered)
{
  AcfCurve target;
  for (int l = 1; l <= 672; ++l) {
    target.values.push_back(std::pow(0.9, l));
    target.pair_counts.push_back(1000);
    target.reliable.push_back(true);
  }
  const auto fit = fit_weight_params(target);
  EXPECT_LT(fit.sse, 1e-6);
  EXPECT_LT(relative_l2(fitted_curve(fit, 672), target.values), 1e-3);
}

TEST(FitWeightParams, DowntownCurveRecovered)
{
  const WeightParams planted{ 1.0, 0.95, 0.9995, 0.001, 0.145 };
  const auto target = curve_from(planted, 672, 1.0 / weight_area(planted, 672));
  const auto fit = fit_weight_params(target);
  EXPECT_LT(relative_l2(fitted_curve(fit, 672), target.values), 1e-3);
  for (double r : { fit.params.serial_decay, fit.params.seasonal_decay, fit.params.daily_trough, fit.params.weekly_trough }) {
    EXPECT_GE(r, 0.0);
    EXPECT_LE(r, 1.0);
  }
  EXPECT_GE(fit.sse, 0.0);
}

TEST(FitWeightParams, LocallyOptimalUnderPerturbation)
{
  const WeightParams planted{ 1.0, 0.95, 0.9995, 0.001, 0.145 };
  const auto target = curve_from(planted, 672, 1.0 / weight_area(planted, 672));
  const auto fit = fit_weight_params(target);
  auto sse_of = [&](WeightParams p) {
    double sw2 = 0, saw = 0;
    std::vector<double> w;
    for (int l = 1; l <= 672; ++l) {
      w.push_back(eval_raw_weight(p, l));
      sw2 += w.back() * w.back();
      saw += target.values[static_cast<std::size_t>(l - 1)] * w.back();
    }
    const double scale = std::max(0.0, saw / sw2);
    double s = 0;
    for (int l = 1; l <= 672; ++l) {
      const double r = target.values[static_cast<std::size_t>(l - 1)] - scale * w[static_cast<std::size_t>(l - 1)];
      s += r * r;
    }
    return s;
  };
  const double base = sse_of(fit.params);
  EXPECT_NEAR(base, fit.sse, 1e-12);
  for (int k = 0; k < 4; ++k) {
    for (double d : { -0.01, 0.01 }) {
      WeightParams p = fit.params;
      double* r[] = { &p.serial_decay, &p.seasonal_decay, &p.daily_trough, &p.weekly_trough };
      *r[k] = std::clamp(*r[k] + d, 0.0, 1.0);
      EXPECT_GE(sse_of(p), base - 1e-9) << "parameter " << k << " " << d;
    }
  }
}

TEST(FitWeightParams, ZeroTargetTakesFlatBranch)
{
  AcfCurve target;
  for (int l = 1; l <= 200; ++l) {
    target.values.push_back(0.0);
    target.pair_counts.push_back(100);
    target.reliable.push_back(true);
  }
  const auto fit = fit_weight_params(target);
  EXPECT_EQ(fit.params.scale, 0.0);
  EXPECT_EQ(fit.params.serial_decay, 1.0);
  EXPECT_EQ(fit.sse, 0.0);
}

TEST(FitWeightParams, TooFewLagsRejected)
{
  AcfCurve target;
  for (int l = 1; l <= 200; ++l) {
    target.values.push_back(std::pow(0.9, l));
    target.pair_counts.push_back(l <= 99 ? 100 : 5);
    target.reliable.push_back(l <= 99);
  }
  EXPECT_THROW(fit_weight_params(target), PreconditionError);
}

TEST(FitWeightParams, DeterministicForFixedSeed)
{
  const WeightParams planted{ 1.0, 0.8, 0.998, 0.05, 1.0 };
  const auto target = curve_from(planted, 300, 0.4);
  FitOptions o;
  o.seed = 7;
  const auto a = fit_weight_params(target, o);
  const auto b = fit_weight_params(target, o);
  EXPECT_EQ(a.params, b.params);
  EXPECT_EQ(a.sse, b.sse);
}

namespace {

ScenarioSpec three_cell_city(std::uint64_t seed, std::int64_t horizon)
{
  ScenarioSpec s;
  s.box = { 0, 36, 0, 12 };
  s.rate = 30;
  s.horizon = horizon;
  s.seed = seed;
  auto blob = [](double x) {
    ComponentSpec c;
    c.center = { x, 6 };
    c.var_x = c.var_y = 2.0;
    return c;
  };
  auto daily = blob(6);
  daily.daily_amplitude = 1.2;
  daily.ar_coefficient = 0.5;
  daily.ar_sigma = 0.1;
  auto weekly = blob(18);
  weekly.weekly_amplitude = 1.2;
  weekly.weekly_phase = std::numbers::pi;
  weekly.ar_coefficient = 0.95;
  weekly.ar_sigma = 0.3;
  auto flat = blob(30);
  s.components = { daily, weekly, flat };
  return s;
}

} // namespace

// Cells with different planted dynamics get different curves, each shaped
// like the long-run ACF of its own share series.
TEST(FitAllCells, PlantedPatternsRecovered)
{
  const StudyRegion region({ 0, 36, 0, 12 }, 1, 3);
  const auto sim = simulate(three_cell_city(31, 2016));
  const auto fit = fit_all_cells(sim.store, region, { HourIndex(0), HourIndex(2016) }, 336, 500);
  ASSERT_EQ(fit.fallback_count(), 0u);

  const auto reference = simulate(three_cell_city(32, 40000));
  const auto shares =
    share_series(reference.store, region, { HourIndex(0), HourIndex(40000) });
  std::vector<std::vector<double>> curves;
  for (std::size_t c = 0; c < 2; ++c) {
    const auto planted = positive_part(sample_acf(shares[c], 336));
    const auto curve = fitted_curve(fit.cells[c].fit, 336);
    EXPECT_GT(correlation(curve, planted.values), 0.9) << "cell " << c;
    curves.push_back(curve);
  }
  EXPECT_LT(correlation(curves[0], curves[1]), 0.9);
}

TEST(FitAllCells, SingleCellIsDegenerate)
{
  const auto sim = simulate(three_cell_city(33, 600));
  EXPECT_THROW(fit_all_cells(sim.store, StudyRegion({ 0, 36, 0, 12 }, 1, 1),
                             { HourIndex(0), HourIndex(600) }, 200, 10),
               DegenerateSeriesError);
}

TEST(FitAllCells, ShortTrainingRangeNamesRequiredSpan)
{
  const auto sim = simulate(three_cell_city(34, 600));
  try {
    fit_all_cells(sim.store, StudyRegion({ 0, 36, 0, 12 }, 1, 3),
                  { HourIndex(0), HourIndex(600) }, 672, 10);
    FAIL() << "expected a precondition error";
  } catch (const PreconditionError& e) {
    EXPECT_NE(std::string(e.what()).find("840"), std::string::npos);
  }
}

TEST(FitAllCells, SparseCellFallsBackToPooledFit)
{
  auto spec = three_cell_city(35, 1200);
  const auto sim = simulate(spec);
  // a fourth cell on the right that only ever sees three events
  std::vector<Event> ev(sim.store.events().begin(), sim.store.events().end());
  ev.push_back({ { 40, 6 }, HourIndex(10) });
  ev.push_back({ { 41, 6 }, HourIndex(500) });
  ev.push_back({ { 47, 6 }, HourIndex(900) });
  const EventStore store(ev, { HourIndex(0), HourIndex(1200) });
  const StudyRegion region({ 0, 48, 0, 12 }, 1, 4);
  const auto fit = fit_all_cells(store, region, { HourIndex(0), HourIndex(1200) }, 200, 500);
  EXPECT_EQ(fit.cells[3].events, 3u);
  EXPECT_TRUE(fit.cells[3].fit.fallback);
  EXPECT_EQ(fit.cells[3].fit.params, fit.pooled_fit.params);
  EXPECT_FALSE(fit.cells[0].fit.fallback);
}

TEST(FitAllCells, LoweringMinEventsNeverAddsFallbacks)
{
  const auto sim = simulate(three_cell_city(36, 1000));
  const StudyRegion region({ 0, 36, 0, 12 }, 2, 3);
  std::size_t previous = 0;
  bool first = true;
  for (std::size_t m : { 20000u, 8000u, 4000u, 1000u, 10u }) {
    const auto fit = fit_all_cells(sim.store, region, { HourIndex(0), HourIndex(1000) }, 150, m);
    if (!first) {
      EXPECT_LE(fit.fallback_count(), previous);
    }
    previous = fit.fallback_count();
    first = false;
  }
}

TEST(FitAllCells, IndependentOfThreadCount)
{
  const auto sim = simulate(three_cell_city(37, 1000));
  const StudyRegion region({ 0, 36, 0, 12 }, 1, 3);
  FitOptions o;
  o.seed = 5;
  const auto a = fit_all_cells(sim.store, region, { HourIndex(0), HourIndex(1000) }, 150, 100, o, 1);
  const auto b = fit_all_cells(sim.store, region, { HourIndex(0), HourIndex(1000) }, 150, 100, o, 3);
  for (std::size_t c = 0; c < 3; ++c) {
    EXPECT_EQ(a.model.params()[c], b.model.params()[c]);
    EXPECT_EQ(a.model.normalization(c), b.model.normalization(c));
  }
}
