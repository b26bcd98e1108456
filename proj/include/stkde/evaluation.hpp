#pragma once

#include "stkde/baselines.hpp"
#include "stkde/domain.hpp"
#include "stkde/error.hpp"
#include "stkde/format.hpp"
#include "stkde/kernel.hpp"
#include "stkde/parallel.hpp"
#include "stkde/predictor.hpp"
#include "stkde/weight_estimation.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace stkde {

enum class Method
{
  stkde,
  stkde_interpolated,
  stkde_threshold,
  medic,
  naive_recent_hour,
  naive_equal_weights
};

inline constexpr std::array<Method, 6> all_methods{ Method::stkde,
                                                    Method::stkde_interpolated,
                                                    Method::stkde_threshold,
                                                    Method::medic,
                                                    Method::naive_recent_hour,
                                                    Method::naive_equal_weights };

inline std::string_view method_key(Method m)
{
  switch (m) {
    case Method::stkde: return "stkde";
    case Method::stkde_interpolated: return "stkde_interpolated";
    case Method::stkde_threshold: return "stkde_threshold";
    case Method::medic: return "medic";
    case Method::naive_recent_hour: return "naive_recent_hour";
    case Method::naive_equal_weights: return "naive_equal_weights";
  }
  return "?";
}

inline Method method_from_string(std::string_view s)
{
  for (Method m : all_methods)
    if (method_key(m) == s)
      return m;
  throw ConfigError("unknown method '" + std::string(s) + "'");
}

inline bool is_stkde(Method m)
{
  return m == Method::stkde || m == Method::stkde_interpolated ||
         m == Method::stkde_threshold;
}

struct HourScore
{
  HourIndex hour;
  std::size_t events{ 0 };
  //! Mean log density of this hour's events.
  double mean_log_density{ 0.0 };
  bool fallback{ false };
  //! Points in the hour's density estimate (0 for non-kernel methods).
  std::size_t support{ 0 };
};

struct ScoreSummary
{
  double average{ 0.0 };
  std::size_t events{ 0 };
  std::size_t fallbacks{ 0 };
  std::size_t skipped{ 0 };
  std::size_t hours{ 0 };
  std::vector<HourScore> per_hour;
  double seconds{ 0.0 };

  //! Mean number of kernel terms per prediction over hours that produced a
  //! forecast.
  double mean_support() const
  {
    double s = 0.0;
    std::size_t n = 0;
    for (const auto& h : per_hour) {
      if (!h.fallback) {
        s += static_cast<double>(h.support);
        ++n;
      }
    }
    return n == 0 ? 0.0 : s / static_cast<double>(n);
  }
};

//! A forecaster maps a target hour to a density functor and throws
//! NoDataError when it cannot predict that hour.
template<class F>
concept Forecaster = requires(const F& f, HourIndex u, SpatialPoint p) {
  { f(u)(p) } -> std::convertible_to<double>;
};

//! Average log score (nats per event) over the events of `test`. Densities
//! are floored at `floor`; hours a forecaster cannot predict are scored
//! with the uniform density over the box and counted as fallbacks. Events
//! outside the box are skipped and counted.
template<Forecaster F>
ScoreSummary average_log_score(const F& forecaster,
                               const EventStore& store,
                               HourRange test,
                               const BoundingBox& box,
                               double floor = density_floor,
                               std::size_t threads = 1)
{
  if (test.empty())
    throw EmptyTestError("test range is empty");
  const auto start = std::chrono::steady_clock::now();
  std::vector<HourIndex> hours;
  for (HourIndex u = test.begin; u < test.end; u = u + 1)
    if (store.count(u) > 0)
      hours.push_back(u);
  if (hours.empty())
    throw EmptyTestError("no test events in hours [" + std::to_string(test.begin.value()) +
                         ", " + std::to_string(test.end.value()) + ")");

  std::vector<HourScore> scores(hours.size());
  std::vector<std::size_t> skipped(hours.size(), 0);
  std::vector<double> sums(hours.size(), 0.0);
  const double uniform = 1.0 / box.area();
  parallel_for(hours.size(), threads, [&](std::size_t i) {
    const HourIndex u = hours[i];
    auto& hs = scores[i];
    hs.hour = u;
    auto score_with = [&](const auto& density) {
      for (const auto& e : store.period(u)) {
        if (!box.contains(e.location)) {
          ++skipped[i];
          continue;
        }
        sums[i] += std::log(std::max(static_cast<double>(density(e.location)), floor));
        ++hs.events;
      }
    };
    try {
      const auto f = forecaster(u);
      if constexpr (requires { f.size(); })
        hs.support = f.size();
      score_with(f);
    } catch (const NoDataError&) {
      hs.fallback = true;
      hs.events = 0;
      sums[i] = 0.0;
      skipped[i] = 0;
      score_with([uniform](const SpatialPoint&) { return uniform; });
    }
    hs.mean_log_density = hs.events > 0 ? sums[i] / static_cast<double>(hs.events) : 0.0;
  });

  ScoreSummary out;
  double total = 0.0;
  for (std::size_t i = 0; i < hours.size(); ++i) {
    total += sums[i];
    out.events += scores[i].events;
    out.skipped += skipped[i];
    out.fallbacks += scores[i].fallback ? 1 : 0;
  }
  if (out.events == 0)
    throw EmptyTestError("every test event lies outside the box");
  out.hours = hours.size();
  out.average = total / static_cast<double>(out.events);
  out.per_hour = std::move(scores);
  out.seconds =
    std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

//! Omission threshold under which about `target_retained` events are kept per
//! prediction, averaged over `samples` targets spread evenly over the part of
//! `range` that has a full window.
inline double calibrate_threshold(const WeightModel& weights,
                                  const EventStore& store,
                                  HourRange range,
                                  double target_retained,
                                  std::size_t samples = 64)
{
  const WeightModel plain = weights.with_options({ weights.options().interpolate, 0.0 });
  const HourIndex first = std::max(range.begin + weights.max_lag(), HourIndex(1));
  if (!(first < range.end) || samples == 0)
    throw PreconditionError("threshold calibration needs hours with a full window");
  const std::int64_t span = range.end - first;
  std::vector<double> pooled;
  std::size_t used = 0;
  for (std::size_t s = 0; s < samples; ++s) {
    const HourIndex u = first + static_cast<std::int64_t>(s) * span /
                                  static_cast<std::int64_t>(samples);
    for (const auto& we : retained_window(plain, store, u).events)
      pooled.push_back(we.weight);
    ++used;
  }
  const auto keep = static_cast<std::size_t>(
    std::llround(target_retained * static_cast<double>(used)));
  if (keep == 0 || pooled.empty())
    return std::numeric_limits<double>::infinity();
  if (keep >= pooled.size())
    return 0.0;
  std::nth_element(pooled.begin(), pooled.begin() + static_cast<std::ptrdiff_t>(keep - 1),
                   pooled.end(), std::greater<>());
  return pooled[keep - 1];
}

//! Settings shared by fitting and backtesting.
struct ModelSettings
{
  std::int64_t max_lag{ 672 };
  std::size_t min_events{ 500 };
  KernelKind kernel{ KernelKind::gaussian };
  std::optional<Bandwidth> bandwidth;
  FitOptions fit{};
  std::size_t threads{ 1 };
};

struct ModelFit
{
  FittedModel model;
  WeightFit weights;
};

//! Bandwidth (unless overridden) from the training events, then all cell
//! weight curves.
inline ModelFit fit_model(const EventStore& store,
                          const StudyRegion& region,
                          HourRange training,
                          const ModelSettings& settings)
{
  ModelFit out;
  out.weights = fit_all_cells(store, region, training, settings.max_lag,
                              settings.min_events, settings.fit, settings.threads);
  if (settings.bandwidth) {
    out.model.bandwidth = *settings.bandwidth;
  } else {
    std::vector<SpatialPoint> pts;
    for (const auto& e : store.window(training))
      pts.push_back(e.location);
    out.model.bandwidth = select_bandwidth(pts);
  }
  out.model.kernel = settings.kernel;
  out.model.weights = out.weights.model;
  for (const auto& c : out.weights.cells)
    out.model.fits.push_back(c.fit);
  return out;
}

struct BacktestPlan
{
  HourRange training{};
  HourRange test{};
  std::vector<Method> methods;
  ModelSettings settings{};
  //! Threshold for the "+ threshold" variant; when `target_retained` > 0 it
  //! is calibrated on the training range instead.
  double omission_threshold{ 0.0 };
  double target_retained{ 200.0 };
  MedicConfig medic{};
  double floor{ density_floor };

  void validate(const EventStore& store) const
  {
    if (test.empty())
      throw EmptyTestError("test range is empty");
    if (training.empty())
      throw PreconditionError("training range is empty");
    if (training.end > test.begin)
      throw PreconditionError("training range must end before the test range starts");
    if (test.begin - store.coverage().begin < settings.max_lag)
      throw PreconditionError("test range must start at least L = " +
                              std::to_string(settings.max_lag) +
                              " hours after the data starts");
    medic.validate();
  }
};

struct MethodReport
{
  Method method;
  ScoreSummary score;
};

struct EvaluationReport
{
  std::optional<FittedModel> model;
  double omission_threshold{ 0.0 };
  std::vector<MethodReport> methods;
  double floor{ density_floor };
};

//! Fits once on the training range, then scores every test hour for every
//! requested method. A method that cannot forecast more than half of the
//! scored hours aborts the run.
inline EvaluationReport run_backtest(const EventStore& store,
                                     const StudyRegion& region,
                                     const BacktestPlan& plan)
{
  plan.validate(store);
  EvaluationReport report;
  report.floor = plan.floor;
  if (plan.methods.empty())
    return report;

  const bool need_weights = std::any_of(plan.methods.begin(), plan.methods.end(), is_stkde);
  FittedModel base;
  if (need_weights) {
    base = fit_model(store, region, plan.training, plan.settings).model;
  } else {
    base.kernel = plan.settings.kernel;
    if (plan.settings.bandwidth) {
      base.bandwidth = *plan.settings.bandwidth;
    } else {
      std::vector<SpatialPoint> pts;
      for (const auto& e : store.window(plan.training))
        pts.push_back(e.location);
      base.bandwidth = select_bandwidth(pts);
    }
  }
  const KernelEvaluator kernel(base.kernel, base.bandwidth);
  const auto& box = region.box();
  const std::size_t threads = plan.settings.threads;

  if (need_weights) {
    report.omission_threshold =
      plan.target_retained > 0.0
        ? calibrate_threshold(base.weights, store, plan.training, plan.target_retained)
        : plan.omission_threshold;
    report.model = base;
  }

  for (const Method m : plan.methods) {
    ScoreSummary s;
    switch (m) {
      case Method::stkde:
      case Method::stkde_interpolated:
      case Method::stkde_threshold: {
        FittedModel variant = base;
        WeightOptions opts;
        opts.interpolate = m == Method::stkde_interpolated;
        opts.omission_threshold = m == Method::stkde_threshold ? report.omission_threshold : 0.0;
        variant.weights = base.weights.with_options(opts);
        const DensityModel model(std::move(variant), store);
        s = average_log_score([&](HourIndex u) { return model.forecast(u); }, store,
                              plan.test, box, plan.floor, threads);
        break;
      }
      case Method::medic:
        s = average_log_score(
          [&](HourIndex u) { return medic_predict(store, box, plan.medic, u); }, store,
          plan.test, box, plan.floor, threads);
        break;
      case Method::naive_recent_hour:
        s = average_log_score(
          [&](HourIndex u) { return naive_recent_hour(store, kernel, u); }, store,
          plan.test, box, plan.floor, threads);
        break;
      case Method::naive_equal_weights:
        s = average_log_score(
          [&](HourIndex u) {
            return naive_equal_weights(store, kernel, plan.settings.max_lag, u);
          },
          store, plan.test, box, plan.floor, threads);
        break;
    }
    if (2 * s.fallbacks > s.hours)
      throw NoDataError(std::string(method_key(m)) + " could not forecast " +
                        std::to_string(s.fallbacks) + " of " + std::to_string(s.hours) +
                        " test hours; aborting backtest");
    report.methods.push_back(MethodReport{ m, std::move(s) });
  }
  return report;
}

// ---------------------------------------------------------------------------
// report output

inline std::string_view method_label(Method m)
{
  switch (m) {
    case Method::stkde: return "stKDE";
    case Method::stkde_interpolated: return "  + interpolation";
    case Method::stkde_threshold: return "  + threshold (less data)";
    case Method::medic: return "MEDIC";
    case Method::naive_recent_hour: return "naiveKDE most recent hour";
    case Method::naive_equal_weights: return "naiveKDE all equal weights";
  }
  return "?";
}

inline void write_report_csv(std::ostream& out, const EvaluationReport& r)
{
  out << "method,score,events,fallbacks,skipped,hours,mean_support,density_floor\n";
  for (const auto& m : r.methods) {
    out << method_key(m.method) << ',' << fmt_double(m.score.average) << ','
        << m.score.events << ',' << m.score.fallbacks << ',' << m.score.skipped << ','
        << m.score.hours << ',' << fmt_double(m.score.mean_support()) << ','
        << fmt_double(r.floor) << '\n';
  }
}

inline void write_per_hour_csv(std::ostream& out, const EvaluationReport& r)
{
  out << "method,hour,events,mean_log_density,fallback,support\n";
  for (const auto& m : r.methods) {
    for (const auto& h : m.score.per_hour) {
      out << method_key(m.method) << ',' << h.hour.value() << ',' << h.events << ','
          << fmt_double(h.mean_log_density) << ',' << (h.fallback ? 1 : 0) << ','
          << h.support << '\n';
    }
  }
}

//! Wall-clock figures live in their own file so every other report output
//! is reproducible byte for byte.
inline void write_timing_csv(std::ostream& out, const EvaluationReport& r)
{
  out << "method,seconds,seconds_per_prediction\n";
  for (const auto& m : r.methods) {
    const double per = m.score.hours ? m.score.seconds / static_cast<double>(m.score.hours) : 0.0;
    out << method_key(m.method) << ',' << fmt_double(m.score.seconds, 6) << ','
        << fmt_double(per, 6) << '\n';
  }
}

//! Plain-text comparison table, one row per method.
inline void write_table(std::ostream& out, const EvaluationReport& r)
{
  static constexpr std::size_t width = 34;
  auto pad = [](std::string_view s) {
    std::string t(s);
    t.resize(std::max(width, t.size()), ' ');
    return t;
  };
  const std::string rule(width + 12, '-');
  out << rule << '\n' << pad("Prediction method") << "  Accuracy\n" << rule << '\n';
  for (const auto& m : r.methods)
    out << pad(method_label(m.method)) << "  " << fmt_fixed(m.score.average, 3) << '\n';
  out << rule << '\n';
  out << "Average log score (nats per event); densities floored at "
      << fmt_double(r.floor, 3) << " km^-2.\n";
  for (const auto& m : r.methods) {
    if (m.method == Method::stkde_threshold)
      out << "Threshold " << fmt_double(r.omission_threshold, 6) << " keeps "
          << fmt_fixed(m.score.mean_support(), 1) << " events per prediction on average.\n";
    if (m.score.fallbacks > 0)
      out << method_key(m.method) << ": " << m.score.fallbacks
          << " hour(s) scored with the uniform fallback density.\n";
  }
}

} // namespace stkde
