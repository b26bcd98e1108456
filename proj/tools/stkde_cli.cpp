#include "stkde/commands.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

int exit_code(stkde::ErrorCategory c)
{
  switch (c) {
    case stkde::ErrorCategory::usage: return 2;
    case stkde::ErrorCategory::data: return 3;
    case stkde::ErrorCategory::numerical: return 4;
  }
  return 1;
}

stkde::RunConfig require_config(const std::string& flag)
{
  if (!flag.empty())
    return stkde::load_run_config(flag);
  if (const auto env = stkde::default_config_path())
    return stkde::load_run_config(*env);
  throw stkde::ConfigError(std::string("no config file: pass --config or set ") +
                           stkde::config_env_var);
}

} // namespace

int main(int argc, char** argv)
{
  CLI::App app{ "Spatio-temporal kernel density forecasting of hourly point-process demand" };
  app.require_subcommand(1);

  std::string config_path, events_path, model_path, out_dir = ".", target_text;
  std::optional<std::uint64_t> seed;
  std::optional<double> threshold;
  std::optional<std::size_t> threads;
  bool interpolate = false;

  auto common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "Config file (default: $STKDE_CONFIG)");
    cmd->add_option("--out", out_dir, "Output directory")->capture_default_str();
    cmd->add_option("--threads", threads, "Worker threads, 0 for all cores (default 1)");
  };

  auto* fit = app.add_subcommand("fit", "Fit bandwidth and per-cell weight curves");
  common(fit);
  fit->add_option("--events", events_path, "Event CSV (overrides data.events)");
  fit->add_option("--seed", seed, "Multi-start seed");
  fit->add_flag("--interpolate", interpolate, "Store bilinear weight interpolation in the model");
  fit->add_option("--threshold", threshold, "Store an omission threshold in the model");

  auto* predict = app.add_subcommand("predict", "Predict density grids for target hours");
  common(predict);
  predict->add_option("--model", model_path, "Model file")->required();
  predict->add_option("--events", events_path, "Event CSV (overrides data.events)");
  predict->add_option("--target", target_text, "Target hours: 12 | 12,40 | 100:110")
    ->required();
  predict->add_option("--threshold", threshold, "Omission threshold override");
  predict->add_flag("--interpolate", interpolate, "Interpolate weights bilinearly");

  auto* evaluate = app.add_subcommand("evaluate", "Backtest all methods and write reports");
  common(evaluate);
  evaluate->add_option("--events", events_path, "Event CSV (overrides data.events)");
  evaluate->add_option("--seed", seed, "Multi-start seed");
  evaluate->add_option("--threshold", threshold,
                       "Omission threshold for the threshold variant (skips calibration)");

  auto* sim = app.add_subcommand("simulate", "Simulate a scenario with known ground truth");
  common(sim);
  sim->add_option("--seed", seed, "Scenario seed override");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    auto& log = std::cerr;
    if (sim->parsed()) {
      std::string path = config_path;
      if (path.empty()) {
        const auto env = stkde::default_config_path();
        if (!env)
          throw stkde::ConfigError("simulate needs --config <scenario file>");
        path = env->string();
      }
      auto scenario = stkde::load_scenario(path);
      if (seed)
        scenario.spec.seed = *seed;
      stkde::cmd_simulate(scenario, out_dir, log);
      return 0;
    }

    if (predict->parsed()) {
      stkde::PredictOptions opts;
      opts.threshold = threshold;
      opts.interpolate = interpolate;
      opts.threads = threads.value_or(1);
      std::string events = events_path;
      if (!config_path.empty() || stkde::default_config_path()) {
        const auto config = require_config(config_path);
        opts.epoch = config.epoch;
        if (events.empty())
          events = config.events_path;
      }
      if (events.empty())
        throw stkde::ConfigError("predict needs --events or data.events in the config");
      stkde::cmd_predict(model_path, events, stkde::parse_targets(target_text), out_dir, opts,
                         log);
      return 0;
    }

    auto config = require_config(config_path);
    if (threads)
      config.settings.threads = *threads;
    if (seed)
      config.settings.fit.seed = *seed;
    const std::string events = events_path.empty() ? config.events_path : events_path;
    if (events.empty())
      throw stkde::ConfigError("no event file: pass --events or set data.events");

    if (fit->parsed()) {
      if (interpolate)
        config.weight_options.interpolate = true;
      if (threshold)
        config.weight_options.omission_threshold = *threshold;
      stkde::cmd_fit(config, events, out_dir, log);
    } else {
      if (threshold)
        config.threshold = *threshold;
      stkde::cmd_evaluate(config, events, out_dir, log);
    }
    return 0;
  } catch (const stkde::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.category());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
