#pragma once

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "carinox/csv.hpp"
#include "carinox/errors.hpp"
#include "carinox/explorer.hpp"
#include "carinox/harness.hpp"
#include "carinox/metric_selection.hpp"
#include "carinox/optimizer.hpp"

namespace carinox::cli {

inline constexpr const char* kUsage =
    "usage: carinox <subcommand> [--config <path>] [--seed <n>] [--out <dir>]\n"
    "\n"
    "subcommands:\n"
    "  optimize        gradient-ascent trace for a single noise seed\n"
    "  explore         full candidate pipeline for one prompt\n"
    "  bench           run the prompt suite under all four variants\n"
    "  select-rewards  correlation pipeline over a score or correlation CSV\n"
    "  rugged          multi-basin failure-mode scenario\n"
    "  gradcheck       finite-difference audit of every reward gradient\n"
    "\n"
    "flags:\n"
    "  --config <path>  JSON experiment config (select-rewards: the input CSV)\n"
    "  --seed <n>       override the master seed\n"
    "  --out <dir>      output directory (default .)\n";

namespace detail {

struct UsageError {
  std::string message;
};

struct Args {
  std::string subcommand;
  std::optional<std::string> config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
};

inline Args parse_args(const std::vector<std::string>& argv) {
  if (argv.empty()) throw UsageError{"missing subcommand"};
  Args args;
  args.subcommand = argv[0];
  const std::vector<std::string> known = {"optimize", "explore",       "bench",
                                          "rugged",   "select-rewards",
                                          "gradcheck"};
  if (std::find(known.begin(), known.end(), args.subcommand) == known.end())
    throw UsageError{"unknown subcommand '" + args.subcommand + "'"};
  for (std::size_t i = 1; i < argv.size(); ++i) {
    const std::string& flag = argv[i];
    auto value = [&]() -> const std::string& {
      if (i + 1 >= argv.size())
        throw UsageError{"flag " + flag + " needs a value"};
      return argv[++i];
    };
    if (flag == "--config") {
      args.config_path = value();
    } else if (flag == "--seed") {
      const std::string& v = value();
      try {
        args.seed = std::stoull(v);
      } catch (...) {
        throw UsageError{"--seed expects an integer, got '" + v + "'"};
      }
    } else if (flag == "--out") {
      args.out_dir = value();
    } else {
      throw UsageError{"unknown flag '" + flag + "'"};
    }
  }
  return args;
}

inline harness::ExperimentConfig load_experiment_config(const Args& args) {
  harness::ExperimentConfig config;
  if (args.config_path) config = harness::load_config(*args.config_path);
  if (args.seed) config.master_seed = *args.seed;
  return config;
}

inline std::string out_path(const Args& args, const std::string& name) {
  std::filesystem::create_directories(args.out_dir);
  return args.out_dir + "/" + name;
}

// The prompt the single-run subcommands act on: the first of the configured
// suite.
inline gen::PromptSpec first_prompt(const harness::ExperimentConfig& config) {
  const auto suite = harness::generate_prompt_suite(
      config.suite, config.slots, config.embed_dim, config.master_seed);
  if (suite.empty())
    throw config_error("suite is empty; nothing to optimize");
  return suite.front();
}

inline int cmd_optimize(const Args& args) {
  const auto config = load_experiment_config(args);
  const auto params = gen::init_generator(config.master_seed, config.dim,
                                          config.slots, config.embed_dim);
  const auto prompt = first_prompt(config);
  RandomStream rng(harness::prompt_seed(config.master_seed, 0));
  const Vec eps0 = gen::sample_noise(config.dim, rng);
  const auto trace = opt::optimize(
      eps0, params, prompt, harness::active_reward_specs(config, prompt),
      harness::optimizer_config(config));
  csv::write_text(out_path(args, "trace.csv"), opt::trace_to_csv(trace));
  csv::write_text(out_path(args, "trace_summary.json"),
                  opt::trace_summary(trace).dump(2) + "\n");
  std::cout << "prompt " << prompt.id << ": best_total "
            << csv::format_double(trace.best_total) << " at iteration "
            << trace.best_iteration << "\n";
  return 0;
}

inline int cmd_explore(const Args& args) {
  const auto config = load_experiment_config(args);
  const auto params = gen::init_generator(config.master_seed, config.dim,
                                          config.slots, config.embed_dim);
  const auto prompt = first_prompt(config);
  explorer::ExplorationConfig ecfg;
  ecfg.candidates = config.candidates;
  ecfg.master_seed = harness::prompt_seed(config.master_seed, 0);
  ecfg.mode = config.mode;
  ecfg.optimizer = harness::optimizer_config(config);
  const auto result = explorer::explore(
      prompt, params, harness::active_reward_specs(config, prompt), ecfg);
  csv::write_text(out_path(args, "exploration.csv"),
                  explorer::exploration_to_csv(result));
  csv::write_text(out_path(args, "exploration.json"),
                  explorer::exploration_to_json(result).dump(2) + "\n");
  std::cout << "prompt " << prompt.id << " (" << explorer::mode_name(ecfg.mode)
            << "): winner " << result.winner_index << ", total "
            << csv::format_double(result.winner_total) << "\n";
  return 0;
}

inline int cmd_bench(const Args& args) {
  const auto config = load_experiment_config(args);
  const auto report = harness::run_bench(config);
  csv::write_text(out_path(args, "bench_summary.csv"),
                  harness::bench_summary_to_csv(report));
  csv::write_text(out_path(args, "bench_prompts.csv"),
                  harness::bench_prompts_to_csv(report));
  csv::write_text(out_path(args, "bench.json"),
                  harness::bench_to_json(report).dump(2) + "\n");
  for (const auto& row : report.rows)
    std::cout << row.variant << " " << row.category << ": mean "
              << csv::format_double(row.mean_composite) << " over "
              << row.n_prompts << " prompts\n";
  std::cout << "config " << report.config_hash << ", "
            << csv::format_double(report.wall_seconds) << "s\n";
  return 0;
}

inline int cmd_select_rewards(const Args& args) {
  if (!args.config_path)
    throw UsageError{"select-rewards needs --config <csv>"};
  const auto lines = csv::read_lines(*args.config_path);
  if (lines.empty()) throw parse_error(*args.config_path + ": empty file");
  const auto header = csv::split_fields(lines[0]);

  std::vector<metrics::CorrelationTable> tables;
  if (header.size() >= 3 && header[0] == "item_id" &&
      header[1] == "category" && header[2] == "human") {
    const auto scores = metrics::load_score_table(*args.config_path);
    tables.push_back(
        metrics::correlation_table(scores, metrics::CorrMethod::kSpearman));
    tables.push_back(
        metrics::correlation_table(scores, metrics::CorrMethod::kKendall));
  } else if (header ==
             std::vector<std::string>{"category", "metric", "value"}) {
    tables.push_back(metrics::load_correlation_table(
        *args.config_path, metrics::CorrMethod::kSpearman));
  } else {
    throw parse_error(*args.config_path +
                      ": expected a score table (item_id,category,human,...) "
                      "or a correlation table (category,metric,value)");
  }

  const auto& primary = tables.front();
  const auto report = metrics::top3_frequency(primary, primary.metrics);
  std::filesystem::create_directories(args.out_dir);
  metrics::write_reports(tables, report, args.out_dir);

  for (const auto& [metric, total] : report.totals)
    std::cout << metric << "," << total << "\n";
  const std::size_t k = std::min<std::size_t>(4, report.totals.size());
  std::cout << "selected:";
  for (const auto& m : metrics::select_reward_set(report, k))
    std::cout << " " << m;
  std::cout << "\n";
  return 0;
}

inline int cmd_rugged(const Args& args) {
  const auto config = load_experiment_config(args);
  const auto report = harness::run_rugged_scenario(config);
  csv::write_text(out_path(args, "rugged.csv"),
                  harness::rugged_to_csv(report));
  csv::write_text(out_path(args, "rugged.json"),
                  harness::rugged_to_json(report).dump(2) + "\n");
  std::cout << "carino " << csv::format_double(report.rate_carino)
            << ", carinx " << csv::format_double(report.rate_carinx)
            << ", carinox " << csv::format_double(report.rate_carinox)
            << " (predicted carinx "
            << csv::format_double(report.predicted_carinx) << ")\n";
  return 0;
}

inline int cmd_gradcheck(const Args& args) {
  const auto config = load_experiment_config(args);
  const auto report = harness::run_gradient_audit(config, 100);
  std::cout << report.checks << " gradient checks over " << report.pairs
            << " pairs, max relative error "
            << csv::format_double(report.max_rel_err) << ", "
            << report.failures << " failures\n";
  for (const auto& note : report.failure_notes)
    std::cerr << "failed: " << note << "\n";
  return report.failures == 0 ? 0 : 1;
}

}  // namespace detail

// Exit status: 0 success, 1 runtime error, 2 usage error.
inline int cli_dispatch(const std::vector<std::string>& argv) {
  try {
    const auto args = detail::parse_args(argv);
    if (args.subcommand == "optimize") return detail::cmd_optimize(args);
    if (args.subcommand == "explore") return detail::cmd_explore(args);
    if (args.subcommand == "bench") return detail::cmd_bench(args);
    if (args.subcommand == "select-rewards")
      return detail::cmd_select_rewards(args);
    if (args.subcommand == "rugged") return detail::cmd_rugged(args);
    if (args.subcommand == "gradcheck") return detail::cmd_gradcheck(args);
    throw detail::UsageError{"unknown subcommand"};
  } catch (const detail::UsageError& e) {
    std::cerr << "error: " << e.message << "\n" << kUsage;
    return 2;
  } catch (const error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

inline int cli_dispatch(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return cli_dispatch(args);
}

}  // namespace carinox::cli
