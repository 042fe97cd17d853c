#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "carinox/csv.hpp"
#include "carinox/errors.hpp"
#include "carinox/explorer.hpp"
#include "carinox/generator.hpp"
#include "carinox/optimizer.hpp"
#include "carinox/rewards.hpp"
#include "carinox/rng.hpp"

namespace carinox::harness {

using gen::Category;
using gen::PromptSpec;

struct SuiteConfig {
  std::size_t color = 25;
  std::size_t spatial = 25;
  std::size_t numeracy = 25;
  std::size_t complex = 25;

  std::size_t total() const { return color + spatial + numeracy + complex; }
};

// The 2-D landscape the failure-mode scenario runs on: one global basin and
// five decoys, every pairwise center separation at least four widths.
inline std::vector<rewards::Bump> default_landscape() {
  const double w = 0.5;
  return {
      {{1.2, 0.0}, 1.0, w},    {{0.54, 2.03}, 0.6, w},
      {{-1.48, 1.48}, 0.6, w}, {{-2.03, -0.54}, 0.6, w},
      {{-0.54, -2.03}, 0.6, w}, {{3.3, 0.0}, 0.6, w},
  };
}

struct RuggedConfig {
  std::size_t trials = 200;
  double threshold = 0.9;          // success = winner total at or above this
  std::size_t oracle_samples = 200000;
  double jitter = 0.1;             // adversarial start offset, in widths
  std::vector<rewards::Bump> bumps = default_landscape();
};

struct ExperimentConfig {
  std::size_t dim = 64;
  std::size_t slots = 4;
  std::size_t embed_dim = 16;
  double eta = 1.0;
  double tau = 0.01;
  double gamma = 0.01;
  std::size_t iters = 50;       // T
  std::size_t candidates = 5;   // N
  explorer::Mode mode = explorer::Mode::kCarinox;
  std::uint64_t master_seed = 0;
  std::map<std::string, double> lambdas = {{"attribute", 1.0},
                                           {"spatial", 1.0},
                                           {"count", 1.0},
                                           {"embedding", 1.0},
                                           {"rugged", 1.0}};
  double sigma = 0.25;
  double beta = 10.0;
  double kappa = 5.0;
  SuiteConfig suite;
  RuggedConfig rugged;
};

inline void validate(const ExperimentConfig& c) {
  if (c.dim < 2) throw config_error("config: dim must be >= 2");
  if (c.slots < 1) throw config_error("config: slots must be >= 1");
  if (c.embed_dim < 2) throw config_error("config: embed_dim must be >= 2");
  if (!(c.eta > 0.0)) throw config_error("config: eta must be > 0");
  if (!(c.tau > 0.0)) throw config_error("config: tau must be > 0");
  if (!(c.gamma >= 0.0)) throw config_error("config: gamma must be >= 0");
  if (c.candidates < 1) throw config_error("config: candidates must be >= 1");
  for (const auto& [name, l] : c.lambdas) {
    rewards::reward_kind_from_name(name);
    if (!(l >= 0.0)) throw config_error("config: lambda must be >= 0");
  }
  if (!(c.sigma > 0.0)) throw config_error("config: sigma must be > 0");
  if (!(c.beta > 0.0)) throw config_error("config: beta must be > 0");
  if (!(c.kappa > 0.0)) throw config_error("config: kappa must be > 0");
  if (c.rugged.trials < 1) throw config_error("config: rugged trials >= 1");
  if (!(c.rugged.threshold > 0.0 && c.rugged.threshold < 1.0))
    throw config_error("config: rugged threshold must be in (0, 1)");
  if (c.rugged.oracle_samples < 1)
    throw config_error("config: rugged oracle_samples >= 1");
  if (!(c.rugged.jitter >= 0.0))
    throw config_error("config: rugged jitter must be >= 0");
}

namespace detail {

inline void check_keys(const nlohmann::json& j,
                       const std::vector<std::string>& allowed,
                       const std::string& where) {
  if (!j.is_object()) throw config_error(where + ": expected a JSON object");
  for (const auto& [key, value] : j.items())
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw config_error(where + ": unknown key '" + key + "'");
}

}  // namespace detail

inline nlohmann::json config_to_json(const ExperimentConfig& c) {
  nlohmann::json bumps = nlohmann::json::array();
  for (const auto& b : c.rugged.bumps)
    bumps.push_back(
        {{"center", b.center}, {"height", b.height}, {"width", b.width}});
  return {
      {"dim", c.dim},
      {"slots", c.slots},
      {"embed_dim", c.embed_dim},
      {"eta", c.eta},
      {"tau", c.tau},
      {"gamma", c.gamma},
      {"iters", c.iters},
      {"candidates", c.candidates},
      {"mode", explorer::mode_name(c.mode)},
      {"master_seed", c.master_seed},
      {"lambdas", c.lambdas},
      {"rewards",
       {{"sigma", c.sigma}, {"beta", c.beta}, {"kappa", c.kappa}}},
      {"suite",
       {{"color", c.suite.color},
        {"spatial", c.suite.spatial},
        {"numeracy", c.suite.numeracy},
        {"complex", c.suite.complex}}},
      {"rugged",
       {{"trials", c.rugged.trials},
        {"threshold", c.rugged.threshold},
        {"oracle_samples", c.rugged.oracle_samples},
        {"jitter", c.rugged.jitter},
        {"bumps", bumps}}},
  };
}

// Every key is optional; absent keys keep their defaults. Unknown keys are
// rejected so config typos fail loudly instead of silently running defaults.
inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  detail::check_keys(j, {"dim", "slots", "embed_dim", "eta", "tau", "gamma",
                         "iters", "candidates", "mode", "master_seed",
                         "lambdas", "rewards", "suite", "rugged"},
                     "config");
  ExperimentConfig c;
  c.dim = j.value("dim", c.dim);
  c.slots = j.value("slots", c.slots);
  c.embed_dim = j.value("embed_dim", c.embed_dim);
  c.eta = j.value("eta", c.eta);
  c.tau = j.value("tau", c.tau);
  c.gamma = j.value("gamma", c.gamma);
  c.iters = j.value("iters", c.iters);
  c.candidates = j.value("candidates", c.candidates);
  if (j.contains("mode"))
    c.mode = explorer::mode_from_name(j.at("mode").get<std::string>());
  c.master_seed = j.value("master_seed", c.master_seed);
  if (j.contains("lambdas")) {
    for (const auto& [key, value] : j.at("lambdas").items())
      c.lambdas[key] = value.get<double>();
  }
  if (j.contains("rewards")) {
    const auto& r = j.at("rewards");
    detail::check_keys(r, {"sigma", "beta", "kappa"}, "config.rewards");
    c.sigma = r.value("sigma", c.sigma);
    c.beta = r.value("beta", c.beta);
    c.kappa = r.value("kappa", c.kappa);
  }
  if (j.contains("suite")) {
    const auto& s = j.at("suite");
    detail::check_keys(s, {"color", "spatial", "numeracy", "complex"},
                       "config.suite");
    c.suite.color = s.value("color", c.suite.color);
    c.suite.spatial = s.value("spatial", c.suite.spatial);
    c.suite.numeracy = s.value("numeracy", c.suite.numeracy);
    c.suite.complex = s.value("complex", c.suite.complex);
  }
  if (j.contains("rugged")) {
    const auto& r = j.at("rugged");
    detail::check_keys(
        r, {"trials", "threshold", "oracle_samples", "jitter", "bumps"},
        "config.rugged");
    c.rugged.trials = r.value("trials", c.rugged.trials);
    c.rugged.threshold = r.value("threshold", c.rugged.threshold);
    c.rugged.oracle_samples =
        r.value("oracle_samples", c.rugged.oracle_samples);
    c.rugged.jitter = r.value("jitter", c.rugged.jitter);
    if (r.contains("bumps")) {
      c.rugged.bumps.clear();
      for (const auto& b : r.at("bumps")) {
        detail::check_keys(b, {"center", "height", "width"},
                           "config.rugged.bumps[]");
        c.rugged.bumps.push_back({b.at("center").get<Vec>(),
                                  b.at("height").get<double>(),
                                  b.at("width").get<double>()});
      }
    }
  }
  validate(c);
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw parse_error("cannot open config: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw parse_error(path + ": " + e.what());
  }
  return config_from_json(j);
}

// FNV-1a over the canonical JSON dump (object keys are emitted sorted), so
// equal configs always hash equal.
inline std::string config_hash(const ExperimentConfig& c) {
  const std::string dump = config_to_json(c).dump();
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : dump) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", (unsigned long long)h);
  return std::string(buf, 16);
}

inline opt::OptimizerConfig optimizer_config(const ExperimentConfig& c) {
  opt::OptimizerConfig o;
  o.eta = c.eta;
  o.iters = c.iters;
  o.tau = c.tau;
  o.gamma = c.gamma;
  return o;
}

// Synthetic prompts per category: `color` draws 1-2 objects, `spatial` adds a
// relation over two objects, `numeracy` draws a count target, `complex`
// combines all three pressures. Deterministic in (counts, sizes, seed).
inline std::vector<PromptSpec> generate_prompt_suite(const SuiteConfig& suite,
                                                     std::size_t slots,
                                                     std::size_t embed_dim,
                                                     std::uint64_t master_seed) {
  RandomStream rng(master_seed);
  std::vector<PromptSpec> prompts;
  prompts.reserve(suite.total());

  auto draw_color = [&]() {
    return Vec{rng.uniform(), rng.uniform(), rng.uniform()};
  };
  auto draw_relation = [&](PromptSpec& p) {
    gen::RelationSpec rel;
    rel.subject = rng.uniform_index(0, 1);
    rel.object = 1 - rel.subject;
    rel.kind = rng.uniform_index(0, 1) == 0 ? gen::RelationKind::kLeftOf
                                            : gen::RelationKind::kAbove;
    p.relation = rel;
  };
  auto finish = [&](PromptSpec& p, Category cat, std::size_t i) {
    p.category = cat;
    p.id = std::string(gen::category_name(cat)) + "-" + std::to_string(i);
    p.target_embedding = rng.unit_vec(embed_dim);
    prompts.push_back(std::move(p));
  };

  for (std::size_t i = 0; i < suite.color; ++i) {
    PromptSpec p;
    const std::size_t n_obj = 1 + rng.uniform_index(0, 1);
    for (std::size_t o = 0; o < n_obj; ++o) p.objects.push_back({draw_color()});
    p.count_target = n_obj;
    finish(p, Category::kColor, i);
  }
  for (std::size_t i = 0; i < suite.spatial; ++i) {
    PromptSpec p;
    p.objects.push_back({draw_color()});
    p.objects.push_back({draw_color()});
    draw_relation(p);
    p.count_target = 2;
    finish(p, Category::kSpatial, i);
  }
  for (std::size_t i = 0; i < suite.numeracy; ++i) {
    PromptSpec p;
    p.objects.push_back({draw_color()});
    p.count_target = rng.uniform_index(0, slots);
    finish(p, Category::kNumeracy, i);
  }
  for (std::size_t i = 0; i < suite.complex; ++i) {
    PromptSpec p;
    p.objects.push_back({draw_color()});
    p.objects.push_back({draw_color()});
    draw_relation(p);
    p.count_target = rng.uniform_index(0, slots);
    finish(p, Category::kComplex, i);
  }
  return prompts;
}

// Rewards a prompt exerts: attribute, count, and embedding always; spatial
// only when the prompt states a relation.
inline std::vector<rewards::RewardSpec> active_reward_specs(
    const ExperimentConfig& c, const PromptSpec& prompt) {
  rewards::RewardHyper hyper;
  hyper.sigma = c.sigma;
  hyper.beta = c.beta;
  hyper.kappa = c.kappa;
  auto lam = [&](const char* name) {
    const auto it = c.lambdas.find(name);
    return it == c.lambdas.end() ? 1.0 : it->second;
  };
  std::vector<rewards::RewardSpec> specs;
  specs.push_back({rewards::RewardKind::kAttribute, lam("attribute"), hyper});
  if (prompt.relation)
    specs.push_back({rewards::RewardKind::kSpatial, lam("spatial"), hyper});
  specs.push_back({rewards::RewardKind::kCount, lam("count"), hyper});
  specs.push_back({rewards::RewardKind::kEmbedding, lam("embedding"), hyper});
  return specs;
}

// Per-prompt exploration seed; the stride exceeds any sane candidate count so
// candidate streams never collide across prompts, and all variants of one
// prompt share the same pool.
inline std::uint64_t prompt_seed(std::uint64_t master_seed,
                                 std::size_t prompt_index) {
  return master_seed + 1009 * (std::uint64_t(prompt_index) + 1);
}

struct BenchRow {
  std::string variant;
  std::string category;
  double mean_composite = 0.0;
  double std_composite = 0.0;
  std::size_t n_prompts = 0;
};

struct PromptResult {
  std::size_t prompt_index = 0;
  std::string prompt_id;
  std::string category;
  std::string variant;
  double winner_total = 0.0;
};

struct BenchReport {
  std::vector<BenchRow> rows;
  std::vector<PromptResult> per_prompt;
  std::string config_hash;
  double wall_seconds = 0.0;
};

inline constexpr explorer::Mode kAllModes[] = {
    explorer::Mode::kBaseline, explorer::Mode::kCarinx,
    explorer::Mode::kCarino, explorer::Mode::kCarinox};

// Runs every prompt under all four variants with a shared per-prompt seed so
// candidate pools align, then aggregates winner totals per (variant,
// category).
inline BenchReport run_bench(const ExperimentConfig& config,
                             opt::GradientObserver* observer = nullptr) {
  validate(config);
  const auto t0 = std::chrono::steady_clock::now();
  const auto params = gen::init_generator(config.master_seed, config.dim,
                                          config.slots, config.embed_dim);
  const auto suite = generate_prompt_suite(config.suite, config.slots,
                                           config.embed_dim,
                                           config.master_seed);

  BenchReport report;
  report.config_hash = config_hash(config);

  std::map<std::pair<std::string, std::string>, Vec> cells;
  for (std::size_t pi = 0; pi < suite.size(); ++pi) {
    const auto& prompt = suite[pi];
    const auto terms =
        rewards::build_reward_terms(prompt,
                                    active_reward_specs(config, prompt));
    for (const auto mode : kAllModes) {
      explorer::ExplorationConfig ecfg;
      ecfg.candidates = config.candidates;
      ecfg.master_seed = prompt_seed(config.master_seed, pi);
      ecfg.mode = mode;
      ecfg.optimizer = optimizer_config(config);
      explorer::ExplorationResult res;
      try {
        res = explorer::explore(prompt, params, terms, ecfg, observer);
      } catch (...) {
        opt::detail::rethrow_tagged("prompt " + std::to_string(pi) + " (" +
                                    prompt.id + "), variant " +
                                    explorer::mode_name(mode) + ": ");
      }
      report.per_prompt.push_back({pi, prompt.id,
                                   gen::category_name(prompt.category),
                                   explorer::mode_name(mode),
                                   res.winner_total});
      cells[{explorer::mode_name(mode),
             gen::category_name(prompt.category)}]
          .push_back(res.winner_total);
    }
  }

  // Fixed emission order: variant blocks, suite category order inside.
  const char* categories[] = {"color", "spatial", "numeracy", "complex"};
  for (const auto mode : kAllModes) {
    for (const char* cat : categories) {
      const auto it = cells.find({explorer::mode_name(mode), cat});
      if (it == cells.end()) continue;
      const Vec& totals = it->second;
      const double n = double(totals.size());
      double mean = 0.0;
      for (double v : totals) mean += v;
      mean /= n;
      double var = 0.0;
      for (double v : totals) var += (v - mean) * (v - mean);
      report.rows.push_back({explorer::mode_name(mode), cat, mean,
                             std::sqrt(var / n), totals.size()});
    }
  }
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return report;
}

inline std::string bench_summary_to_csv(const BenchReport& r) {
  std::string body = "variant,category,mean_composite,std,n_prompts\n";
  for (const auto& row : r.rows)
    body += csv::join_row({row.variant, row.category,
                           csv::format_double(row.mean_composite),
                           csv::format_double(row.std_composite),
                           std::to_string(row.n_prompts)});
  return body;
}

inline std::string bench_prompts_to_csv(const BenchReport& r) {
  std::string body = "prompt_index,prompt_id,category,variant,winner_total\n";
  for (const auto& p : r.per_prompt)
    body += csv::join_row({std::to_string(p.prompt_index), p.prompt_id,
                           p.category, p.variant,
                           csv::format_double(p.winner_total)});
  return body;
}

inline nlohmann::json bench_to_json(const BenchReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.rows)
    rows.push_back({{"variant", row.variant},
                    {"category", row.category},
                    {"mean_composite", row.mean_composite},
                    {"std", row.std_composite},
                    {"n_prompts", row.n_prompts}});
  return {{"config_hash", r.config_hash},
          {"wall_seconds", r.wall_seconds},
          {"rows", rows}};
}

struct RuggedReport {
  std::size_t trials = 0;
  double threshold = 0.9;
  std::size_t successes_carino = 0;
  std::size_t successes_carinx = 0;
  std::size_t successes_carinox = 0;
  double rate_carino = 0.0;
  double rate_carinx = 0.0;
  double rate_carinox = 0.0;
  double basin_mass = 0.0;        // oracle P(single draw clears threshold)
  double predicted_carinx = 0.0;  // 1 - (1 - basin_mass)^N
  double se_empirical = 0.0;      // binomial SE of the carinx rate at the
                                  // predicted value
  double se_oracle = 0.0;         // delta-method SE of the prediction
  std::string config_hash;
};

inline void validate_landscape(const std::vector<rewards::Bump>& bumps,
                               std::size_t dim) {
  rewards::validate_bumps(bumps, dim);
  std::size_t locals = 0;
  for (const auto& b : bumps)
    if (b.height != 1.0) ++locals;
  if (locals < 5)
    throw config_error("rugged landscape: need at least 5 local bumps");
  for (std::size_t i = 0; i < bumps.size(); ++i) {
    for (std::size_t j = i + 1; j < bumps.size(); ++j) {
      Vec diff = bumps[i].center;
      axpy(-1.0, bumps[j].center, diff);
      const double sep = norm2(diff);
      const double need = 4.0 * std::max(bumps[i].width, bumps[j].width);
      if (sep < need)
        throw config_error("rugged landscape: bumps " + std::to_string(i) +
                           " and " + std::to_string(j) + " are " +
                           std::to_string(sep) + " apart, need " +
                           std::to_string(need));
    }
  }
}

// The failure-mode scenario: per trial, carinx and carinox explore from the
// trial seed while carino starts at a randomly chosen decoy bump. A
// Monte-Carlo estimate of the global basin mass predicts the carinx rate.
inline RuggedReport run_rugged_scenario(const ExperimentConfig& config) {
  validate(config);
  const auto& rc = config.rugged;
  if (rc.bumps.empty()) throw config_error("rugged landscape: no bumps");
  const std::size_t dim = rc.bumps.front().center.size();
  validate_landscape(rc.bumps, dim);

  const auto params = gen::make_identity_generator(dim);
  PromptSpec prompt;
  prompt.id = "rugged";
  rewards::RewardSpec spec;
  spec.kind = rewards::RewardKind::kRugged;
  spec.lambda = 1.0;
  spec.hyper.bumps = rc.bumps;
  const auto terms = rewards::build_reward_terms(prompt, {spec});

  std::vector<std::size_t> decoys;
  for (std::size_t i = 0; i < rc.bumps.size(); ++i)
    if (rc.bumps[i].height != 1.0) decoys.push_back(i);

  RuggedReport report;
  report.trials = rc.trials;
  report.threshold = rc.threshold;
  report.config_hash = config_hash(config);

  for (std::size_t t = 0; t < rc.trials; ++t) {
    const std::uint64_t trial_seed = config.master_seed + 7919 * t;

    explorer::ExplorationConfig ecfg;
    ecfg.candidates = config.candidates;
    ecfg.master_seed = trial_seed;
    ecfg.optimizer = optimizer_config(config);

    ecfg.mode = explorer::Mode::kCarinx;
    if (explorer::explore(prompt, params, terms, ecfg).winner_total >=
        rc.threshold)
      ++report.successes_carinx;

    ecfg.mode = explorer::Mode::kCarinox;
    if (explorer::explore(prompt, params, terms, ecfg).winner_total >=
        rc.threshold)
      ++report.successes_carinox;

    // Adversarial start for the optimization-only arm: a decoy bump center
    // plus a small jitter, the trap the exploration arms are immune to.
    RandomStream astream(trial_seed + 424243);
    const auto& decoy = rc.bumps[decoys[astream.uniform_index(
        0, decoys.size() - 1)]];
    Vec eps0 = decoy.center;
    axpy(rc.jitter * decoy.width, astream.normal_vec(dim), eps0);
    const auto trace = opt::optimize(eps0, params, prompt, terms,
                                     optimizer_config(config));
    if (trace.best_total >= rc.threshold) ++report.successes_carino;
  }
  report.rate_carino = double(report.successes_carino) / double(rc.trials);
  report.rate_carinx = double(report.successes_carinx) / double(rc.trials);
  report.rate_carinox = double(report.successes_carinox) / double(rc.trials);

  RandomStream ostream(config.master_seed + 860861);
  std::size_t hits = 0;
  for (std::size_t s = 0; s < rc.oracle_samples; ++s)
    if (rewards::rugged_reward(ostream.normal_vec(dim), rc.bumps) >=
        rc.threshold)
      ++hits;
  const double q = double(hits) / double(rc.oracle_samples);
  const double n = double(config.candidates);
  report.basin_mass = q;
  report.predicted_carinx = 1.0 - std::pow(1.0 - q, n);
  report.se_empirical =
      std::sqrt(report.predicted_carinx * (1.0 - report.predicted_carinx) /
                double(rc.trials));
  report.se_oracle = n * std::pow(1.0 - q, n - 1.0) *
                     std::sqrt(q * (1.0 - q) / double(rc.oracle_samples));
  return report;
}

struct GradAuditReport {
  std::size_t pairs = 0;
  std::size_t checks = 0;
  std::size_t failures = 0;
  double max_rel_err = 0.0;
  std::vector<std::string> failure_notes;
};

namespace detail {

// Componentwise: fail when |a - b| exceeds both the absolute floor and the
// relative bound. Reports the largest relative error above the floor.
inline void compare_gradients(const Vec& got, const Vec& want,
                              double rel_tol, double abs_floor,
                              const std::string& label,
                              GradAuditReport& report) {
  ++report.checks;
  bool ok = got.size() == want.size();
  double worst = 0.0;
  if (ok) {
    for (std::size_t i = 0; i < got.size(); ++i) {
      const double diff = std::abs(got[i] - want[i]);
      const double mag = std::max(std::abs(got[i]), std::abs(want[i]));
      if (mag > abs_floor) worst = std::max(worst, diff / mag);
      if (diff > std::max(abs_floor, rel_tol * mag)) ok = false;
    }
  }
  report.max_rel_err = std::max(report.max_rel_err, worst);
  if (!ok) {
    ++report.failures;
    if (report.failure_notes.size() < 8) report.failure_notes.push_back(label);
  }
}

}  // namespace detail

// Finite-difference audit of every recorded reward gradient plus the
// regularizer, over `pairs` random (noise, prompt) pairs.
inline GradAuditReport run_gradient_audit(const ExperimentConfig& config,
                                          std::size_t pairs, double h = 1e-5,
                                          double rel_tol = 1e-5,
                                          double abs_floor = 1e-8) {
  validate(config);
  if (pairs < 1) throw contract_error("run_gradient_audit: need >= 1 pair");
  const auto params = gen::init_generator(config.master_seed, config.dim,
                                          config.slots, config.embed_dim);
  SuiteConfig counts;
  counts.color = counts.spatial = counts.numeracy = counts.complex =
      (pairs + 3) / 4;
  const auto suite = generate_prompt_suite(counts, config.slots,
                                           config.embed_dim,
                                           config.master_seed);
  const auto rugged_params = gen::make_identity_generator(2);
  PromptSpec rugged_prompt;
  rewards::RewardSpec rugged_spec;
  rugged_spec.kind = rewards::RewardKind::kRugged;
  rugged_spec.hyper.bumps = default_landscape();

  GradAuditReport report;
  report.pairs = pairs;
  for (std::size_t s = 0; s < pairs; ++s) {
    RandomStream rng(config.master_seed + 5000000 + s);
    const Vec eps = rng.normal_vec(config.dim);
    const auto& prompt = suite[s % suite.size()];

    for (const auto& spec : active_reward_specs(config, prompt)) {
      ad::Tape tape;
      const auto scene = gen::generate(params, eps, prompt, tape);
      const Vec got = tape.backward(
          rewards::record_reward(tape, scene, prompt, spec),
          scene.nodes.eps);
      const Vec want = ad::finite_diff_gradient(
          [&](const Vec& e) {
            ad::Tape t2;
            const auto s2 = gen::generate(params, e, prompt, t2);
            return rewards::reward_value(s2, prompt, spec);
          },
          eps, h);
      detail::compare_gradients(
          got, want, rel_tol, abs_floor,
          "pair " + std::to_string(s) + ", " + prompt.id + ", " +
              rewards::reward_kind_name(spec.kind),
          report);
    }

    {
      const Vec got = opt::regularizer_grad(eps);
      const Vec want = ad::finite_diff_gradient(
          [](const Vec& e) { return opt::regularizer_value(e); }, eps, h);
      detail::compare_gradients(got, want, rel_tol, abs_floor,
                                "pair " + std::to_string(s) + ", regularizer",
                                report);
    }

    {
      const Vec eps2 = rng.normal_vec(2);
      ad::Tape tape;
      const auto scene =
          gen::generate(rugged_params, eps2, rugged_prompt, tape);
      const Vec got = tape.backward(
          rewards::record_reward(tape, scene, rugged_prompt, rugged_spec),
          scene.nodes.eps);
      const Vec want = ad::finite_diff_gradient(
          [&](const Vec& e) {
            return rewards::rugged_reward(e, rugged_spec.hyper.bumps);
          },
          eps2, h);
      detail::compare_gradients(got, want, rel_tol, abs_floor,
                                "pair " + std::to_string(s) + ", rugged",
                                report);
    }
  }
  return report;
}

inline std::string rugged_to_csv(const RuggedReport& r) {
  std::string body = "arm,successes,trials,rate\n";
  body += csv::join_row({"carino", std::to_string(r.successes_carino),
                         std::to_string(r.trials),
                         csv::format_double(r.rate_carino)});
  body += csv::join_row({"carinx", std::to_string(r.successes_carinx),
                         std::to_string(r.trials),
                         csv::format_double(r.rate_carinx)});
  body += csv::join_row({"carinox", std::to_string(r.successes_carinox),
                         std::to_string(r.trials),
                         csv::format_double(r.rate_carinox)});
  return body;
}

inline nlohmann::json rugged_to_json(const RuggedReport& r) {
  return {{"trials", r.trials},
          {"threshold", r.threshold},
          {"rate_carino", r.rate_carino},
          {"rate_carinx", r.rate_carinx},
          {"rate_carinox", r.rate_carinox},
          {"basin_mass", r.basin_mass},
          {"predicted_carinx", r.predicted_carinx},
          {"se_empirical", r.se_empirical},
          {"se_oracle", r.se_oracle},
          {"config_hash", r.config_hash}};
}

}  // namespace carinox::harness
