#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "carinox/csv.hpp"
#include "carinox/errors.hpp"
#include "carinox/generator.hpp"
#include "carinox/optimizer.hpp"
#include "carinox/rng.hpp"

namespace carinox::explorer {

using gen::GeneratorParams;
using gen::NoiseVector;
using gen::PromptSpec;

// baseline: one unoptimized draw. carinx: best of N unoptimized draws.
// carino: one optimized draw. carinox: best of N optimized draws.
enum class Mode { kBaseline, kCarinx, kCarino, kCarinox };

inline const char* mode_name(Mode m) {
  switch (m) {
    case Mode::kBaseline: return "baseline";
    case Mode::kCarinx: return "carinx";
    case Mode::kCarino: return "carino";
    case Mode::kCarinox: return "carinox";
  }
  return "?";
}

inline Mode mode_from_name(const std::string& s) {
  if (s == "baseline") return Mode::kBaseline;
  if (s == "carinx") return Mode::kCarinx;
  if (s == "carino") return Mode::kCarino;
  if (s == "carinox") return Mode::kCarinox;
  throw config_error("unknown mode: " + s);
}

struct ExplorationConfig {
  std::size_t candidates = 5;  // N
  std::uint64_t master_seed = 0;
  Mode mode = Mode::kCarinox;
  opt::OptimizerConfig optimizer;
};

struct CandidateSummary {
  double initial_total = 0.0;
  double best_total = 0.0;
  std::size_t best_iteration = 0;
};

struct ExplorationResult {
  std::size_t winner_index = 0;
  double winner_total = 0.0;
  gen::Scene winner_scene;
  NoiseVector winner_noise;
  std::vector<CandidateSummary> per_candidate;
};

// Candidate i draws from its own stream seeded master_seed + i, so growing N
// extends the pool without disturbing earlier candidates.
inline std::vector<NoiseVector> sample_candidates(std::size_t n, std::size_t d,
                                                  std::uint64_t master_seed) {
  if (n < 1) throw contract_error("sample_candidates: need at least one");
  std::vector<NoiseVector> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    RandomStream rng(master_seed + i);
    out.push_back(gen::sample_noise(d, rng));
  }
  return out;
}

// Argmax of best totals; strict comparison keeps the lowest index on ties.
inline std::size_t pick_winner(const std::vector<CandidateSummary>& summaries) {
  if (summaries.empty()) throw contract_error("pick_winner: no candidates");
  std::size_t best = 0;
  for (std::size_t i = 1; i < summaries.size(); ++i)
    if (summaries[i].best_total > summaries[best].best_total) best = i;
  return best;
}

inline void effective_counts(const ExplorationConfig& cfg, std::size_t& n,
                             std::size_t& t) {
  n = cfg.candidates;
  t = cfg.optimizer.iters;
  switch (cfg.mode) {
    case Mode::kBaseline: n = 1; t = 0; break;
    case Mode::kCarinx: t = 0; break;
    case Mode::kCarino: n = 1; break;
    case Mode::kCarinox: break;
  }
}

inline ExplorationResult explore(const PromptSpec& prompt,
                                 const GeneratorParams& params,
                                 const std::vector<rewards::RewardTerm>& terms,
                                 const ExplorationConfig& cfg,
                                 opt::GradientObserver* observer = nullptr) {
  if (cfg.candidates < 1)
    throw config_error("explore: need at least one candidate");
  opt::validate(cfg.optimizer);

  std::size_t n = 0;
  std::size_t t = 0;
  effective_counts(cfg, n, t);
  opt::OptimizerConfig ocfg = cfg.optimizer;
  ocfg.iters = t;

  const auto candidates = sample_candidates(n, params.d, cfg.master_seed);
  ExplorationResult result;
  result.per_candidate.reserve(n);
  std::size_t best = 0;
  for (std::size_t i = 0; i < n; ++i) {
    opt::OptimizationTrace trace;
    try {
      trace = opt::optimize(candidates[i], params, prompt, terms, ocfg,
                            observer);
    } catch (...) {
      opt::detail::rethrow_tagged("candidate " + std::to_string(i) + ": ");
    }
    result.per_candidate.push_back({trace.per_iteration.front().breakdown.total,
                                    trace.best_total, trace.best_iteration});
    if (i == 0 || trace.best_total > result.winner_total) {
      best = i;
      result.winner_total = trace.best_total;
      result.winner_scene = std::move(trace.best_scene);
      result.winner_noise = std::move(trace.best_noise);
    }
  }
  result.winner_index = pick_winner(result.per_candidate);
  // pick_winner re-derives the argmax from the summaries alone; it must agree
  // with the incremental tracking above.
  if (result.winner_index != best)
    throw contract_error("explore: winner selection mismatch");
  return result;
}

inline ExplorationResult explore(const PromptSpec& prompt,
                                 const GeneratorParams& params,
                                 const std::vector<rewards::RewardSpec>& specs,
                                 const ExplorationConfig& cfg,
                                 opt::GradientObserver* observer = nullptr) {
  return explore(prompt, params, rewards::build_reward_terms(prompt, specs),
                 cfg, observer);
}

inline std::string exploration_to_csv(const ExplorationResult& r) {
  std::string out = "candidate,initial_total,best_total,best_iteration\n";
  for (std::size_t i = 0; i < r.per_candidate.size(); ++i) {
    const auto& c = r.per_candidate[i];
    out += std::to_string(i) + "," + csv::format_double(c.initial_total) +
           "," + csv::format_double(c.best_total) + "," +
           std::to_string(c.best_iteration) + "\n";
  }
  return out;
}

inline nlohmann::json exploration_to_json(const ExplorationResult& r) {
  nlohmann::json per = nlohmann::json::array();
  for (const auto& c : r.per_candidate)
    per.push_back({{"initial_total", c.initial_total},
                   {"best_total", c.best_total},
                   {"best_iteration", c.best_iteration}});
  return {{"winner_index", r.winner_index},
          {"winner_total", r.winner_total},
          {"per_candidate", per}};
}

}  // namespace carinox::explorer
