#pragma once

#include <cmath>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "carinox/autodiff.hpp"
#include "carinox/csv.hpp"
#include "carinox/errors.hpp"
#include "carinox/generator.hpp"
#include "carinox/linalg.hpp"
#include "carinox/rewards.hpp"

namespace carinox::opt {

using gen::GeneratorParams;
using gen::NoiseVector;
using gen::PromptSpec;
using gen::Scene;
using rewards::RewardBreakdown;
using rewards::RewardSpec;
using rewards::RewardTerm;

struct OptimizerConfig {
  double eta = 1.0;        // ascent step size
  std::size_t iters = 50;  // T
  double tau = 0.01;       // per-term gradient norm cap
  double gamma = 0.01;     // norm-regularizer strength; 0 disables the term
  // Optional override of the per-term weights; empty means "use each term's
  // own lambda". If set, must have one entry per reward term.
  std::vector<double> lambdas;
};

inline void validate(const OptimizerConfig& cfg) {
  if (!(cfg.eta > 0.0)) throw config_error("optimizer: eta must be > 0");
  if (!(cfg.tau > 0.0)) throw config_error("optimizer: tau must be > 0");
  if (!(cfg.gamma >= 0.0)) throw config_error("optimizer: gamma must be >= 0");
  for (double l : cfg.lambdas)
    if (!(l >= 0.0)) throw config_error("optimizer: lambdas must be >= 0");
}

// Receives every per-term gradient before and after clipping. Lets callers
// audit the clipping invariant without touching optimizer internals.
struct GradientObserver {
  virtual ~GradientObserver() = default;
  virtual void on_clipped_gradient(std::string_view term_name, const Vec& raw,
                                   const Vec& clipped) = 0;
};

// Norm cap preserving direction: g unchanged if ||g|| <= tau, else scaled
// onto the tau sphere.
inline Vec clip_gradient(const Vec& g, double tau) {
  if (!(tau > 0.0)) throw config_error("clip_gradient: tau must be > 0");
  const double n = norm2(g);
  if (n <= tau) return g;
  return scaled(g, tau / n);
}

// Log-likelihood of the norm of a standard Gaussian vector (chi with
// eps.size() degrees of freedom), up to a constant. Maximized at
// ||eps|| = sqrt(d-1).
inline double regularizer_value(const NoiseVector& eps) {
  if (eps.empty()) throw contract_error("regularizer_value: empty vector");
  const double n = norm2(eps);
  if (n == 0.0)
    throw singularity_error("regularizer_value: log of zero norm");
  const double d = double(eps.size());
  return (d - 1.0) * std::log(n) - n * n / 2.0;
}

inline Vec regularizer_grad(const NoiseVector& eps) {
  if (eps.empty()) throw contract_error("regularizer_grad: empty vector");
  const double n2 = dot(eps, eps);
  if (n2 == 0.0)
    throw singularity_error("regularizer_grad: undefined at the origin");
  const double d = double(eps.size());
  return scaled(eps, (d - 1.0) / n2 - 1.0);
}

struct StepResult {
  NoiseVector next;
  RewardBreakdown breakdown;  // evaluated at the pre-update noise
  Scene scene;                // likewise
};

namespace detail {

inline double term_lambda(const OptimizerConfig& cfg,
                          const std::vector<RewardTerm>& terms,
                          std::size_t i) {
  if (cfg.lambdas.empty()) return terms[i].lambda;
  if (cfg.lambdas.size() != terms.size())
    throw config_error("optimizer: lambdas override has " +
                       std::to_string(cfg.lambdas.size()) +
                       " entries for " + std::to_string(terms.size()) +
                       " reward terms");
  return cfg.lambdas[i];
}

struct Recorded {
  Scene scene;
  std::vector<ad::NodeId> nodes;
  RewardBreakdown breakdown;
};

inline Recorded record_all(ad::Tape& tape, const NoiseVector& eps,
                           const GeneratorParams& params,
                           const PromptSpec& prompt,
                           const std::vector<RewardTerm>& terms,
                           const OptimizerConfig& cfg) {
  Recorded r;
  r.scene = gen::generate(params, eps, prompt, tape);
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const ad::NodeId node = terms[i].record(tape, r.scene);
    if (tape.value(node).size() != 1)
      throw contract_error("reward term '" + terms[i].name +
                           "' did not record a scalar");
    const double score = tape.value(node)[0];
    r.nodes.push_back(node);
    r.breakdown.per_reward.emplace_back(terms[i].name, score);
    r.breakdown.total += term_lambda(cfg, terms, i) * score;
  }
  return r;
}

[[noreturn]] inline void rethrow_tagged(const std::string& prefix) {
  try {
    throw;
  } catch (const contract_error& e) {
    throw contract_error(prefix + e.what());
  } catch (const config_error& e) {
    throw config_error(prefix + e.what());
  } catch (const singularity_error& e) {
    throw singularity_error(prefix + e.what());
  } catch (const numeric_error& e) {
    throw numeric_error(prefix + e.what());
  } catch (const parse_error& e) {
    throw parse_error(prefix + e.what());
  } catch (const error& e) {
    throw error(prefix + e.what());
  }
}

}  // namespace detail

// One ascent update: fresh tape, separate backward pass per reward term,
// per-term clipping, the regularizer as its own clipped term (added once),
// then a single aggregated move.
inline StepResult step(const NoiseVector& eps, const GeneratorParams& params,
                       const PromptSpec& prompt,
                       const std::vector<RewardTerm>& terms,
                       const OptimizerConfig& cfg,
                       GradientObserver* observer = nullptr) {
  validate(cfg);
  ad::Tape tape;
  auto rec = detail::record_all(tape, eps, params, prompt, terms, cfg);

  Vec aggregate(eps.size(), 0.0);
  for (std::size_t i = 0; i < terms.size(); ++i) {
    Vec raw = tape.backward(rec.nodes[i], rec.scene.nodes.eps);
    const double lambda = detail::term_lambda(cfg, terms, i);
    for (double& v : raw) v *= lambda;
    if (!all_finite(raw))
      throw numeric_error("step: non-finite gradient for reward '" +
                          terms[i].name + "'");
    const Vec clipped = clip_gradient(raw, cfg.tau);
    if (observer) observer->on_clipped_gradient(terms[i].name, raw, clipped);
    axpy(1.0, clipped, aggregate);
  }
  if (cfg.gamma > 0.0) {
    Vec raw = scaled(regularizer_grad(eps), cfg.gamma);
    if (!all_finite(raw))
      throw numeric_error("step: non-finite gradient for regularizer");
    const Vec clipped = clip_gradient(raw, cfg.tau);
    if (observer) observer->on_clipped_gradient("regularizer", raw, clipped);
    axpy(1.0, clipped, aggregate);
  }

  StepResult out;
  out.next = eps;
  axpy(cfg.eta, aggregate, out.next);
  out.breakdown = std::move(rec.breakdown);
  out.scene = std::move(rec.scene);
  return out;
}

inline StepResult step(const NoiseVector& eps, const GeneratorParams& params,
                       const PromptSpec& prompt,
                       const std::vector<RewardSpec>& specs,
                       const OptimizerConfig& cfg,
                       GradientObserver* observer = nullptr) {
  return step(eps, params, prompt, rewards::build_reward_terms(prompt, specs),
              cfg, observer);
}

struct IterationRecord {
  std::size_t iteration = 0;
  RewardBreakdown breakdown;
  double noise_norm = 0.0;
};

struct OptimizationTrace {
  std::vector<IterationRecord> per_iteration;  // T+1 entries, iteration 0..T
  std::size_t best_iteration = 0;
  NoiseVector best_noise;
  Scene best_scene;
  double best_total = 0.0;
};

// Full ascent run: evaluates the start point, performs T steps, and tracks
// the best iterate by composite total (strict improvement, so ties keep the
// earliest iterate).
inline OptimizationTrace optimize(const NoiseVector& eps0,
                                  const GeneratorParams& params,
                                  const PromptSpec& prompt,
                                  const std::vector<RewardTerm>& terms,
                                  const OptimizerConfig& cfg,
                                  GradientObserver* observer = nullptr) {
  validate(cfg);
  OptimizationTrace trace;
  NoiseVector eps = eps0;
  bool have_best = false;

  auto consider = [&](std::size_t t, const RewardBreakdown& b,
                      const NoiseVector& e, const Scene& s) {
    trace.per_iteration.push_back({t, b, norm2(e)});
    if (!have_best || b.total > trace.best_total) {
      have_best = true;
      trace.best_iteration = t;
      trace.best_total = b.total;
      trace.best_noise = e;
      trace.best_scene = s;
    }
  };

  for (std::size_t t = 0; t < cfg.iters; ++t) {
    try {
      StepResult r = step(eps, params, prompt, terms, cfg, observer);
      consider(t, r.breakdown, eps, r.scene);
      eps = std::move(r.next);
    } catch (...) {
      detail::rethrow_tagged("iteration " + std::to_string(t) + ": ");
    }
  }
  try {
    ad::Tape tape;
    auto rec = detail::record_all(tape, eps, params, prompt, terms, cfg);
    consider(cfg.iters, rec.breakdown, eps, rec.scene);
  } catch (...) {
    detail::rethrow_tagged("iteration " + std::to_string(cfg.iters) + ": ");
  }
  return trace;
}

inline OptimizationTrace optimize(const NoiseVector& eps0,
                                  const GeneratorParams& params,
                                  const PromptSpec& prompt,
                                  const std::vector<RewardSpec>& specs,
                                  const OptimizerConfig& cfg,
                                  GradientObserver* observer = nullptr) {
  return optimize(eps0, params, prompt,
                  rewards::build_reward_terms(prompt, specs), cfg, observer);
}

// CSV columns: iteration, one column per reward term, total, noise norm.
inline std::string trace_to_csv(const OptimizationTrace& trace) {
  if (trace.per_iteration.empty())
    throw contract_error("trace_to_csv: empty trace");
  std::string out = "iteration";
  for (const auto& [name, score] : trace.per_iteration.front().breakdown
                                       .per_reward)
    out += ",reward_" + name;
  out += ",total,noise_norm\n";
  for (const auto& rec : trace.per_iteration) {
    out += std::to_string(rec.iteration);
    for (const auto& [name, score] : rec.breakdown.per_reward)
      out += "," + csv::format_double(score);
    out += "," + csv::format_double(rec.breakdown.total);
    out += "," + csv::format_double(rec.noise_norm);
    out += "\n";
  }
  return out;
}

inline nlohmann::json trace_summary(const OptimizationTrace& trace) {
  return {{"best_iteration", trace.best_iteration},
          {"best_total", trace.best_total}};
}

}  // namespace carinox::opt
