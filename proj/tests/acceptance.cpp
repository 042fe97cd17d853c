// Standalone acceptance runner. Each check prints one [PASS]/[FAIL] line;
// a numeric argument selects a single check, no argument runs all of them.
// Exits nonzero when any selected check fails.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "carinox/harness.hpp"
#include "carinox/metric_selection.hpp"
#include "oracles.hpp"

using namespace carinox;

namespace {

struct Check {
  bool ok = true;
  std::vector<std::string> notes;

  void expect(bool cond, const std::string& what) {
    if (cond) return;
    ok = false;
    if (notes.size() < 12) notes.push_back(what);
  }
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

const std::string kFixture =
    std::string(CARINOX_FIXTURE_DIR) + "/table5_spearman.csv";

metrics::Top3Report fixture_report() {
  const auto table = metrics::load_correlation_table(
      kFixture, metrics::CorrMethod::kSpearman);
  return metrics::top3_frequency(table, table.metrics);
}

// 1: top-3 frequency totals and per-category membership from the shipped
// correlation fixture, exact.
void check_top3_reproduction(Check& c) {
  const auto report = fixture_report();

  const std::map<std::string, int> want_totals = {
      {"CLIP", 0},      {"PickScore", 0}, {"HPS", 4},  {"ImageReward", 6},
      {"BLIP2", 1},     {"Aesthetic", 0}, {"CLIP-IQA", 0}, {"B-VQA", 0},
      {"DA Score", 4},  {"TIFA", 3},      {"DSG", 1},  {"VQA Score", 6}};
  c.expect(report.totals.size() == want_totals.size(),
           "expected 12 metrics, got " + std::to_string(report.totals.size()));
  for (const auto& [metric, want] : want_totals) {
    const auto it = report.totals.find(metric);
    if (it == report.totals.end()) {
      c.expect(false, "metric missing from totals: " + metric);
      continue;
    }
    c.expect(it->second == want, metric + ": total " +
                                     std::to_string(it->second) + ", want " +
                                     std::to_string(want));
  }

  const std::map<std::string, std::set<std::string>> want_members = {
      {"Color", {"DA Score", "TIFA", "VQA Score"}},
      {"Shape", {"HPS", "ImageReward", "DA Score"}},
      {"Texture", {"ImageReward", "DA Score", "VQA Score"}},
      {"2D Spatial", {"HPS", "ImageReward", "VQA Score"}},
      {"Non-Spatial", {"HPS", "ImageReward", "VQA Score"}},
      {"Complex", {"DA Score", "TIFA", "VQA Score"}},
      {"3D Spatial", {"HPS", "ImageReward", "BLIP2", "DSG"}},
      {"Numeracy", {"ImageReward", "TIFA", "VQA Score"}}};
  c.expect(report.categories.size() == want_members.size(),
           "expected 8 categories, got " +
               std::to_string(report.categories.size()));
  for (const auto& [cat, members] : want_members) {
    const auto it = report.membership.find(cat);
    if (it == report.membership.end()) {
      c.expect(false, "category missing from membership: " + cat);
      continue;
    }
    for (const auto& [metric, want] : want_totals) {
      const auto mit = it->second.find(metric);
      if (mit == it->second.end()) {
        c.expect(false, cat + ": no membership flag for " + metric);
        continue;
      }
      const bool want_member = members.count(metric) > 0;
      c.expect(mit->second == want_member,
               cat + "/" + metric + ": member=" +
                   (mit->second ? "1" : "0") + ", want " +
                   (want_member ? "1" : "0"));
    }
  }
}

// 2: selecting four rewards from the fixture totals yields exactly
// {DA Score, HPS, ImageReward, VQA Score}.
void check_reward_selection(Check& c) {
  const auto picked = metrics::select_reward_set(fixture_report(), 4);
  const std::set<std::string> got(picked.begin(), picked.end());
  const std::set<std::string> want = {"DA Score", "HPS", "ImageReward",
                                      "VQA Score"};
  c.expect(got.size() == 4,
           "expected 4 names, got " + std::to_string(got.size()));
  for (const auto& name : want)
    c.expect(got.count(name) == 1, "missing from selection: " + name);
  for (const auto& name : got)
    c.expect(want.count(name) == 1, "unexpected selection: " + name);
}

// 3: spearman and kendall tau-b agree with brute-force definitional oracles
// within 1e-12, on tie-free and on tied inputs.
void check_correlation_oracles(Check& c) {
  RandomStream rng(33000);

  auto draw_tie_free = [&](std::size_t n) {
    Vec v(n);
    while (true) {
      for (auto& t : v) t = rng.uniform();
      if (std::set<double>(v.begin(), v.end()).size() == n) return v;
    }
  };
  for (int k = 0; k < 1000; ++k) {
    const std::size_t n = 2 + rng.uniform_index(0, 5);
    const Vec x = draw_tie_free(n);
    const Vec y = draw_tie_free(n);
    const double ds =
        std::abs(metrics::spearman(x, y) - oracles::spearman_tie_free(x, y));
    const double dk = std::abs(metrics::kendall_tau_b(x, y) -
                               oracles::kendall_tie_free(x, y));
    c.expect(ds <= 1e-12,
             "tie-free spearman case " + std::to_string(k) + ": diff " +
                 fmt(ds));
    c.expect(dk <= 1e-12, "tie-free kendall case " + std::to_string(k) +
                              ": diff " + fmt(dk));
  }

  auto draw_grid = [&](std::size_t n) {
    Vec v(n);
    while (true) {
      for (auto& t : v) t = double(rng.uniform_index(0, 3));
      if (std::set<double>(v.begin(), v.end()).size() > 1) return v;
    }
  };
  for (int k = 0; k < 1000; ++k) {
    const std::size_t n = 2 + rng.uniform_index(0, 5);
    const Vec x = draw_grid(n);
    const Vec y = draw_grid(n);
    const double ds =
        std::abs(metrics::spearman(x, y) - oracles::spearman_with_ties(x, y));
    const double dk = std::abs(metrics::kendall_tau_b(x, y) -
                               oracles::kendall_tau_b_with_ties(x, y));
    c.expect(ds <= 1e-12, "tied spearman case " + std::to_string(k) +
                              ": diff " + fmt(ds));
    c.expect(dk <= 1e-12, "tied kendall case " + std::to_string(k) +
                              ": diff " + fmt(dk));
  }
}

// 4: every recorded reward gradient and the norm regularizer gradient match
// central finite differences on 100 random (noise, prompt) pairs.
void check_gradient_audit(Check& c) {
  const harness::ExperimentConfig config;
  const auto report = harness::run_gradient_audit(config, 100);
  c.expect(report.pairs == 100,
           "expected 100 pairs, got " + std::to_string(report.pairs));
  c.expect(report.checks >= 100,
           "expected >= 100 checks, got " + std::to_string(report.checks));
  c.expect(report.failures == 0,
           std::to_string(report.failures) + " gradient check failures");
  for (const auto& note : report.failure_notes) c.expect(false, note);
}

struct ClipAudit final : opt::GradientObserver {
  explicit ClipAudit(double t) : tau(t) {}
  double tau;
  std::size_t seen = 0;
  std::size_t norm_violations = 0;
  std::size_t cosine_violations = 0;
  double worst_norm = 0.0;
  double worst_cosine = 1.0;

  void on_clipped_gradient(std::string_view, const Vec& raw,
                           const Vec& clipped) override {
    ++seen;
    const double nc = norm2(clipped);
    worst_norm = std::max(worst_norm, nc);
    if (!(nc <= tau * (1.0 + 1e-12))) ++norm_violations;
    const double nr = norm2(raw);
    if (nr > 0.0 && nc > 0.0) {
      const double cosine = dot(raw, clipped) / (nr * nc);
      worst_cosine = std::min(worst_cosine, cosine);
      if (!(std::abs(cosine - 1.0) <= 1e-12)) ++cosine_violations;
    }
  }
};

// 5: across a full bench run, every clipped per-term gradient stays on or
// inside the tau sphere and keeps the raw direction exactly.
void check_clipping_invariant(Check& c) {
  const harness::ExperimentConfig config;
  ClipAudit audit(config.tau);
  harness::run_bench(config, &audit);
  c.expect(audit.seen > 0, "no gradients observed");
  c.expect(audit.norm_violations == 0,
           std::to_string(audit.norm_violations) + " norm violations, worst " +
               fmt(audit.worst_norm) + " vs tau " + fmt(config.tau));
  c.expect(audit.cosine_violations == 0,
           std::to_string(audit.cosine_violations) +
               " direction violations, worst cosine " +
               fmt(audit.worst_cosine));
}

// 6: ascending the norm regularizer alone (gamma = 1, no reward terms) from
// 20 random 64-dimensional starts ends within 1% of sqrt(63).
void check_regularizer_fixed_point(Check& c) {
  const auto params = gen::make_identity_generator(64);
  gen::PromptSpec prompt;
  prompt.id = "norm-only";
  opt::OptimizerConfig cfg;
  cfg.eta = 1.0;
  cfg.tau = 0.01;
  cfg.gamma = 1.0;
  cfg.iters = 5000;
  const double target = std::sqrt(63.0);
  for (int s = 0; s < 20; ++s) {
    RandomStream rng(606000 + s);
    const Vec eps0 = rng.normal_vec(64);
    const auto trace = opt::optimize(eps0, params, prompt,
                                     std::vector<rewards::RewardTerm>{}, cfg);
    const double n = trace.per_iteration.back().noise_norm;
    c.expect(std::abs(n - target) <= 0.01 * target,
             "start " + std::to_string(s) + ": final norm " + fmt(n) +
                 ", want " + fmt(target) + " +- 1%");
  }
}

// 7: per-prompt winner totals over the full 100-prompt suite satisfy
// combined >= each single strategy and every strategy >= baseline.
void check_variant_dominance(Check& c) {
  const harness::ExperimentConfig config;
  const auto report = harness::run_bench(config);
  c.expect(report.per_prompt.size() == 400,
           "expected 400 per-prompt rows, got " +
               std::to_string(report.per_prompt.size()));

  std::map<std::size_t, std::map<std::string, double>> by_prompt;
  for (const auto& p : report.per_prompt)
    by_prompt[p.prompt_index][p.variant] = p.winner_total;
  for (const auto& [pi, totals] : by_prompt) {
    const double baseline = totals.at("baseline");
    const double carinx = totals.at("carinx");
    const double carino = totals.at("carino");
    const double carinox = totals.at("carinox");
    const std::string tag = "prompt " + std::to_string(pi) + ": ";
    c.expect(carinox >= carinx, tag + "carinox " + fmt(carinox) +
                                    " < carinx " + fmt(carinx));
    c.expect(carinox >= carino, tag + "carinox " + fmt(carinox) +
                                    " < carino " + fmt(carino));
    c.expect(carinx >= baseline, tag + "carinx " + fmt(carinx) +
                                     " < baseline " + fmt(baseline));
    c.expect(carino >= baseline, tag + "carino " + fmt(carino) +
                                     " < baseline " + fmt(baseline));
  }
}

// 8: in the rugged scenario, optimization from an adversarial start almost
// never escapes, exploration matches the basin-mass prediction within 3
// standard errors, and the combined strategy is at least as good as both.
void check_rugged_scenario(Check& c) {
  const harness::ExperimentConfig config;
  const auto r = harness::run_rugged_scenario(config);
  c.expect(r.trials == 200,
           "expected 200 trials, got " + std::to_string(r.trials));
  c.expect(r.rate_carino <= 0.05,
           "carino rate " + fmt(r.rate_carino) + " > 0.05");
  c.expect(r.rate_carinx >= 0.0, "carinx rate negative");
  c.expect(r.rate_carinox >= r.rate_carinx,
           "carinox " + fmt(r.rate_carinox) + " < carinx " +
               fmt(r.rate_carinx));
  c.expect(r.rate_carinox >= std::max(r.rate_carino, r.rate_carinx),
           "carinox " + fmt(r.rate_carinox) + " below the best single arm");
  const double se = std::sqrt(r.se_empirical * r.se_empirical +
                              r.se_oracle * r.se_oracle);
  const double gap = std::abs(r.rate_carinx - r.predicted_carinx);
  c.expect(gap <= 3.0 * se, "carinx rate " + fmt(r.rate_carinx) +
                                " vs predicted " + fmt(r.predicted_carinx) +
                                ": gap " + fmt(gap) + " > 3 SE = " +
                                fmt(3.0 * se));
}

// 9: on a fixed 50-prompt suite, the mean winner total is non-decreasing in
// the candidate count and the 5->8 gain is strictly below the 1->5 gain.
void check_candidate_saturation(Check& c) {
  harness::ExperimentConfig config;
  config.suite = harness::SuiteConfig{13, 13, 12, 12};
  const auto params = gen::init_generator(config.master_seed, config.dim,
                                          config.slots, config.embed_dim);
  const auto suite = harness::generate_prompt_suite(
      config.suite, config.slots, config.embed_dim, config.master_seed);
  c.expect(suite.size() == 50,
           "expected 50 prompts, got " + std::to_string(suite.size()));

  const std::size_t counts[] = {1, 2, 3, 5, 8};
  std::vector<double> means;
  for (const std::size_t n : counts) {
    double sum = 0.0;
    for (std::size_t pi = 0; pi < suite.size(); ++pi) {
      const auto& prompt = suite[pi];
      const auto terms = rewards::build_reward_terms(
          prompt, harness::active_reward_specs(config, prompt));
      explorer::ExplorationConfig ecfg;
      ecfg.candidates = n;
      ecfg.master_seed = harness::prompt_seed(config.master_seed, pi);
      ecfg.mode = explorer::Mode::kCarinox;
      ecfg.optimizer = harness::optimizer_config(config);
      sum += explorer::explore(prompt, params, terms, ecfg).winner_total;
    }
    means.push_back(sum / double(suite.size()));
  }
  for (std::size_t i = 1; i < means.size(); ++i)
    c.expect(means[i] >= means[i - 1],
             "mean dropped from N=" + std::to_string(counts[i - 1]) + " (" +
                 fmt(means[i - 1]) + ") to N=" + std::to_string(counts[i]) +
                 " (" + fmt(means[i]) + ")");
  const double early_gain = means[3] - means[0];
  const double late_gain = means[4] - means[3];
  c.expect(late_gain < early_gain,
           "gain 5->8 (" + fmt(late_gain) + ") not below gain 1->5 (" +
               fmt(early_gain) + ")");
}

// 10: two complete bench runs on the same config produce byte-identical CSV
// outputs.
void check_bench_determinism(Check& c) {
  const harness::ExperimentConfig config;
  const auto a = harness::run_bench(config);
  const auto b = harness::run_bench(config);
  c.expect(!a.rows.empty(), "bench produced no rows");
  c.expect(harness::bench_summary_to_csv(a) ==
               harness::bench_summary_to_csv(b),
           "summary CSVs differ between runs");
  c.expect(harness::bench_prompts_to_csv(a) ==
               harness::bench_prompts_to_csv(b),
           "per-prompt CSVs differ between runs");
}

struct Criterion {
  const char* what;
  void (*run)(Check&);
};

const Criterion kCriteria[] = {
    {"top-3 frequency totals and membership from the correlation fixture "
     "(exact)",
     check_top3_reproduction},
    {"reward-set selection picks {DA Score, HPS, ImageReward, VQA Score} "
     "(exact)",
     check_reward_selection},
    {"rank correlations match brute-force oracles (1e-12, with and without "
     "ties)",
     check_correlation_oracles},
    {"reward and regularizer gradients match finite differences on 100 "
     "random pairs (rel 1e-5)",
     check_gradient_audit},
    {"clipped gradients stay on or inside the tau sphere with direction "
     "preserved, full bench (1e-12)",
     check_clipping_invariant},
    {"norm-regularizer-only ascent ends within 1% of sqrt(63) from 20 "
     "starts",
     check_regularizer_fixed_point},
    {"per-prompt dominance: combined >= each single strategy >= baseline "
     "on the 100-prompt suite (exact)",
     check_variant_dominance},
    {"rugged landscape: adversarial-start rate <= 5%, combined >= "
     "exploration, rate within 3 SE of the basin-mass prediction",
     check_rugged_scenario},
    {"mean winner total non-decreasing in candidate count with strictly "
     "saturating gains",
     check_candidate_saturation},
    {"two bench runs with one config emit byte-identical CSVs",
     check_bench_determinism},
};

}  // namespace

int main(int argc, char** argv) {
  int selected = 0;
  if (argc > 1) {
    selected = std::atoi(argv[1]);
    if (selected < 1 || selected > 10) {
      std::fprintf(stderr, "usage: %s [1-10]\n", argv[0]);
      return 2;
    }
  }

  int failures = 0;
  for (int i = 0; i < 10; ++i) {
    if (selected != 0 && selected != i + 1) continue;
    Check check;
    try {
      kCriteria[i].run(check);
    } catch (const std::exception& e) {
      check.expect(false, std::string("unexpected exception: ") + e.what());
    }
    std::printf("[%s] %d: %s\n", check.ok ? "PASS" : "FAIL", i + 1,
                kCriteria[i].what);
    for (const auto& note : check.notes)
      std::fprintf(stderr, "  %s\n", note.c_str());
    if (!check.ok) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
