#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "carinox/metric_selection.hpp"
#include "carinox/rng.hpp"
#include "oracles.hpp"

using namespace carinox;
using namespace carinox::metrics;

namespace {

// Tie-free random vector: distinct uniform draws.
Vec distinct_vec(RandomStream& rng, std::size_t n) {
  std::set<double> seen;
  Vec out;
  while (out.size() < n) {
    const double v = rng.uniform();
    if (seen.insert(v).second) out.push_back(v);
  }
  return out;
}

ScoreTable two_category_table() {
  ScoreTable t;
  t.metrics = {"alpha", "beta"};
  // Ties on purpose in both the human column and the metric columns.
  t.rows = {{"a0", "left", 1.0, {0.3, 2.0}},  {"a1", "left", 2.0, {0.3, 1.0}},
            {"a2", "left", 2.0, {0.7, 4.0}},  {"a3", "left", 4.0, {0.9, 3.0}},
            {"b0", "right", 5.0, {1.0, 1.0}}, {"b1", "right", 3.0, {2.0, 1.0}},
            {"b2", "right", 3.0, {0.5, 6.0}}, {"b3", "right", 1.0, {4.0, 2.0}},
            {"b4", "right", 2.0, {3.0, 5.0}}};
  return t;
}

std::filesystem::path temp_file(const char* name) {
  return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("rank correlation on the worked examples") {
  CHECK(spearman({1, 2, 3}, {1, 2, 3}) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(spearman({1, 2, 3}, {3, 2, 1}) ==
        doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(spearman({1, 2, 3, 4}, {2, 1, 4, 3}) ==
        doctest::Approx(0.6).epsilon(1e-12));

  CHECK(kendall_tau_b({1, 2, 3}, {1, 3, 2}) ==
        doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(kendall_tau_b({1, 2, 3}, {1, 2, 3}) ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK(kendall_tau_b({1, 2, 3}, {3, 2, 1}) ==
        doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("rank correlations are invariant under monotone transforms") {
  RandomStream rng(300);
  for (int rep = 0; rep < 10; ++rep) {
    const Vec x = rng.normal_vec(9);
    const Vec y = rng.normal_vec(9);
    Vec ex(x.size()), cy(y.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      ex[i] = std::exp(x[i]);                   // strictly increasing
      cy[i] = y[i] * y[i] * y[i] + 2.0 * y[i];  // strictly increasing
    }
    CHECK(spearman(x, y) == doctest::Approx(spearman(ex, cy)).epsilon(1e-12));
    CHECK(kendall_tau_b(x, y) ==
          doctest::Approx(kendall_tau_b(ex, cy)).epsilon(1e-12));
  }
}

TEST_CASE("rank correlations are symmetric") {
  RandomStream rng(301);
  for (int rep = 0; rep < 10; ++rep) {
    const Vec x = rng.normal_vec(8);
    const Vec y = rng.normal_vec(8);
    CHECK(spearman(x, y) == doctest::Approx(spearman(y, x)).epsilon(1e-14));
    CHECK(kendall_tau_b(x, y) ==
          doctest::Approx(kendall_tau_b(y, x)).epsilon(1e-14));
  }
}

TEST_CASE("tie-free inputs match the brute-force definitions") {
  RandomStream rng(302);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t n = 2 + rep % 6;  // lengths 2..7
    const Vec x = distinct_vec(rng, n);
    const Vec y = distinct_vec(rng, n);
    CHECK(std::abs(spearman(x, y) - oracles::spearman_tie_free(x, y)) <=
          1e-12);
    CHECK(std::abs(kendall_tau_b(x, y) - oracles::kendall_tie_free(x, y)) <=
          1e-12);
  }
}

TEST_CASE("tied inputs match the tie-aware oracles") {
  RandomStream rng(303);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t n = 4 + rep % 5;
    Vec x(n), y(n);
    bool xc = true, yc = true;
    for (std::size_t i = 0; i < n; ++i) {
      // Coarse grids force frequent ties.
      x[i] = double(rng.uniform_index(0, 3));
      y[i] = double(rng.uniform_index(0, 3));
      if (x[i] != x[0]) xc = false;
      if (y[i] != y[0]) yc = false;
    }
    if (xc || yc) continue;  // constant columns are the error case below
    CHECK(std::abs(spearman(x, y) - oracles::spearman_with_ties(x, y)) <=
          1e-12);
    CHECK(std::abs(kendall_tau_b(x, y) -
                   oracles::kendall_tau_b_with_ties(x, y)) <= 1e-12);
  }
}

TEST_CASE("constant input has no defined rank correlation") {
  CHECK_THROWS_AS(spearman({1, 1, 1}, {1, 2, 3}),
                  undefined_correlation_error);
  CHECK_THROWS_AS(spearman({1, 2, 3}, {5, 5, 5}),
                  undefined_correlation_error);
  CHECK_THROWS_AS(kendall_tau_b({2, 2, 2}, {1, 2, 3}),
                  undefined_correlation_error);
  CHECK_THROWS_AS(spearman({1}, {2}), contract_error);  // length < 2
  CHECK_THROWS_AS(spearman({1, 2}, {1, 2, 3}), contract_error);
}

TEST_CASE("correlation table on a metric equal to the human column") {
  ScoreTable t;
  t.metrics = {"echo"};
  RandomStream rng(304);
  for (int i = 0; i < 12; ++i) {
    const double h = rng.normal();
    t.rows.push_back({"i" + std::to_string(i),
                      i < 6 ? "first" : "second", h, {h}});
  }
  for (CorrMethod m : {CorrMethod::kSpearman, CorrMethod::kKendall}) {
    const auto table = correlation_table(t, m);
    CHECK(table.issues.empty());
    for (const auto& cat : {"first", "second"})
      CHECK(table.entries.at(cat).at("echo") ==
            doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("independent scores correlate near zero") {
  ScoreTable t;
  t.metrics = {"noise"};
  RandomStream rng(305);
  for (int i = 0; i < 200; ++i)
    t.rows.push_back(
        {"i" + std::to_string(i), "only", rng.normal(), {rng.normal()}});
  const auto table = correlation_table(t, CorrMethod::kSpearman);
  CHECK(std::abs(table.entries.at("only").at("noise")) < 0.2);
}

TEST_CASE("correlation table matches the oracles on a hand-built table") {
  const auto t = two_category_table();
  for (CorrMethod method : {CorrMethod::kSpearman, CorrMethod::kKendall}) {
    const auto table = correlation_table(t, method);
    REQUIRE(table.categories == std::vector<std::string>{"left", "right"});
    for (const auto& cat : table.categories) {
      Vec human;
      std::vector<Vec> cols(t.metrics.size());
      for (const auto& row : t.rows) {
        if (row.category != cat) continue;
        human.push_back(row.human);
        for (std::size_t m = 0; m < t.metrics.size(); ++m)
          cols[m].push_back(row.scores[m]);
      }
      for (std::size_t m = 0; m < t.metrics.size(); ++m) {
        const double want = method == CorrMethod::kSpearman
                                ? oracles::spearman_with_ties(cols[m], human)
                                : oracles::kendall_tau_b_with_ties(cols[m],
                                                                   human);
        CHECK(table.entries.at(cat).at(t.metrics[m]) ==
              doctest::Approx(want).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("degenerate categories become issue entries") {
  ScoreTable t;
  t.metrics = {"m"};
  t.rows = {{"a", "lonely", 1.0, {2.0}},
            {"b", "fine", 1.0, {2.0}},
            {"c", "fine", 2.0, {3.0}},
            {"d", "flat", 1.0, {2.0}},
            {"e", "flat", 2.0, {2.0}}};
  const auto table = correlation_table(t, CorrMethod::kSpearman);

  REQUIRE(table.issues.size() == 2);
  CHECK(table.issues[0].category == "lonely");
  CHECK(table.issues[0].metric.empty());
  CHECK(table.entries.count("lonely") == 0);

  // "flat" has a constant metric column: per-metric issue, no entry.
  CHECK(table.issues[1].category == "flat");
  CHECK(table.issues[1].metric == "m");

  CHECK(table.entries.at("fine").at("m") ==
        doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("dense ranking admits ties into the top three") {
  CorrelationTable table;
  table.method = CorrMethod::kSpearman;
  table.categories = {"3d"};
  const std::vector<std::pair<std::string, double>> col{
      {"DSG", 0.427},  {"HPS", 0.416},        {"BLIP2", 0.416},
      {"ImageReward", 0.401}, {"CLIP", 0.22}, {"TIFA", 0.31}};
  std::vector<std::string> eligible;
  for (const auto& [name, v] : col) {
    table.entries["3d"][name] = v;
    table.metrics.push_back(name);
    eligible.push_back(name);
  }

  const auto report = top3_frequency(table, eligible);
  CHECK(report.membership.at("3d").at("DSG"));
  CHECK(report.membership.at("3d").at("HPS"));
  CHECK(report.membership.at("3d").at("BLIP2"));
  CHECK(report.membership.at("3d").at("ImageReward"));
  CHECK_FALSE(report.membership.at("3d").at("CLIP"));
  CHECK_FALSE(report.membership.at("3d").at("TIFA"));
  CHECK(report.totals.at("ImageReward") == 1);
}

TEST_CASE("an all-tied category admits every metric") {
  CorrelationTable table;
  table.categories = {"flat"};
  for (const auto& m : {"a", "b", "c", "d", "e"})
    table.entries["flat"][m] = 0.5;
  const auto report = top3_frequency(table, {"a", "b", "c", "d", "e"});
  for (const auto& m : {"a", "b", "c", "d", "e"})
    CHECK(report.membership.at("flat").at(m));
}

TEST_CASE("top3 totals ignore metric column order") {
  CorrelationTable table;
  table.categories = {"one", "two"};
  table.entries["one"] = {{"p", 0.9}, {"q", 0.8}, {"r", 0.7}, {"s", 0.1}};
  table.entries["two"] = {{"p", 0.1}, {"q", 0.9}, {"r", 0.2}, {"s", 0.3}};
  const auto fwd = top3_frequency(table, {"p", "q", "r", "s"});
  const auto rev = top3_frequency(table, {"s", "r", "q", "p"});
  for (const auto& m : {"p", "q", "r", "s"}) {
    CHECK(fwd.totals.at(m) == rev.totals.at(m));
    CHECK(fwd.mean_correlation.at(m) ==
          doctest::Approx(rev.mean_correlation.at(m)).epsilon(1e-15));
  }
  CHECK(fwd.totals.at("p") == 1);
  CHECK(fwd.totals.at("q") == 2);
  CHECK(fwd.totals.at("r") == 2);
  CHECK(fwd.totals.at("s") == 1);
}

TEST_CASE("selection ranks by total, then mean correlation, then name") {
  Top3Report report;
  report.totals = {{"a", 2}, {"b", 2}, {"c", 1}, {"d", 0}};
  report.mean_correlation = {{"a", 0.4}, {"b", 0.6}, {"c", 0.9}, {"d", 0.1}};
  const auto top2 = select_reward_set(report, 2);
  REQUIRE(top2.size() == 2);
  CHECK(top2[0] == "b");  // same total as a, higher mean
  CHECK(top2[1] == "a");
  CHECK(select_reward_set(report, 3)[2] == "c");
  CHECK_THROWS_AS(select_reward_set(report, 5), contract_error);

  Top3Report zeros;
  zeros.totals = {{"zeta", 0}, {"alpha", 0}, {"mid", 0}};
  zeros.mean_correlation = {{"zeta", 0.0}, {"alpha", 0.0}, {"mid", 0.0}};
  const auto two = select_reward_set(zeros, 2);
  CHECK(two == std::vector<std::string>{"alpha", "mid"});
}

TEST_CASE("score tables round-trip through CSV") {
  const auto t = two_category_table();
  const auto path = temp_file("carinox_scores_roundtrip.csv");
  write_score_table(t, path.string());
  const auto back = load_score_table(path.string());
  CHECK(back.metrics == t.metrics);
  REQUIRE(back.rows.size() == t.rows.size());
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    CHECK(back.rows[i].item_id == t.rows[i].item_id);
    CHECK(back.rows[i].category == t.rows[i].category);
    CHECK(back.rows[i].human == t.rows[i].human);  // exact round-trip
    CHECK(back.rows[i].scores == t.rows[i].scores);
  }
  std::filesystem::remove(path);
}

TEST_CASE("malformed score files fail with line numbers") {
  const auto path = temp_file("carinox_scores_bad.csv");

  {
    std::ofstream out(path);
    out << "item_id,category,score,m1\n";  // "human" column renamed
  }
  CHECK_THROWS_WITH_AS(load_score_table(path.string()),
                       doctest::Contains("human"), parse_error);

  {
    std::ofstream out(path);
  }
  CHECK_THROWS_AS(load_score_table(path.string()), parse_error);

  {
    std::ofstream out(path);
    out << "item_id,category,human,m1\n";
    out << "a,cat,1.0,2.0\n";
    out << "b,cat,oops,2.0\n";
  }
  CHECK_THROWS_WITH_AS(load_score_table(path.string()),
                       doctest::Contains("line 3"), parse_error);

  {
    std::ofstream out(path);
    out << "item_id,category,human,m1\n";
    out << "a,cat,1.0\n";  // missing field
  }
  CHECK_THROWS_WITH_AS(load_score_table(path.string()),
                       doctest::Contains("line 2"), parse_error);

  std::filesystem::remove(path);
}

TEST_CASE("correlation tables load from long-format CSV") {
  const auto path = temp_file("carinox_corr.csv");
  {
    std::ofstream out(path);
    out << "category,metric,value\n";
    out << "one,m1,0.5\n";
    out << "one,m2,-0.25\n";
    out << "two,m1,1.0\n";
    out << "two,m2,0.75\n";
  }
  const auto table = load_correlation_table(path.string(),
                                            CorrMethod::kKendall);
  CHECK(table.method == CorrMethod::kKendall);
  CHECK(table.categories == std::vector<std::string>{"one", "two"});
  CHECK(table.metrics == std::vector<std::string>{"m1", "m2"});
  CHECK(table.entries.at("one").at("m2") == -0.25);

  {
    std::ofstream out(path);
    out << "category,metric,value\n";
    out << "one,m1,0.5\n";
    out << "one,m1,0.6\n";  // duplicate pair
  }
  CHECK_THROWS_AS(load_correlation_table(path.string(),
                                         CorrMethod::kSpearman),
                  parse_error);

  {
    std::ofstream out(path);
    out << "category,metric,value\n";
    out << "one,m1,1.5\n";  // outside [-1, 1]
  }
  CHECK_THROWS_AS(load_correlation_table(path.string(),
                                         CorrMethod::kSpearman),
                  parse_error);

  std::filesystem::remove(path);
}

TEST_CASE("the shipped correlation fixtures are loadable and complete") {
  const std::string dir = CARINOX_FIXTURE_DIR;
  const auto spear = load_correlation_table(dir + "/table5_spearman.csv",
                                            CorrMethod::kSpearman);
  const auto kend = load_correlation_table(dir + "/table6_kendall.csv",
                                           CorrMethod::kKendall);
  for (const auto* t : {&spear, &kend}) {
    CHECK(t->categories.size() == 8);
    CHECK(t->metrics.size() == 12);
    for (const auto& cat : t->categories)
      for (const auto& m : t->metrics) {
        const double v = t->entries.at(cat).at(m);
        CHECK(v >= -1.0);
        CHECK(v <= 1.0);
      }
  }
  CHECK(spear.entries.at("3D Spatial").at("HPS") ==
        spear.entries.at("3D Spatial").at("BLIP2"));
}

TEST_CASE("report files are written as a set") {
  const auto dir =
      std::filesystem::temp_directory_path() / "carinox_reports_test";
  std::filesystem::remove_all(dir);

  const auto t = two_category_table();
  const auto spear = correlation_table(t, CorrMethod::kSpearman);
  const auto kend = correlation_table(t, CorrMethod::kKendall);
  const auto report = top3_frequency(spear, t.metrics);
  write_reports({spear, kend}, report, dir.string());

  CHECK(std::filesystem::exists(dir / "correlation_spearman.csv"));
  CHECK(std::filesystem::exists(dir / "correlation_kendall.csv"));
  CHECK(std::filesystem::exists(dir / "top3_totals.csv"));
  CHECK(std::filesystem::exists(dir / "top3_membership.csv"));

  // The written correlation table reloads to the same values.
  const auto back = load_correlation_table(
      (dir / "correlation_spearman.csv").string(), CorrMethod::kSpearman);
  for (const auto& cat : spear.categories)
    for (const auto& m : spear.metrics)
      CHECK(back.entries.at(cat).at(m) == spear.entries.at(cat).at(m));

  std::filesystem::remove_all(dir);
}
