#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "carinox/csv.hpp"
#include "carinox/errors.hpp"
#include "carinox/linalg.hpp"

namespace carinox::metrics {

// Correlation is undefined when either side is constant (zero variance).
struct undefined_correlation_error : error {
  using error::error;
};

struct ScoreRow {
  std::string item_id;
  std::string category;
  double human = 0.0;
  Vec scores;  // aligned with ScoreTable::metrics
};

struct ScoreTable {
  std::vector<std::string> metrics;
  std::vector<ScoreRow> rows;
};

inline void validate(const ScoreTable& t) {
  std::set<std::string> seen;
  for (const auto& m : t.metrics) {
    if (m.empty()) throw contract_error("score table: empty metric name");
    if (!seen.insert(m).second)
      throw contract_error("score table: duplicate metric '" + m + "'");
  }
  for (const auto& r : t.rows)
    if (r.scores.size() != t.metrics.size())
      throw contract_error("score table: row '" + r.item_id +
                           "' has wrong score count");
}

enum class CorrMethod { kSpearman, kKendall };

inline const char* corr_method_name(CorrMethod m) {
  return m == CorrMethod::kSpearman ? "spearman" : "kendall";
}

struct CorrelationIssue {
  std::string category;
  std::string metric;  // empty when the whole category is unusable
  std::string message;
};

struct CorrelationTable {
  CorrMethod method = CorrMethod::kSpearman;
  std::vector<std::string> categories;  // first-appearance order
  std::vector<std::string> metrics;     // first-appearance order
  std::map<std::string, std::map<std::string, double>> entries;
  std::vector<CorrelationIssue> issues;
};

namespace detail {

inline void check_pair(const Vec& x, const Vec& y, const char* who) {
  if (x.size() != y.size())
    throw contract_error(std::string(who) + ": length mismatch");
  if (x.size() < 2)
    throw contract_error(std::string(who) + ": need at least 2 observations");
  if (!all_finite(x) || !all_finite(y))
    throw numeric_error(std::string(who) + ": non-finite input");
}

inline bool is_constant(const Vec& x) {
  for (double v : x)
    if (v != x[0]) return false;
  return true;
}

// Average (fractional) ranks, 1-based; tied values share the mean of the
// positions they occupy.
inline Vec average_ranks(const Vec& x) {
  const std::size_t n = x.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  Vec ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && x[idx[j + 1]] == x[idx[i]]) ++j;
    const double r = (double(i) + double(j)) / 2.0 + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[idx[t]] = r;
    i = j + 1;
  }
  return ranks;
}

inline double pearson(const Vec& x, const Vec& y) {
  const double n = double(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0)
    throw undefined_correlation_error("pearson: constant input");
  return sxy / std::sqrt(sxx * syy);
}

inline double clamp_corr(double r) { return std::clamp(r, -1.0, 1.0); }

}  // namespace detail

// Spearman rho: Pearson correlation of average-ranked data.
inline double spearman(const Vec& x, const Vec& y) {
  detail::check_pair(x, y, "spearman");
  if (detail::is_constant(x) || detail::is_constant(y))
    throw undefined_correlation_error("spearman: constant input");
  return detail::clamp_corr(
      detail::pearson(detail::average_ranks(x), detail::average_ranks(y)));
}

// Kendall tau-b: (concordant - discordant) / sqrt((n0 - n1)(n0 - n2)) where
// n1, n2 count pairs tied within x and within y.
inline double kendall_tau_b(const Vec& x, const Vec& y) {
  detail::check_pair(x, y, "kendall_tau_b");
  if (detail::is_constant(x) || detail::is_constant(y))
    throw undefined_correlation_error("kendall_tau_b: constant input");
  const std::size_t n = x.size();
  long long concordant = 0;
  long long discordant = 0;
  long long ties_x = 0;
  long long ties_y = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dx = x[i] - x[j];
      const double dy = y[i] - y[j];
      if (dx == 0.0 && dy == 0.0) {
        ++ties_x;
        ++ties_y;
      } else if (dx == 0.0) {
        ++ties_x;
      } else if (dy == 0.0) {
        ++ties_y;
      } else if ((dx > 0.0) == (dy > 0.0)) {
        ++concordant;
      } else {
        ++discordant;
      }
    }
  }
  const double n0 = double(n) * double(n - 1) / 2.0;
  const double denom =
      std::sqrt((n0 - double(ties_x)) * (n0 - double(ties_y)));
  if (denom == 0.0)
    throw undefined_correlation_error("kendall_tau_b: degenerate ties");
  return detail::clamp_corr(double(concordant - discordant) / denom);
}

inline double correlate(const Vec& x, const Vec& y, CorrMethod method) {
  return method == CorrMethod::kSpearman ? spearman(x, y)
                                         : kendall_tau_b(x, y);
}

// Per category, correlation of each metric column against the human column.
// Categories that cannot be correlated produce issue records, not entries.
inline CorrelationTable correlation_table(const ScoreTable& scores,
                                          CorrMethod method) {
  validate(scores);
  CorrelationTable out;
  out.method = method;
  out.metrics = scores.metrics;

  std::vector<std::string> categories;
  std::map<std::string, std::vector<std::size_t>> by_category;
  for (std::size_t i = 0; i < scores.rows.size(); ++i) {
    const auto& cat = scores.rows[i].category;
    if (!by_category.count(cat)) categories.push_back(cat);
    by_category[cat].push_back(i);
  }
  out.categories = categories;

  for (const auto& cat : categories) {
    const auto& rows = by_category[cat];
    if (rows.size() < 2) {
      out.issues.push_back(
          {cat, "", "fewer than 2 rows; correlation undefined"});
      continue;
    }
    Vec human;
    human.reserve(rows.size());
    for (std::size_t r : rows) human.push_back(scores.rows[r].human);
    for (std::size_t m = 0; m < scores.metrics.size(); ++m) {
      Vec col;
      col.reserve(rows.size());
      for (std::size_t r : rows) col.push_back(scores.rows[r].scores[m]);
      try {
        out.entries[cat][scores.metrics[m]] = correlate(col, human, method);
      } catch (const undefined_correlation_error& e) {
        out.issues.push_back({cat, scores.metrics[m], e.what()});
      }
    }
  }
  return out;
}

struct Top3Report {
  std::vector<std::string> categories;
  std::map<std::string, std::map<std::string, bool>> membership;
  std::map<std::string, int> totals;
  // Mean correlation across categories; the selection tiebreak.
  std::map<std::string, double> mean_correlation;
};

// Membership via dense ranking of distinct values: tied values share a rank
// and consume one rank slot, so a tie inside the top 3 can admit more than
// three metrics.
inline Top3Report top3_frequency(const CorrelationTable& table,
                                 const std::vector<std::string>& eligible) {
  if (eligible.empty()) throw contract_error("top3_frequency: no metrics");
  {
    std::set<std::string> seen;
    for (const auto& m : eligible)
      if (!seen.insert(m).second)
        throw contract_error("top3_frequency: duplicate metric '" + m + "'");
  }
  Top3Report report;
  report.categories = table.categories;
  for (const auto& m : eligible) {
    report.totals[m] = 0;
    report.mean_correlation[m] = 0.0;
  }

  for (const auto& cat : table.categories) {
    const auto it = table.entries.find(cat);
    if (it == table.entries.end())
      throw contract_error("top3_frequency: category '" + cat +
                           "' has no correlation entries");
    Vec values;
    for (const auto& m : eligible) {
      const auto vit = it->second.find(m);
      if (vit == it->second.end())
        throw contract_error("top3_frequency: metric '" + m +
                             "' missing in category '" + cat + "'");
      values.push_back(vit->second);
      report.mean_correlation[m] += vit->second;
    }
    Vec distinct = values;
    std::sort(distinct.begin(), distinct.end(), std::greater<>());
    distinct.erase(std::unique(distinct.begin(), distinct.end()),
                   distinct.end());
    for (std::size_t i = 0; i < eligible.size(); ++i) {
      const auto pos =
          std::lower_bound(distinct.begin(), distinct.end(), values[i],
                           std::greater<>()) -
          distinct.begin();
      const bool member = pos < 3;  // dense rank is pos + 1
      report.membership[cat][eligible[i]] = member;
      if (member) ++report.totals[eligible[i]];
    }
  }
  const double ncat = double(table.categories.size());
  if (ncat > 0)
    for (auto& [m, v] : report.mean_correlation) v /= ncat;
  return report;
}

// The k metrics with highest top-3 totals; ties broken by higher mean
// correlation, then lexicographically smaller name. Returned in that order.
inline std::vector<std::string> select_reward_set(const Top3Report& report,
                                                  std::size_t k) {
  std::vector<std::string> names;
  for (const auto& [m, total] : report.totals) names.push_back(m);
  if (k > names.size())
    throw contract_error("select_reward_set: k exceeds metric count");
  std::sort(names.begin(), names.end(), [&](const std::string& a,
                                            const std::string& b) {
    const int ta = report.totals.at(a);
    const int tb = report.totals.at(b);
    if (ta != tb) return ta > tb;
    const double ma = report.mean_correlation.at(a);
    const double mb = report.mean_correlation.at(b);
    if (ma != mb) return ma > mb;
    return a < b;
  });
  names.resize(k);
  return names;
}

// CSV schema: item_id,category,human,<metric>...
inline ScoreTable load_score_table(const std::string& path) {
  const auto lines = csv::read_lines(path);
  if (lines.empty()) throw parse_error(path + ": empty file");
  const auto header = csv::split_fields(lines[0]);
  if (header.size() < 4 || header[0] != "item_id" ||
      header[1] != "category" || header[2] != "human")
    throw parse_error(path +
                      ": header must be item_id,category,human,<metric>...");
  ScoreTable table;
  table.metrics.assign(header.begin() + 3, header.end());
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto fields = csv::split_fields(lines[i]);
    if (fields.size() != header.size())
      throw parse_error(path + ": line " + std::to_string(i + 1) + ": has " +
                        std::to_string(fields.size()) + " fields, expected " +
                        std::to_string(header.size()));
    ScoreRow row;
    row.item_id = fields[0];
    row.category = fields[1];
    row.human = csv::parse_double(fields[2], i + 1);
    for (std::size_t f = 3; f < fields.size(); ++f)
      row.scores.push_back(csv::parse_double(fields[f], i + 1));
    table.rows.push_back(std::move(row));
  }
  validate(table);
  return table;
}

inline void write_score_table(const ScoreTable& table,
                              const std::string& path) {
  validate(table);
  std::vector<std::string> header{"item_id", "category", "human"};
  header.insert(header.end(), table.metrics.begin(), table.metrics.end());
  std::string body = csv::join_row(header);
  for (const auto& r : table.rows) {
    std::vector<std::string> fields{r.item_id, r.category,
                                    csv::format_double(r.human)};
    for (double s : r.scores) fields.push_back(csv::format_double(s));
    body += csv::join_row(fields);
  }
  csv::write_text(path, body);
}

// CSV schema: category,metric,value — one row per defined entry.
inline CorrelationTable load_correlation_table(const std::string& path,
                                               CorrMethod method) {
  const auto lines = csv::read_lines(path);
  if (lines.empty()) throw parse_error(path + ": empty file");
  const auto header = csv::split_fields(lines[0]);
  if (header != std::vector<std::string>{"category", "metric", "value"})
    throw parse_error(path + ": header must be category,metric,value");
  CorrelationTable table;
  table.method = method;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto fields = csv::split_fields(lines[i]);
    if (fields.size() != 3)
      throw parse_error(path + ": line " + std::to_string(i + 1) +
                        ": expected 3 fields");
    const double v = csv::parse_double(fields[2], i + 1);
    if (v < -1.0 || v > 1.0)
      throw parse_error(path + ": line " + std::to_string(i + 1) +
                        ": correlation outside [-1, 1]");
    if (!table.entries.count(fields[0])) table.categories.push_back(fields[0]);
    if (std::find(table.metrics.begin(), table.metrics.end(), fields[1]) ==
        table.metrics.end())
      table.metrics.push_back(fields[1]);
    if (table.entries[fields[0]].count(fields[1]))
      throw parse_error(path + ": line " + std::to_string(i + 1) +
                        ": duplicate (category, metric) pair");
    table.entries[fields[0]][fields[1]] = v;
  }
  return table;
}

inline std::string correlation_table_to_csv(const CorrelationTable& table) {
  std::string body = "category,metric,value\n";
  for (const auto& cat : table.categories) {
    const auto it = table.entries.find(cat);
    if (it == table.entries.end()) continue;
    for (const auto& m : table.metrics) {
      const auto vit = it->second.find(m);
      if (vit == it->second.end()) continue;
      body += csv::join_row({cat, m, csv::format_double(vit->second)});
    }
  }
  return body;
}

inline std::string top3_totals_to_csv(const Top3Report& report) {
  std::string body = "metric,total\n";
  for (const auto& [m, total] : report.totals)
    body += csv::join_row({m, std::to_string(total)});
  return body;
}

inline std::string top3_membership_to_csv(const Top3Report& report) {
  std::string body = "category,metric,member\n";
  for (const auto& cat : report.categories) {
    const auto it = report.membership.find(cat);
    for (const auto& [m, member] : it->second)
      body += csv::join_row({cat, m, member ? "1" : "0"});
  }
  return body;
}

// Writes correlation_<method>.csv per table plus top3_totals.csv and
// top3_membership.csv into the directory.
inline void write_reports(const std::vector<CorrelationTable>& tables,
                          const Top3Report& report, const std::string& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& t : tables)
    csv::write_text(dir + "/correlation_" +
                        std::string(corr_method_name(t.method)) + ".csv",
                    correlation_table_to_csv(t));
  csv::write_text(dir + "/top3_totals.csv", top3_totals_to_csv(report));
  csv::write_text(dir + "/top3_membership.csv",
                  top3_membership_to_csv(report));
}

}  // namespace carinox::metrics
