#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "rounds/case_model.hpp"
#include "rounds/judging.hpp"
#include "rounds/task.hpp"

namespace rounds {

// Share of cases scored 2. Throws PreconditionError on an empty list or a
// score outside {0,1,2}.
double exact_acc(std::span<const int> s_acc);
double strict_eq(std::span<const int> s_eq);
// Share of (s_acc, s_eq) pairs that are both 2.
double fsa(std::span<const std::pair<int, int>> paired);
// task2 - task1, in whatever unit the inputs use.
double gap(double task1_metric, double task2_metric);

struct MetricTuple {
  std::size_t n = 0;
  double exact_acc = 0.0;
  double strict_eq = 0.0;
  double fsa = 0.0;
  std::array<std::size_t, 3> acc_histogram{};
  std::array<std::size_t, 3> eq_histogram{};

  bool operator==(const MetricTuple&) const = default;
};

// Metrics over scores of one task. Throws on an empty list.
MetricTuple compute_metrics(std::span<const CaseScore> scores);

// (dimension, value), dimension being "SystemCategory" or "Source".
using StratumKey = std::pair<std::string, std::string>;

struct AggregateReport {
  std::string model_name;
  std::size_t n = 0;  // distinct cases scored
  std::map<Task, MetricTuple> tasks;
  // Task2 - Task1 over cases scored in both tasks.
  std::optional<double> gap_acc;
  std::optional<double> gap_eq;
  std::optional<double> gap_fsa;
  std::size_t paired_cases = 0;
  // Cases scored in only one task; nonzero means the gaps ignore them.
  std::size_t unpaired_cases = 0;
  std::map<StratumKey, std::map<Task, MetricTuple>> strata;

  bool operator==(const AggregateReport&) const = default;
};

// Throws PreconditionError for a case missing from the cohort or a case
// scored twice for the same task.
AggregateReport aggregate(std::string model_name, std::span<const CaseScore> scores, const Cohort& cohort);

nlohmann::json to_json(const MetricTuple& m);
nlohmann::json to_json(const AggregateReport& r);

// Proportion as a percentage with one decimal, ties rounded to even.
std::string format_percent(double proportion);
// Value already in percentage points, same rounding.
std::string format_points(double points);

enum class LeaderboardFormat { Markdown, CSV, JSON };
std::optional<LeaderboardFormat> parse_leaderboard_format(std::string_view s);

struct LeaderboardEntry {
  std::string tier;
  AggregateReport report;
};

// Columns: Task1 ExactAcc, Task2 ExactAcc, Gap (T2 - T1), Task2 StrictEQ.
// Rows keep the caller's order. In Markdown the highest value of each column
// within a tier is bold, and tied values are all bold. Missing values render
// as "-" (Markdown) or an empty cell (CSV) or null (JSON).
std::string render_leaderboard(std::span<const LeaderboardEntry> entries, LeaderboardFormat format);

}  // namespace rounds
