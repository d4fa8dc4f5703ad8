#include "rounds/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "rounds/error.hpp"
#include "rounds/text.hpp"

namespace rounds {

using nlohmann::json;

namespace {

double share_of_twos(std::span<const int> scores, std::string_view what) {
  if (scores.empty()) throw PreconditionError(std::string(what) + ": empty score list");
  std::size_t twos = 0;
  for (int s : scores) {
    if (s < 0 || s > 2) throw PreconditionError(std::string(what) + ": score out of range");
    twos += s == 2;
  }
  return static_cast<double>(twos) / static_cast<double>(scores.size());
}

}  // namespace

double exact_acc(std::span<const int> s_acc) { return share_of_twos(s_acc, "exact_acc"); }

double strict_eq(std::span<const int> s_eq) { return share_of_twos(s_eq, "strict_eq"); }

double fsa(std::span<const std::pair<int, int>> paired) {
  if (paired.empty()) throw PreconditionError("fsa: empty score list");
  std::size_t both = 0;
  for (auto [a, e] : paired) {
    if (a < 0 || a > 2 || e < 0 || e > 2) throw PreconditionError("fsa: score out of range");
    both += a == 2 && e == 2;
  }
  return static_cast<double>(both) / static_cast<double>(paired.size());
}

double gap(double task1_metric, double task2_metric) { return task2_metric - task1_metric; }

MetricTuple compute_metrics(std::span<const CaseScore> scores) {
  std::vector<int> acc;
  std::vector<int> eq;
  std::vector<std::pair<int, int>> paired;
  MetricTuple m;
  for (const auto& s : scores) {
    acc.push_back(s.s_acc);
    eq.push_back(s.s_eq);
    paired.emplace_back(s.s_acc, s.s_eq);
  }
  m.n = scores.size();
  m.exact_acc = exact_acc(acc);
  m.strict_eq = strict_eq(eq);
  m.fsa = fsa(paired);
  for (const auto& s : scores) {
    ++m.acc_histogram[static_cast<std::size_t>(s.s_acc)];
    ++m.eq_histogram[static_cast<std::size_t>(s.s_eq)];
  }
  return m;
}

AggregateReport aggregate(std::string model_name, std::span<const CaseScore> scores, const Cohort& cohort) {
  AggregateReport r;
  r.model_name = std::move(model_name);

  std::map<Task, std::vector<CaseScore>> by_task;
  std::map<Task, std::set<std::string>> ids;
  std::map<StratumKey, std::map<Task, std::vector<CaseScore>>> by_stratum;
  for (const auto& s : scores) {
    const StructuredCase* c = cohort.find(s.case_id);
    if (!c) throw PreconditionError("aggregate: case '" + s.case_id + "' is not in the cohort");
    if (!ids[s.task].insert(s.case_id).second) {
      throw PreconditionError("aggregate: case '" + s.case_id + "' scored twice for " + std::string(to_string(s.task)));
    }
    by_task[s.task].push_back(s);
    by_stratum[{"SystemCategory", std::string(to_string(c->system_category))}][s.task].push_back(s);
    by_stratum[{"Source", std::string(to_string(c->source))}][s.task].push_back(s);
  }

  std::set<std::string> all_ids;
  for (const auto& [task, set] : ids) all_ids.insert(set.begin(), set.end());
  r.n = all_ids.size();
  for (const auto& [task, list] : by_task) r.tasks[task] = compute_metrics(list);
  for (const auto& [key, tasks] : by_stratum) {
    for (const auto& [task, list] : tasks) r.strata[key][task] = compute_metrics(list);
  }

  if (by_task.count(Task::Task1) && by_task.count(Task::Task2)) {
    std::map<Task, std::vector<CaseScore>> paired;
    for (auto task : {Task::Task1, Task::Task2}) {
      const Task other = task == Task::Task1 ? Task::Task2 : Task::Task1;
      for (const auto& s : by_task[task]) {
        if (ids[other].contains(s.case_id)) paired[task].push_back(s);
      }
    }
    r.paired_cases = paired[Task::Task1].size();
    r.unpaired_cases = all_ids.size() - r.paired_cases;
    if (r.paired_cases > 0) {
      const MetricTuple t1 = compute_metrics(paired[Task::Task1]);
      const MetricTuple t2 = compute_metrics(paired[Task::Task2]);
      r.gap_acc = gap(t1.exact_acc, t2.exact_acc);
      r.gap_eq = gap(t1.strict_eq, t2.strict_eq);
      r.gap_fsa = gap(t1.fsa, t2.fsa);
    }
  } else {
    r.unpaired_cases = all_ids.size();
  }
  return r;
}

json to_json(const MetricTuple& m) {
  return {{"n", m.n},
          {"exact_acc", m.exact_acc},
          {"strict_eq", m.strict_eq},
          {"fsa", m.fsa},
          {"acc_histogram", m.acc_histogram},
          {"eq_histogram", m.eq_histogram}};
}

json to_json(const AggregateReport& r) {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json tasks = json::object();
  for (const auto& [task, m] : r.tasks) tasks[std::string(to_string(task))] = to_json(m);
  json strata = json::array();
  for (const auto& [key, per_task] : r.strata) {
    json entry = {{"dimension", key.first}, {"value", key.second}, {"tasks", json::object()}};
    for (const auto& [task, m] : per_task) entry["tasks"][std::string(to_string(task))] = to_json(m);
    strata.push_back(std::move(entry));
  }
  return {{"model_name", r.model_name}, {"n", r.n},
          {"tasks", tasks},             {"gap_acc", opt(r.gap_acc)},
          {"gap_eq", opt(r.gap_eq)},    {"gap_fsa", opt(r.gap_fsa)},
          {"paired_cases", r.paired_cases}, {"unpaired_cases", r.unpaired_cases},
          {"strata", strata}};
}

namespace {

// Tenths of a point, ties to even. Values within 1e-9 of a tie are treated
// as ties so that binary noise (e.g. 0.125 * 100) does not decide.
long long round_tenths(double points) {
  const double x = points * 10.0;
  const double lo = std::floor(x);
  const double frac = x - lo;
  long long base = static_cast<long long>(lo);
  if (std::fabs(frac - 0.5) < 1e-9) return (base % 2 == 0) ? base : base + 1;
  return static_cast<long long>(std::llround(x));
}

std::string render_tenths(long long t) {
  const bool neg = t < 0;
  const long long a = neg ? -t : t;
  std::string out = std::to_string(a / 10) + "." + std::to_string(a % 10);
  return neg ? "-" + out : out;
}

}  // namespace

std::string format_points(double points) { return render_tenths(round_tenths(points)); }

std::string format_percent(double proportion) { return format_points(proportion * 100.0); }

std::optional<LeaderboardFormat> parse_leaderboard_format(std::string_view s) {
  if (text::iequals(s, "markdown") || text::iequals(s, "md")) return LeaderboardFormat::Markdown;
  if (text::iequals(s, "csv")) return LeaderboardFormat::CSV;
  if (text::iequals(s, "json")) return LeaderboardFormat::JSON;
  return std::nullopt;
}

namespace {

constexpr std::size_t kColumns = 4;

// Rounded cells in tenths of a point; nullopt when not computed.
std::array<std::optional<long long>, kColumns> leaderboard_cells(const AggregateReport& r) {
  std::array<std::optional<long long>, kColumns> cells;
  auto t1 = r.tasks.find(Task::Task1);
  auto t2 = r.tasks.find(Task::Task2);
  if (t1 != r.tasks.end()) cells[0] = round_tenths(t1->second.exact_acc * 100.0);
  if (t2 != r.tasks.end()) cells[1] = round_tenths(t2->second.exact_acc * 100.0);
  if (r.gap_acc) cells[2] = round_tenths(*r.gap_acc * 100.0);
  if (t2 != r.tasks.end()) cells[3] = round_tenths(t2->second.strict_eq * 100.0);
  return cells;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  return out + "\"";
}

std::string md_cell(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '|') out += "\\|";
    else if (c == '\n') out.push_back(' ');
    else out.push_back(c);
  }
  return out;
}

}  // namespace

std::string render_leaderboard(std::span<const LeaderboardEntry> entries, LeaderboardFormat format) {
  std::vector<std::array<std::optional<long long>, kColumns>> cells;
  for (const auto& e : entries) cells.push_back(leaderboard_cells(e.report));

  // Best value per tier and column.
  std::map<std::string, std::array<std::optional<long long>, kColumns>> best;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    auto& b = best[entries[i].tier];
    for (std::size_t c = 0; c < kColumns; ++c) {
      if (cells[i][c] && (!b[c] || *cells[i][c] > *b[c])) b[c] = cells[i][c];
    }
  }
  auto is_best = [&](std::size_t i, std::size_t c) {
    return cells[i][c] && best[entries[i].tier][c] == cells[i][c];
  };

  std::ostringstream out;
  switch (format) {
    case LeaderboardFormat::Markdown: {
      out << "| Tier | Model | Task1 ExactAcc (%) | Task2 ExactAcc (%) | Gap (T2 - T1) | Task2 StrictEQ (%) |\n";
      out << "|---|---|---:|---:|---:|---:|\n";
      for (std::size_t i = 0; i < entries.size(); ++i) {
        out << "| " << md_cell(entries[i].tier) << " | " << md_cell(entries[i].report.model_name) << " |";
        for (std::size_t c = 0; c < kColumns; ++c) {
          if (!cells[i][c]) {
            out << " - |";
            continue;
          }
          const std::string v = render_tenths(*cells[i][c]);
          out << " " << (is_best(i, c) ? "**" + v + "**" : v) << " |";
        }
        out << "\n";
      }
      break;
    }
    case LeaderboardFormat::CSV: {
      out << "tier,model,task1_exact_acc,task2_exact_acc,gap,task2_strict_eq\n";
      for (std::size_t i = 0; i < entries.size(); ++i) {
        out << csv_field(entries[i].tier) << "," << csv_field(entries[i].report.model_name);
        for (std::size_t c = 0; c < kColumns; ++c) {
          out << ",";
          if (cells[i][c]) out << render_tenths(*cells[i][c]);
        }
        out << "\n";
      }
      break;
    }
    case LeaderboardFormat::JSON: {
      static constexpr std::array<std::string_view, kColumns> kKeys = {"task1_exact_acc", "task2_exact_acc", "gap",
                                                                       "task2_strict_eq"};
      json rows = json::array();
      for (std::size_t i = 0; i < entries.size(); ++i) {
        json row = {{"tier", entries[i].tier}, {"model", entries[i].report.model_name}};
        json bests = json::array();
        for (std::size_t c = 0; c < kColumns; ++c) {
          // Parsing the rendered text keeps the JSON value identical to the
          // Markdown and CSV cells.
          row[std::string(kKeys[c])] = cells[i][c] ? json(std::stod(render_tenths(*cells[i][c]))) : json(nullptr);
          if (is_best(i, c)) bests.push_back(kKeys[c]);
        }
        row["best_in_tier"] = bests;
        rows.push_back(std::move(row));
      }
      out << rows.dump(2) << "\n";
      break;
    }
  }
  return out.str();
}

}  // namespace rounds
