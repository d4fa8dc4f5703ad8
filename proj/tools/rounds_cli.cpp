// Command-line front end: curate, validate, run, judge, report, replay,
// interactive and parse.

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "rounds/action_parser.hpp"
#include "rounds/curation.hpp"
#include "rounds/error.hpp"
#include "rounds/runner.hpp"

namespace {

using namespace rounds;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitPartial = 1;
constexpr int kExitConfig = 2;

std::string read_all(std::istream& in) {
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path);
  return read_all(in);
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path);
  out << content;
}

struct RunFlags {
  std::string config;
  std::string cohort;
  std::string output_dir;
  std::string run_id;
  std::vector<std::string> tasks;
  int max_turns = 0;
  long long seed = -1;
  std::size_t concurrency = 0;
  bool resume = false;
};

void add_run_flags(CLI::App* cmd, RunFlags& f) {
  cmd->add_option("-c,--config", f.config, "Run config (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--cohort", f.cohort, "Override the cohort path");
  cmd->add_option("--output-dir", f.output_dir, "Override the output directory");
  cmd->add_option("--run-id", f.run_id, "Override the run id");
  cmd->add_option("--tasks", f.tasks, "Override the tasks (Task1, Task2)")->delimiter(',');
  cmd->add_option("--max-turns", f.max_turns, "Override the turn cap");
  cmd->add_option("--seed", f.seed, "Override the seed");
  cmd->add_option("--concurrency", f.concurrency, "Override the number of concurrent sessions");
  cmd->add_flag("--resume", f.resume, "Continue an interrupted run");
}

RunConfig resolve_config(const RunFlags& f) {
  RunConfig c = load_run_config(f.config);
  if (!f.cohort.empty()) c.cohort_path = f.cohort;
  if (!f.output_dir.empty()) c.output_dir = f.output_dir;
  if (!f.run_id.empty()) c.run_id = f.run_id;
  if (!f.tasks.empty()) {
    c.tasks.clear();
    for (const auto& t : f.tasks) {
      auto task = parse_task(t);
      if (!task) throw ConfigError("unknown task '" + t + "'");
      c.tasks.push_back(*task);
    }
  }
  if (f.max_turns != 0) c.max_turns = f.max_turns;
  if (f.seed >= 0) c.seed = static_cast<std::uint64_t>(f.seed);
  if (f.concurrency != 0) c.concurrency = f.concurrency;
  if (f.resume) c.resume = true;
  c.validate();
  return c;
}

RunManifest load_manifest(const RunConfig& c) {
  auto j = json::parse(read_file((c.run_dir() / "manifest.json").string()), nullptr, false);
  if (j.is_discarded()) throw ConfigError("manifest.json is unreadable");
  return manifest_from_json(j);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-turn diagnostic evaluation harness"};
  app.require_subcommand(1);

  // curate
  std::string curate_input, curate_endpoint, curate_output, curate_audit;
  std::size_t per_system = 0;
  auto* curate = app.add_subcommand("curate", "Filter, structure, validate and categorize raw items");
  curate->add_option("-i,--input", curate_input, "Raw items (JSONL)")->required()->check(CLI::ExistingFile);
  curate->add_option("-e,--endpoint", curate_endpoint, "Endpoint config (JSON) for the curation model")
      ->required()
      ->check(CLI::ExistingFile);
  curate->add_option("-o,--output", curate_output, "Cohort output (JSONL)")->required();
  curate->add_option("--audit", curate_audit, "Audit log output (JSONL)");
  curate->add_option("--per-system", per_system, "Cases per clinical system; 0 keeps every accepted case");

  // validate
  std::string validate_cohort;
  auto* validate = app.add_subcommand("validate", "Check a cohort file against the case schema");
  validate->add_option("cohort", validate_cohort, "Cohort (JSON or JSONL)")->required()->check(CLI::ExistingFile);

  RunFlags run_flags, judge_flags, report_flags;
  auto* run = app.add_subcommand("run", "Run the model x case x task grid");
  add_run_flags(run, run_flags);
  auto* judge = app.add_subcommand("judge", "Re-score the stored transcripts of a run");
  add_run_flags(judge, judge_flags);
  auto* report = app.add_subcommand("report", "Regenerate report.json and leaderboards of a run");
  add_run_flags(report, report_flags);

  // replay
  std::string replay_transcripts, replay_cohort;
  int replay_max_turns = 0;
  auto* replay_cmd = app.add_subcommand("replay", "Re-feed recorded doctor turns and compare");
  replay_cmd->add_option("transcripts", replay_transcripts, "Transcript file (JSONL)")->required()->check(CLI::ExistingFile);
  replay_cmd->add_option("--cohort", replay_cohort, "Cohort the transcripts were run on")->required()->check(CLI::ExistingFile);
  replay_cmd->add_option("--max-turns", replay_max_turns, "Expected turn cap");

  // interactive
  std::string inter_cohort, inter_case, inter_out;
  std::uint64_t inter_seed = 0;
  int inter_max_turns = kDefaultMaxTurns;
  auto* interactive = app.add_subcommand("interactive", "Play the doctor against the simulator");
  interactive->add_option("--cohort", inter_cohort, "Cohort file")->required()->check(CLI::ExistingFile);
  interactive->add_option("--case", inter_case, "Case id")->required();
  interactive->add_option("--seed", inter_seed, "Session seed");
  interactive->add_option("--max-turns", inter_max_turns, "Turn cap");
  interactive->add_option("--transcript", inter_out, "Write the transcript here (JSONL)");

  // parse
  std::string parse_text;
  auto* parse = app.add_subcommand("parse", "Parse a doctor message and print the action as JSON");
  parse->add_option("text", parse_text, "Message text; read from stdin when omitted");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*curate) {
      auto items = parse_raw_items(read_file(curate_input));
      auto ej = json::parse(read_file(curate_endpoint), nullptr, false);
      if (ej.is_discarded()) throw ConfigError("endpoint config is not valid JSON");
      ChatClient client(endpoint_from_json(ej.value("name", std::string("curation")), ej));
      PipelineResult result = run_pipeline(items, client);
      if (!curate_audit.empty()) write_file(curate_audit, audit_jsonl(result.audit));
      Cohort cohort = per_system > 0 ? stratify_cohort(result.accepted, per_system) : Cohort(result.accepted);
      write_file(curate_output, serialize_cohort_jsonl(cohort));
      std::cerr << "accepted " << result.accepted.size() << " of " << items.size() << " items; cohort has "
                << cohort.size() << " cases\n";
      return kExitOk;
    }
    if (*validate) {
      Cohort cohort = load_cohort(validate_cohort);
      std::cout << "valid cohort: " << cohort.size() << " cases\n";
      for (const auto& [cat, n] : cohort.stratification()) std::cout << "  " << to_string(cat) << ": " << n << "\n";
      return kExitOk;
    }
    if (*run) {
      RunConfig c = resolve_config(run_flags);
      Cohort cohort = load_cohort(c.cohort_path);
      RunOutcome out = run_grid(c, cohort);
      std::cout << render_leaderboard(
          [&] {
            std::vector<LeaderboardEntry> board;
            for (std::size_t i = 0; i < out.reports.size(); ++i) board.push_back({c.roster[i].tier, out.reports[i]});
            return board;
          }(),
          LeaderboardFormat::Markdown);
      std::cerr << out.manifest.count(CellStatus::Completed) << " cells completed, "
                << out.manifest.count(CellStatus::Failed) << " failed; output in " << c.run_dir().string() << "\n";
      return out.exit_code == 0 ? kExitOk : kExitPartial;
    }
    if (*judge) {
      RunConfig c = resolve_config(judge_flags);
      Cohort cohort = load_cohort(c.cohort_path);
      std::size_t n = rejudge(c, cohort);
      write_report(c, cohort, load_manifest(c));
      std::cerr << "re-scored " << n << " sessions\n";
      return kExitOk;
    }
    if (*report) {
      RunConfig c = resolve_config(report_flags);
      Cohort cohort = load_cohort(c.cohort_path);
      write_report(c, cohort, load_manifest(c));
      std::cout << read_file((c.run_dir() / "leaderboard.md").string());
      return kExitOk;
    }
    if (*replay_cmd) {
      Cohort cohort = load_cohort(replay_cohort);
      std::optional<int> expected;
      if (replay_max_turns > 0) expected = replay_max_turns;
      bool all_identical = true;
      for (const auto& t : load_transcripts(replay_transcripts)) {
        ReplayReport r = replay(t, cohort, expected);
        all_identical = all_identical && r.identical();
        std::cout << to_json(r).dump() << "\n";
      }
      return all_identical ? kExitOk : kExitPartial;
    }
    if (*interactive) {
      Cohort cohort = load_cohort(inter_cohort);
      const StructuredCase* c = cohort.find(inter_case);
      if (!c) throw ConfigError("case '" + inter_case + "' is not in the cohort");
      SessionTranscript t = interactive_session(*c, inter_seed, inter_max_turns, std::cin, std::cout);
      if (!inter_out.empty()) write_file(inter_out, to_jsonl(t));
      return kExitOk;
    }
    if (*parse) {
      const std::string input = parse->count("text") ? parse_text : read_all(std::cin);
      std::cout << to_json(parse_doctor_message(input)).dump(2) << "\n";
      return kExitOk;
    }
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const SchemaError& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitPartial;
  }
  return kExitOk;
}
