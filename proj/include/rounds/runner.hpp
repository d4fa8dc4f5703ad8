#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "rounds/agent_gateway.hpp"
#include "rounds/case_model.hpp"
#include "rounds/doctor_agents.hpp"
#include "rounds/judging.hpp"
#include "rounds/metrics.hpp"
#include "rounds/prompts.hpp"
#include "rounds/transcript.hpp"

namespace rounds {

// A roster entry: a remote endpoint or one of the scripted agents.
struct AgentSpec {
  std::string name;
  std::string tier = "Models";
  std::optional<EndpointConfig> endpoint;
  std::optional<ScriptedKind> scripted;
};

// The judge: a remote endpoint or a stub.
struct JudgeSpec {
  std::optional<EndpointConfig> endpoint;
  std::optional<StubMode> stub = StubMode::ExactMatch;
};

struct RunConfig {
  std::filesystem::path cohort_path;
  std::vector<AgentSpec> roster;
  std::vector<Task> tasks = {Task::Task1, Task::Task2};
  int max_turns = kDefaultMaxTurns;
  JudgeSpec judge;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "out";
  std::string run_id = "run";
  std::size_t concurrency = 1;
  bool resume = false;

  // Throws ConfigError.
  void validate() const;
  std::filesystem::path run_dir() const { return output_dir / run_id; }
};

// Relative cohort and cache paths resolve against `base_dir`.
RunConfig run_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& c);

// Digest over everything that affects results: cohort content, roster,
// tasks, turn cap, judge and seed. Output location, concurrency and the
// resume flag are excluded.
std::string config_digest(const RunConfig& c, const Cohort& cohort);

enum class CellStatus { Pending, Completed, Failed };
std::string_view to_string(CellStatus s);

using CellKey = std::tuple<std::string, std::string, Task>;  // model, case_id, task

struct CellRecord {
  CellStatus status = CellStatus::Pending;
  std::optional<std::string> failure;  // "transport", "judge-parse", ...
};

struct RunManifest {
  std::string config_digest;
  std::string run_id;
  std::map<CellKey, CellRecord> cells;
  std::vector<std::string> artifacts;  // paths relative to the run directory

  std::size_t count(CellStatus s) const;
};

nlohmann::json to_json(const RunManifest& m);
RunManifest manifest_from_json(const nlohmann::json& j);

// One case, one task.
struct CaseRun {
  CaseScore score;
  SessionTranscript transcript;
};

CaseRun run_task1(const StructuredCase& c, const std::string& model, DoctorAgent& agent, Judge& judge,
                  const PromptLibrary& prompts = PromptLibrary::builtin());

// Plays the session to a diagnosis or to the cap. The agent sees the
// system prompt, its opening question, the patient's reveal and then every
// turn verbatim.
CaseRun run_task2(const StructuredCase& c, const std::string& model, DoctorAgent& agent, Judge& judge,
                  int max_turns = kDefaultMaxTurns, std::uint64_t seed = 0,
                  const PromptLibrary& prompts = PromptLibrary::builtin());

// Doctor-side history for a Task 2 session so far.
ChatHistory task2_history(const SessionTranscript& t, const PromptLibrary& prompts = PromptLibrary::builtin());

// Opening and Hit payloads of a Task 2 transcript, or the full record for
// Task 1: what the evidence is grounded against.
std::string grounding_corpus(const SessionTranscript& t, const StructuredCase& c);

// Final doctor message of a transcript when it submitted a diagnosis.
std::optional<std::string> final_diagnosis_message(const SessionTranscript& t);

// Re-scores a stored transcript.
CaseScore rescore(const SessionTranscript& t, const StructuredCase& c, Judge& judge);

struct TurnDivergence {
  std::size_t index = 0;  // utterance position in the transcript
  std::optional<Utterance> recorded;
  std::optional<Utterance> replayed;
};

struct ReplayReport {
  std::string session_id;
  std::size_t utterances = 0;
  std::vector<TurnDivergence> divergences;
  bool identical() const { return divergences.empty(); }
};

nlohmann::json to_json(const ReplayReport& r);

// Feeds the recorded doctor messages through a fresh session. Throws
// ConfigError when `expected_max_turns` is given and differs from the
// transcript, and PreconditionError for an unknown case.
ReplayReport replay(const SessionTranscript& t, const Cohort& cohort, std::optional<int> expected_max_turns = {});

// Human plays the doctor: one action per input line until the session ends
// or input runs out.
SessionTranscript interactive_session(const StructuredCase& c, std::uint64_t seed, int max_turns, std::istream& in,
                                      std::ostream& out);

// Builds doctor agents and judges from specs. Tests substitute stubs here.
struct RunFactories {
  std::function<std::unique_ptr<DoctorAgent>(const AgentSpec&, const StructuredCase&, Task, std::uint64_t)> agent;
  std::function<std::unique_ptr<Judge>(const JudgeSpec&)> judge;

  static RunFactories defaults();
};

struct RunOutcome {
  RunManifest manifest;
  std::vector<AggregateReport> reports;
  int exit_code = 0;  // 0 all cells completed, 1 some failed
};

// Runs the roster x cohort x tasks grid, writing under config.run_dir():
//   manifest.json, transcripts/<model>__<task>.jsonl, scores/<model>__<task>.jsonl,
//   report.json, leaderboard.md, leaderboard.csv
// With config.resume, cells that already have a score are skipped; a
// manifest with a different config digest is refused with ConfigError.
RunOutcome run_grid(const RunConfig& config, const Cohort& cohort, const RunFactories& factories = RunFactories::defaults());

// Loads the scores of a run directory and keeps the last score per cell,
// ordered by (model, case_id, task). A torn final line is ignored.
std::vector<CaseScore> load_scores(const std::filesystem::path& run_dir);

// Rewrites report.json and the leaderboards from the stored scores.
std::vector<AggregateReport> write_report(const RunConfig& config, const Cohort& cohort, const RunManifest& manifest);

// Re-scores every stored transcript with the configured judge, replacing
// the score files.
std::size_t rejudge(const RunConfig& config, const Cohort& cohort, const RunFactories& factories = RunFactories::defaults());

// File-system friendly name: "Qwen2.5-14B/x" -> "Qwen2.5-14B_x".
std::string artifact_stem(std::string_view model, Task task);

}  // namespace rounds
