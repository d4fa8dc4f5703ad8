#include "rounds/runner.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <fstream>
#include <iostream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "rounds/digest.hpp"
#include "rounds/error.hpp"
#include "rounds/sp_simulator.hpp"
#include "rounds/text.hpp"

namespace rounds {

using nlohmann::json;
namespace fs = std::filesystem;

// --- config ----------------------------------------------------------------

void RunConfig::validate() const {
  if (max_turns < 1) throw ConfigError("max_turns must be at least 1");
  if (roster.empty()) throw ConfigError("model roster is empty");
  if (tasks.empty()) throw ConfigError("no tasks selected");
  if (concurrency < 1) throw ConfigError("concurrency must be at least 1");
  if (run_id.empty() || run_id.find('/') != std::string::npos) throw ConfigError("run_id must be a plain name");
  std::set<std::string> names;
  for (const auto& a : roster) {
    if (a.name.empty()) throw ConfigError("roster entry without a name");
    if (!names.insert(a.name).second) throw ConfigError("duplicate roster entry '" + a.name + "'");
    if (a.endpoint.has_value() == a.scripted.has_value()) {
      throw ConfigError("roster entry '" + a.name + "' needs exactly one of an endpoint or a scripted agent");
    }
    if (a.endpoint) a.endpoint->validate();
  }
  if (judge.endpoint.has_value() == judge.stub.has_value()) {
    throw ConfigError("judge needs exactly one of an endpoint or a stub mode");
  }
  if (judge.endpoint) judge.endpoint->validate_for_judge();
}

namespace {

fs::path resolve(const fs::path& p, const fs::path& base) {
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

EndpointConfig endpoint_with_base(std::string name, const json& j, const fs::path& base) {
  EndpointConfig e = endpoint_from_json(std::move(name), j);
  e.cache_dir = resolve(e.cache_dir, base);
  return e;
}

}  // namespace

RunConfig run_config_from_json(const json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw ConfigError("run config: expected a JSON object");
  RunConfig c;
  try {
    c.cohort_path = resolve(j.value("cohort", std::string()), base_dir);
    if (j.contains("models")) {
      const auto& models = j["models"];
      if (!models.is_object()) throw ConfigError("run config: 'models' must be an object");
      // nlohmann orders keys; "order" lets a config fix the leaderboard row order.
      std::vector<std::string> names;
      if (j.contains("order")) {
        names = j["order"].get<std::vector<std::string>>();
      } else {
        for (const auto& [name, _] : models.items()) names.push_back(name);
      }
      for (const auto& name : names) {
        if (!models.contains(name)) throw ConfigError("run config: 'order' names unknown model '" + name + "'");
        const auto& m = models[name];
        AgentSpec a;
        a.name = name;
        a.tier = m.value("tier", std::string("Models"));
        if (m.contains("scripted")) {
          auto kind = parse_scripted_kind(m["scripted"].get<std::string>());
          if (!kind) throw ConfigError("model '" + name + "': unknown scripted agent");
          a.scripted = *kind;
        } else {
          a.endpoint = endpoint_with_base(name, m, base_dir);
        }
        c.roster.push_back(std::move(a));
      }
    }
    if (j.contains("tasks")) {
      c.tasks.clear();
      for (const auto& t : j["tasks"]) {
        auto task = parse_task(t.get<std::string>());
        if (!task) throw ConfigError("run config: unknown task " + t.dump());
        c.tasks.push_back(*task);
      }
    }
    c.max_turns = j.value("max_turns", kDefaultMaxTurns);
    if (j.contains("judge")) {
      const auto& jj = j["judge"];
      c.judge = {};
      if (jj.contains("stub")) {
        auto mode = parse_stub_mode(jj["stub"].get<std::string>());
        if (!mode) throw ConfigError("judge: unknown stub mode");
        c.judge.stub = *mode;
      } else {
        c.judge.stub.reset();
        c.judge.endpoint = endpoint_with_base("judge", jj, base_dir);
      }
    }
    c.seed = j.value("seed", std::uint64_t{0});
    c.output_dir = resolve(j.value("output_dir", std::string("out")), base_dir);
    c.run_id = j.value("run_id", std::string("run"));
    c.concurrency = j.value("concurrency", std::size_t{1});
    c.resume = j.value("resume", false);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("run config: ") + e.what());
  }
  return c;
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read run config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  auto j = json::parse(ss.str(), nullptr, false);
  if (j.is_discarded()) throw ConfigError("run config " + path.string() + " is not valid JSON");
  return run_config_from_json(j, path.parent_path());
}

namespace {

json agent_json(const AgentSpec& a) {
  json j = {{"name", a.name}, {"tier", a.tier}};
  if (a.scripted) j["scripted"] = to_string(*a.scripted);
  if (a.endpoint) j["endpoint"] = to_json(*a.endpoint);
  return j;
}

json judge_json(const JudgeSpec& s) {
  json j = json::object();
  if (s.stub) j["stub"] = to_string(*s.stub);
  if (s.endpoint) j["endpoint"] = to_json(*s.endpoint);
  return j;
}

// Only the fields that change what a model is asked or how it samples.
json endpoint_identity(const EndpointConfig& e) {
  return {{"base_url", e.base_url},
          {"model_name", e.model_name},
          {"temperature", e.temperature},
          {"top_p", e.top_p},
          {"seed", e.seed ? json(*e.seed) : json(nullptr)}};
}

}  // namespace

json to_json(const RunConfig& c) {
  json roster = json::array();
  for (const auto& a : c.roster) roster.push_back(agent_json(a));
  json tasks = json::array();
  for (auto t : c.tasks) tasks.push_back(to_string(t));
  return {{"cohort", c.cohort_path.string()}, {"roster", roster},
          {"tasks", tasks},                   {"max_turns", c.max_turns},
          {"judge", judge_json(c.judge)},     {"seed", c.seed},
          {"output_dir", c.output_dir.string()}, {"run_id", c.run_id},
          {"concurrency", c.concurrency},     {"resume", c.resume}};
}

std::string config_digest(const RunConfig& c, const Cohort& cohort) {
  json roster = json::array();
  for (const auto& a : c.roster) {
    json e = {{"name", a.name}};
    if (a.scripted) e["scripted"] = to_string(*a.scripted);
    if (a.endpoint) e["endpoint"] = endpoint_identity(*a.endpoint);
    roster.push_back(e);
  }
  json tasks = json::array();
  for (auto t : c.tasks) tasks.push_back(to_string(t));
  json judge = json::object();
  if (c.judge.stub) judge["stub"] = to_string(*c.judge.stub);
  if (c.judge.endpoint) judge["endpoint"] = endpoint_identity(*c.judge.endpoint);
  json doc = {{"cohort", sha256_hex(serialize_cohort_jsonl(cohort))},
              {"roster", roster},
              {"tasks", tasks},
              {"max_turns", c.max_turns},
              {"judge", judge},
              {"seed", c.seed}};
  return sha256_hex(doc.dump());
}

// --- manifest --------------------------------------------------------------

std::string_view to_string(CellStatus s) {
  switch (s) {
    case CellStatus::Pending: return "Pending";
    case CellStatus::Completed: return "Completed";
    case CellStatus::Failed: return "Failed";
  }
  return "Pending";
}

std::size_t RunManifest::count(CellStatus s) const {
  std::size_t n = 0;
  for (const auto& [_, rec] : cells) n += rec.status == s;
  return n;
}

json to_json(const RunManifest& m) {
  json cells = json::array();
  for (const auto& [key, rec] : m.cells) {
    const auto& [model, case_id, task] = key;
    cells.push_back({{"model", model},
                     {"case_id", case_id},
                     {"task", to_string(task)},
                     {"status", to_string(rec.status)},
                     {"failure", rec.failure ? json(*rec.failure) : json(nullptr)}});
  }
  return {{"config_digest", m.config_digest}, {"run_id", m.run_id}, {"cells", cells}, {"artifacts", m.artifacts}};
}

RunManifest manifest_from_json(const json& j) {
  RunManifest m;
  try {
    m.config_digest = j.at("config_digest").get<std::string>();
    m.run_id = j.value("run_id", std::string());
    for (const auto& c : j.at("cells")) {
      auto task = parse_task(c.at("task").get<std::string>());
      if (!task) throw ParseError("manifest: unknown task");
      CellRecord rec;
      const auto status = c.at("status").get<std::string>();
      if (status == "Completed") rec.status = CellStatus::Completed;
      else if (status == "Failed") rec.status = CellStatus::Failed;
      if (c.contains("failure") && c["failure"].is_string()) rec.failure = c["failure"].get<std::string>();
      m.cells[{c.at("model").get<std::string>(), c.at("case_id").get<std::string>(), *task}] = rec;
    }
    m.artifacts = j.value("artifacts", std::vector<std::string>{});
  } catch (const json::exception& e) {
    throw ParseError(std::string("manifest: ") + e.what());
  }
  return m;
}

// --- single cases ----------------------------------------------------------

namespace {

TranscriptHeader header_for(const StructuredCase& c, const std::string& model, Task task, std::uint64_t seed,
                            int max_turns, std::size_t opening_index) {
  return {make_session_id(model, task, c.case_id), c.case_id, model, task, seed, max_turns, opening_index};
}

CaseScore no_diagnosis_score(const std::string& model, const StructuredCase& c, Task task) {
  CaseScore s;
  s.model = model;
  s.case_id = c.case_id;
  s.task = task;
  s.gold = c.gold_diagnosis;
  s.failure_reason = "no-diagnosis";
  return s;
}

}  // namespace

CaseRun run_task1(const StructuredCase& c, const std::string& model, DoctorAgent& agent, Judge& judge,
                  const PromptLibrary& prompts) {
  if (auto v = validate_case(c); !v.empty()) throw SchemaError(c.case_id, v.front().field, v.front().rule);
  const std::string record = format_record(c.sections);
  const std::string reply = agent.respond({{Role::System, prompts.get(prompt::kTask1)}, {Role::User, record}});

  CaseRun run;
  run.transcript.header = header_for(c, model, Task::Task1, 0, 1, 0);
  run.transcript.utterances.push_back({0, Speaker::Patient, "Record", record});
  run.transcript.utterances.push_back(
      {1, Speaker::Doctor, std::string(parse_doctor_message(reply).action.kind_name()), reply});
  run.score = score_case(model, c, Task::Task1, reply, task1_corpus(c), judge);
  return run;
}

ChatHistory task2_history(const SessionTranscript& t, const PromptLibrary& prompts) {
  ChatHistory h;
  h.push_back({Role::System, prompts.get(prompt::kTask2)});
  for (const auto& u : t.utterances) {
    h.push_back({u.speaker == Speaker::Doctor ? Role::Assistant : Role::User, u.text});
  }
  return h;
}

CaseRun run_task2(const StructuredCase& c, const std::string& model, DoctorAgent& agent, Judge& judge, int max_turns,
                  std::uint64_t seed, const PromptLibrary& prompts) {
  SimulatorOptions opts;
  opts.max_turns = max_turns;
  Session session = Session::open(c, seed, std::move(opts));

  CaseRun run;
  run.transcript.header = header_for(c, model, Task::Task2, seed, max_turns, session.state().opening_index);
  for (;;) {
    run.transcript.utterances = session.state().transcript;
    const std::string msg = agent.respond(task2_history(run.transcript, prompts));
    const SimResponse resp = session.step(msg);
    if (session.finished()) break;
    // Closed without a diagnosis: the agent ignored the forced request.
    if (resp.kind == ResponseKind::Closed) break;
  }
  run.transcript.utterances = session.state().transcript;

  if (session.finished()) {
    run.score = score_case(model, c, Task::Task2, run.transcript.utterances[run.transcript.utterances.size() - 2].text,
                           session.revealed_corpus(), judge);
  } else {
    run.score = no_diagnosis_score(model, c, Task::Task2);
  }
  return run;
}

std::string grounding_corpus(const SessionTranscript& t, const StructuredCase& c) {
  if (t.header.task == Task::Task1) return task1_corpus(c);
  std::string out;
  for (const auto& u : t.utterances) {
    if (u.speaker != Speaker::Patient) continue;
    if (u.kind != to_string(ResponseKind::Opening) && u.kind != to_string(ResponseKind::Hit)) continue;
    if (!out.empty()) out.push_back('\n');
    out += u.text;
  }
  return out;
}

std::optional<std::string> final_diagnosis_message(const SessionTranscript& t) {
  for (auto it = t.utterances.rbegin(); it != t.utterances.rend(); ++it) {
    if (it->speaker == Speaker::Doctor && it->kind == "FinalDiagnosis") return it->text;
  }
  return std::nullopt;
}

CaseScore rescore(const SessionTranscript& t, const StructuredCase& c, Judge& judge) {
  const std::string& model = t.header.model;
  if (t.header.task == Task::Task1) {
    for (auto it = t.utterances.rbegin(); it != t.utterances.rend(); ++it) {
      if (it->speaker == Speaker::Doctor) return score_case(model, c, Task::Task1, it->text, task1_corpus(c), judge);
    }
    return no_diagnosis_score(model, c, Task::Task1);
  }
  auto msg = final_diagnosis_message(t);
  if (!msg) return no_diagnosis_score(model, c, Task::Task2);
  return score_case(model, c, Task::Task2, *msg, grounding_corpus(t, c), judge);
}

// --- replay ----------------------------------------------------------------

json to_json(const ReplayReport& r) {
  auto utt = [](const std::optional<Utterance>& u) -> json {
    if (!u) return nullptr;
    return {{"turn", u->turn}, {"speaker", to_string(u->speaker)}, {"kind", u->kind}, {"text", u->text}};
  };
  json div = json::array();
  for (const auto& d : r.divergences) div.push_back({{"index", d.index}, {"recorded", utt(d.recorded)}, {"replayed", utt(d.replayed)}});
  return {{"session_id", r.session_id}, {"utterances", r.utterances}, {"identical", r.identical()}, {"divergences", div}};
}

ReplayReport replay(const SessionTranscript& t, const Cohort& cohort, std::optional<int> expected_max_turns) {
  if (expected_max_turns && *expected_max_turns != t.header.max_turns) {
    throw ConfigError("replay: transcript was recorded with max_turns " + std::to_string(t.header.max_turns) +
                      ", expected " + std::to_string(*expected_max_turns));
  }
  const StructuredCase* c = cohort.find(t.header.case_id);
  if (!c) throw PreconditionError("replay: case '" + t.header.case_id + "' is not in the cohort");

  std::vector<Utterance> replayed;
  if (t.header.task == Task::Task1) {
    replayed.push_back({0, Speaker::Patient, "Record", format_record(c->sections)});
    for (const auto& u : t.utterances) {
      if (u.speaker == Speaker::Doctor) {
        replayed.push_back({u.turn, Speaker::Doctor, std::string(parse_doctor_message(u.text).action.kind_name()), u.text});
      }
    }
  } else {
    SimulatorOptions opts;
    opts.max_turns = t.header.max_turns;
    Session s = Session::open(*c, t.header.seed, std::move(opts));
    for (const auto& u : t.utterances) {
      if (u.speaker != Speaker::Doctor || u.turn == 0) continue;
      if (s.finished()) break;
      s.step(u.text);
    }
    replayed = s.state().transcript;
  }

  ReplayReport r;
  r.session_id = t.header.session_id;
  r.utterances = t.utterances.size();
  const std::size_t n = std::max(t.utterances.size(), replayed.size());
  for (std::size_t i = 0; i < n; ++i) {
    std::optional<Utterance> a, b;
    if (i < t.utterances.size()) a = t.utterances[i];
    if (i < replayed.size()) b = replayed[i];
    if (a != b) r.divergences.push_back({i, a, b});
  }
  return r;
}

// --- interactive -------------------------------------------------------------

SessionTranscript interactive_session(const StructuredCase& c, std::uint64_t seed, int max_turns, std::istream& in,
                                      std::ostream& out) {
  SimulatorOptions opts;
  opts.max_turns = max_turns;
  Session s = Session::open(c, seed, std::move(opts));
  out << "Doctor: " << s.opening_prompt() << "\n";
  out << "Patient: " << s.reveal() << "\n";
  out << "(one action per line; " << max_turns << " turns at most)\n";

  std::string line;
  while (!s.finished()) {
    out << "> " << std::flush;
    if (!std::getline(in, line)) break;
    if (text::trim(line).empty()) continue;
    SimResponse r = s.step(line);
    out << "Patient: " << r.payload << "\n";
    if (r.kind == ResponseKind::Closed) break;
  }
  SessionTranscript t;
  t.header = header_for(c, "human", Task::Task2, seed, max_turns, s.state().opening_index);
  t.utterances = s.state().transcript;
  return t;
}

// --- grid ------------------------------------------------------------------

RunFactories RunFactories::defaults() {
  struct Clients {
    std::mutex mu;
    std::map<std::string, std::shared_ptr<ChatClient>> by_name;
  };
  auto clients = std::make_shared<Clients>();
  RunFactories f;
  f.agent = [clients](const AgentSpec& spec, const StructuredCase& c, Task task,
                      std::uint64_t seed) -> std::unique_ptr<DoctorAgent> {
    if (spec.scripted) return scripted_agent(*spec.scripted, c, task, seed);
    std::lock_guard lock(clients->mu);
    auto& client = clients->by_name[spec.name];
    if (!client) client = std::make_shared<ChatClient>(*spec.endpoint);
    return std::make_unique<LlmDoctorAgent>(client);
  };
  f.judge = [](const JudgeSpec& spec) -> std::unique_ptr<Judge> {
    if (spec.stub) return std::make_unique<StubJudge>(*spec.stub);
    return LlmJudge::connect(*spec.endpoint);
  };
  return f;
}

std::string artifact_stem(std::string_view model, Task task) {
  std::string out;
  for (unsigned char c : model) {
    out.push_back(std::isalnum(c) || c == '-' || c == '.' || c == '_' ? static_cast<char>(c) : '_');
  }
  return out + "__" + std::string(to_string(task));
}

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Drops an unterminated last line left by an interrupted write.
std::string complete_lines(std::string s) {
  auto nl = s.rfind('\n');
  s.resize(nl == std::string::npos ? 0 : nl + 1);
  return s;
}

void write_atomic(const fs::path& p, const std::string& content) {
  fs::path tmp = p;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + tmp.string());
    out << content;
  }
  fs::rename(tmp, p);
}

void append(const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary | std::ios::app);
  if (!out) throw ConfigError("cannot write " + p.string());
  out << content;
  out.flush();
}

std::vector<fs::path> jsonl_files(const fs::path& dir) {
  std::vector<fs::path> out;
  if (!fs::exists(dir)) return out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() == ".jsonl") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string failure_kind(const std::exception& e) {
  if (dynamic_cast<const RateLimitError*>(&e)) return "rate-limit";
  if (dynamic_cast<const TransportError*>(&e)) return "transport";
  if (dynamic_cast<const CacheMissError*>(&e)) return "cache-miss";
  if (dynamic_cast<const ReplyFormatError*>(&e)) return "judge-parse";
  if (dynamic_cast<const SchemaError*>(&e)) return "invalid-case";
  return std::string("error: ") + e.what();
}

std::map<std::string, std::size_t> case_order(const Cohort& cohort) {
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < cohort.size(); ++i) index[cohort.cases()[i].case_id] = i;
  return index;
}

// Rewrites transcript and score files in cohort order with one entry per
// cell, so the bytes do not depend on scheduling or interruptions.
void canonicalize(const fs::path& run_dir, const Cohort& cohort) {
  const auto order = case_order(cohort);
  auto rank = [&](const std::string& id) {
    auto it = order.find(id);
    return it == order.end() ? order.size() : it->second;
  };

  for (const auto& p : jsonl_files(run_dir / "transcripts")) {
    auto sessions = parse_transcripts(complete_lines(read_file(p)));
    std::stable_sort(sessions.begin(), sessions.end(), [&](const auto& a, const auto& b) {
      return rank(a.header.case_id) < rank(b.header.case_id);
    });
    std::string out;
    for (const auto& s : sessions) out += to_jsonl(s);
    write_atomic(p, out);
  }
  for (const auto& p : jsonl_files(run_dir / "scores")) {
    std::map<std::string, CaseScore> last;
    for (const auto& line : text::split_lines(complete_lines(read_file(p)))) {
      if (text::trim(line).empty()) continue;
      CaseScore s = case_score_from_json(json::parse(line));
      last[s.case_id] = std::move(s);
    }
    std::vector<CaseScore> scores;
    for (auto& [_, s] : last) scores.push_back(std::move(s));
    std::stable_sort(scores.begin(), scores.end(),
                     [&](const CaseScore& a, const CaseScore& b) { return rank(a.case_id) < rank(b.case_id); });
    std::string out;
    for (const auto& s : scores) out += to_json(s).dump() + "\n";
    write_atomic(p, out);
  }
}

}  // namespace

std::vector<CaseScore> load_scores(const fs::path& run_dir) {
  std::map<CellKey, CaseScore> cells;
  for (const auto& p : jsonl_files(run_dir / "scores")) {
    std::size_t line_no = 0;
    for (const auto& line : text::split_lines(complete_lines(read_file(p)))) {
      ++line_no;
      if (text::trim(line).empty()) continue;
      auto j = json::parse(line, nullptr, false);
      if (j.is_discarded()) throw ParseError(p.string() + ": invalid JSON on line " + std::to_string(line_no), line_no);
      CaseScore s = case_score_from_json(j);
      CellKey key{s.model, s.case_id, s.task};
      cells[key] = std::move(s);
    }
  }
  std::vector<CaseScore> out;
  for (auto& [_, s] : cells) out.push_back(std::move(s));
  return out;
}

std::vector<AggregateReport> write_report(const RunConfig& config, const Cohort& cohort, const RunManifest& manifest) {
  const fs::path dir = config.run_dir();
  const std::vector<CaseScore> scores = load_scores(dir);

  std::vector<AggregateReport> reports;
  std::vector<LeaderboardEntry> board;
  json models = json::array();
  for (const auto& a : config.roster) {
    std::vector<CaseScore> mine;
    for (const auto& s : scores) {
      if (s.model == a.name) mine.push_back(s);
    }
    AggregateReport r = aggregate(a.name, mine, cohort);
    json rj = to_json(r);
    std::map<std::string, std::size_t> reasons;
    for (const auto& s : mine) {
      if (s.failure_reason) ++reasons[*s.failure_reason];
    }
    for (const auto& [key, rec] : manifest.cells) {
      if (std::get<0>(key) == a.name && rec.status == CellStatus::Failed) ++reasons[rec.failure.value_or("unknown")];
    }
    rj["tier"] = a.tier;
    rj["failures"] = reasons;
    models.push_back(std::move(rj));
    board.push_back({a.tier, r});
    reports.push_back(std::move(r));
  }

  json report = {{"run_id", config.run_id},
                 {"config_digest", manifest.config_digest},
                 {"cells",
                  {{"total", manifest.cells.size()},
                   {"completed", manifest.count(CellStatus::Completed)},
                   {"failed", manifest.count(CellStatus::Failed)},
                   {"pending", manifest.count(CellStatus::Pending)}}},
                 {"models", models}};
  write_atomic(dir / "report.json", report.dump(2) + "\n");
  write_atomic(dir / "leaderboard.md", render_leaderboard(board, LeaderboardFormat::Markdown));
  write_atomic(dir / "leaderboard.csv", render_leaderboard(board, LeaderboardFormat::CSV));
  return reports;
}

RunOutcome run_grid(const RunConfig& config, const Cohort& cohort, const RunFactories& factories) {
  config.validate();
  if (cohort.empty()) throw ConfigError("cohort is empty");
  const fs::path dir = config.run_dir();
  std::error_code ec;
  fs::create_directories(dir / "transcripts", ec);
  fs::create_directories(dir / "scores", ec);
  if (ec) throw ConfigError("cannot create run directory " + dir.string() + ": " + ec.message());

  RunManifest manifest;
  manifest.config_digest = config_digest(config, cohort);
  manifest.run_id = config.run_id;

  const fs::path manifest_path = dir / "manifest.json";
  if (fs::exists(manifest_path)) {
    if (!config.resume) throw ConfigError("run directory " + dir.string() + " already holds a run; use --resume");
    auto old = json::parse(read_file(manifest_path), nullptr, false);
    if (old.is_discarded()) throw ConfigError("manifest.json is unreadable");
    if (manifest_from_json(old).config_digest != manifest.config_digest) {
      throw ConfigError("config digest differs from the run being resumed");
    }
  }

  std::set<CellKey> done;
  if (config.resume) {
    // Drop any line torn by a crash so new records start on a fresh line.
    for (const char* sub : {"transcripts", "scores"}) {
      for (const auto& p : jsonl_files(dir / sub)) {
        const std::string bytes = read_file(p);
        const std::string kept = complete_lines(bytes);
        if (kept.size() != bytes.size()) write_atomic(p, kept);
      }
    }
    for (const auto& s : load_scores(dir)) done.insert({s.model, s.case_id, s.task});
  }

  std::vector<CellKey> pending;
  for (const auto& a : config.roster) {
    for (auto task : config.tasks) {
      for (const auto& c : cohort.cases()) {
        CellKey key{a.name, c.case_id, task};
        if (done.contains(key)) {
          manifest.cells[key].status = CellStatus::Completed;
        } else {
          manifest.cells[key] = {};
          pending.push_back(key);
        }
      }
    }
  }
  for (const auto& a : config.roster) {
    for (auto task : config.tasks) {
      manifest.artifacts.push_back("transcripts/" + artifact_stem(a.name, task) + ".jsonl");
      manifest.artifacts.push_back("scores/" + artifact_stem(a.name, task) + ".jsonl");
    }
  }
  manifest.artifacts.insert(manifest.artifacts.end(), {"report.json", "leaderboard.md", "leaderboard.csv"});
  write_atomic(manifest_path, to_json(manifest).dump(2) + "\n");

  std::map<std::string, const AgentSpec*> specs;
  for (const auto& a : config.roster) specs[a.name] = &a;
  std::unique_ptr<Judge> judge = factories.judge(config.judge);

  std::mutex mu;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < pending.size(); i = next++) {
      const auto& [model, case_id, task] = pending[i];
      const StructuredCase& c = *cohort.find(case_id);
      CellRecord rec;
      try {
        auto agent = factories.agent(*specs.at(model), c, task, config.seed);
        CaseRun run = task == Task::Task1 ? run_task1(c, model, *agent, *judge)
                                          : run_task2(c, model, *agent, *judge, config.max_turns, config.seed);
        const std::string stem = artifact_stem(model, task);
        std::lock_guard lock(mu);
        // Transcript first: a crash in between leaves the cell pending, and
        // the re-run's copy supersedes the orphan.
        append(dir / "transcripts" / (stem + ".jsonl"), to_jsonl(run.transcript));
        append(dir / "scores" / (stem + ".jsonl"), to_json(run.score).dump() + "\n");
        rec.status = CellStatus::Completed;
      } catch (const std::exception& e) {
        rec.status = CellStatus::Failed;
        rec.failure = failure_kind(e);
      }
      std::lock_guard lock(mu);
      manifest.cells[pending[i]] = rec;
    }
  };
  const std::size_t threads = std::min(config.concurrency, std::max<std::size_t>(pending.size(), 1));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  canonicalize(dir, cohort);
  write_atomic(manifest_path, to_json(manifest).dump(2) + "\n");

  RunOutcome outcome;
  outcome.reports = write_report(config, cohort, manifest);
  outcome.exit_code = manifest.count(CellStatus::Failed) > 0 ? 1 : 0;
  outcome.manifest = std::move(manifest);
  return outcome;
}

std::size_t rejudge(const RunConfig& config, const Cohort& cohort, const RunFactories& factories) {
  const fs::path dir = config.run_dir();
  std::unique_ptr<Judge> judge = factories.judge(config.judge);
  std::size_t n = 0;
  for (const auto& p : jsonl_files(dir / "transcripts")) {
    std::string out;
    for (const auto& t : parse_transcripts(complete_lines(read_file(p)))) {
      const StructuredCase* c = cohort.find(t.header.case_id);
      if (!c) throw PreconditionError("rejudge: case '" + t.header.case_id + "' is not in the cohort");
      out += to_json(rescore(t, *c, *judge)).dump() + "\n";
      ++n;
    }
    write_atomic(dir / "scores" / p.filename(), out);
  }
  return n;
}

}  // namespace rounds
