#include "rounds/transcript.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "rounds/error.hpp"
#include "rounds/text.hpp"

namespace rounds {

std::string_view to_string(Task t) { return t == Task::Task1 ? "Task1" : "Task2"; }

std::optional<Task> parse_task(std::string_view s) {
  if (text::iequals(s, "Task1") || s == "1") return Task::Task1;
  if (text::iequals(s, "Task2") || s == "2") return Task::Task2;
  return std::nullopt;
}

std::string make_session_id(std::string_view model, Task task, std::string_view case_id) {
  return std::string(model) + "/" + std::string(to_string(task)) + "/" + std::string(case_id);
}

std::string to_jsonl(const SessionTranscript& t) {
  const auto& h = t.header;
  std::string out = nlohmann::json{{"type", "header"},
                                   {"session_id", h.session_id},
                                   {"case_id", h.case_id},
                                   {"model", h.model},
                                   {"task", std::string(to_string(h.task))},
                                   {"seed", h.seed},
                                   {"max_turns", h.max_turns},
                                   {"opening_index", h.opening_index}}
                        .dump() +
                    "\n";
  for (const auto& u : t.utterances) {
    out += nlohmann::json{{"type", "utterance"},
                          {"session_id", h.session_id},
                          {"turn", u.turn},
                          {"speaker", std::string(to_string(u.speaker))},
                          {"kind", u.kind},
                          {"text", u.text}}
               .dump() +
           "\n";
  }
  return out;
}

std::vector<SessionTranscript> parse_transcripts(std::string_view jsonl) {
  std::vector<SessionTranscript> sessions;
  std::map<std::string, std::size_t> index;
  const auto lines = text::split_lines(jsonl);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (text::trim(lines[i]).empty()) continue;
    const std::string where = "transcript line " + std::to_string(i + 1);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(lines[i]);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(where + ": " + e.what(), i + 1);
    }
    try {
      const std::string type = j.at("type").get<std::string>();
      const std::string sid = j.at("session_id").get<std::string>();
      if (type == "header") {
        SessionTranscript t;
        t.header.session_id = sid;
        t.header.case_id = j.at("case_id").get<std::string>();
        t.header.model = j.value("model", "");
        auto task = parse_task(j.at("task").get<std::string>());
        if (!task) throw ParseError(where + ": unknown task", i + 1);
        t.header.task = *task;
        t.header.seed = j.at("seed").get<std::uint64_t>();
        t.header.max_turns = j.at("max_turns").get<int>();
        t.header.opening_index = j.value("opening_index", std::size_t{0});
        // A repeated header starts a fresh copy of the session.
        if (auto it = index.find(sid); it != index.end()) {
          sessions[it->second] = std::move(t);
        } else {
          index.emplace(sid, sessions.size());
          sessions.push_back(std::move(t));
        }
      } else if (type == "utterance") {
        auto it = index.find(sid);
        if (it == index.end()) throw ParseError(where + ": utterance before session header", i + 1);
        auto speaker = parse_speaker(j.at("speaker").get<std::string>());
        if (!speaker) throw ParseError(where + ": unknown speaker", i + 1);
        sessions[it->second].utterances.push_back(
            {j.at("turn").get<int>(), *speaker, j.at("kind").get<std::string>(), j.at("text").get<std::string>()});
      } else {
        throw ParseError(where + ": unknown record type '" + type + "'", i + 1);
      }
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(where + ": " + e.what(), i + 1);
    }
  }
  return sessions;
}

std::vector<SessionTranscript> load_transcripts(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open transcript file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_transcripts(ss.str());
}

}  // namespace rounds
