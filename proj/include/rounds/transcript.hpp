#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "rounds/sp_simulator.hpp"
#include "rounds/task.hpp"

// JSONL transcript format. Each session is a header record followed by one
// record per utterance:
//
//   {"type":"header","session_id":..,"case_id":..,"model":..,"task":..,
//    "seed":..,"max_turns":..,"opening_index":..}
//   {"type":"utterance","session_id":..,"turn":..,"speaker":"Doctor"|"Patient",
//    "kind":..,"text":..}
namespace rounds {

struct TranscriptHeader {
  std::string session_id;
  std::string case_id;
  std::string model;
  Task task = Task::Task2;
  std::uint64_t seed = 0;
  int max_turns = kDefaultMaxTurns;
  std::size_t opening_index = 0;

  bool operator==(const TranscriptHeader&) const = default;
};

struct SessionTranscript {
  TranscriptHeader header;
  std::vector<Utterance> utterances;

  bool operator==(const SessionTranscript&) const = default;
};

std::string make_session_id(std::string_view model, Task task, std::string_view case_id);

std::string to_jsonl(const SessionTranscript& t);

// Groups records by session_id in order of first appearance. When a session
// appears more than once (a resumed run re-executed it), the last complete
// copy wins. Throws ParseError with the 1-based line number.
std::vector<SessionTranscript> parse_transcripts(std::string_view jsonl);
std::vector<SessionTranscript> load_transcripts(const std::filesystem::path& path);

}  // namespace rounds
