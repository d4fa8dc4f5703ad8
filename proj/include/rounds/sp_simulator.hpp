#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "rounds/action_parser.hpp"
#include "rounds/case_model.hpp"

// Rule-based standardized patient. Releases record text only in answer to
// recognized requests, returns it verbatim, and answers everything else with
// fixed strings that carry no case content.
namespace rounds {

enum class Speaker { Doctor, Patient };

enum class ResponseKind { Opening, Hit, Miss, Nudge, RepetitionRefusal, ForcedDiagnosisRequest, Closed };

enum class SessionStatus { Open, DiagnosisSubmitted, TurnCapForced };

std::string_view to_string(Speaker s);
std::string_view to_string(ResponseKind k);
std::string_view to_string(SessionStatus s);
std::optional<Speaker> parse_speaker(std::string_view s);

inline constexpr int kDefaultMaxTurns = 10;

// Fixed patient-side texts.
inline constexpr std::string_view kMissText = "This test was not performed yet.";
inline constexpr std::string_view kRepetitionText =
    "This information has already been requested. Do not repeat tests or modules.";
inline constexpr std::string_view kNudgeText =
    "Please choose exactly one action per turn: [History of Present Illness], [Past Medical History], "
    "[Physical Examination], Request [Laboratory Tests: test_name], Request [Imaging Studies: test_name], "
    "Request [Functional Tests: test_name], Request [Specialized Panels: test_name], or [Final Diagnosis].";
inline constexpr std::string_view kForcedDiagnosisText =
    "The maximum number of turns has been reached. No further information will be provided. "
    "Please give your [Final Diagnosis] now, with the evidence that confirms it.";
inline constexpr std::string_view kDiagnosisReceivedText = "Final diagnosis received. The consultation is closed.";
inline constexpr std::string_view kClosedText =
    "The consultation has ended. Only a [Final Diagnosis] can be accepted now.";

struct SimResponse {
  ResponseKind kind = ResponseKind::Nudge;
  std::string payload;
  // Record text released by this response, each element a verbatim copy of
  // a stored section or exam result. Empty unless kind is Opening or Hit.
  std::vector<std::string> released;
};

struct Utterance {
  int turn = 0;
  Speaker speaker = Speaker::Doctor;
  std::string kind;
  std::string text;

  bool operator==(const Utterance&) const = default;
};

// Alias table applied to normalized test names before matching.
std::map<std::string, std::string> default_test_synonyms();

struct SimulatorOptions {
  int max_turns = kDefaultMaxTurns;
  std::map<std::string, std::string> synonyms = default_test_synonyms();
  // Optional rewrite of Hit payloads (e.g. an LLM paraphrase layer). Unset
  // by default; released fragments stay verbatim either way.
  std::function<std::string(std::string_view)> paraphrase;
};

struct SessionState {
  const StructuredCase* record = nullptr;
  std::set<Module> revealed_modules;
  std::set<std::string> served_tests;
  std::set<std::string> missed_tests;
  std::set<std::size_t> served_exams;
  int turn = 0;           // doctor turns consumed
  int doctor_messages = 0;
  int max_turns = kDefaultMaxTurns;
  std::vector<Utterance> transcript;
  SessionStatus status = SessionStatus::Open;
  std::uint64_t seed = 0;
  std::size_t opening_index = 0;
  std::vector<std::string> corpus;  // Opening and Hit payloads, in order
};

// Index of the auxiliary exam a request refers to: exact normalized name,
// then token-subset match, after applying the synonym table.
std::optional<std::size_t> match_exam(const StructuredCase& c, std::string_view request,
                                      const std::map<std::string, std::string>& synonyms);

std::string normalize_test_name(std::string_view name,
                                const std::map<std::string, std::string>& synonyms = {});

std::size_t opening_index_for(const StructuredCase& c, std::uint64_t seed, std::size_t template_count);

class Session {
 public:
  // The case must outlive the session. Throws SchemaError for invalid cases
  // and PreconditionError for max_turns < 1.
  static Session open(const StructuredCase& c, std::uint64_t seed, SimulatorOptions options = {});

  // Throws SessionClosedError once a diagnosis has been submitted.
  SimResponse step(std::string_view doctor_message);

  const SessionState& state() const { return state_; }
  const std::string& opening_prompt() const { return opening_prompt_; }
  const std::string& reveal() const { return reveal_; }
  bool finished() const { return state_.status == SessionStatus::DiagnosisSubmitted; }

  // Everything the doctor has actually been shown, joined by newlines.
  std::string revealed_corpus() const;

 private:
  SimResponse handle_module(Module m);
  SimResponse handle_test(const RequestTest& t);

  SessionState state_;
  SimulatorOptions options_;
  std::string opening_prompt_;
  std::string reveal_;
};

}  // namespace rounds
