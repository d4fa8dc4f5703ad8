#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "rounds/case_model.hpp"
#include "rounds/error.hpp"

// Grammar for doctor-agent messages. An action is one of eight bracketed
// productions, matched case-insensitively with free whitespace inside the
// brackets:
//
//   [History of Present Illness]
//   [Past Medical History]
//   [Physical Examination]
//   Request [Laboratory Tests: <name>]
//   Request [Imaging Studies: <name>]
//   Request [Functional Tests: <name>]
//   Request [Specialized Panels: <name>]
//   [Final Diagnosis] <diagnosis>. Confirmed by: 1. <e1> 2. <e2> 3. <e3>
//
// The "Request" keyword is optional for every production. Only the first
// action in a message counts; later ones are tallied and ignored.
namespace rounds {

enum class TestCategory { Laboratory, Imaging, Functional, SpecializedPanels };

// Bracket keyword for the category, e.g. "Laboratory Tests".
std::string_view to_string(TestCategory c);
std::optional<TestCategory> parse_test_category(std::string_view keyword);

// Maps a bracketed request such as "[Imaging Studies: CT head]" (brackets
// and test name optional) to its category.
std::optional<TestCategory> classify_test_category(std::string_view request);

struct RequestModule {
  Module module = Module::HPI;  // HPI, PMH or PhysicalExam
  bool operator==(const RequestModule&) const = default;
};

struct RequestTest {
  TestCategory category = TestCategory::Laboratory;
  std::string test_name;
  bool operator==(const RequestTest&) const = default;
};

struct FinalDiagnosis {
  std::string diagnosis;
  std::vector<std::string> evidence;  // at most kMaxEvidence items
  bool operator==(const FinalDiagnosis&) const = default;
};

struct Malformed {
  std::string reason;
  bool operator==(const Malformed&) const = default;
};

inline constexpr std::size_t kMaxEvidence = 3;

struct DoctorAction {
  std::variant<RequestModule, RequestTest, FinalDiagnosis, Malformed> variant;
  std::optional<std::string> rationale;

  template <typename T>
  bool is() const { return std::holds_alternative<T>(variant); }
  template <typename T>
  const T& as() const { return std::get<T>(variant); }

  // "RequestHPI", "RequestPMH", "RequestPhysicalExam", "RequestTest",
  // "FinalDiagnosis" or "Malformed".
  std::string_view kind_name() const;

  bool operator==(const DoctorAction&) const = default;
};

struct ParseOutcome {
  DoctorAction action;
  std::size_t extra_actions_ignored = 0;
  std::string raw_text;
};

// Total: every input maps to exactly one action.
ParseOutcome parse_doctor_message(std::string_view text);

// Consulted only when the grammar finds no action. Returning nullopt keeps
// the Malformed result. Off unless a caller supplies one.
using FallbackClassifier = std::function<std::optional<DoctorAction>(std::string_view)>;
ParseOutcome parse_doctor_message(std::string_view text, const FallbackClassifier& fallback);

class FinalDiagnosisError : public ReplyFormatError {
 public:
  enum class Reason { MissingTag, EmptyDiagnosis };
  FinalDiagnosisError(Reason reason, std::string reply);
  Reason reason() const { return reason_; }
  // "missing-tag" or "empty-diagnosis".
  std::string_view code() const;

 private:
  Reason reason_;
};

// Diagnosis and evidence following the first [Final Diagnosis] tag.
// Throws FinalDiagnosisError.
FinalDiagnosis extract_final_diagnosis(std::string_view text);

// Canonical text for an action; parse_doctor_message inverts it.
std::string render_action(const DoctorAction& action);

nlohmann::json to_json(const ParseOutcome& outcome);

}  // namespace rounds
