#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace rounds {

// Template names. Each corresponds to prompts/<name>.txt.
namespace prompt {
inline constexpr std::string_view kTypeFilter = "type_filter";
inline constexpr std::string_view kTermFilter = "term_filter";
inline constexpr std::string_view kStructuring = "structuring";
inline constexpr std::string_view kValidation = "validation";
inline constexpr std::string_view kCategorization = "categorization";
inline constexpr std::string_view kCategorizationInput = "categorization_input";
inline constexpr std::string_view kOpenings = "openings";
inline constexpr std::string_view kSpPolicy = "sp_policy";
inline constexpr std::string_view kTask1 = "task1_clinician";
inline constexpr std::string_view kTask2 = "task2_clinician";
inline constexpr std::string_view kJudgeAccuracy = "judge_accuracy";
inline constexpr std::string_view kJudgeAccuracyInput = "judge_accuracy_input";
inline constexpr std::string_view kJudgeEvidence = "judge_evidence";
inline constexpr std::string_view kJudgeEvidenceInput = "judge_evidence_input";
inline constexpr std::string_view kGroundingCheck = "grounding_check";
}  // namespace prompt

using PromptVars = std::map<std::string, std::string, std::less<>>;

// Substitutes `{name}` slots (name = [A-Za-z_][A-Za-z0-9_]*) in one pass.
// Braces that do not form a slot, such as literal JSON, are copied as-is.
// Throws ConfigError when a slot has no value.
std::string render_template(std::string_view tmpl, const PromptVars& vars);

// Slot names in order of first appearance.
std::vector<std::string> template_slots(std::string_view tmpl);

class PromptLibrary {
 public:
  // Templates compiled into the library from prompts/*.txt.
  static const PromptLibrary& builtin();

  // Builtin templates, with any <name>.txt found in `dir` taking precedence.
  static PromptLibrary with_overrides(const std::filesystem::path& dir);

  // Throws ConfigError for unknown names.
  const std::string& get(std::string_view name) const;
  std::string render(std::string_view name, const PromptVars& vars) const;
  std::vector<std::string> names() const;

 private:
  std::map<std::string, std::string, std::less<>> templates_;
};

// The 15 clinician opening utterances, one per line of the openings template.
std::vector<std::string> opening_utterances(const PromptLibrary& lib = PromptLibrary::builtin());

namespace detail {
const std::vector<std::pair<std::string_view, std::string_view>>& embedded_prompts();
}

}  // namespace rounds
