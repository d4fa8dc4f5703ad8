#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace rounds {

enum class Source { MedQA, MedMCQA, MedFound, MedCaseReasoning, Custom };

enum class SystemCategory {
  Cardiovascular,
  Respiratory,
  GastroHepatobiliary,
  Neurological,
  InfectiousDiseases,
  MetabolicRenalGenitourinary,
  Other,
};

// The six systems a balanced cohort is stratified over (everything but Other).
inline constexpr SystemCategory kCoreSystems[] = {
    SystemCategory::Cardiovascular,     SystemCategory::Respiratory,
    SystemCategory::GastroHepatobiliary, SystemCategory::Neurological,
    SystemCategory::InfectiousDiseases, SystemCategory::MetabolicRenalGenitourinary,
};

std::string_view to_string(Source s);
std::string_view to_string(SystemCategory c);
std::optional<Source> parse_source(std::string_view s);
std::optional<SystemCategory> parse_system_category(std::string_view s);

// Record sections that are released as a whole. Auxiliary examinations are
// released per entry and are not part of this enum.
enum class Module { PatientInfo, ChiefComplaint, HPI, PMH, PhysicalExam };

// Human-readable section title, e.g. "History of Present Illness".
std::string_view module_title(Module m);

// Text used for absent information in any section.
inline constexpr std::string_view kNoneSentinel = "None";

struct AuxiliaryExam {
  std::string name;
  std::string result;

  bool operator==(const AuxiliaryExam&) const = default;
};

struct CaseSections {
  std::string patient_info;
  std::string chief_complaint;
  std::string hpi;
  std::string pmh;
  std::string physical_exam;
  std::vector<AuxiliaryExam> auxiliary_exams;

  bool operator==(const CaseSections&) const = default;
};

struct StructuredCase {
  std::string case_id;
  Source source = Source::Custom;
  SystemCategory system_category = SystemCategory::Other;
  CaseSections sections;
  std::string gold_diagnosis;
  std::optional<std::string> raw_source_text;

  bool operator==(const StructuredCase&) const = default;
};

struct Violation {
  std::string field;
  std::string rule;

  bool operator==(const Violation&) const = default;
};

// Empty iff every StructuredCase invariant holds.
std::vector<Violation> validate_case(const StructuredCase& c);

// Stored text of a whole-section module, byte for byte.
const std::string& section_text(const StructuredCase& c, Module m);

// Renders the six-section record in the numbered layout the curation
// prompts use ("1. Patient Information\n- ..."). This is the full-context
// view of a case.
std::string format_record(const CaseSections& s);

// Immutable, validated collection of cases with unique ids.
class Cohort {
 public:
  Cohort() = default;
  // Throws SchemaError on the first invalid case or duplicate id.
  explicit Cohort(std::vector<StructuredCase> cases);

  const std::vector<StructuredCase>& cases() const { return cases_; }
  std::size_t size() const { return cases_.size(); }
  bool empty() const { return cases_.empty(); }
  const std::map<SystemCategory, std::size_t>& stratification() const { return stratification_; }

  // nullptr when the id is unknown.
  const StructuredCase* find(std::string_view case_id) const;

 private:
  std::vector<StructuredCase> cases_;
  std::map<SystemCategory, std::size_t> stratification_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

nlohmann::json case_to_json(const StructuredCase& c);
// Throws SchemaError naming the case and field for missing/mistyped fields.
StructuredCase case_from_json(const nlohmann::json& j);

// Accepts either a cohort document {"cases":[...]} or JSONL with one case
// object per line. Empty input yields an empty cohort.
Cohort parse_cohort(std::string_view bytes);
Cohort load_cohort(const std::filesystem::path& path);

std::string serialize_cohort(const Cohort& cohort);
std::string serialize_cohort_jsonl(const Cohort& cohort);

}  // namespace rounds
