#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "rounds/agent_gateway.hpp"
#include "rounds/case_model.hpp"
#include "rounds/prompts.hpp"

// Cohort construction: diagnosis-only filtering, structuring into the
// six-section record, a fabrication check, system categorization and
// balanced stratification.
namespace rounds {

struct RawItem {
  std::string item_id;
  std::string question_text;
  std::optional<std::string> options_text;
  Source source = Source::Custom;
  // Supplied by the caller; never inferred from the text.
  std::string gold_diagnosis;
};

RawItem raw_item_from_json(const nlohmann::json& j);
// One JSON object per line. Throws ParseError with the line number.
std::vector<RawItem> parse_raw_items(std::string_view jsonl);

enum class Stage { TypeFilter, TermFilter, Structuring, Validation, Categorization };
enum class Verdict { Pass, Fail };
std::string_view to_string(Stage s);
std::string_view to_string(Verdict v);

struct PipelineDecision {
  std::string item_id;
  Stage stage = Stage::TypeFilter;
  Verdict verdict = Verdict::Fail;
  std::string raw_model_reply;
  // Why a stage failed without a usable reply (parse error, leakage...).
  std::optional<std::string> detail;
};

nlohmann::json to_json(const PipelineDecision& d);
std::string audit_jsonl(const std::vector<PipelineDecision>& decisions);

// "Yes." -> true, "NO" -> false, anything else -> nullopt.
std::optional<bool> normalize_yes_no(std::string_view reply);

// Stage I. Throw ReplyFormatError when the reply is neither yes nor no.
PipelineDecision filter_diagnosis_type(const RawItem& item, ChatBackend& backend,
                                       const PromptLibrary& prompts = PromptLibrary::builtin());
// Throws PreconditionError for empty options.
PipelineDecision filter_diagnosis_term(std::string_view options_text, ChatBackend& backend,
                                       const PromptLibrary& prompts = PromptLibrary::builtin());

// Parses a "1. Patient Information" ... "6. Auxiliary Examination" reply.
// Bullet markers are dropped, empty sections become "None". Throws
// ParseError when fewer than six sections are recognized.
CaseSections parse_structured_reply(std::string_view reply);

// "(1) Imaging test: ..." entries; text without enumerators is split on
// "name: result" lines, and anything else is one "Auxiliary Findings" entry.
std::vector<AuxiliaryExam> split_auxiliary(std::string_view section);

struct StructuringResult {
  CaseSections sections;
  std::string raw_model_reply;
};

// Stage II. Throws ParseError on unrecognized structure and SchemaError when
// the gold diagnosis leaks into any section.
StructuringResult structure_case(const RawItem& item, ChatBackend& backend,
                                 const PromptLibrary& prompts = PromptLibrary::builtin());

// Stage III.
PipelineDecision validate_structuring(std::string_view raw, const CaseSections& structured, ChatBackend& backend,
                                      const PromptLibrary& prompts = PromptLibrary::builtin());

struct Categorization {
  std::string primary_diagnosis;
  SystemCategory category = SystemCategory::Other;
  std::string raw_model_reply;
};

// Fuzzy category names: "Respiratory System", "Gastro-Hepatobiliary", ...
std::optional<SystemCategory> match_category_label(std::string_view label);

// Throws ParseError when no JSON object is found and ReplyFormatError for an
// unknown category.
Categorization categorize_diagnosis(std::string_view diagnosis, ChatBackend& backend,
                                    const PromptLibrary& prompts = PromptLibrary::builtin());

// Stable sort by case_id, then the first `per_system` cases of each of the
// six systems. Throws PreconditionError naming the short category.
Cohort stratify_cohort(std::vector<StructuredCase> cases, std::size_t per_system);

struct PipelineResult {
  std::vector<StructuredCase> accepted;
  std::vector<PipelineDecision> audit;
};

// Runs every stage for each item in order and stops an item at its first
// failure. Items without options skip the term filter.
PipelineResult run_pipeline(const std::vector<RawItem>& items, ChatBackend& backend,
                            const PromptLibrary& prompts = PromptLibrary::builtin());

}  // namespace rounds
