#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "rounds/action_parser.hpp"
#include "rounds/agent_gateway.hpp"
#include "rounds/case_model.hpp"
#include "rounds/prompts.hpp"
#include "rounds/task.hpp"

namespace rounds {

enum class Grounding { GroundedExact, GroundedSemantic, Ungrounded };
std::string_view to_string(Grounding g);
std::optional<Grounding> parse_grounding(std::string_view s);

struct EvidenceVerdict {
  std::string text;
  Grounding grounded = Grounding::Ungrounded;

  bool operator==(const EvidenceVerdict&) const = default;
};

struct CaseScore {
  std::string model;
  std::string case_id;
  Task task = Task::Task1;
  std::string predicted;
  std::string gold;
  int s_acc = 0;
  std::vector<EvidenceVerdict> evidence;
  int s_eq = 0;
  std::vector<std::string> judge_replies;
  // Set when the case was scored without consulting the judge, e.g.
  // "missing-tag" when the reply carried no [Final Diagnosis].
  std::optional<std::string> failure_reason;

  bool operator==(const CaseScore&) const = default;
};

nlohmann::json to_json(const CaseScore& s);
CaseScore case_score_from_json(const nlohmann::json& j);

// Lowercased, punctuation replaced by spaces, whitespace collapsed.
std::string normalize_for_grounding(std::string_view s);

// Words dropped from evidence items before lexical matching.
const std::set<std::string>& hedge_words();

// Normalized item with leading enumerators/bullets and hedge words removed.
std::string factual_core(std::string_view item);

// Tier 1: the factual core occurs token-aligned in the normalized corpus.
bool lexically_grounded(std::string_view item, std::string_view corpus);

// Reply parsing. Only surrounding whitespace is tolerated.
int parse_judge_score(std::string_view reply);
bool parse_yes_no(std::string_view reply);

struct JudgeReply {
  int score = 0;
  std::string raw;
};

class Judge {
 public:
  virtual ~Judge() = default;
  virtual JudgeReply accuracy(std::string_view predicted, std::string_view gold) = 0;
  virtual JudgeReply evidence(std::string_view predicted, const std::vector<EvidenceVerdict>& evidence,
                              std::string_view corpus) = 0;
  // Tier 2: is the item stated in or directly implied by the corpus?
  virtual bool supports(std::string_view item, std::string_view corpus, std::string* raw = nullptr) = 0;
};

// Renders the judge prompts and parses replies. The endpoint must be
// configured for greedy decoding; that is checked before any request.
class LlmJudge : public Judge {
 public:
  LlmJudge(std::shared_ptr<ChatBackend> backend, const EndpointConfig& config,
           PromptLibrary prompts = PromptLibrary::builtin());
  static std::unique_ptr<LlmJudge> connect(const EndpointConfig& config,
                                           PromptLibrary prompts = PromptLibrary::builtin());

  JudgeReply accuracy(std::string_view predicted, std::string_view gold) override;
  JudgeReply evidence(std::string_view predicted, const std::vector<EvidenceVerdict>& evidence,
                      std::string_view corpus) override;
  bool supports(std::string_view item, std::string_view corpus, std::string* raw) override;

  ChatHistory accuracy_request(std::string_view predicted, std::string_view gold) const;
  ChatHistory evidence_request(std::string_view predicted, const std::vector<EvidenceVerdict>& evidence,
                               std::string_view corpus) const;
  ChatHistory support_request(std::string_view item, std::string_view corpus) const;

 private:
  std::shared_ptr<ChatBackend> backend_;
  PromptLibrary prompts_;
};

enum class StubMode { ExactMatch, SynonymTable };
std::string_view to_string(StubMode m);
std::optional<StubMode> parse_stub_mode(std::string_view s);

struct StubTables {
  std::vector<std::pair<std::string, std::string>> equivalents;    // scored 2
  std::vector<std::pair<std::string, std::string>> same_category;  // scored 1
  // Tier-2 phrase rewrites applied to items, e.g. "heart rate" -> "hr".
  std::map<std::string, std::string> phrase_synonyms;
  // Severity and direction words ignored by the Tier-2 check.
  std::set<std::string> qualifiers;

  // The two worked examples of the scoring scale plus default tables.
  static StubTables defaults();
};

// Deterministic offline judge.
//   accuracy  ExactMatch: 2 iff normalized strings are equal, else 0.
//             SynonymTable: also 2 for configured equivalents and 1 for
//             configured same-category pairs (both directions).
//   supports  every content word of the item, after phrase rewrites and
//             dropping qualifiers and hedges, appears in the corpus.
//   evidence  2 when all items are grounded, 1 when some are, else 0.
class StubJudge : public Judge {
 public:
  explicit StubJudge(StubMode mode, StubTables tables = StubTables::defaults());

  JudgeReply accuracy(std::string_view predicted, std::string_view gold) override;
  JudgeReply evidence(std::string_view predicted, const std::vector<EvidenceVerdict>& evidence,
                      std::string_view corpus) override;
  bool supports(std::string_view item, std::string_view corpus, std::string* raw) override;

  StubMode mode() const { return mode_; }

 private:
  StubMode mode_;
  StubTables tables_;
};

// Tier 1, then Tier 2 through the judge.
Grounding ground_evidence(std::string_view item, std::string_view corpus, Judge& judge,
                          std::vector<std::string>* replies = nullptr);

int score_accuracy(std::string_view predicted, std::string_view gold, Judge& judge,
                   std::vector<std::string>* replies = nullptr);

// Judge score with the grounding cap applied.
int score_evidence(std::string_view predicted, const std::vector<EvidenceVerdict>& evidence, std::string_view corpus,
                   Judge& judge, std::vector<std::string>* replies = nullptr);

// Cap alone: any Ungrounded item or fewer than three items limits the score
// to 1; no grounded item at all forces 0.
int apply_grounding_cap(int judge_score, const std::vector<EvidenceVerdict>& evidence);

// Full record for Task 1, everything the patient released for Task 2.
std::string task1_corpus(const StructuredCase& c);

// Scores one finished case. `reply` is the doctor's final message; a reply
// without a usable [Final Diagnosis] scores 0/0 with a failure reason and no
// judge call.
CaseScore score_case(std::string_view model, const StructuredCase& c, Task task, std::string_view reply,
                     std::string_view corpus, Judge& judge);

}  // namespace rounds
