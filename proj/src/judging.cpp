#include "rounds/judging.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "rounds/error.hpp"
#include "rounds/text.hpp"

namespace rounds {

using nlohmann::json;

std::string_view to_string(Grounding g) {
  switch (g) {
    case Grounding::GroundedExact: return "GroundedExact";
    case Grounding::GroundedSemantic: return "GroundedSemantic";
    case Grounding::Ungrounded: return "Ungrounded";
  }
  return "Ungrounded";
}

std::optional<Grounding> parse_grounding(std::string_view s) {
  for (auto g : {Grounding::GroundedExact, Grounding::GroundedSemantic, Grounding::Ungrounded}) {
    if (text::iequals(s, to_string(g))) return g;
  }
  return std::nullopt;
}

json to_json(const CaseScore& s) {
  json ev = json::array();
  for (const auto& e : s.evidence) ev.push_back({{"text", e.text}, {"grounded", to_string(e.grounded)}});
  json j = {{"model", s.model},
            {"case_id", s.case_id},
            {"task", to_string(s.task)},
            {"predicted", s.predicted},
            {"gold", s.gold},
            {"s_acc", s.s_acc},
            {"evidence", ev},
            {"s_eq", s.s_eq},
            {"judge_replies", s.judge_replies},
            {"failure_reason", s.failure_reason ? json(*s.failure_reason) : json(nullptr)}};
  return j;
}

CaseScore case_score_from_json(const json& j) {
  CaseScore s;
  try {
    s.model = j.at("model").get<std::string>();
    s.case_id = j.at("case_id").get<std::string>();
    auto task = parse_task(j.at("task").get<std::string>());
    if (!task) throw ParseError("case score: unknown task");
    s.task = *task;
    s.predicted = j.at("predicted").get<std::string>();
    s.gold = j.at("gold").get<std::string>();
    s.s_acc = j.at("s_acc").get<int>();
    s.s_eq = j.at("s_eq").get<int>();
    for (const auto& e : j.at("evidence")) {
      auto g = parse_grounding(e.at("grounded").get<std::string>());
      if (!g) throw ParseError("case score: unknown grounding verdict");
      s.evidence.push_back({e.at("text").get<std::string>(), *g});
    }
    s.judge_replies = j.value("judge_replies", std::vector<std::string>{});
    if (j.contains("failure_reason") && j["failure_reason"].is_string()) {
      s.failure_reason = j["failure_reason"].get<std::string>();
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("case score: ") + e.what());
  }
  if (s.s_acc < 0 || s.s_acc > 2 || s.s_eq < 0 || s.s_eq > 2) throw ParseError("case score: score out of range");
  return s;
}

// --- Tier 1 ----------------------------------------------------------------

std::string normalize_for_grounding(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (unsigned char c : s) {
    // Non-ASCII bytes (units such as "°" or "µ") count as word characters.
    if (std::isalnum(c) || c >= 0x80) {
      if (pending_space && !out.empty()) out.push_back(' ');
      pending_space = false;
      out.push_back(static_cast<char>(std::tolower(c)));
    } else {
      pending_space = true;
    }
  }
  return out;
}

const std::set<std::string>& hedge_words() {
  static const std::set<std::string> words = {"likely",   "possibly",   "probably",    "presumably", "suggests",
                                              "suggesting", "suggestive", "indicative", "apparently",
                                              "possible", "probable",   "suspected"};
  return words;
}

namespace {

// Strips "1.", "2)", "(3)", "-", "*" and similar list markers.
std::string_view strip_enumerators(std::string_view s) {
  for (;;) {
    std::size_t i = 0;
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    if (j < s.size() && (s[j] == '-' || s[j] == '*')) {
      ++j;
    } else {
      std::size_t k = j;
      if (k < s.size() && s[k] == '(') ++k;
      std::size_t digits = k;
      while (digits < s.size() && std::isdigit(static_cast<unsigned char>(s[digits]))) ++digits;
      if (digits == k || digits - k > 2 || digits >= s.size() || (s[digits] != '.' && s[digits] != ')')) {
        return s.substr(i);
      }
      j = digits + 1;
    }
    if (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) return s.substr(i);
    s = s.substr(j);
  }
}

std::string drop_words(std::string_view normalized, const std::set<std::string>& drop) {
  std::string out;
  for (const auto& w : text::split_words(normalized)) {
    if (drop.contains(w)) continue;
    if (!out.empty()) out.push_back(' ');
    out += w;
  }
  return out;
}

bool padded_contains(const std::string& haystack, const std::string& needle) {
  return (" " + haystack + " ").find(" " + needle + " ") != std::string::npos;
}

}  // namespace

std::string factual_core(std::string_view item) {
  return drop_words(normalize_for_grounding(strip_enumerators(item)), hedge_words());
}

bool lexically_grounded(std::string_view item, std::string_view corpus) {
  const std::string core = factual_core(item);
  if (core.empty()) return false;
  return padded_contains(normalize_for_grounding(corpus), core);
}

// --- reply parsing -----------------------------------------------------------

int parse_judge_score(std::string_view reply) {
  const std::string t = text::trim(reply);
  if (t == "0" || t == "1" || t == "2") return t[0] - '0';
  throw ReplyFormatError("judge reply is not a single integer in {0,1,2}", std::string(reply));
}

bool parse_yes_no(std::string_view reply) {
  std::string t = text::to_lower(text::trim(reply));
  if (!t.empty() && t.back() == '.') t.pop_back();
  if (t == "yes") return true;
  if (t == "no") return false;
  throw ReplyFormatError("judge reply is not yes or no", std::string(reply));
}

// --- LLM judge -------------------------------------------------------------

namespace {

std::string numbered(const std::vector<EvidenceVerdict>& evidence) {
  std::string out;
  for (std::size_t i = 0; i < evidence.size(); ++i) {
    if (i) out.push_back('\n');
    out += std::to_string(i + 1) + ". " + evidence[i].text;
  }
  return out;
}

}  // namespace

LlmJudge::LlmJudge(std::shared_ptr<ChatBackend> backend, const EndpointConfig& config, PromptLibrary prompts)
    : backend_(std::move(backend)), prompts_(std::move(prompts)) {
  config.validate_for_judge();
  if (!backend_) throw ConfigError("judge: no backend");
}

std::unique_ptr<LlmJudge> LlmJudge::connect(const EndpointConfig& config, PromptLibrary prompts) {
  config.validate_for_judge();
  return std::make_unique<LlmJudge>(std::make_shared<ChatClient>(config), config, std::move(prompts));
}

ChatHistory LlmJudge::accuracy_request(std::string_view predicted, std::string_view gold) const {
  return {{Role::System, prompts_.get(prompt::kJudgeAccuracy)},
          {Role::User, prompts_.render(prompt::kJudgeAccuracyInput,
                                       {{"prediction", std::string(predicted)}, {"gold", std::string(gold)}})}};
}

ChatHistory LlmJudge::evidence_request(std::string_view predicted, const std::vector<EvidenceVerdict>& evidence,
                                       std::string_view corpus) const {
  return {{Role::System, prompts_.get(prompt::kJudgeEvidence)},
          {Role::User, prompts_.render(prompt::kJudgeEvidenceInput, {{"corpus", std::string(corpus)},
                                                                     {"prediction", std::string(predicted)},
                                                                     {"evidence", numbered(evidence)}})}};
}

ChatHistory LlmJudge::support_request(std::string_view item, std::string_view corpus) const {
  return {{Role::User, prompts_.render(prompt::kGroundingCheck,
                                       {{"corpus", std::string(corpus)}, {"evidence", std::string(item)}})}};
}

JudgeReply LlmJudge::accuracy(std::string_view predicted, std::string_view gold) {
  std::string raw = backend_->complete(accuracy_request(predicted, gold));
  return {parse_judge_score(raw), raw};
}

JudgeReply LlmJudge::evidence(std::string_view predicted, const std::vector<EvidenceVerdict>& evidence,
                              std::string_view corpus) {
  std::string raw = backend_->complete(evidence_request(predicted, evidence, corpus));
  return {parse_judge_score(raw), raw};
}

bool LlmJudge::supports(std::string_view item, std::string_view corpus, std::string* raw) {
  std::string reply = backend_->complete(support_request(item, corpus));
  if (raw) *raw = reply;
  return parse_yes_no(reply);
}

// --- stub judge ------------------------------------------------------------

std::string_view to_string(StubMode m) { return m == StubMode::ExactMatch ? "ExactMatch" : "SynonymTable"; }

std::optional<StubMode> parse_stub_mode(std::string_view s) {
  if (text::iequals(s, "ExactMatch")) return StubMode::ExactMatch;
  if (text::iequals(s, "SynonymTable")) return StubMode::SynonymTable;
  return std::nullopt;
}

StubTables StubTables::defaults() {
  StubTables t;
  t.equivalents = {{"Heart Attack", "Myocardial Infarction"}};
  t.same_category = {{"Meningitis", "Viral Meningitis"}};
  t.phrase_synonyms = {{"hr", "heart rate"},
                       {"bp", "blood pressure"},
                       {"rr", "respiratory rate"},
                       {"wbc", "white blood cell"},
                       {"white blood cells", "white blood cell"},
                       {"leukocytes", "white blood cell"},
                       {"crp", "c reactive protein"},
                       {"esr", "erythrocyte sedimentation rate"},
                       {"ecg", "electrocardiogram"},
                       {"ekg", "electrocardiogram"},
                       {"mri", "magnetic resonance imaging"},
                       {"ct", "computed tomography"},
                       {"cxr", "chest x ray"},
                       {"febrile", "fever"},
                       {"pyrexia", "fever"}};
  t.qualifiers = {"markedly", "mildly",   "moderately", "severely", "significantly", "slightly", "very",
                  "elevated", "raised",   "high",       "increased", "decreased",    "low",      "reduced",
                  "marked",   "mild",     "moderate",   "severe",    "abnormal",     "abnormally", "level",
                  "levels",   "of",       "the",        "a",         "an",           "and",      "with",
                  "in",       "on",       "was",        "were",      "is",           "are",      "showed",
                  "shows",    "revealed", "reveals",    "noted",     "finding",      "findings", "value",
                  "values",   "patient",  "has",        "had"};
  return t;
}

StubJudge::StubJudge(StubMode mode, StubTables tables) : mode_(mode), tables_(std::move(tables)) {}

namespace {

bool pair_listed(const std::vector<std::pair<std::string, std::string>>& pairs, const std::string& a,
                 const std::string& b) {
  for (const auto& [x, y] : pairs) {
    const auto nx = text::normalize_loose(x);
    const auto ny = text::normalize_loose(y);
    if ((nx == a && ny == b) || (nx == b && ny == a)) return true;
  }
  return false;
}

std::string rewrite_phrases(std::string s, const std::map<std::string, std::string>& synonyms) {
  for (const auto& [from, to] : synonyms) {
    const std::string f = " " + normalize_for_grounding(from) + " ";
    const std::string t = " " + normalize_for_grounding(to) + " ";
    std::string padded = " " + s + " ";
    for (std::size_t p = padded.find(f); p != std::string::npos; p = padded.find(f, p + t.size() - 1)) {
      padded.replace(p, f.size(), t);
    }
    s = text::trim(padded);
  }
  return s;
}

}  // namespace

JudgeReply StubJudge::accuracy(std::string_view predicted, std::string_view gold) {
  const std::string p = text::normalize_loose(predicted);
  const std::string g = text::normalize_loose(gold);
  int score = 0;
  if (!p.empty() && p == g) {
    score = 2;
  } else if (mode_ == StubMode::SynonymTable) {
    if (pair_listed(tables_.equivalents, p, g)) score = 2;
    else if (pair_listed(tables_.same_category, p, g)) score = 1;
  }
  return {score, std::to_string(score)};
}

JudgeReply StubJudge::evidence(std::string_view, const std::vector<EvidenceVerdict>& evidence, std::string_view) {
  std::size_t grounded = 0;
  for (const auto& e : evidence) grounded += e.grounded != Grounding::Ungrounded;
  int score = grounded == 0 ? 0 : (grounded == evidence.size() ? 2 : 1);
  return {score, std::to_string(score)};
}

bool StubJudge::supports(std::string_view item, std::string_view corpus, std::string* raw) {
  const std::string core = rewrite_phrases(factual_core(item), tables_.phrase_synonyms);
  const std::string body = rewrite_phrases(normalize_for_grounding(corpus), tables_.phrase_synonyms);
  std::set<std::string> vocabulary;
  for (auto& w : text::split_words(body)) vocabulary.insert(std::move(w));
  bool any = false;
  bool all = true;
  for (const auto& w : text::split_words(core)) {
    if (tables_.qualifiers.contains(w)) continue;
    any = true;
    if (!vocabulary.contains(w)) {
      all = false;
      break;
    }
  }
  const bool yes = any && all;
  if (raw) *raw = yes ? "yes" : "no";
  return yes;
}

// --- scoring -----------------------------------------------------------------

Grounding ground_evidence(std::string_view item, std::string_view corpus, Judge& judge,
                          std::vector<std::string>* replies) {
  if (lexically_grounded(item, corpus)) return Grounding::GroundedExact;
  std::string raw;
  const bool yes = judge.supports(item, corpus, &raw);
  if (replies) replies->push_back(raw);
  return yes ? Grounding::GroundedSemantic : Grounding::Ungrounded;
}

int score_accuracy(std::string_view predicted, std::string_view gold, Judge& judge, std::vector<std::string>* replies) {
  JudgeReply r = judge.accuracy(predicted, gold);
  if (replies) replies->push_back(r.raw);
  return r.score;
}

int apply_grounding_cap(int judge_score, const std::vector<EvidenceVerdict>& evidence) {
  std::size_t ungrounded = 0;
  for (const auto& e : evidence) ungrounded += e.grounded == Grounding::Ungrounded;
  if (evidence.empty() || ungrounded == evidence.size()) return 0;
  if (ungrounded > 0 || evidence.size() < kMaxEvidence) return std::min(judge_score, 1);
  return judge_score;
}

int score_evidence(std::string_view predicted, const std::vector<EvidenceVerdict>& evidence, std::string_view corpus,
                   Judge& judge, std::vector<std::string>* replies) {
  JudgeReply r = judge.evidence(predicted, evidence, corpus);
  if (replies) replies->push_back(r.raw);
  return apply_grounding_cap(r.score, evidence);
}

std::string task1_corpus(const StructuredCase& c) { return format_record(c.sections); }

CaseScore score_case(std::string_view model, const StructuredCase& c, Task task, std::string_view reply,
                     std::string_view corpus, Judge& judge) {
  CaseScore s;
  s.model = std::string(model);
  s.case_id = c.case_id;
  s.task = task;
  s.gold = c.gold_diagnosis;

  FinalDiagnosis fd;
  try {
    fd = extract_final_diagnosis(reply);
  } catch (const FinalDiagnosisError& e) {
    s.failure_reason = std::string(e.code());
    return s;
  }
  s.predicted = fd.diagnosis;
  for (const auto& item : fd.evidence) {
    s.evidence.push_back({item, ground_evidence(item, corpus, judge, &s.judge_replies)});
  }
  s.s_acc = score_accuracy(s.predicted, s.gold, judge, &s.judge_replies);
  if (s.evidence.empty()) {
    s.failure_reason = "no-evidence";
  } else {
    s.s_eq = score_evidence(s.predicted, s.evidence, corpus, judge, &s.judge_replies);
  }
  return s;
}

}  // namespace rounds
