#include "rounds/curation.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <map>

#include "rounds/error.hpp"
#include "rounds/text.hpp"

namespace rounds {

using nlohmann::json;

RawItem raw_item_from_json(const json& j) {
  RawItem item;
  try {
    item.item_id = j.at("item_id").get<std::string>();
    item.question_text = j.at("question_text").get<std::string>();
    if (j.contains("options_text") && j["options_text"].is_string()) item.options_text = j["options_text"].get<std::string>();
    if (j.contains("source")) {
      auto s = parse_source(j["source"].get<std::string>());
      if (!s) throw SchemaError(item.item_id, "source", "unknown source");
      item.source = *s;
    }
    item.gold_diagnosis = j.value("gold_diagnosis", std::string());
  } catch (const json::exception& e) {
    throw SchemaError(item.item_id, "raw item", e.what());
  }
  if (item.question_text.empty()) throw SchemaError(item.item_id, "question_text", "empty");
  return item;
}

std::vector<RawItem> parse_raw_items(std::string_view jsonl) {
  std::vector<json> docs;
  std::size_t line_no = 0;
  for (const auto& line : text::split_lines(jsonl)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    auto j = json::parse(line, nullptr, false);
    if (j.is_discarded()) throw ParseError("raw items: invalid JSON on line " + std::to_string(line_no), line_no);
    docs.push_back(std::move(j));
  }
  std::vector<RawItem> out;
  for (const auto& j : docs) out.push_back(raw_item_from_json(j));
  return out;
}

std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::TypeFilter: return "TypeFilter";
    case Stage::TermFilter: return "TermFilter";
    case Stage::Structuring: return "Structuring";
    case Stage::Validation: return "Validation";
    case Stage::Categorization: return "Categorization";
  }
  return "TypeFilter";
}

std::string_view to_string(Verdict v) { return v == Verdict::Pass ? "Pass" : "Fail"; }

json to_json(const PipelineDecision& d) {
  return {{"item_id", d.item_id},
          {"stage", to_string(d.stage)},
          {"verdict", to_string(d.verdict)},
          {"raw_model_reply", d.raw_model_reply},
          {"detail", d.detail ? json(*d.detail) : json(nullptr)}};
}

std::string audit_jsonl(const std::vector<PipelineDecision>& decisions) {
  std::string out;
  for (const auto& d : decisions) out += to_json(d).dump() + "\n";
  return out;
}

std::optional<bool> normalize_yes_no(std::string_view reply) {
  const std::string t = text::alnum_only_lower(reply);
  if (t == "yes") return true;
  if (t == "no") return false;
  return std::nullopt;
}

namespace {

std::string ask(ChatBackend& backend, ChatHistory history) { return backend.complete(history); }

PipelineDecision yes_no_decision(std::string item_id, Stage stage, std::string reply) {
  auto yes = normalize_yes_no(reply);
  if (!yes) {
    throw ReplyFormatError(std::string(to_string(stage)) + ": reply is neither yes nor no", reply);
  }
  return {std::move(item_id), stage, *yes ? Verdict::Pass : Verdict::Fail, std::move(reply), std::nullopt};
}

}  // namespace

PipelineDecision filter_diagnosis_type(const RawItem& item, ChatBackend& backend, const PromptLibrary& prompts) {
  const std::string options = item.options_text && !item.options_text->empty() ? *item.options_text : "None";
  std::string reply = ask(backend, {{Role::User, prompts.render(prompt::kTypeFilter, {{"question_text", item.question_text},
                                                                                      {"options_text", options}})}});
  return yes_no_decision(item.item_id, Stage::TypeFilter, std::move(reply));
}

PipelineDecision filter_diagnosis_term(std::string_view options_text, ChatBackend& backend, const PromptLibrary& prompts) {
  if (text::trim(options_text).empty()) throw PreconditionError("term filter: options_text is empty");
  std::string reply =
      ask(backend, {{Role::User, prompts.render(prompt::kTermFilter, {{"options_text", std::string(options_text)}})}});
  return yes_no_decision("", Stage::TermFilter, std::move(reply));
}

// --- structuring -----------------------------------------------------------

namespace {

const std::array<std::vector<std::string_view>, 6>& section_keys() {
  static const std::array<std::vector<std::string_view>, 6> keys = {{
      {"patient information", "patient info", "demographic"},
      {"chief complaint"},
      {"present illness"},
      {"past medical history", "past history", "medical history"},
      {"physical exam"},
      {"auxiliary", "ancillary", "investigation"},
  }};
  return keys;
}

std::string strip_decoration(std::string_view s) {
  std::string t = text::trim(s);
  std::size_t i = 0;
  while (i < t.size() && (t[i] == '#' || t[i] == '*' || t[i] == ' ')) ++i;
  t = t.substr(i);
  while (!t.empty() && (t.back() == '*' || t.back() == ' ')) t.pop_back();
  return t;
}

// Section number and inline content for a header line such as
// "**3. History of Present Illness**" or "3.History of present illness: ...".
std::optional<std::pair<int, std::string>> match_header(std::string_view line) {
  const std::string t = strip_decoration(line);
  if (t.empty() || t[0] < '1' || t[0] > '6') return std::nullopt;
  if (t.size() > 1 && std::isdigit(static_cast<unsigned char>(t[1]))) return std::nullopt;
  const int n = t[0] - '0';
  std::size_t i = 1;
  while (i < t.size() && (t[i] == '.' || t[i] == ')' || t[i] == ':' || t[i] == ' ')) ++i;
  std::string rest = t.substr(i);
  std::string title = rest;
  std::string inline_content;
  if (auto colon = rest.find(':'); colon != std::string::npos) {
    title = rest.substr(0, colon);
    inline_content = strip_decoration(rest.substr(colon + 1));
  }
  title = strip_decoration(title);
  const std::string norm = text::normalize_loose(title);
  // Headers are short; a numbered sentence that merely mentions a key is not one.
  if (text::split_words(norm).size() > 6) return std::nullopt;
  for (auto key : section_keys()[static_cast<std::size_t>(n - 1)]) {
    if (norm.find(key) != std::string::npos) return std::make_pair(n, inline_content);
  }
  return std::nullopt;
}

std::string strip_bullet(std::string_view line) {
  std::string t = text::trim(line);
  if (t.starts_with("- ") || t.starts_with("* ")) return text::trim(t.substr(2));
  if (t.starts_with("\xE2\x80\xA2")) return text::trim(t.substr(3));  // U+2022
  if (t == "-" || t == "*") return {};
  return t;
}

std::string section_value(const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& l : lines) {
    if (l.empty()) continue;
    if (!out.empty()) out.push_back('\n');
    out += l;
  }
  if (out.empty() || text::alnum_only_lower(out) == "none") return std::string(kNoneSentinel);
  return out;
}

bool leaks(std::string_view field, std::string_view gold) { return !gold.empty() && text::contains_icase_ws(field, gold); }

CaseSections structure_from_reply(const RawItem& item, std::string_view reply) {
  CaseSections s = parse_structured_reply(reply);
  auto check = [&](std::string_view field, std::string_view value) {
    if (leaks(value, item.gold_diagnosis)) {
      throw SchemaError(item.item_id, std::string(field), "leakage: gold diagnosis appears in the section");
    }
  };
  check("patient_info", s.patient_info);
  check("chief_complaint", s.chief_complaint);
  check("hpi", s.hpi);
  check("pmh", s.pmh);
  check("physical_exam", s.physical_exam);
  for (const auto& e : s.auxiliary_exams) {
    check("auxiliary_exams", e.name);
    check("auxiliary_exams", e.result);
  }
  return s;
}

}  // namespace

std::vector<AuxiliaryExam> split_auxiliary(std::string_view section) {
  std::vector<AuxiliaryExam> out;
  const std::string body = text::trim(section);
  if (body.empty() || text::alnum_only_lower(body) == "none") return out;

  auto name_result = [](std::string_view entry) -> std::optional<AuxiliaryExam> {
    auto colon = entry.find(':');
    if (colon == std::string_view::npos) return std::nullopt;
    std::string name = strip_decoration(entry.substr(0, colon));
    std::string result = text::trim(entry.substr(colon + 1));
    if (name.empty() || result.empty() || name.size() > 80) return std::nullopt;
    return AuxiliaryExam{std::move(name), std::move(result)};
  };

  // "(1) ... (2) ..." enumerators, in sequence.
  std::vector<std::pair<std::size_t, std::size_t>> marks;  // (start, content start)
  std::size_t from = 0;
  for (int k = 1;; ++k) {
    const std::string tag = "(" + std::to_string(k) + ")";
    auto p = body.find(tag, from);
    if (p == std::string::npos) break;
    marks.emplace_back(p, p + tag.size());
    from = p + tag.size();
  }
  if (!marks.empty()) {
    for (std::size_t i = 0; i < marks.size(); ++i) {
      const std::size_t stop = i + 1 < marks.size() ? marks[i + 1].first : body.size();
      std::string entry = text::trim(std::string_view(body).substr(marks[i].second, stop - marks[i].second));
      // Drop the bullet that introduces the next entry.
      while (!entry.empty() && (entry.back() == '-' || entry.back() == '*' || std::isspace(static_cast<unsigned char>(entry.back())))) {
        entry.pop_back();
      }
      if (auto e = name_result(entry)) {
        out.push_back(std::move(*e));
      } else if (!entry.empty()) {
        out.push_back({"Auxiliary Findings (" + std::to_string(i + 1) + ")", entry});
      }
    }
    return out;
  }

  std::vector<std::string> lines;
  for (const auto& l : text::split_lines(body)) {
    std::string t = strip_bullet(l);
    if (!t.empty()) lines.push_back(std::move(t));
  }
  for (const auto& l : lines) {
    auto e = name_result(l);
    if (!e) {
      out.clear();
      std::string joined;
      for (const auto& x : lines) joined += (joined.empty() ? "" : "\n") + x;
      out.push_back({"Auxiliary Findings", joined});
      return out;
    }
    out.push_back(std::move(*e));
  }
  return out;
}

CaseSections parse_structured_reply(std::string_view reply) {
  std::array<std::optional<std::vector<std::string>>, 6> sections;
  int current = -1;
  for (const auto& line : text::split_lines(reply)) {
    if (auto h = match_header(line)) {
      current = h->first - 1;
      sections[static_cast<std::size_t>(current)].emplace();
      if (!h->second.empty()) sections[static_cast<std::size_t>(current)]->push_back(h->second);
      continue;
    }
    if (current < 0) continue;
    // Auxiliary lines keep their "(k)" markers for splitting.
    std::string t = strip_bullet(line);
    sections[static_cast<std::size_t>(current)]->push_back(std::move(t));
  }
  std::size_t found = 0;
  for (const auto& s : sections) found += s.has_value();
  if (found < 6) {
    throw ParseError("structured reply: recognized " + std::to_string(found) + " of 6 sections");
  }
  CaseSections out;
  out.patient_info = section_value(*sections[0]);
  out.chief_complaint = section_value(*sections[1]);
  out.hpi = section_value(*sections[2]);
  out.pmh = section_value(*sections[3]);
  out.physical_exam = section_value(*sections[4]);
  out.auxiliary_exams = split_auxiliary(section_value(*sections[5]));
  return out;
}

StructuringResult structure_case(const RawItem& item, ChatBackend& backend, const PromptLibrary& prompts) {
  std::string reply =
      ask(backend, {{Role::User, prompts.render(prompt::kStructuring, {{"question_text", item.question_text}})}});
  return {structure_from_reply(item, reply), std::move(reply)};
}

PipelineDecision validate_structuring(std::string_view raw, const CaseSections& structured, ChatBackend& backend,
                                      const PromptLibrary& prompts) {
  std::string reply = ask(backend, {{Role::User, prompts.render(prompt::kValidation,
                                                               {{"original_text", std::string(raw)},
                                                                {"formatted_record", format_record(structured)}})}});
  return yes_no_decision("", Stage::Validation, std::move(reply));
}

// --- categorization --------------------------------------------------------

std::optional<SystemCategory> match_category_label(std::string_view label) {
  if (auto exact = parse_system_category(label)) return exact;
  const std::string n = text::normalize_loose(label);
  if (n.empty()) return std::nullopt;
  static const std::vector<std::pair<std::string_view, SystemCategory>> kKeys = {
      {"cardio", SystemCategory::Cardiovascular},
      {"respirat", SystemCategory::Respiratory},
      {"gastro", SystemCategory::GastroHepatobiliary},
      {"hepato", SystemCategory::GastroHepatobiliary},
      {"neuro", SystemCategory::Neurological},
      {"infect", SystemCategory::InfectiousDiseases},
      {"metabolic", SystemCategory::MetabolicRenalGenitourinary},
      {"renal", SystemCategory::MetabolicRenalGenitourinary},
      {"genitourinary", SystemCategory::MetabolicRenalGenitourinary},
      {"other", SystemCategory::Other},
  };
  for (const auto& [key, cat] : kKeys) {
    if (n.find(key) != std::string::npos) return cat;
  }
  return std::nullopt;
}

namespace {

// First balanced {...} in the text, respecting JSON strings.
std::optional<std::string> first_json_object(std::string_view s) {
  auto start = s.find('{');
  while (start != std::string_view::npos) {
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (std::size_t i = start; i < s.size(); ++i) {
      char c = s[i];
      if (in_string) {
        if (escaped) escaped = false;
        else if (c == '\\') escaped = true;
        else if (c == '"') in_string = false;
        continue;
      }
      if (c == '"') in_string = true;
      else if (c == '{') ++depth;
      else if (c == '}' && --depth == 0) return std::string(s.substr(start, i - start + 1));
    }
    start = s.find('{', start + 1);
  }
  return std::nullopt;
}

}  // namespace

Categorization categorize_diagnosis(std::string_view diagnosis, ChatBackend& backend, const PromptLibrary& prompts) {
  if (text::trim(diagnosis).empty()) throw PreconditionError("categorize: empty diagnosis");
  std::string reply = ask(backend, {{Role::System, prompts.get(prompt::kCategorization)},
                                    {Role::User, prompts.render(prompt::kCategorizationInput,
                                                                {{"diagnosis", std::string(diagnosis)}})}});
  auto object = first_json_object(reply);
  if (!object) throw ParseError("categorize: no JSON object in reply");
  auto j = json::parse(*object, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ParseError("categorize: malformed JSON in reply");
  if (!j.contains("primary_diagnosis") || !j["primary_diagnosis"].is_string() || !j.contains("category") ||
      !j["category"].is_string()) {
    throw ParseError("categorize: reply lacks primary_diagnosis or category");
  }
  auto label = j["category"].get<std::string>();
  auto cat = match_category_label(label);
  if (!cat) throw ReplyFormatError("categorize: unknown category '" + label + "'", reply);
  return {j["primary_diagnosis"].get<std::string>(), *cat, std::move(reply)};
}

// --- stratification --------------------------------------------------------

Cohort stratify_cohort(std::vector<StructuredCase> cases, std::size_t per_system) {
  std::stable_sort(cases.begin(), cases.end(),
                   [](const StructuredCase& a, const StructuredCase& b) { return a.case_id < b.case_id; });
  std::map<SystemCategory, std::vector<StructuredCase>> buckets;
  for (auto& c : cases) {
    if (c.system_category == SystemCategory::Other) continue;
    auto& b = buckets[c.system_category];
    if (b.size() < per_system) b.push_back(std::move(c));
  }
  std::vector<StructuredCase> picked;
  for (auto cat : kCoreSystems) {
    auto& b = buckets[cat];
    if (b.size() < per_system) {
      throw PreconditionError("stratify: category " + std::string(to_string(cat)) + " has " +
                              std::to_string(b.size()) + " cases, short by " + std::to_string(per_system - b.size()));
    }
    for (auto& c : b) picked.push_back(std::move(c));
  }
  return Cohort(std::move(picked));
}

// --- pipeline --------------------------------------------------------------

PipelineResult run_pipeline(const std::vector<RawItem>& items, ChatBackend& backend, const PromptLibrary& prompts) {
  PipelineResult result;
  for (const auto& item : items) {
    auto record = [&](Stage stage, Verdict verdict, std::string reply, std::optional<std::string> detail = {}) {
      result.audit.push_back({item.item_id, stage, verdict, std::move(reply), std::move(detail)});
      return verdict == Verdict::Pass;
    };
    // Runs one yes/no stage; reply and parse failures count as Fail.
    auto gate = [&](Stage stage, auto&& fn) {
      try {
        PipelineDecision d = fn();
        return record(stage, d.verdict, std::move(d.raw_model_reply));
      } catch (const ReplyFormatError& e) {
        return record(stage, Verdict::Fail, e.reply(), e.what());
      } catch (const Error& e) {
        return record(stage, Verdict::Fail, "", e.what());
      }
    };

    if (!gate(Stage::TypeFilter, [&] { return filter_diagnosis_type(item, backend, prompts); })) continue;
    if (item.options_text && !text::trim(*item.options_text).empty()) {
      if (!gate(Stage::TermFilter, [&] { return filter_diagnosis_term(*item.options_text, backend, prompts); })) continue;
    }

    CaseSections sections;
    {
      std::string reply;
      try {
        reply = ask(backend, {{Role::User, prompts.render(prompt::kStructuring, {{"question_text", item.question_text}})}});
        sections = structure_from_reply(item, reply);
      } catch (const Error& e) {
        record(Stage::Structuring, Verdict::Fail, reply, e.what());
        continue;
      }
      record(Stage::Structuring, Verdict::Pass, reply);
    }

    StructuredCase c;
    c.case_id = item.item_id;
    c.source = item.source;
    c.sections = std::move(sections);
    c.gold_diagnosis = item.gold_diagnosis;
    c.raw_source_text = item.question_text;
    {
      std::string reply;
      try {
        PipelineDecision d = validate_structuring(item.question_text, c.sections, backend, prompts);
        reply = d.raw_model_reply;
        if (d.verdict == Verdict::Fail) {
          record(Stage::Validation, Verdict::Fail, reply);
          continue;
        }
      } catch (const ReplyFormatError& e) {
        record(Stage::Validation, Verdict::Fail, e.reply(), e.what());
        continue;
      } catch (const Error& e) {
        record(Stage::Validation, Verdict::Fail, "", e.what());
        continue;
      }
      auto violations = validate_case(c);
      if (!violations.empty()) {
        std::string detail = "schema:";
        for (const auto& v : violations) detail += " " + v.field + " (" + v.rule + ")";
        record(Stage::Validation, Verdict::Fail, reply, detail);
        continue;
      }
      record(Stage::Validation, Verdict::Pass, reply);
    }

    try {
      Categorization cat = categorize_diagnosis(item.gold_diagnosis, backend, prompts);
      c.system_category = cat.category;
      record(Stage::Categorization, Verdict::Pass, std::move(cat.raw_model_reply));
    } catch (const ReplyFormatError& e) {
      record(Stage::Categorization, Verdict::Fail, e.reply(), e.what());
      continue;
    } catch (const Error& e) {
      record(Stage::Categorization, Verdict::Fail, "", e.what());
      continue;
    }
    result.accepted.push_back(std::move(c));
  }
  return result;
}

}  // namespace rounds
