#include "rounds/case_model.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "rounds/error.hpp"
#include "rounds/text.hpp"

namespace rounds {

namespace {

constexpr std::pair<Source, std::string_view> kSourceNames[] = {
    {Source::MedQA, "MedQA"},
    {Source::MedMCQA, "MedMCQA"},
    {Source::MedFound, "MedFound"},
    {Source::MedCaseReasoning, "MedCaseReasoning"},
    {Source::Custom, "Custom"},
};

constexpr std::pair<SystemCategory, std::string_view> kCategoryNames[] = {
    {SystemCategory::Cardiovascular, "Cardiovascular"},
    {SystemCategory::Respiratory, "Respiratory"},
    {SystemCategory::GastroHepatobiliary, "GastroHepatobiliary"},
    {SystemCategory::Neurological, "Neurological"},
    {SystemCategory::InfectiousDiseases, "InfectiousDiseases"},
    {SystemCategory::MetabolicRenalGenitourinary, "MetabolicRenalGenitourinary"},
    {SystemCategory::Other, "Other"},
};

std::string require_string(const nlohmann::json& obj, const char* key, const std::string& case_id,
                           const std::string& path) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) throw SchemaError(case_id, path, "missing");
  if (!it->is_string()) throw SchemaError(case_id, path, "must be a string");
  return it->get<std::string>();
}

}  // namespace

std::string_view to_string(Source s) {
  for (const auto& [v, name] : kSourceNames) {
    if (v == s) return name;
  }
  return "Custom";
}

std::string_view to_string(SystemCategory c) {
  for (const auto& [v, name] : kCategoryNames) {
    if (v == c) return name;
  }
  return "Other";
}

std::optional<Source> parse_source(std::string_view s) {
  for (const auto& [v, name] : kSourceNames) {
    if (text::iequals(name, s)) return v;
  }
  return std::nullopt;
}

std::optional<SystemCategory> parse_system_category(std::string_view s) {
  for (const auto& [v, name] : kCategoryNames) {
    if (text::iequals(name, s)) return v;
  }
  return std::nullopt;
}

std::string_view module_title(Module m) {
  switch (m) {
    case Module::PatientInfo: return "Patient Information";
    case Module::ChiefComplaint: return "Chief Complaint";
    case Module::HPI: return "History of Present Illness";
    case Module::PMH: return "Past Medical History";
    case Module::PhysicalExam: return "Physical Examination";
  }
  return "";
}

const std::string& section_text(const StructuredCase& c, Module m) {
  switch (m) {
    case Module::PatientInfo: return c.sections.patient_info;
    case Module::ChiefComplaint: return c.sections.chief_complaint;
    case Module::HPI: return c.sections.hpi;
    case Module::PMH: return c.sections.pmh;
    case Module::PhysicalExam: return c.sections.physical_exam;
  }
  return c.sections.patient_info;
}

std::vector<Violation> validate_case(const StructuredCase& c) {
  std::vector<Violation> out;
  if (text::trim(c.case_id).empty()) out.push_back({"case_id", "must be non-empty"});

  const std::pair<const char*, const std::string*> sections[] = {
      {"patient_info", &c.sections.patient_info}, {"chief_complaint", &c.sections.chief_complaint},
      {"hpi", &c.sections.hpi},                   {"pmh", &c.sections.pmh},
      {"physical_exam", &c.sections.physical_exam},
  };
  for (const auto& [field, value] : sections) {
    if (text::trim(*value).empty()) {
      out.push_back({field, "null-sentinel: absent information must be \"None\", not empty"});
    }
  }

  std::set<std::string> exam_names;
  for (std::size_t i = 0; i < c.sections.auxiliary_exams.size(); ++i) {
    const auto& exam = c.sections.auxiliary_exams[i];
    const std::string field = "auxiliary_exams[" + std::to_string(i) + "]";
    if (text::trim(exam.name).empty()) out.push_back({field + ".name", "must be non-empty"});
    if (text::trim(exam.result).empty()) {
      out.push_back({field + ".result", "null-sentinel: absent information must be \"None\", not empty"});
    }
    const std::string key = text::normalize_loose(exam.name);
    if (!key.empty() && !exam_names.insert(key).second) {
      out.push_back({field + ".name", "duplicate exam name"});
    }
  }

  if (text::trim(c.gold_diagnosis).empty()) {
    out.push_back({"gold_diagnosis", "must be non-empty"});
  } else {
    for (const auto& [field, value] : sections) {
      if (text::contains_icase_ws(*value, c.gold_diagnosis)) {
        out.push_back({field, "leakage: contains gold_diagnosis"});
      }
    }
    for (std::size_t i = 0; i < c.sections.auxiliary_exams.size(); ++i) {
      const auto& exam = c.sections.auxiliary_exams[i];
      if (text::contains_icase_ws(exam.name, c.gold_diagnosis) ||
          text::contains_icase_ws(exam.result, c.gold_diagnosis)) {
        out.push_back({"auxiliary_exams[" + std::to_string(i) + "]", "leakage: contains gold_diagnosis"});
      }
    }
  }
  return out;
}

std::string format_record(const CaseSections& s) {
  std::ostringstream os;
  auto bullets = [&os](const std::string& body) {
    for (const auto& line : text::split_lines(body)) os << "- " << line << '\n';
  };
  os << "1. Patient Information\n";
  bullets(s.patient_info);
  os << "\n2. Chief Complaint\n";
  bullets(s.chief_complaint);
  os << "\n3. History of Present Illness\n";
  bullets(s.hpi);
  os << "\n4. Past Medical History\n";
  bullets(s.pmh);
  os << "\n5. Physical Examination\n";
  bullets(s.physical_exam);
  os << "\n6. Auxiliary Examination\n";
  if (s.auxiliary_exams.empty()) {
    os << "- " << kNoneSentinel << '\n';
  } else {
    for (std::size_t i = 0; i < s.auxiliary_exams.size(); ++i) {
      os << "- (" << (i + 1) << ") " << s.auxiliary_exams[i].name << ": " << s.auxiliary_exams[i].result
         << '\n';
    }
  }
  return os.str();
}

Cohort::Cohort(std::vector<StructuredCase> cases) : cases_(std::move(cases)) {
  for (std::size_t i = 0; i < cases_.size(); ++i) {
    const auto& c = cases_[i];
    if (auto v = validate_case(c); !v.empty()) throw SchemaError(c.case_id, v.front().field, v.front().rule);
    if (!index_.emplace(c.case_id, i).second) throw SchemaError(c.case_id, "case_id", "duplicate case_id");
    ++stratification_[c.system_category];
  }
}

const StructuredCase* Cohort::find(std::string_view case_id) const {
  auto it = index_.find(case_id);
  return it == index_.end() ? nullptr : &cases_[it->second];
}

nlohmann::json case_to_json(const StructuredCase& c) {
  nlohmann::json exams = nlohmann::json::array();
  for (const auto& e : c.sections.auxiliary_exams) exams.push_back({{"name", e.name}, {"result", e.result}});
  nlohmann::json j = {
      {"case_id", c.case_id},
      {"source", std::string(to_string(c.source))},
      {"system_category", std::string(to_string(c.system_category))},
      {"sections",
       {{"patient_info", c.sections.patient_info},
        {"chief_complaint", c.sections.chief_complaint},
        {"hpi", c.sections.hpi},
        {"pmh", c.sections.pmh},
        {"physical_exam", c.sections.physical_exam},
        {"auxiliary_exams", exams}}},
      {"gold_diagnosis", c.gold_diagnosis},
  };
  if (c.raw_source_text) j["raw_source_text"] = *c.raw_source_text;
  return j;
}

StructuredCase case_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw SchemaError("?", "<case>", "case must be a JSON object");
  StructuredCase c;
  c.case_id = require_string(j, "case_id", "?", "case_id");
  const std::string& id = c.case_id;

  const std::string source = require_string(j, "source", id, "source");
  auto src = parse_source(source);
  if (!src) throw SchemaError(id, "source", "unknown source '" + source + "'");
  c.source = *src;

  const std::string category = require_string(j, "system_category", id, "system_category");
  auto cat = parse_system_category(category);
  if (!cat) throw SchemaError(id, "system_category", "unknown category '" + category + "'");
  c.system_category = *cat;

  auto sec = j.find("sections");
  if (sec == j.end() || !sec->is_object()) throw SchemaError(id, "sections", "missing");
  c.sections.patient_info = require_string(*sec, "patient_info", id, "sections.patient_info");
  c.sections.chief_complaint = require_string(*sec, "chief_complaint", id, "sections.chief_complaint");
  c.sections.hpi = require_string(*sec, "hpi", id, "sections.hpi");
  c.sections.pmh = require_string(*sec, "pmh", id, "sections.pmh");
  c.sections.physical_exam = require_string(*sec, "physical_exam", id, "sections.physical_exam");

  auto aux = sec->find("auxiliary_exams");
  if (aux == sec->end()) throw SchemaError(id, "sections.auxiliary_exams", "missing");
  if (!aux->is_array()) throw SchemaError(id, "sections.auxiliary_exams", "must be an array");
  for (std::size_t i = 0; i < aux->size(); ++i) {
    const auto& e = (*aux)[i];
    const std::string path = "sections.auxiliary_exams[" + std::to_string(i) + "]";
    if (!e.is_object()) throw SchemaError(id, path, "must be an object");
    c.sections.auxiliary_exams.push_back(
        {require_string(e, "name", id, path + ".name"), require_string(e, "result", id, path + ".result")});
  }

  c.gold_diagnosis = require_string(j, "gold_diagnosis", id, "gold_diagnosis");
  if (auto raw = j.find("raw_source_text"); raw != j.end() && !raw->is_null()) {
    if (!raw->is_string()) throw SchemaError(id, "raw_source_text", "must be a string");
    c.raw_source_text = raw->get<std::string>();
  }
  return c;
}

namespace {

// `position` is reported on failure: the line number for JSONL, otherwise
// the byte offset.
nlohmann::json parse_json_at(std::string_view bytes, const std::string& where, std::optional<std::size_t> line) {
  try {
    return nlohmann::json::parse(bytes);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(where + ": malformed JSON at byte " + std::to_string(e.byte) + ": " + e.what(),
                     line ? *line : e.byte);
  }
}

}  // namespace

Cohort parse_cohort(std::string_view bytes) {
  if (text::trim(bytes).empty()) return Cohort{};

  // A document whose first non-blank line is a complete JSON object and
  // which has further lines is treated as JSONL.
  std::vector<std::string> lines = text::split_lines(bytes);
  std::size_t first = 0;
  while (first < lines.size() && text::trim(lines[first]).empty()) ++first;
  bool jsonl = false;
  if (first < lines.size()) {
    std::size_t non_blank = 0;
    for (const auto& l : lines) non_blank += text::trim(l).empty() ? 0 : 1;
    const auto head = nlohmann::json::parse(lines[first], nullptr, false);
    jsonl = !head.is_discarded() && head.is_object() && !head.contains("cases") &&
            (non_blank > 1 || head.contains("case_id"));
  }

  std::vector<StructuredCase> cases;
  if (jsonl) {
    // Syntax first, so a torn file reports the broken line rather than a
    // schema problem further up.
    std::vector<nlohmann::json> docs;
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (text::trim(lines[i]).empty()) continue;
      docs.push_back(parse_json_at(lines[i], "line " + std::to_string(i + 1), i + 1));
    }
    for (const auto& j : docs) cases.push_back(case_from_json(j));
  } else {
    const auto doc = parse_json_at(bytes, "cohort", std::nullopt);
    if (!doc.is_object() || !doc.contains("cases")) {
      throw SchemaError("?", "cases", "cohort document must be an object with a \"cases\" array");
    }
    const auto& arr = doc["cases"];
    if (!arr.is_array()) throw SchemaError("?", "cases", "must be an array");
    for (const auto& j : arr) cases.push_back(case_from_json(j));
  }
  return Cohort(std::move(cases));
}

Cohort load_cohort(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open cohort file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_cohort(ss.str());
}

std::string serialize_cohort(const Cohort& cohort) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& c : cohort.cases()) arr.push_back(case_to_json(c));
  return nlohmann::json{{"cases", arr}}.dump(2) + "\n";
}

std::string serialize_cohort_jsonl(const Cohort& cohort) {
  std::string out;
  for (const auto& c : cohort.cases()) out += case_to_json(c).dump() + "\n";
  return out;
}

}  // namespace rounds
