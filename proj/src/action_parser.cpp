#include "rounds/action_parser.hpp"

#include <cctype>

#include "rounds/text.hpp"

namespace rounds {

namespace {

constexpr std::pair<TestCategory, std::string_view> kCategoryKeywords[] = {
    {TestCategory::Laboratory, "laboratory tests"},   {TestCategory::Laboratory, "laboratory test"},
    {TestCategory::Imaging, "imaging studies"},       {TestCategory::Imaging, "imaging study"},
    {TestCategory::Functional, "functional tests"},   {TestCategory::Functional, "functional test"},
    {TestCategory::SpecializedPanels, "specialized panels"},
    {TestCategory::SpecializedPanels, "specialized panel"},
};

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

// One recognized action inside a message. [start, end) covers the optional
// "Request" keyword and the bracket.
struct Span {
  std::size_t start = 0;
  std::size_t end = 0;
  std::variant<RequestModule, RequestTest, FinalDiagnosis, Malformed> variant;
};

std::optional<std::variant<RequestModule, RequestTest, FinalDiagnosis, Malformed>> classify_bracket(
    std::string_view inner) {
  const std::string norm = text::to_lower(text::collapse_whitespace(inner));
  if (norm == "history of present illness") return RequestModule{Module::HPI};
  if (norm == "past medical history") return RequestModule{Module::PMH};
  if (norm == "physical examination") return RequestModule{Module::PhysicalExam};
  if (norm == "final diagnosis") return FinalDiagnosis{};
  const std::size_t colon = inner.find(':');
  if (colon == std::string_view::npos) return std::nullopt;
  auto category = parse_test_category(inner.substr(0, colon));
  if (!category) return std::nullopt;
  std::string name = text::trim(inner.substr(colon + 1));
  if (name.empty()) return std::nullopt;
  return RequestTest{*category, std::move(name)};
}

// Start of a "Request" keyword that ends right before `bracket`, else `bracket`.
std::size_t absorb_request_keyword(std::string_view s, std::size_t bracket) {
  std::size_t i = bracket;
  while (i > 0 && is_space(s[i - 1])) --i;
  constexpr std::string_view kw = "request";
  if (i < kw.size()) return bracket;
  const std::size_t start = i - kw.size();
  if (!text::iequals(s.substr(start, kw.size()), kw)) return bracket;
  if (start > 0 && std::isalnum(static_cast<unsigned char>(s[start - 1]))) return bracket;
  return start;
}

std::vector<Span> scan_actions(std::string_view s) {
  std::vector<Span> spans;
  std::size_t i = 0;
  while (i < s.size()) {
    const std::size_t open = s.find('[', i);
    if (open == std::string_view::npos) break;
    std::size_t close = open + 1;
    while (close < s.size() && s[close] != ']' && s[close] != '[') ++close;
    if (close >= s.size()) break;
    if (s[close] == '[') {
      i = close;
      continue;
    }
    if (auto v = classify_bracket(s.substr(open + 1, close - open - 1))) {
      spans.push_back({absorb_request_keyword(s, open), close + 1, std::move(*v)});
    }
    i = close + 1;
  }
  return spans;
}

std::string strip_leading_separators(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size() && (is_space(s[i]) || s[i] == ':' || s[i] == '-')) ++i;
  return text::trim(s.substr(i));
}

bool is_terminator_at(std::string_view s, std::size_t i) {
  if (s[i] == '\n') return true;
  if (s[i] != '.' && s[i] != '!' && s[i] != '?') return false;
  return i + 1 == s.size() || is_space(s[i + 1]);
}

std::string clean_diagnosis(std::string_view raw) {
  std::string d = text::trim(raw);
  while (!d.empty() && (d.back() == '.' || d.back() == ',' || d.back() == ';' || d.back() == ':' ||
                        d.back() == '!' || d.back() == '?' || is_space(d.back()))) {
    d.pop_back();
  }
  if (d.size() >= 2 && d.front() == '[' && d.back() == ']') d = text::trim(d.substr(1, d.size() - 2));
  if (d.size() >= 4 && d.starts_with("**") && d.ends_with("**")) d = text::trim(d.substr(2, d.size() - 4));
  if (text::iequals(d, "Diagnosis Name")) return {};
  return d;
}

// Position of enumerator `n` ("n." or "n)") at or after `from`. With
// `line_start`, the enumerator must begin a line; otherwise it must follow
// whitespace (or the region start).
std::optional<std::pair<std::size_t, std::size_t>> find_enumerator(std::string_view s, int n, std::size_t from,
                                                                   bool line_start) {
  const std::string num = std::to_string(n);
  for (std::size_t p = s.find(num, from); p != std::string_view::npos; p = s.find(num, p + 1)) {
    const std::size_t after = p + num.size();
    if (after >= s.size() || (s[after] != '.' && s[after] != ')')) continue;
    if (after + 1 < s.size() && !is_space(s[after + 1])) continue;
    if (p > 0 && std::isdigit(static_cast<unsigned char>(s[p - 1]))) continue;
    if (line_start) {
      std::size_t q = p;
      while (q > 0 && (s[q - 1] == ' ' || s[q - 1] == '\t' || s[q - 1] == '-' || s[q - 1] == '*')) --q;
      if (q != 0 && s[q - 1] != '\n') continue;
    } else if (p > 0 && !is_space(s[p - 1])) {
      continue;
    }
    return std::make_pair(p, after + 1);
  }
  return std::nullopt;
}

std::vector<std::string> enumerated_items(std::string_view region, bool line_start) {
  std::vector<std::string> items;
  auto cur = find_enumerator(region, 1, 0, line_start);
  int n = 1;
  while (cur) {
    auto next = find_enumerator(region, n + 1, cur->second, line_start);
    const std::size_t stop = next ? next->first : region.size();
    std::string item = text::trim(region.substr(cur->second, stop - cur->second));
    if (!item.empty()) items.push_back(std::move(item));
    cur = next;
    ++n;
  }
  return items;
}

std::vector<std::string> parse_evidence(std::string_view region) {
  // Line-start enumerators are the safer reading; inline ones win only when
  // they find more items ("1. a 2. b 3. c" on one line).
  std::vector<std::string> items = enumerated_items(region, true);
  std::vector<std::string> inline_items = enumerated_items(region, false);
  if (inline_items.size() > items.size()) items = std::move(inline_items);
  if (items.empty()) {
    for (const auto& line : text::split_lines(region)) {
      std::string t = text::trim(line);
      while (!t.empty() && (t.front() == '-' || t.front() == '*')) t = text::trim(t.substr(1));
      if (!t.empty()) items.push_back(std::move(t));
    }
  }
  if (items.size() > kMaxEvidence) items.resize(kMaxEvidence);
  return items;
}

FinalDiagnosis parse_diagnosis_body(std::string_view body_raw) {
  const std::string body = strip_leading_separators(body_raw);
  const std::string lowered = text::to_lower(body);
  const std::size_t confirmed = lowered.find("confirmed by");

  std::string_view view(body);
  std::string_view diag_region = confirmed == std::string::npos ? view : view.substr(0, confirmed);
  std::size_t term = 0;
  while (term < diag_region.size() && !is_terminator_at(diag_region, term)) ++term;

  FinalDiagnosis fd;
  fd.diagnosis = clean_diagnosis(diag_region.substr(0, term));

  std::string_view evidence_region;
  if (confirmed != std::string::npos) {
    std::size_t k = confirmed + std::string_view("confirmed by").size();
    while (k < view.size() && (view[k] == ':' || view[k] == ' ' || view[k] == '\t')) ++k;
    evidence_region = view.substr(k);
  } else if (term < diag_region.size()) {
    evidence_region = view.substr(term + 1);
  }
  fd.evidence = parse_evidence(evidence_region);
  return fd;
}

}  // namespace

std::string_view to_string(TestCategory c) {
  switch (c) {
    case TestCategory::Laboratory: return "Laboratory Tests";
    case TestCategory::Imaging: return "Imaging Studies";
    case TestCategory::Functional: return "Functional Tests";
    case TestCategory::SpecializedPanels: return "Specialized Panels";
  }
  return "";
}

std::optional<TestCategory> parse_test_category(std::string_view keyword) {
  const std::string norm = text::to_lower(text::collapse_whitespace(keyword));
  for (const auto& [cat, kw] : kCategoryKeywords) {
    if (norm == kw) return cat;
  }
  return std::nullopt;
}

std::optional<TestCategory> classify_test_category(std::string_view request) {
  std::string s = text::trim(request);
  if (!s.empty() && s.front() == '[') s.erase(0, 1);
  if (!s.empty() && s.back() == ']') s.pop_back();
  const std::size_t colon = s.find(':');
  return parse_test_category(colon == std::string::npos ? s : s.substr(0, colon));
}

std::string_view DoctorAction::kind_name() const {
  if (auto* m = std::get_if<RequestModule>(&variant)) {
    switch (m->module) {
      case Module::HPI: return "RequestHPI";
      case Module::PMH: return "RequestPMH";
      case Module::PhysicalExam: return "RequestPhysicalExam";
      default: return "RequestModule";
    }
  }
  if (is<RequestTest>()) return "RequestTest";
  if (is<FinalDiagnosis>()) return "FinalDiagnosis";
  return "Malformed";
}

ParseOutcome parse_doctor_message(std::string_view message) {
  ParseOutcome out;
  out.raw_text = std::string(message);
  std::vector<Span> spans = scan_actions(message);
  if (spans.empty()) {
    out.action.variant = Malformed{"no recognized action"};
    return out;
  }
  out.extra_actions_ignored = spans.size() - 1;
  const Span& first = spans.front();
  const std::size_t body_end = spans.size() > 1 ? spans[1].start : message.size();
  const std::string_view body = message.substr(first.end, body_end - first.end);

  if (std::holds_alternative<FinalDiagnosis>(first.variant)) {
    FinalDiagnosis fd = parse_diagnosis_body(body);
    if (fd.diagnosis.empty()) {
      out.action.variant = Malformed{"empty diagnosis after [Final Diagnosis]"};
    } else {
      out.action.variant = std::move(fd);
    }
    return out;
  }
  out.action.variant = first.variant;
  if (std::string r = strip_leading_separators(body); !r.empty()) out.action.rationale = std::move(r);
  return out;
}

ParseOutcome parse_doctor_message(std::string_view message, const FallbackClassifier& fallback) {
  ParseOutcome out = parse_doctor_message(message);
  if (fallback && out.action.is<Malformed>()) {
    if (auto a = fallback(message)) out.action = std::move(*a);
  }
  return out;
}

FinalDiagnosisError::FinalDiagnosisError(Reason reason, std::string reply)
    : ReplyFormatError(reason == Reason::MissingTag ? "reply has no [Final Diagnosis] tag"
                                                    : "[Final Diagnosis] tag is not followed by a diagnosis",
                       std::move(reply)),
      reason_(reason) {}

std::string_view FinalDiagnosisError::code() const {
  return reason_ == Reason::MissingTag ? "missing-tag" : "empty-diagnosis";
}

FinalDiagnosis extract_final_diagnosis(std::string_view message) {
  const std::vector<Span> spans = scan_actions(message);
  for (std::size_t i = 0; i < spans.size(); ++i) {
    if (!std::holds_alternative<FinalDiagnosis>(spans[i].variant)) continue;
    const std::size_t body_end = i + 1 < spans.size() ? spans[i + 1].start : message.size();
    FinalDiagnosis fd = parse_diagnosis_body(message.substr(spans[i].end, body_end - spans[i].end));
    if (fd.diagnosis.empty()) {
      throw FinalDiagnosisError(FinalDiagnosisError::Reason::EmptyDiagnosis, std::string(message));
    }
    return fd;
  }
  throw FinalDiagnosisError(FinalDiagnosisError::Reason::MissingTag, std::string(message));
}

std::string render_action(const DoctorAction& action) {
  std::string out;
  if (auto* m = std::get_if<RequestModule>(&action.variant)) {
    out = "[" + std::string(module_title(m->module)) + "]";
  } else if (auto* t = std::get_if<RequestTest>(&action.variant)) {
    out = "Request [" + std::string(to_string(t->category)) + ": " + t->test_name + "]";
  } else if (auto* fd = std::get_if<FinalDiagnosis>(&action.variant)) {
    out = "[Final Diagnosis] " + fd->diagnosis + ". Confirmed by:";
    for (std::size_t i = 0; i < fd->evidence.size(); ++i) {
      out += "\n" + std::to_string(i + 1) + ". " + fd->evidence[i];
    }
    return out;
  } else {
    return action.as<Malformed>().reason;
  }
  if (action.rationale) out += ": " + *action.rationale;
  return out;
}

nlohmann::json to_json(const ParseOutcome& outcome) {
  const DoctorAction& a = outcome.action;
  nlohmann::json j = {{"action", std::string(a.kind_name())},
                      {"extra_actions_ignored", outcome.extra_actions_ignored}};
  if (auto* t = std::get_if<RequestTest>(&a.variant)) {
    j["category"] = std::string(to_string(t->category));
    j["test_name"] = t->test_name;
  } else if (auto* fd = std::get_if<FinalDiagnosis>(&a.variant)) {
    j["diagnosis"] = fd->diagnosis;
    j["evidence"] = fd->evidence;
  } else if (auto* m = std::get_if<Malformed>(&a.variant)) {
    j["reason"] = m->reason;
  }
  j["rationale"] = a.rationale ? nlohmann::json(*a.rationale) : nlohmann::json(nullptr);
  return j;
}

}  // namespace rounds
