#include "rounds/sp_simulator.hpp"

#include <algorithm>

#include "rounds/digest.hpp"
#include "rounds/error.hpp"
#include "rounds/prompts.hpp"
#include "rounds/text.hpp"

namespace rounds {

namespace {

const std::set<std::string>& generic_test_words() {
  static const std::set<std::string> words = {
      "test", "tests", "study", "studies", "exam", "exams", "examination", "examinations", "panel",
      "panels", "level", "levels", "result", "results", "the", "of", "and", "a", "an", "for", "please"};
  return words;
}

std::set<std::string> content_tokens(std::string_view normalized) {
  std::set<std::string> out;
  for (auto& w : text::split_words(normalized)) {
    if (!generic_test_words().contains(w)) out.insert(std::move(w));
  }
  return out;
}

std::string labelled(std::string_view label, std::string_view body) {
  return "[" + std::string(label) + "]: " + std::string(body);
}

}  // namespace

std::string_view to_string(Speaker s) { return s == Speaker::Doctor ? "Doctor" : "Patient"; }

std::optional<Speaker> parse_speaker(std::string_view s) {
  if (s == "Doctor") return Speaker::Doctor;
  if (s == "Patient") return Speaker::Patient;
  return std::nullopt;
}

std::string_view to_string(ResponseKind k) {
  switch (k) {
    case ResponseKind::Opening: return "Opening";
    case ResponseKind::Hit: return "Hit";
    case ResponseKind::Miss: return "Miss";
    case ResponseKind::Nudge: return "Nudge";
    case ResponseKind::RepetitionRefusal: return "RepetitionRefusal";
    case ResponseKind::ForcedDiagnosisRequest: return "ForcedDiagnosisRequest";
    case ResponseKind::Closed: return "Closed";
  }
  return "";
}

std::string_view to_string(SessionStatus s) {
  switch (s) {
    case SessionStatus::Open: return "Open";
    case SessionStatus::DiagnosisSubmitted: return "DiagnosisSubmitted";
    case SessionStatus::TurnCapForced: return "TurnCapForced";
  }
  return "";
}

std::map<std::string, std::string> default_test_synonyms() {
  return {
      {"cxr", "chest radiograph"},
      {"chest x ray", "chest radiograph"},
      {"chest xray", "chest radiograph"},
      {"ecg", "electrocardiogram"},
      {"ekg", "electrocardiogram"},
      {"cbc", "complete blood count"},
      {"echo", "echocardiography"},
      {"tte", "transthoracic echocardiography"},
      {"abg", "arterial blood gas"},
      {"lft", "liver function tests"},
      {"lfts", "liver function tests"},
      {"ua", "urinalysis"},
      {"eeg", "electroencephalogram"},
      {"lp", "lumbar puncture"},
      {"csf", "cerebrospinal fluid analysis"},
  };
}

std::string normalize_test_name(std::string_view name, const std::map<std::string, std::string>& synonyms) {
  std::string n = text::normalize_loose(name);
  if (auto it = synonyms.find(n); it != synonyms.end()) return it->second;
  return n;
}

std::optional<std::size_t> match_exam(const StructuredCase& c, std::string_view request,
                                      const std::map<std::string, std::string>& synonyms) {
  const auto& exams = c.sections.auxiliary_exams;
  const std::string raw = text::normalize_loose(request);
  const std::string canon = normalize_test_name(request, synonyms);
  if (canon.empty()) return std::nullopt;
  for (std::size_t i = 0; i < exams.size(); ++i) {
    const std::string name = text::normalize_loose(exams[i].name);
    if (name == canon || name == raw) return i;
  }
  const std::set<std::string> wanted = content_tokens(canon);
  if (wanted.empty()) return std::nullopt;
  for (std::size_t i = 0; i < exams.size(); ++i) {
    const std::set<std::string> have = content_tokens(text::normalize_loose(exams[i].name));
    if (have.empty()) continue;
    if (std::includes(have.begin(), have.end(), wanted.begin(), wanted.end()) ||
        std::includes(wanted.begin(), wanted.end(), have.begin(), have.end())) {
      return i;
    }
  }
  return std::nullopt;
}

std::size_t opening_index_for(const StructuredCase& c, std::uint64_t seed, std::size_t template_count) {
  return static_cast<std::size_t>((seed + stable_hash(c.case_id)) % template_count);
}

Session Session::open(const StructuredCase& c, std::uint64_t seed, SimulatorOptions options) {
  if (auto v = validate_case(c); !v.empty()) throw SchemaError(c.case_id, v.front().field, v.front().rule);
  if (options.max_turns < 1) throw PreconditionError("max_turns must be at least 1");

  Session s;
  s.options_ = std::move(options);
  s.state_.record = &c;
  s.state_.max_turns = s.options_.max_turns;
  s.state_.seed = seed;

  const std::vector<std::string> openings = opening_utterances();
  s.state_.opening_index = opening_index_for(c, seed, openings.size());
  s.opening_prompt_ = openings[s.state_.opening_index];

  const std::string& info = c.sections.patient_info;
  const std::string& complaint = c.sections.chief_complaint;
  s.reveal_ = labelled(module_title(Module::PatientInfo), info) + "\n" +
              labelled(module_title(Module::ChiefComplaint), complaint);
  s.state_.revealed_modules = {Module::PatientInfo, Module::ChiefComplaint};
  s.state_.corpus.push_back(s.reveal_);
  s.state_.transcript.push_back({0, Speaker::Doctor, "Opening", s.opening_prompt_});
  s.state_.transcript.push_back({0, Speaker::Patient, std::string(to_string(ResponseKind::Opening)), s.reveal_});
  return s;
}

SimResponse Session::step(std::string_view doctor_message) {
  if (state_.status == SessionStatus::DiagnosisSubmitted) {
    throw SessionClosedError("session for case '" + state_.record->case_id + "' is closed");
  }
  const ParseOutcome parsed = parse_doctor_message(doctor_message);
  const DoctorAction& action = parsed.action;
  const int message_turn = ++state_.doctor_messages;
  state_.transcript.push_back({message_turn, Speaker::Doctor, std::string(action.kind_name()),
                               std::string(doctor_message)});

  SimResponse resp;
  if (action.is<FinalDiagnosis>()) {
    state_.status = SessionStatus::DiagnosisSubmitted;
    resp = {ResponseKind::Closed, std::string(kDiagnosisReceivedText), {}};
  } else if (state_.status == SessionStatus::TurnCapForced) {
    resp = {ResponseKind::Closed, std::string(kClosedText), {}};
  } else if (++state_.turn >= state_.max_turns) {
    state_.status = SessionStatus::TurnCapForced;
    resp = {ResponseKind::ForcedDiagnosisRequest, std::string(kForcedDiagnosisText), {}};
  } else if (auto* m = std::get_if<RequestModule>(&action.variant)) {
    resp = handle_module(m->module);
  } else if (auto* t = std::get_if<RequestTest>(&action.variant)) {
    resp = handle_test(*t);
  } else {
    resp = {ResponseKind::Nudge, std::string(kNudgeText), {}};
  }

  if (resp.kind == ResponseKind::Hit) {
    if (options_.paraphrase) resp.payload = options_.paraphrase(resp.payload);
    state_.corpus.push_back(resp.payload);
  }
  state_.transcript.push_back({message_turn, Speaker::Patient, std::string(to_string(resp.kind)), resp.payload});
  return resp;
}

SimResponse Session::handle_module(Module m) {
  if (!state_.revealed_modules.insert(m).second) {
    return {ResponseKind::RepetitionRefusal, std::string(kRepetitionText), {}};
  }
  const std::string& body = section_text(*state_.record, m);
  return {ResponseKind::Hit, body, {body}};
}

SimResponse Session::handle_test(const RequestTest& t) {
  const std::string key = normalize_test_name(t.test_name, options_.synonyms);
  if (state_.served_tests.contains(key) || state_.missed_tests.contains(key)) {
    return {ResponseKind::RepetitionRefusal, std::string(kRepetitionText), {}};
  }
  const auto idx = match_exam(*state_.record, t.test_name, options_.synonyms);
  if (!idx) {
    state_.missed_tests.insert(key);
    return {ResponseKind::Miss, std::string(kMissText), {}};
  }
  if (!state_.served_exams.insert(*idx).second) {
    state_.served_tests.insert(key);
    return {ResponseKind::RepetitionRefusal, std::string(kRepetitionText), {}};
  }
  state_.served_tests.insert(key);
  const AuxiliaryExam& exam = state_.record->sections.auxiliary_exams[*idx];
  return {ResponseKind::Hit, labelled(exam.name, exam.result), {exam.result}};
}

std::string Session::revealed_corpus() const {
  std::string out;
  for (const auto& piece : state_.corpus) {
    if (!out.empty()) out.push_back('\n');
    out += piece;
  }
  return out;
}

}  // namespace rounds
