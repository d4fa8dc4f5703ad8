#include "rounds/doctor_agents.hpp"

#include <array>
#include <vector>

#include "rounds/action_parser.hpp"
#include "rounds/digest.hpp"
#include "rounds/sp_simulator.hpp"
#include "rounds/text.hpp"

namespace rounds {

std::string_view to_string(ScriptedKind k) {
  switch (k) {
    case ScriptedKind::Omniscient: return "Omniscient";
    case ScriptedKind::ImmediateGuesser: return "ImmediateGuesser";
    case ScriptedKind::RandomWalker: return "RandomWalker";
  }
  return "Omniscient";
}

std::optional<ScriptedKind> parse_scripted_kind(std::string_view s) {
  for (auto k : {ScriptedKind::Omniscient, ScriptedKind::ImmediateGuesser, ScriptedKind::RandomWalker}) {
    if (text::iequals(s, to_string(k))) return k;
  }
  return std::nullopt;
}

namespace {

bool contains_any(std::string_view haystack, std::initializer_list<std::string_view> needles) {
  for (auto n : needles) {
    if (haystack.find(n) != std::string_view::npos) return true;
  }
  return false;
}

// Best-effort category for an exam name. The simulator matches on the name
// alone, so a wrong guess costs nothing.
TestCategory guess_category(std::string_view name) {
  const std::string n = text::normalize_loose(name);
  if (contains_any(n, {"imaging", "x ray", "xray", "radiograph", "ct", "mri", "ultrasound", "sonograph", "echocardio",
                       "scan", "angiogra", "tomograph", "pet"})) {
    return TestCategory::Imaging;
  }
  if (contains_any(n, {"electrocardiogram", "ecg", "ekg", "eeg", "emg", "spirometr", "pulmonary function",
                       "catheteri", "holter", "stress", "endoscop", "colonoscop", "bronchoscop"})) {
    return TestCategory::Functional;
  }
  if (contains_any(n, {"panel", "antibod", "biopsy", "genetic", "patholog", "histolog", "serolog", "cytolog",
                       "marker"})) {
    return TestCategory::SpecializedPanels;
  }
  return TestCategory::Laboratory;
}

std::string request_for(const std::string& test_name) {
  return render_action(DoctorAction{RequestTest{guess_category(test_name), test_name}, std::nullopt});
}

std::string request_for(Module m) { return render_action(DoctorAction{RequestModule{m}, std::nullopt}); }

std::string diagnosis_message(std::string diagnosis, std::vector<std::string> evidence) {
  for (auto& e : evidence) e = text::collapse_whitespace(e);
  return render_action(DoctorAction{FinalDiagnosis{std::move(diagnosis), std::move(evidence)}, std::nullopt});
}

bool forced(const ChatHistory& history) {
  return !history.empty() && history.back().role == Role::User &&
         history.back().content.find(kForcedDiagnosisText) != std::string::npos;
}

bool usable(const std::string& s) { return !s.empty() && !text::iequals(text::trim(s), "None"); }

// First three auxiliary results, topped up from the examination and history
// sections when the case has fewer than three exams.
std::vector<std::string> omniscient_evidence(const StructuredCase& c) {
  std::vector<std::string> ev;
  for (const auto& e : c.sections.auxiliary_exams) {
    if (ev.size() == kMaxEvidence) break;
    ev.push_back(e.result);
  }
  for (const std::string* s : {&c.sections.physical_exam, &c.sections.hpi, &c.sections.pmh}) {
    if (ev.size() == kMaxEvidence) break;
    if (usable(*s)) ev.push_back(*s);
  }
  return ev;
}

class Omniscient : public DoctorAgent {
 public:
  Omniscient(const StructuredCase& c, Task task) {
    if (task == Task::Task2) {
      plan_.push_back(request_for(Module::HPI));
      plan_.push_back(request_for(Module::PMH));
      plan_.push_back(request_for(Module::PhysicalExam));
      for (const auto& e : c.sections.auxiliary_exams) plan_.push_back(request_for(e.name));
    }
    diagnosis_ = diagnosis_message(c.gold_diagnosis, omniscient_evidence(c));
  }

  std::string respond(const ChatHistory& history) override {
    if (forced(history) || next_ >= plan_.size()) return diagnosis_;
    return plan_[next_++];
  }

 private:
  std::vector<std::string> plan_;
  std::size_t next_ = 0;
  std::string diagnosis_;
};

// Task 1 stand-in for the random walker: a wrong guess citing real findings.
class RecordGuesser : public DoctorAgent {
 public:
  explicit RecordGuesser(const StructuredCase& c)
      : message_(diagnosis_message(std::string(kGuesserDiagnosis), omniscient_evidence(c))) {}
  std::string respond(const ChatHistory&) override { return message_; }

 private:
  std::string message_;
};

class ImmediateGuesser : public DoctorAgent {
 public:
  std::string respond(const ChatHistory&) override {
    // Nonsense tokens guarantee the evidence cannot match any record.
    return diagnosis_message(std::string(kGuesserDiagnosis),
                             {"Serum xylophanine concentration 917 zq/L", "Positive Vrondel quadrant sign",
                              "Qarbitol clearance index 0.03 on plexometry"});
  }
};

class RandomWalker : public DoctorAgent {
 public:
  RandomWalker(const StructuredCase& c, std::uint64_t seed) : state_(seed ^ stable_hash(c.case_id)) {
    for (const auto& e : c.sections.auxiliary_exams) exam_names_.push_back(e.name);
  }

  std::string respond(const ChatHistory& history) override {
    if (forced(history)) {
      // Cite whatever the patient said last; grounded or not, it is valid syntax.
      std::vector<std::string> ev;
      for (auto it = history.rbegin(); it != history.rend() && ev.size() < kMaxEvidence; ++it) {
        if (it->role == Role::User && it->content.find('[') == 0) ev.push_back(first_line(it->content));
      }
      if (ev.empty()) ev.push_back("no findings were available");
      return diagnosis_message(std::string(kGuesserDiagnosis), std::move(ev));
    }
    static constexpr std::array<std::string_view, 8> kBogusTests = {
        "D-dimer", "Serum lipase", "Lumbar puncture", "Chest X-ray", "CBC", "Urinalysis", "Head CT", "ECG"};
    static constexpr std::array<std::string_view, 4> kChatter = {
        "Tell me everything about the patient", "What brings you in today?", "Hmm, let me think.",
        "[Genetic Tests: BRCA]"};
    switch (pick(5)) {
      case 0: {
        static constexpr std::array<Module, 3> kModules = {Module::HPI, Module::PMH, Module::PhysicalExam};
        return request_for(kModules[pick(kModules.size())]);
      }
      case 1:
      case 2:
        if (!exam_names_.empty()) return request_for(exam_names_[pick(exam_names_.size())]);
        [[fallthrough]];
      case 3:
        return request_for(std::string(kBogusTests[pick(kBogusTests.size())]));
      default:
        return std::string(kChatter[pick(kChatter.size())]);
    }
  }

 private:
  // splitmix64: fully specified, so sequences match across platforms.
  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  std::size_t pick(std::size_t n) { return static_cast<std::size_t>(next() % n); }

  static std::string first_line(const std::string& s) {
    auto pos = s.find('\n');
    std::string line = pos == std::string::npos ? s : s.substr(0, pos);
    auto colon = line.find("]: ");
    return colon == std::string::npos ? line : line.substr(colon + 3);
  }

  std::uint64_t state_;
  std::vector<std::string> exam_names_;
};

}  // namespace

std::unique_ptr<DoctorAgent> scripted_agent(ScriptedKind kind, const StructuredCase& c, Task task, std::uint64_t seed) {
  switch (kind) {
    case ScriptedKind::Omniscient: return std::make_unique<Omniscient>(c, task);
    case ScriptedKind::ImmediateGuesser: return std::make_unique<ImmediateGuesser>();
    case ScriptedKind::RandomWalker:
      if (task == Task::Task1) return std::make_unique<RecordGuesser>(c);
      return std::make_unique<RandomWalker>(c, seed);
  }
  return std::make_unique<ImmediateGuesser>();
}

}  // namespace rounds
