#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "fixtures.hpp"
#include "rounds/curation.hpp"
#include "rounds/error.hpp"

using namespace rounds;

namespace {

RawItem item(std::string id, std::string question, std::optional<std::string> options = {}) {
  RawItem r;
  r.item_id = std::move(id);
  r.question_text = std::move(question);
  r.options_text = std::move(options);
  r.source = Source::MedQA;
  r.gold_diagnosis = "Acute myocarditis";
  return r;
}

const char* kCategorizationReply = R"({"primary_diagnosis": "Pneumonia", "category": "Respiratory System"})";

}  // namespace

TEST(YesNo, Normalization) {
  EXPECT_EQ(normalize_yes_no("Yes"), true);
  EXPECT_EQ(normalize_yes_no(" yes.\n"), true);
  EXPECT_EQ(normalize_yes_no("NO!"), false);
  EXPECT_EQ(normalize_yes_no("Maybe"), std::nullopt);
  EXPECT_EQ(normalize_yes_no("Yes, it is"), std::nullopt);
}

TEST(TypeFilter, DiagnosisQuestionPasses) {
  ScriptedBackend b({"Yes"});
  auto d = filter_diagnosis_type(item("q1", "What is the most likely diagnosis?", "A. Gout B. Sepsis"), b);
  EXPECT_EQ(d.verdict, Verdict::Pass);
  EXPECT_EQ(d.stage, Stage::TypeFilter);
  EXPECT_EQ(d.raw_model_reply, "Yes");
}

TEST(TypeFilter, ManagementQuestionFails) {
  ScriptedBackend b({"No"});
  auto d = filter_diagnosis_type(item("q2", "What is the best next step in management?"), b);
  EXPECT_EQ(d.verdict, Verdict::Fail);
}

TEST(TypeFilter, UnparseableReply) {
  ScriptedBackend b({"Maybe"});
  EXPECT_THROW(filter_diagnosis_type(item("q3", "Which diagnosis?"), b), ReplyFormatError);
}

TEST(TypeFilter, PromptCarriesQuestionAndOptions) {
  auto rec = std::make_shared<RecordingBackend>(std::make_shared<ScriptedBackend>(std::vector<std::string>{"yes"}));
  filter_diagnosis_type(item("q4", "Stem text here", "A. Gout"), *rec);
  const auto reqs = rec->requests();
  ASSERT_EQ(reqs.size(), 1u);
  const auto& last = reqs[0].back().content;
  EXPECT_NE(last.find("Stem text here"), std::string::npos);
  EXPECT_NE(last.find("A. Gout"), std::string::npos);
}

TEST(TermFilter, DiseaseOptionsPass) {
  ScriptedBackend b({"Yes"});
  EXPECT_EQ(filter_diagnosis_term("Pneumonia; Tuberculosis", b).verdict, Verdict::Pass);
}

TEST(TermFilter, TestNameOptionsFail) {
  ScriptedBackend b({"No"});
  EXPECT_EQ(filter_diagnosis_term("Chest X-ray; CBC", b).verdict, Verdict::Fail);
}

TEST(TermFilter, EmptyOptionsPrecondition) {
  ScriptedBackend b({"Yes"});
  EXPECT_THROW(filter_diagnosis_term("", b), PreconditionError);
  EXPECT_THROW(filter_diagnosis_term("  \n", b), PreconditionError);
  EXPECT_EQ(b.calls(), 0u);
}

TEST(Structuring, MyocarditisReplyParsesToSixSections) {
  const auto s = parse_structured_reply(fixtures::myocarditis_structured_reply());
  const auto expected = fixtures::myocarditis_case().sections;
  EXPECT_EQ(s.patient_info, "Male, 44");
  EXPECT_EQ(s.chief_complaint, expected.chief_complaint);
  EXPECT_EQ(s.hpi, expected.hpi);
  EXPECT_EQ(s.pmh, expected.pmh);
  EXPECT_EQ(s.physical_exam, expected.physical_exam);
  ASSERT_EQ(s.auxiliary_exams.size(), 5u);
  EXPECT_EQ(s.auxiliary_exams, expected.auxiliary_exams);
}

TEST(Structuring, NoneSection) {
  std::string r = "1. Patient Information\n- Female, 30\n2. Chief Complaint\n- Cough for 2 days\n"
                  "3. History of Present Illness\n- Dry cough\n4. Past Medical History\n- None\n"
                  "5. Physical Examination\n- Clear lungs\n6. Auxiliary Examination\n- (1) CBC: normal\n";
  const auto s = parse_structured_reply(r);
  EXPECT_EQ(s.pmh, "None");
  EXPECT_EQ(s.hpi, "Dry cough");
}

TEST(Structuring, EmptySectionBecomesNone) {
  std::string r = "1. Patient Information\nMale, 60\n2. Chief Complaint\nDyspnea\n3. History of Present Illness\n"
                  "4. Past Medical History\nNone\n5. Physical Examination\nNone\n6. Auxiliary Examination\n";
  const auto s = parse_structured_reply(r);
  EXPECT_EQ(s.hpi, "None");
  // No exams is an empty list; the record renders it as the sentinel.
  EXPECT_TRUE(s.auxiliary_exams.empty());
  EXPECT_NE(format_record(s).find("6. Auxiliary Examination\n- None\n"), std::string::npos);
}

TEST(Structuring, TitleVariantsTolerated) {
  std::string r = "1.Patient information:\nMale, 60\n2) chief complaint\nDyspnea\n3. History of present illness\n"
                  "x\n4. Past medical history\nNone\n5. Physical Exam\nok\n6. Auxiliary Examinations\n"
                  "ECG: sinus rhythm\nChest X-ray: clear\n";
  const auto s = parse_structured_reply(r);
  EXPECT_EQ(s.patient_info, "Male, 60");
  EXPECT_EQ(s.physical_exam, "ok");
  ASSERT_EQ(s.auxiliary_exams.size(), 2u);
  EXPECT_EQ(s.auxiliary_exams[1].name, "Chest X-ray");
}

TEST(Structuring, FiveHeadersIsParseError) {
  std::string r = "1. Patient Information\nMale\n2. Chief Complaint\nx\n3. History of Present Illness\nx\n"
                  "4. Past Medical History\nNone\n5. Physical Examination\nok\n";
  EXPECT_THROW(parse_structured_reply(r), ParseError);
}

TEST(SplitAuxiliary, Variants) {
  auto a = split_auxiliary("(1) ECG: sinus rhythm (2) Chest X-ray: clear");
  ASSERT_EQ(a.size(), 2u);
  EXPECT_EQ(a[0].name, "ECG");
  EXPECT_EQ(a[1].result, "clear");

  auto b = split_auxiliary("Troponin: 0.5 ng/mL\nCRP: 12 mg/L");
  ASSERT_EQ(b.size(), 2u);
  EXPECT_EQ(b[0].result, "0.5 ng/mL");

  auto c = split_auxiliary("Unremarkable workup overall");
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c[0].name, "Auxiliary Findings");
  EXPECT_EQ(c[0].result, "Unremarkable workup overall");
}

TEST(StructureCase, ReturnsSectionsAndRawReply) {
  ScriptedBackend b({fixtures::myocarditis_structured_reply()});
  auto r = structure_case(item("a4", "A 44-year-old man ..."), b);
  EXPECT_EQ(r.sections, fixtures::myocarditis_case().sections);
  EXPECT_EQ(r.raw_model_reply, fixtures::myocarditis_structured_reply());
}

TEST(StructureCase, LeakageGate) {
  std::string reply = fixtures::myocarditis_structured_reply();
  reply.replace(reply.find("Smoking history"), 15, "Known acute myocarditis");
  ScriptedBackend b({reply});
  EXPECT_THROW(structure_case(item("a4", "x"), b), SchemaError);
}

TEST(Validation, Verdicts) {
  const auto s = fixtures::myocarditis_case().sections;
  ScriptedBackend yes({"yes"}), no({"no"}), yes_dot({"Yes."});
  EXPECT_EQ(validate_structuring("raw", s, yes).verdict, Verdict::Pass);
  EXPECT_EQ(validate_structuring("raw", s, no).verdict, Verdict::Fail);
  EXPECT_EQ(validate_structuring("raw", s, yes_dot).verdict, Verdict::Pass);
}

TEST(Categorize, PneumoniaSample) {
  ScriptedBackend b({kCategorizationReply});
  auto c = categorize_diagnosis("Pneumonia", b);
  EXPECT_EQ(c.primary_diagnosis, "Pneumonia");
  EXPECT_EQ(c.category, SystemCategory::Respiratory);
}

TEST(Categorize, OtherPath) {
  ScriptedBackend b({R"({"primary_diagnosis": "Psoriasis", "category": "Other"})"});
  auto c = categorize_diagnosis("Psoriasis", b);
  EXPECT_EQ(c.category, SystemCategory::Other);
}

TEST(Categorize, JsonInsideFencedProse) {
  ScriptedBackend b({"Sure:\n```json\n{\"primary_diagnosis\": \"Stroke\", \"category\": \"Neurological System\"}\n```"});
  EXPECT_EQ(categorize_diagnosis("Stroke", b).category, SystemCategory::Neurological);
}

TEST(Categorize, ProseIsParseError) {
  ScriptedBackend b({"It is a respiratory disease."});
  EXPECT_THROW(categorize_diagnosis("Pneumonia", b), ParseError);
}

TEST(Categorize, UnknownCategory) {
  ScriptedBackend b({R"({"primary_diagnosis": "X", "category": "Dermatology"})"});
  EXPECT_THROW(categorize_diagnosis("X", b), ReplyFormatError);
}

TEST(CategoryLabels, Fuzzy) {
  EXPECT_EQ(match_category_label("Cardiovascular System"), SystemCategory::Cardiovascular);
  EXPECT_EQ(match_category_label("gastro-hepatobiliary"), SystemCategory::GastroHepatobiliary);
  EXPECT_EQ(match_category_label("Infectious Diseases"), SystemCategory::InfectiousDiseases);
  EXPECT_EQ(match_category_label("Metabolic/Renal/Genitourinary"), SystemCategory::MetabolicRenalGenitourinary);
  EXPECT_EQ(match_category_label("Dermatology"), std::nullopt);
}

namespace {

std::vector<StructuredCase> pool(std::size_t per_category, std::uint64_t seed) {
  std::vector<StructuredCase> cases;
  std::size_t idx = 0;
  for (auto cat : kCoreSystems) {
    for (std::size_t k = 0; k < per_category; ++k) cases.push_back(fixtures::synthetic_case(idx++, seed, cat));
  }
  return cases;
}

}  // namespace

TEST(Stratify, FullTableSize) {
  const Cohort c = stratify_cohort(pool(90, 1), 78);
  EXPECT_EQ(c.size(), 468u);
  for (auto cat : kCoreSystems) EXPECT_EQ(c.stratification().at(cat), 78u);
}

TEST(Stratify, ExactPool) {
  EXPECT_EQ(stratify_cohort(pool(2, 2), 2).size(), 12u);
}

TEST(Stratify, ShortfallNamesCategory) {
  auto cases = pool(2, 3);
  cases.erase(std::find_if(cases.begin(), cases.end(),
                           [](const auto& c) { return c.system_category == SystemCategory::Neurological; }));
  try {
    stratify_cohort(cases, 2);
    FAIL();
  } catch (const PreconditionError& e) {
    EXPECT_NE(std::string(e.what()).find("Neurological"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("1"), std::string::npos);
  }
}

TEST(Stratify, PermutationInvariant) {
  auto cases = pool(10, 4);
  const Cohort a = stratify_cohort(cases, 7);
  std::mt19937 rng(99);
  for (int i = 0; i < 20; ++i) {
    std::shuffle(cases.begin(), cases.end(), rng);
    EXPECT_EQ(stratify_cohort(cases, 7).cases(), a.cases());
  }
}

TEST(Stratify, OtherCategoryExcluded) {
  auto cases = pool(1, 5);
  cases.push_back(fixtures::synthetic_case(999, 5, SystemCategory::Other));
  const Cohort c = stratify_cohort(cases, 1);
  EXPECT_EQ(c.size(), 6u);
  EXPECT_EQ(c.stratification().count(SystemCategory::Other), 0u);
}

namespace {

// Routes each stage prompt to a reply keyed on which template produced it.
std::shared_ptr<FunctionBackend> pipeline_backend(std::string structuring_reply, std::string validation_reply = "yes") {
  const auto& lib = PromptLibrary::builtin();
  const std::string type_sys = lib.get(prompt::kTypeFilter).substr(0, 40);
  return std::make_shared<FunctionBackend>([=, &lib](const ChatHistory& h) -> std::string {
    std::string all;
    for (const auto& t : h) all += t.content;
    if (all.find(lib.get(prompt::kCategorization).substr(0, 60)) != std::string::npos)
      return R"({"primary_diagnosis": "Acute myocarditis", "category": "Cardiovascular System"})";
    if (all.find(lib.get(prompt::kStructuring).substr(0, 60)) != std::string::npos) return structuring_reply;
    if (all.find(lib.get(prompt::kValidation).substr(0, 60)) != std::string::npos) return validation_reply;
    return "Yes";
  });
}

}  // namespace

TEST(Pipeline, AcceptedCaseHasPassAtEveryStage) {
  auto backend = pipeline_backend(fixtures::myocarditis_structured_reply());
  auto res = run_pipeline({item("a4", "A 44-year-old man with chills.", "A. Myocarditis B. Pericarditis")}, *backend);
  ASSERT_EQ(res.accepted.size(), 1u);
  EXPECT_EQ(res.accepted[0].system_category, SystemCategory::Cardiovascular);
  EXPECT_EQ(res.accepted[0].gold_diagnosis, "Acute myocarditis");
  std::set<Stage> passed;
  for (const auto& d : res.audit) {
    EXPECT_EQ(d.item_id, "a4");
    if (d.verdict == Verdict::Pass) passed.insert(d.stage);
  }
  EXPECT_EQ(passed, (std::set<Stage>{Stage::TypeFilter, Stage::TermFilter, Stage::Structuring, Stage::Validation,
                                      Stage::Categorization}));
}

TEST(Pipeline, ValidationFailureStopsItem) {
  auto backend = pipeline_backend(fixtures::myocarditis_structured_reply(), "no");
  auto res = run_pipeline({item("a4", "stem", "A. x")}, *backend);
  EXPECT_TRUE(res.accepted.empty());
  ASSERT_FALSE(res.audit.empty());
  EXPECT_EQ(res.audit.back().stage, Stage::Validation);
  EXPECT_EQ(res.audit.back().verdict, Verdict::Fail);
}

TEST(Pipeline, ParseFailureRecordedNotThrown) {
  auto backend = pipeline_backend("not a structured record");
  auto res = run_pipeline({item("bad", "stem")}, *backend);
  EXPECT_TRUE(res.accepted.empty());
  EXPECT_EQ(res.audit.back().stage, Stage::Structuring);
  EXPECT_EQ(res.audit.back().verdict, Verdict::Fail);
  EXPECT_TRUE(res.audit.back().detail.has_value());
}

TEST(Pipeline, NoOptionsSkipsTermFilter) {
  auto backend = pipeline_backend(fixtures::myocarditis_structured_reply());
  auto res = run_pipeline({item("case-report", "Narrative case report text")}, *backend);
  ASSERT_EQ(res.accepted.size(), 1u);
  for (const auto& d : res.audit) EXPECT_NE(d.stage, Stage::TermFilter);
}

TEST(Pipeline, AuditJsonl) {
  auto backend = pipeline_backend(fixtures::myocarditis_structured_reply());
  auto res = run_pipeline({item("a4", "stem", "A. x")}, *backend);
  const auto jsonl = audit_jsonl(res.audit);
  std::size_t lines = std::count(jsonl.begin(), jsonl.end(), '\n');
  EXPECT_EQ(lines, res.audit.size());
  auto first = nlohmann::json::parse(jsonl.substr(0, jsonl.find('\n')));
  EXPECT_EQ(first["stage"], "TypeFilter");
  EXPECT_EQ(first["verdict"], "Pass");
}

TEST(RawItems, Jsonl) {
  auto items = parse_raw_items(
      R"({"item_id":"1","question_text":"q","options_text":"A. x","source":"MedQA","gold_diagnosis":"G"})"
      "\n\n"
      R"({"item_id":"2","question_text":"q2","source":"MedCaseReasoning","gold_diagnosis":"H"})");
  ASSERT_EQ(items.size(), 2u);
  EXPECT_EQ(items[0].options_text, "A. x");
  EXPECT_FALSE(items[1].options_text.has_value());
  EXPECT_EQ(items[1].source, Source::MedCaseReasoning);
  EXPECT_THROW(parse_raw_items("{\"item_id\":\"1\"}\n{x"), ParseError);
}
