#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>

#include "fixtures.hpp"
#include "rounds/case_model.hpp"
#include "rounds/error.hpp"
#include "rounds/text.hpp"

using namespace rounds;
using rounds::fixtures::myocarditis_case;

namespace {

bool has_rule(const std::vector<Violation>& v, std::string_view field, std::string_view rule_prefix) {
  return std::any_of(v.begin(), v.end(), [&](const Violation& x) {
    return x.field == field && x.rule.rfind(rule_prefix, 0) == 0;
  });
}

}  // namespace

TEST(CaseModel, MyocarditisCaseIsValid) {
  EXPECT_TRUE(validate_case(myocarditis_case()).empty());
}

TEST(CaseModel, GoldInsideHpiIsLeakage) {
  auto c = myocarditis_case();
  c.gold_diagnosis = "Pneumonia";
  c.sections.hpi = "Progression: cough; outside clinic suspected pneumonia last week";
  EXPECT_TRUE(has_rule(validate_case(c), "hpi", "leakage"));
}

TEST(CaseModel, LeakageIgnoresCaseAndWhitespace) {
  auto c = myocarditis_case();
  c.sections.pmh = "Prior ACUTE\n   myocarditis in 2010";
  EXPECT_TRUE(has_rule(validate_case(c), "pmh", "leakage"));
}

TEST(CaseModel, LeakageInAuxiliaryResult) {
  auto c = myocarditis_case();
  c.sections.auxiliary_exams[4].result = "Histology consistent with acute myocarditis.";
  EXPECT_TRUE(has_rule(validate_case(c), "auxiliary_exams[4]", "leakage"));
}

TEST(CaseModel, EmptySectionViolatesSentinel) {
  auto c = myocarditis_case();
  c.sections.pmh = "";
  EXPECT_TRUE(has_rule(validate_case(c), "pmh", "null-sentinel"));
}

TEST(CaseModel, EmptyGoldIsViolation) {
  auto c = myocarditis_case();
  c.gold_diagnosis = "  ";
  EXPECT_TRUE(has_rule(validate_case(c), "gold_diagnosis", "must be non-empty"));
}

TEST(CaseModel, DuplicateExamNames) {
  auto c = myocarditis_case();
  c.sections.auxiliary_exams.push_back(c.sections.auxiliary_exams[2]);
  EXPECT_FALSE(validate_case(c).empty());
}

TEST(CaseModel, SectionTextIsVerbatim) {
  const auto c = myocarditis_case();
  const auto& pe = section_text(c, Module::PhysicalExam);
  EXPECT_EQ(pe.rfind("Vital signs: Temperature 38.5", 0), 0u);
  EXPECT_EQ(&pe, &section_text(c, Module::PhysicalExam));
  EXPECT_EQ(section_text(c, Module::PMH), c.sections.pmh);
}

TEST(CaseModel, SectionTextNoneSentinel) {
  auto c = myocarditis_case();
  c.sections.pmh = "None";
  EXPECT_EQ(section_text(c, Module::PMH), "None");
}

TEST(CaseModel, ParseMyocarditisCohort) {
  auto c = myocarditis_case();
  nlohmann::json doc = {{"cases", nlohmann::json::array({case_to_json(c)})}};
  const Cohort cohort = parse_cohort(doc.dump());
  ASSERT_EQ(cohort.size(), 1u);
  EXPECT_EQ(cohort.cases()[0].sections.patient_info, "Male, 44");
  EXPECT_EQ(cohort.cases()[0].sections.chief_complaint.rfind("Chills for 3 days", 0), 0u);
  EXPECT_EQ(cohort.cases()[0].system_category, SystemCategory::Cardiovascular);
  EXPECT_EQ(cohort.cases()[0], c);
}

TEST(CaseModel, EmptyInputGivesEmptyCohort) {
  EXPECT_TRUE(parse_cohort("").empty());
  EXPECT_TRUE(parse_cohort("{\"cases\":[]}").empty());
  EXPECT_TRUE(parse_cohort("  \n").empty());
}

TEST(CaseModel, MissingHpiIsSchemaError) {
  auto j = case_to_json(myocarditis_case());
  j["sections"].erase("hpi");
  try {
    parse_cohort(nlohmann::json{{"cases", {j}}}.dump());
    FAIL() << "expected SchemaError";
  } catch (const SchemaError& e) {
    EXPECT_EQ(e.case_id(), "myocarditis-01");
    EXPECT_NE(e.field().find("hpi"), std::string::npos);
  }
}

TEST(CaseModel, MalformedJsonIsParseError) {
  EXPECT_THROW(parse_cohort("{\"cases\": [ {"), ParseError);
  EXPECT_THROW(parse_cohort("{\"case_id\":\"a\"}\n{oops"), ParseError);
}

TEST(CaseModel, JsonlLineNumberInError) {
  const auto line = case_to_json(myocarditis_case()).dump();
  try {
    parse_cohort(line + "\n{bad\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.position(), 2u);
  }
}

TEST(CaseModel, DuplicateIdsRejected) {
  auto c = myocarditis_case();
  EXPECT_THROW(Cohort({c, c}), SchemaError);
}

TEST(CaseModel, UnknownEnumRejected) {
  auto j = case_to_json(myocarditis_case());
  j["system_category"] = "Dermatology";
  EXPECT_THROW(case_from_json(j), SchemaError);
}

TEST(CaseModel, JsonAndJsonlRoundTrip) {
  const Cohort cohort = fixtures::synthetic_cohort(30, 7);
  const Cohort a = parse_cohort(serialize_cohort(cohort));
  const Cohort b = parse_cohort(serialize_cohort_jsonl(cohort));
  EXPECT_EQ(a.cases(), cohort.cases());
  EXPECT_EQ(b.cases(), cohort.cases());
  EXPECT_EQ(serialize_cohort(a), serialize_cohort(cohort));
}

TEST(CaseModel, RawSourceTextOptional) {
  auto c = myocarditis_case();
  c.raw_source_text = "A 44-year-old man presented with chills.";
  const auto back = case_from_json(case_to_json(c));
  EXPECT_EQ(back.raw_source_text, c.raw_source_text);
  c.raw_source_text.reset();
  EXPECT_FALSE(case_from_json(case_to_json(c)).raw_source_text.has_value());
}

TEST(CaseModel, StratificationSumsToTotal) {
  const Cohort cohort = fixtures::synthetic_cohort(47, 3);
  std::size_t sum = 0;
  for (const auto& [cat, n] : cohort.stratification()) {
    sum += n;
    EXPECT_EQ(n, static_cast<std::size_t>(std::count_if(cohort.cases().begin(), cohort.cases().end(),
                                                        [&](const auto& c) { return c.system_category == cat; })));
  }
  EXPECT_EQ(sum, 47u);
}

TEST(CaseModel, FindById) {
  const Cohort cohort = fixtures::synthetic_cohort(5, 2);
  ASSERT_NE(cohort.find("syn-2-3"), nullptr);
  EXPECT_EQ(cohort.find("syn-2-3")->case_id, "syn-2-3");
  EXPECT_EQ(cohort.find("nope"), nullptr);
}

TEST(CaseModel, LoadFromFile) {
  fixtures::TempDir dir;
  const auto path = dir.path() / "cohort.jsonl";
  std::ofstream(path) << serialize_cohort_jsonl(Cohort({myocarditis_case()}));
  EXPECT_EQ(load_cohort(path).size(), 1u);
  EXPECT_THROW(load_cohort(dir.path() / "missing.json"), Error);
}

TEST(CaseModel, SectionTextNeverContainsGoldOnFuzzedCases) {
  const Module modules[] = {Module::PatientInfo, Module::ChiefComplaint, Module::HPI, Module::PMH,
                            Module::PhysicalExam};
  for (std::size_t i = 0; i < 300; ++i) {
    const auto c = fixtures::synthetic_case(i, 11);
    ASSERT_TRUE(validate_case(c).empty()) << c.case_id;
    for (auto m : modules) EXPECT_FALSE(text::contains_icase_ws(section_text(c, m), c.gold_diagnosis));
  }
}

TEST(CaseModel, FormatRecordHasSixNumberedSections) {
  const auto r = format_record(myocarditis_case().sections);
  for (const char* h : {"1. Patient Information", "2. Chief Complaint", "3. History of Present Illness",
                        "4. Past Medical History", "5. Physical Examination", "6. Auxiliary Examination"}) {
    EXPECT_NE(r.find(h), std::string::npos) << h;
  }
  EXPECT_NE(r.find("troponin T 656.2 ng/L"), std::string::npos);
}
