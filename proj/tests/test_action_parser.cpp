#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "rounds/action_parser.hpp"

using namespace rounds;

TEST(Parse, ImagingRequestWithRationale) {
  auto o = parse_doctor_message("Request [Imaging Studies: Chest X-ray]: rule out pneumonia");
  ASSERT_TRUE(o.action.is<RequestTest>());
  EXPECT_EQ(o.action.as<RequestTest>().category, TestCategory::Imaging);
  EXPECT_EQ(o.action.as<RequestTest>().test_name, "Chest X-ray");
  EXPECT_EQ(o.action.rationale, "rule out pneumonia");
  EXPECT_EQ(o.extra_actions_ignored, 0u);
}

TEST(Parse, GeneralQueryIsMalformed) {
  auto o = parse_doctor_message("Tell me everything about the patient");
  ASSERT_TRUE(o.action.is<Malformed>());
  EXPECT_EQ(o.action.as<Malformed>().reason, "no recognized action");
}

TEST(Parse, FirstActionWins) {
  auto o = parse_doctor_message("[Physical Examination]: check vitals. Also Request [Laboratory Tests: CBC]");
  ASSERT_TRUE(o.action.is<RequestModule>());
  EXPECT_EQ(o.action.as<RequestModule>().module, Module::PhysicalExam);
  EXPECT_EQ(o.action.kind_name(), "RequestPhysicalExam");
  EXPECT_EQ(o.extra_actions_ignored, 1u);
  EXPECT_EQ(o.action.rationale, "check vitals. Also");
}

TEST(Parse, ModulesCaseAndSpacing) {
  EXPECT_EQ(parse_doctor_message("[  history of   present illness ]").action.kind_name(), "RequestHPI");
  EXPECT_EQ(parse_doctor_message("Request [PAST MEDICAL HISTORY]").action.kind_name(), "RequestPMH");
  EXPECT_EQ(parse_doctor_message("[Physical\nExamination]").action.kind_name(), "RequestPhysicalExam");
}

TEST(Parse, UnknownCategoryIsNotAnAction) {
  EXPECT_TRUE(parse_doctor_message("Request [Genetic Tests: BRCA]").action.is<Malformed>());
  EXPECT_TRUE(parse_doctor_message("Request [Laboratory Tests:   ]").action.is<Malformed>());
}

TEST(Parse, BareFinalDiagnosisTagIsMalformed) {
  EXPECT_TRUE(parse_doctor_message("[Final Diagnosis]").action.is<Malformed>());
  EXPECT_TRUE(parse_doctor_message("[Final Diagnosis] [Diagnosis Name]. Confirmed by: 1. x").action.is<Malformed>());
}

TEST(Parse, TestThenDiagnosisTakesTest) {
  auto o = parse_doctor_message("Request [Laboratory Tests: CRP] then [Final Diagnosis] Sepsis");
  EXPECT_TRUE(o.action.is<RequestTest>());
  EXPECT_EQ(o.extra_actions_ignored, 1u);
}

TEST(Parse, Totality) {
  fixtures::Rng rng(5);
  const std::string alphabet = "[]:.Request Final Diagnosis Laboratory Tests 1. 2. \n\t abc";
  for (int i = 0; i < 5000; ++i) {
    std::string s;
    const std::size_t len = rng.below(80);
    for (std::size_t k = 0; k < len; ++k) {
      s += rng.below(10) == 0 ? static_cast<char>(rng.below(256)) : alphabet[rng.below(alphabet.size())];
    }
    auto o = parse_doctor_message(s);
    EXPECT_EQ(o.raw_text, s);
  }
}

TEST(Parse, FallbackOnlyForMalformed) {
  int calls = 0;
  FallbackClassifier fb = [&](std::string_view) -> std::optional<DoctorAction> {
    ++calls;
    return DoctorAction{RequestModule{Module::HPI}, std::nullopt};
  };
  EXPECT_EQ(parse_doctor_message("please tell me the history", fb).action.kind_name(), "RequestHPI");
  EXPECT_EQ(parse_doctor_message("[Past Medical History]", fb).action.kind_name(), "RequestPMH");
  EXPECT_EQ(calls, 1);
  EXPECT_TRUE(parse_doctor_message("x", FallbackClassifier{}).action.is<Malformed>());
}

TEST(Extract, MyocarditisEvidence) {
  auto fd = extract_final_diagnosis(
      "[Final Diagnosis] Acute myocarditis. Confirmed by: 1. troponin T 656.2 ng/L 2. MRI myocardial edema "
      "3. cardiac index 1.65");
  EXPECT_EQ(fd.diagnosis, "Acute myocarditis");
  EXPECT_EQ(fd.evidence,
            (std::vector<std::string>{"troponin T 656.2 ng/L", "MRI myocardial edema", "cardiac index 1.65"}));
}

TEST(Extract, SingleItem) {
  auto fd = extract_final_diagnosis("[Final Diagnosis] Sepsis. Confirmed by: 1. fever");
  EXPECT_EQ(fd.diagnosis, "Sepsis");
  EXPECT_EQ(fd.evidence, std::vector<std::string>{"fever"});
}

TEST(Extract, MissingTag) {
  try {
    extract_final_diagnosis("Final diagnosis: sepsis");
    FAIL();
  } catch (const FinalDiagnosisError& e) {
    EXPECT_EQ(e.code(), "missing-tag");
  }
}

TEST(Extract, EmptyDiagnosis) {
  try {
    extract_final_diagnosis("[Final Diagnosis] . Confirmed by: 1. fever");
    FAIL();
  } catch (const FinalDiagnosisError& e) {
    EXPECT_EQ(e.code(), "empty-diagnosis");
  }
  EXPECT_THROW(extract_final_diagnosis("[Final Diagnosis] [Diagnosis Name]. Confirmed by:"), FinalDiagnosisError);
}

TEST(Extract, MultiLineItemsAndDecimals) {
  auto fd = extract_final_diagnosis(
      "Reasoning first.\n[Final Diagnosis] Acute myocarditis\nConfirmed by:\n1. Troponin T 656.2 ng/L,\n"
      "   far above range\n2. Cardiac index 1.65 L/min/m²\n3. ESR 95 mm/h\n4. extra item");
  EXPECT_EQ(fd.diagnosis, "Acute myocarditis");
  ASSERT_EQ(fd.evidence.size(), 3u);
  EXPECT_EQ(fd.evidence[0], "Troponin T 656.2 ng/L,\n   far above range");
  EXPECT_EQ(fd.evidence[1], "Cardiac index 1.65 L/min/m²");
}

TEST(Extract, TrailingPunctuationAndBold) {
  EXPECT_EQ(extract_final_diagnosis("[Final Diagnosis] **Gout**. Confirmed by: 1. x").diagnosis, "Gout");
  EXPECT_EQ(extract_final_diagnosis("[final diagnosis]: Gout;").diagnosis, "Gout");
}

TEST(Category, Classification) {
  EXPECT_EQ(classify_test_category("[Specialized Panels: vasculitis antibodies]"), TestCategory::SpecializedPanels);
  EXPECT_EQ(classify_test_category("[Genetic Tests: BRCA]"), std::nullopt);
  EXPECT_EQ(classify_test_category("[laboratory tests: CRP]"), TestCategory::Laboratory);
  EXPECT_EQ(classify_test_category("Functional Tests"), TestCategory::Functional);
}

TEST(Json, ParseOutcome) {
  auto j = to_json(parse_doctor_message("Request [Laboratory Tests: CBC]"));
  EXPECT_EQ(j["action"], "RequestTest");
  EXPECT_EQ(j["category"], "Laboratory Tests");
  EXPECT_EQ(j["test_name"], "CBC");
  EXPECT_TRUE(j["rationale"].is_null());
}

namespace {

std::string random_name(fixtures::Rng& rng) {
  std::string s;
  const std::size_t len = 1 + rng.below(24);
  for (std::size_t i = 0; i < len; ++i) {
    char c;
    do {
      c = static_cast<char>(0x21 + rng.below(0x7e - 0x21 + 1));
    } while (c == '[' || c == ']');
    s += c;
    if (i + 1 < len && rng.below(5) == 0) s += ' ';
  }
  return s;
}

std::vector<DoctorAction> eight_productions(const std::string& name) {
  return {
      {RequestModule{Module::HPI}, {}},
      {RequestModule{Module::PMH}, {}},
      {RequestModule{Module::PhysicalExam}, {}},
      {RequestTest{TestCategory::Laboratory, name}, {}},
      {RequestTest{TestCategory::Imaging, name}, {}},
      {RequestTest{TestCategory::Functional, name}, {}},
      {RequestTest{TestCategory::SpecializedPanels, name}, {}},
      {FinalDiagnosis{"Acute myocarditis", {"troponin T 656.2 ng/L", "ESR 95 mm/h", "PQ 210 ms"}}, {}},
  };
}

}  // namespace

TEST(RoundTrip, EightProductionsRandomNames) {
  fixtures::Rng rng(42);
  for (int i = 0; i < 600; ++i) {
    const std::string name = random_name(rng);
    for (const auto& a : eight_productions(name)) {
      const auto o = parse_doctor_message(render_action(a));
      ASSERT_EQ(o.action, a) << render_action(a);
      ASSERT_EQ(o.extra_actions_ignored, 0u);
    }
  }
}

TEST(RoundTrip, FirstActionRuleOnConcatenations) {
  fixtures::Rng rng(43);
  for (int i = 0; i < 400; ++i) {
    const auto pool = eight_productions(random_name(rng));
    const std::size_t k = 2 + rng.below(3);
    std::string msg;
    std::string first;
    for (std::size_t j = 0; j < k; ++j) {
      const std::string part = render_action(pool[rng.below(pool.size())]);
      if (j == 0) first = part;
      msg += (j == 0 ? "" : (rng.coin() ? "\n" : " ")) + part;
    }
    const auto o = parse_doctor_message(msg);
    ASSERT_EQ(o.action, parse_doctor_message(first).action) << msg;
    ASSERT_EQ(o.extra_actions_ignored, k - 1) << msg;
  }
}
