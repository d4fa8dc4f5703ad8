#include "fixtures.hpp"

#include <array>
#include <atomic>
#include <random>
#include <string_view>
#include <unistd.h>

namespace rounds::fixtures {

StructuredCase myocarditis_case() {
  StructuredCase c;
  c.case_id = "myocarditis-01";
  c.source = Source::MedCaseReasoning;
  c.system_category = SystemCategory::Cardiovascular;
  c.gold_diagnosis = "Acute myocarditis";
  auto& s = c.sections;
  s.patient_info = "Male, 44";
  s.chief_complaint =
      "Chills for 3 days and arthralgias in the knees and hips (preceded by several days of unproductive cough and "
      "headache)";
  s.hpi =
      "Progression: Unproductive cough and headache preceded chills and arthralgias. One week before presentation, "
      "he was treated with a macrolide antibiotic and an NSAID.\n"
      "Accompanying symptoms: Cough, Headache, Chills, Arthralgias";
  s.pmh = "Smoking history (None otherwise)";
  s.physical_exam =
      "Vital signs: Temperature 38.5 °C, Heart Rate 113/min, Blood Pressure 126/64 mmHg, Oxygen Saturation 98% "
      "on room air\n"
      "Findings: No pericardial rub or crackles; epigastric tenderness";
  s.auxiliary_exams = {
      {"Imaging test",
       "Chest radiograph showed mild peribronchial cuffing. Transthoracic echocardiography revealed preserved LV "
       "function, a 9-mm pericardial effusion, and slight IVC dilation. Coronary CT excluded obstructive disease. "
       "Cardiac MRI demonstrated myocardial edema with multifocal subepicardial and subendocardial late gadolinium "
       "enhancement and pericardial inflammation."},
      {"Laboratory tests",
       "WBC 13.4 × 10³/μL, CRP 16.9 mg/dL, ESR 95 mm/h, high-sensitivity troponin T 656.2 ng/L; "
       "differential count showed no eosinophilia. Blood cultures, serology, and PCR for pathogens negative; "
       "vasculitis-associated autoantibodies absent."},
      {"Electrocardiogram", "Sinus tachycardia with first-degree AV block (PQ 210 ms)."},
      {"Right heart catheterization", "Cardiac Index 1.65 L/min/m², mean PCWP 34 mmHg, LVEDP 29 mmHg."},
      {"Endomyocardial biopsy", "Eight specimens obtained from the left ventricle."},
  };
  return c;
}

std::string myocarditis_structured_reply() {
  const StructuredCase c = myocarditis_case();
  const auto& s = c.sections;
  std::string r;
  r += "**1. Patient Information**\n- " + s.patient_info + "\n\n";
  r += "**2. Chief Complaint**\n- " + s.chief_complaint + "\n\n";
  r += "**3. History of Present Illness**\n";
  r += "- Progression: Unproductive cough and headache preceded chills and arthralgias. One week before "
       "presentation, he was treated with a macrolide antibiotic and an NSAID.\n";
  r += "- Accompanying symptoms: Cough, Headache, Chills, Arthralgias\n\n";
  r += "**4. Past Medical History**\n- " + s.pmh + "\n\n";
  r += "**5. Physical Examination**\n";
  r += "- Vital signs: Temperature 38.5 °C, Heart Rate 113/min, Blood Pressure 126/64 mmHg, Oxygen Saturation "
       "98% on room air\n";
  r += "- Findings: No pericardial rub or crackles; epigastric tenderness\n\n";
  r += "**6. Auxiliary Examination**\n";
  for (std::size_t i = 0; i < s.auxiliary_exams.size(); ++i) {
    r += "- (" + std::to_string(i + 1) + ") " + s.auxiliary_exams[i].name + ": " + s.auxiliary_exams[i].result + "\n";
  }
  return r;
}

std::uint64_t Rng::next() {
  std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace {

constexpr std::array<std::string_view, 12> kGold = {
    "Acute pancreatitis",     "Community-acquired pneumonia", "Diabetic ketoacidosis", "Aortic dissection",
    "Bacterial meningitis",   "Ischemic stroke",              "Pulmonary embolism",    "Acute cholecystitis",
    "Hyperkalemia",           "Atrial fibrillation",          "Spontaneous pneumothorax", "Malaria"};

constexpr std::array<std::string_view, 14> kExamNames = {
    "Complete blood count", "Chest radiograph",    "Electrocardiogram",   "Serum troponin",
    "Abdominal ultrasound", "Lumbar puncture",     "Urinalysis",          "Head CT",
    "Liver function tests", "Arterial blood gas",  "Blood cultures",      "Echocardiography",
    "Serum lipase",         "Thyroid panel"};

constexpr std::array<std::string_view, 8> kFindings = {
    "within normal limits", "mildly abnormal",       "markedly raised",     "borderline",
    "unremarkable",         "shows a focal change",  "slightly reduced",    "elevated on repeat"};

std::string number(Rng& rng) {
  return std::to_string(rng.below(200)) + "." + std::to_string(rng.below(10));
}

}  // namespace

StructuredCase synthetic_case(std::size_t index, std::uint64_t seed, SystemCategory category) {
  Rng rng(seed * 1000003ULL + index);
  StructuredCase c;
  c.case_id = "syn-" + std::to_string(seed) + "-" + std::to_string(index);
  c.source = static_cast<Source>(rng.below(4));
  c.system_category = category;
  c.gold_diagnosis = std::string(kGold[rng.below(kGold.size())]);
  auto& s = c.sections;
  s.patient_info = (rng.coin() ? "Male, " : "Female, ") + std::to_string(18 + rng.below(70));
  s.chief_complaint = "Fatigue and discomfort for " + std::to_string(1 + rng.below(14)) + " days";
  s.hpi = "Progression: symptoms worsened over " + std::to_string(2 + rng.below(9)) +
          " days.\nAccompanying symptoms: nausea, malaise";
  s.pmh = rng.coin() ? "None" : "Hypertension treated with medication " + std::to_string(rng.below(50));
  s.physical_exam = "Vital signs: Temperature " + number(rng) + " C, Heart Rate " + std::to_string(60 + rng.below(60)) +
                    "/min\nFindings: tenderness grade " + std::to_string(rng.below(5));

  std::vector<std::size_t> pool(kExamNames.size());
  for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
  const std::size_t n_exams = 3 + rng.below(4);
  for (std::size_t k = 0; k < n_exams; ++k) {
    std::size_t pick = k + rng.below(pool.size() - k);
    std::swap(pool[k], pool[pick]);
    const auto name = kExamNames[pool[k]];
    s.auxiliary_exams.push_back({std::string(name), "Value " + number(rng) + " units, " +
                                                        std::string(kFindings[rng.below(kFindings.size())]) +
                                                        " (ref " + std::to_string(k) + "-" + std::to_string(index) +
                                                        ")"});
  }
  return c;
}

StructuredCase synthetic_case(std::size_t index, std::uint64_t seed) {
  return synthetic_case(index, seed, kCoreSystems[index % 6]);
}

Cohort synthetic_cohort(std::size_t n, std::uint64_t seed) {
  std::vector<StructuredCase> cases;
  for (std::size_t i = 0; i < n; ++i) cases.push_back(synthetic_case(i, seed));
  return Cohort(std::move(cases));
}

TempDir::TempDir() {
  static std::atomic<int> counter{0};
  std::random_device rd;
  path_ = std::filesystem::temp_directory_path() /
          ("rounds-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++) + "-" + std::to_string(rd()));
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

}  // namespace rounds::fixtures
