#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "fixtures.hpp"
#include "rounds/digest.hpp"
#include "rounds/error.hpp"
#include "rounds/prompts.hpp"

using namespace rounds;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

// The compiled-in templates must match the files shipped in prompts/.
TEST(Prompts, EmbeddedMatchesFilesByChecksum) {
  std::set<std::string> on_disk;
  for (const auto& entry : fs::directory_iterator(ROUNDS_PROMPT_DIR)) {
    if (entry.path().extension() != ".txt") continue;
    const auto name = entry.path().stem().string();
    on_disk.insert(name);
    EXPECT_EQ(sha256_hex(PromptLibrary::builtin().get(name)), sha256_hex(slurp(entry.path()))) << name;
  }
  const auto names = PromptLibrary::builtin().names();
  EXPECT_EQ(std::set<std::string>(names.begin(), names.end()), on_disk);
  EXPECT_EQ(on_disk.size(), 15u);
}

TEST(Prompts, FifteenDistinctOpenings) {
  const auto openings = opening_utterances();
  ASSERT_EQ(openings.size(), 15u);
  EXPECT_EQ(std::set<std::string>(openings.begin(), openings.end()).size(), 15u);
  for (const auto& o : openings) EXPECT_FALSE(o.empty());
}

TEST(Prompts, SlotsOfEachTemplate) {
  const auto& lib = PromptLibrary::builtin();
  EXPECT_EQ(template_slots(lib.get(prompt::kTypeFilter)), (std::vector<std::string>{"question_text", "options_text"}));
  EXPECT_EQ(template_slots(lib.get(prompt::kTermFilter)), (std::vector<std::string>{"options_text"}));
  EXPECT_EQ(template_slots(lib.get(prompt::kStructuring)), (std::vector<std::string>{"question_text"}));
  EXPECT_EQ(template_slots(lib.get(prompt::kJudgeAccuracyInput)), (std::vector<std::string>{"prediction", "gold"}));
  EXPECT_TRUE(template_slots(lib.get(prompt::kTask1)).empty());
  EXPECT_TRUE(template_slots(lib.get(prompt::kTask2)).empty());
  EXPECT_TRUE(template_slots(lib.get(prompt::kJudgeAccuracy)).empty());
  EXPECT_TRUE(template_slots(lib.get(prompt::kCategorization)).empty());
}

TEST(Prompts, RenderSubstitutesOnce) {
  EXPECT_EQ(render_template("a {x} b {y} {x}", {{"x", "{y}"}, {"y", "2"}}), "a {y} b 2 {y}");
}

TEST(Prompts, LiteralJsonBracesKept) {
  EXPECT_EQ(render_template(R"({"category": "X"} {v})", {{"v", "1"}}), R"({"category": "X"} 1)");
  EXPECT_EQ(render_template("{ spaced } {1bad}", {}), "{ spaced } {1bad}");
}

TEST(Prompts, MissingSlotIsConfigError) {
  EXPECT_THROW(render_template("hello {who}", {}), ConfigError);
}

TEST(Prompts, UnknownTemplateIsConfigError) {
  EXPECT_THROW(PromptLibrary::builtin().get("nope"), ConfigError);
}

TEST(Prompts, OverrideDirectoryTakesPrecedence) {
  fixtures::TempDir dir;
  std::ofstream(dir.path() / "judge_accuracy.txt") << "custom";
  const auto lib = PromptLibrary::with_overrides(dir.path());
  EXPECT_EQ(lib.get(prompt::kJudgeAccuracy), "custom");
  EXPECT_EQ(lib.get(prompt::kTask1), PromptLibrary::builtin().get(prompt::kTask1));
}

TEST(Prompts, JudgePromptsCarryScaleWording) {
  const auto& lib = PromptLibrary::builtin();
  EXPECT_NE(lib.get(prompt::kJudgeAccuracy).find("single integer"), std::string::npos);
  EXPECT_NE(lib.get(prompt::kTask1).find("[Final Diagnosis]"), std::string::npos);
  EXPECT_NE(lib.get(prompt::kTask2).find("10 turns"), std::string::npos);
}
