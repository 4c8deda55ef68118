#include <gtest/gtest.h>

#include "ckpk/prompts.hpp"
#include "support.hpp"

using namespace ckpk;

namespace {

std::string fixture(const std::string& name) {
  return test::slurp(std::string(CKPK_FIXTURES) + "/prompts/" + name + ".txt");
}

const std::vector<std::string> kContext{"Mount Everest is the highest mountain above sea level.",
                                        "Mount Everest lies in the Himalayas."};

}  // namespace

class VariantFixture : public ::testing::TestWithParam<PromptVariant> {};

TEST_P(VariantFixture, ByteMatchesFrozenText) {
  auto v = GetParam();
  auto expected = fixture(std::string(to_string(v)));
  ASSERT_FALSE(expected.empty());
  EXPECT_EQ(prompts::render_prompt(v, "Mount Everest", kContext), expected);
}

INSTANTIATE_TEST_SUITE_P(AllVariants, VariantFixture,
                         ::testing::Values(PromptVariant::original, PromptVariant::strict, PromptVariant::balanced,
                                           PromptVariant::ck, PromptVariant::cot, PromptVariant::cot_ck),
                         [](const auto& info) { return std::string(to_string(info.param)); });

TEST(RenderPrompt, OriginalWithEmptyContext) {
  EXPECT_EQ(prompts::render_prompt(PromptVariant::original, "Tea", std::vector<std::string>{}),
            "With this information, Tell me about Tea:");
}

TEST(RenderPrompt, StrictContainsRestriction) {
  std::vector<std::string> ctx(10, "Tea is a drink.");
  auto p = prompts::render_prompt(PromptVariant::strict, "Tea", ctx);
  EXPECT_NE(p.find("Avoid introducing any additional information not found in the contexts."), std::string::npos);
  EXPECT_NE(p.find("10. Tea is a drink.\n"), std::string::npos);
}

TEST(RenderPrompt, CotContainsJsonInstruction) {
  for (auto v : {PromptVariant::cot, PromptVariant::cot_ck}) {
    auto p = prompts::render_prompt(v, "Tea", kContext);
    EXPECT_NE(p.find("\"reasoning\": \"your reasoning here\""), std::string::npos);
  }
  EXPECT_NE(prompts::instruction_template(PromptVariant::cot), prompts::instruction_template(PromptVariant::cot_ck));
}

TEST(RenderPrompt, ReferentiallyTransparent) {
  for (auto v : {PromptVariant::original, PromptVariant::ck, PromptVariant::cot_ck}) {
    EXPECT_EQ(prompts::render_prompt(v, "Tea", kContext), prompts::render_prompt(v, "Tea", kContext));
  }
}

TEST(RenderPrompt, UnknownVariantName) {
  EXPECT_THROW(prompts::variant_from_name("verbose"), Error);
  try {
    prompts::variant_from_name("verbose");
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::unknown_variant);
  }
}

TEST(AtomizationPrompt, ByteMatchesFrozenTextAtSixty) {
  EXPECT_EQ(prompts::atomization_prompt(60), fixture("atomization"));
}

TEST(AtomizationPrompt, CountIsParameterized) {
  auto p = prompts::atomization_prompt(25);
  EXPECT_NE(p.find("first 25 sentences"), std::string::npos);
  EXPECT_NE(p.find("A list of 25 atomic sentences."), std::string::npos);
  auto r = prompts::render_atomization("Some text.", 25);
  EXPECT_EQ(r.substr(r.size() - std::string("Text:\nSome text.").size()), "Text:\nSome text.");
}

TEST(SummaryPrompts, ByteMatchFrozenTexts) {
  using prompts::SummaryCorpus;
  using prompts::SummaryPrompt;
  EXPECT_EQ(prompts::summary_instruction(SummaryCorpus::divsum, SummaryPrompt::base, "Electric cars"), fixture("divsum_base"));
  EXPECT_EQ(prompts::summary_instruction(SummaryCorpus::divsum, SummaryPrompt::ck, "Electric cars"), fixture("divsum_ck"));
  EXPECT_EQ(prompts::summary_instruction(SummaryCorpus::qmsum, SummaryPrompt::base, "Electric cars"), fixture("qmsum_base"));
  EXPECT_EQ(prompts::summary_instruction(SummaryCorpus::qmsum, SummaryPrompt::ck, "Electric cars"), fixture("qmsum_ck"));
}

TEST(SummaryPrompts, KeepFiveSentenceConstraint) {
  using prompts::SummaryCorpus;
  using prompts::SummaryPrompt;
  for (auto c : {SummaryCorpus::divsum, SummaryCorpus::qmsum}) {
    for (auto k : {SummaryPrompt::base, SummaryPrompt::ck}) {
      EXPECT_NE(prompts::summary_instruction(c, k, "x").find("exactly five sentences"), std::string::npos);
    }
  }
}

TEST(SummaryPrompts, RenderAppendsDocumentsAndQuery) {
  auto p = prompts::render_summary(prompts::SummaryCorpus::qmsum, prompts::SummaryPrompt::ck, "", {"Doc one.", "Doc two."},
                                   std::string("What was decided?"));
  EXPECT_NE(p.find("\n\n1. Doc one.\n2. Doc two.\n"), std::string::npos);
  EXPECT_EQ(p.substr(p.size() - 26), "\nQuery: What was decided?\n");
}
