#pragma once

// Prompt library. Instruction texts are kept byte-stable: reports and caches
// key on the rendered prompt.

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ckpk/core.hpp"

namespace ckpk::prompts {

inline constexpr std::string_view kTopicSlot = "[Topic]";

namespace detail {

inline constexpr std::string_view kUseOnly =
    "Use only the provided contexts to answer the question. Avoid introducing any additional "
    "information not found in the contexts.";

inline constexpr std::string_view kBalanced =
    "Your response must reflect balanced usage. Avoid omitting details from any context, even if "
    "they seem less relevant. Ensure that no single context dominates your answer.";

inline constexpr std::string_view kCot =
    "Think through the provided contexts step by step before answering. Identify relevant "
    "information from each part of the context, and explain how it helps answer the question. "
    "Then, provide a final response. Return your output in JSON format: { \"reasoning\": \"your "
    "reasoning here\", \"answer\": \"your final response here\" }. Only include the JSON object in "
    "your response.";

inline std::string replace_all(std::string s, std::string_view from, std::string_view to) {
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
  return s;
}

}  // namespace detail

/// Instruction template for a question-answering variant, with a [Topic] slot.
inline std::string instruction_template(PromptVariant v) {
  using namespace detail;
  const std::string ask = "With this information, tell me about [Topic].";
  switch (v) {
    case PromptVariant::original:
      return "With this information, Tell me about [Topic]:";
    case PromptVariant::strict:
      return "Using the provided contexts only, tell me about [Topic]. " + std::string(kUseOnly);
    case PromptVariant::balanced:
      return ask +
             " Focus on creating a response that is balanced and draws fairly from relevant "
             "contexts. " +
             std::string(kBalanced);
    case PromptVariant::ck:
      return ask + " " + std::string(kUseOnly) +
             " At the same time, focus on creating a response that is balanced and draws fairly "
             "from relevant contexts. " +
             std::string(kBalanced);
    case PromptVariant::cot:
      return ask + " " + std::string(kCot);
    case PromptVariant::cot_ck:
      return instruction_template(PromptVariant::ck) + " " + std::string(kCot);
  }
  fail(Errc::unknown_variant, "prompt variant " + std::to_string(static_cast<int>(v)));
}

inline PromptVariant variant_from_name(std::string_view name) {
  for (const auto& [v, s] : kPromptVariantNames) {
    if (s == name) return v;
  }
  fail(Errc::unknown_variant, std::string(name));
}

/// One sentence per line, numbered from 1.
inline std::string numbered_lines(const std::vector<std::string>& lines) {
  std::string out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    out += std::to_string(i + 1) + ". " + lines[i] + "\n";
  }
  return out;
}

/// Numbered context block, a blank line, then the variant's instruction.
/// An empty context renders the instruction alone.
inline std::string render_prompt(PromptVariant variant, std::string_view topic,
                                 const std::vector<std::string>& context) {
  auto instruction = detail::replace_all(instruction_template(variant), kTopicSlot, topic);
  if (context.empty()) return instruction;
  return numbered_lines(context) + "\n" + instruction;
}

inline std::string render_prompt(PromptVariant variant, std::string_view topic,
                                 const std::vector<AtomicSentence>& context) {
  std::vector<std::string> lines;
  lines.reserve(context.size());
  for (const auto& s : context) lines.push_back(s.text);
  return render_prompt(variant, topic, lines);
}

inline std::string render_prompt(std::string_view variant, std::string_view topic,
                                 const std::vector<std::string>& context) {
  return render_prompt(variant_from_name(variant), topic, context);
}

// ---------------------------------------------------------------------------
// Atomization

inline constexpr std::size_t kDefaultAtomizeLimit = 60;
inline constexpr std::string_view kAtomizeTextMarker = "Text:\n";

/// Atomic-sentence decomposition prompt; `limit` replaces the fixed sentence count.
inline std::string atomization_prompt(std::size_t limit = kDefaultAtomizeLimit) {
  const auto n = std::to_string(limit);
  return "(No list, not bullet points, everything should be on the same line)\n"
         "Definition of Atomic: An atomic sentence is a type of declarative sentence which is "
         "either true or false, also referred to as a proposition, statement, or truth-bearer. It "
         "cannot be broken down into simpler sentences without losing its meaning.\n"
         "\n"
         "You will do multiple passes for first " + n + " sentences, using appropriate NLP method "
         "if needed, for each sentence:\n"
         "\n"
         "The first pass: remove comma in the sentence, rewrite the sentence into multiple smaller "
         "sentences if needed.\n"
         "\n"
         "The second pass: remove 'and' and 'or' in the sentence, rewrite the sentence into "
         "multiple smaller sentences if needed.\n"
         "\n"
         "The third pass: replace indirect references with direct references (topic word) to "
         "maintain clarity and focus on the text’s main topic.\n"
         "The fourth pass: separate temporal information (dates, times) from the main action into "
         "distinct sentences.\n"
         "\n"
         "The final pass: make sure each sentence contains exactly only one information. Nothing "
         "more than one information, even the information that are dependent on each other.\n"
         "\n"
         "The goal of these passes is to break down each long sentence into very small atomic "
         "sentences that contain one single inseparable information.\n"
         "\n"
         "Output Format:\n"
         "\n"
         "A JSON object with the following elements:\n"
         "\n"
         "atomic_sentences: A list of " + n + " atomic sentences.\n"
         "\n"
         "count: The number of sentences in the atomic_sentences.\n"
         "\n"
         "Not in JSON output but you need to think:\n"
         "\n"
         "The process of each pass, are you sure you removed all commas, are you sure you removed "
         "all 'and' and 'or', are you sure you replaced all indirect references with the actual "
         "topic word.";
}

inline std::string render_atomization(std::string_view source, std::size_t limit = kDefaultAtomizeLimit) {
  return atomization_prompt(limit) + "\n\n" + std::string(kAtomizeTextMarker) + std::string(source);
}

// ---------------------------------------------------------------------------
// Counterfactual entity swapping (output goes to a human-review file)

inline constexpr std::string_view kSwapKey = "counterfactual_sentences";

inline std::string render_counterfactual_swap(const std::vector<std::string>& sentences) {
  const auto n = std::to_string(sentences.size());
  return "Rewrite each numbered sentence below so that it becomes non-factual by swapping named "
         "entities (people, places, organizations, dates) with other plausible entities of the "
         "same type. Keep the grammar, the order and the number of sentences. Keep the rewritten "
         "sentences consistent with each other.\n"
         "\n"
         "Output Format:\n"
         "\n"
         "A JSON object with the following element:\n"
         "\n"
         "counterfactual_sentences: A list of exactly " + n + " rewritten sentences.\n"
         "\n" + numbered_lines(sentences);
}

// ---------------------------------------------------------------------------
// Summarization case study

enum class SummaryCorpus { divsum, qmsum };
enum class SummaryPrompt { base, ck };

inline std::string summary_instruction(SummaryCorpus corpus, SummaryPrompt kind, std::string_view topic) {
  if (corpus == SummaryCorpus::divsum) {
    if (kind == SummaryPrompt::base) {
      return "The following is a collection of tweets about a topic. Summarize the main themes of "
             "the tweets in 5 sentences. Do not start your summarization with an introduction such "
             "as \"Here is a summary in five sentences.\n"
             "\n"
             "Only give your summary without preamble:  Topic: " + std::string(topic) + "\n"
             "\n"
             "!IMPORTANT INSTRUCTIONS:  Remember, keep your summary to exactly five sentences.";
    }
    return "The following is a collection of tweets about a topic. Summarize the main themes of "
           "the tweets in 5 sentences.\n"
           "\n"
           "Do not start your summarization with an introduction such as \"Here is a summary in "
           "five sentences\". Only give your summary without preamble.\n"
           "\n"
           "Use only the provided information in the tweets to summarize the tweets. Avoid "
           "introducing any additional information not found in the tweets.\n"
           "\n"
           "At the same time, focus on creating a summary that is balanced and draws fairly from "
           "relevant parts of the tweets. Your response must reflect balanced usage.\n"
           "\n"
           "!IMPORTANT INSTRUCTIONS:  Remember, keep your summary to exactly five sentences.";
  }
  if (kind == SummaryPrompt::base) {
    return "Summarize the whole meeting in 5 sentences. Do not start your summarization with an "
           "introduction such as \"Here is a summary in five sentences.\n"
           "\n"
           "Only give your summary without preamble.\n"
           "\n"
           "!IMPORTANT INSTRUCTIONS:  Remember, keep your summary to exactly five sentences.";
  }
  return "The following is a transcript of a meeting. A specific query is provided regarding the "
         "meeting content. Summarize the main themes of the transcript in 5 sentences.\n"
         "\n"
         "Do not begin your summary with an introduction such as \"Here is a summary in five "
         "sentences.\" Only give your summary without preamble.\n"
         "\n"
         "Use only the provided information in the meeting to summarize the query. Do not "
         "introduce any external information.\n"
         "\n"
         "At the same time, focus on creating a summary that is balanced and draws fairly from "
         "relevant parts of the transcript. Your response must reflect balanced usage.\n"
         "\n"
         "!IMPORTANT INSTRUCTIONS: Remember, keep your summary to exactly five sentences.";
}

/// Instruction, then the numbered source documents, then the query if any.
inline std::string render_summary(SummaryCorpus corpus, SummaryPrompt kind, std::string_view topic,
                                  const std::vector<std::string>& documents,
                                  const std::optional<std::string>& query = std::nullopt) {
  auto out = summary_instruction(corpus, kind, topic) + "\n\n" + numbered_lines(documents);
  if (query) out += "\nQuery: " + *query + "\n";
  return out;
}

}  // namespace ckpk::prompts
