#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "mtkit/corpus.hpp"

namespace mtkit::prompts {

enum class PromptKind { kSentence, kChat, kDocument };
std::string_view kind_name(PromptKind kind);

struct PromptText {
  std::string text;
  PromptKind kind = PromptKind::kSentence;
  std::size_t shot_count = 0;
};

/// Completion-style template: one "Translate this into 1. <lang>:" block per
/// shot followed by the open block for the input. Ends in "1." so the model
/// continues with the translation.
PromptText render_sentence_prompt(const std::vector<corpus::SentencePair>& shots, std::string_view input_text,
                                  std::string_view target_language_name);

/// Zero-shot chat template.
PromptText render_chat_prompt(std::string_view input_text, std::string_view source_language_name,
                              std::string_view target_language_name);

/// Document template. Sentences are separated by one blank line; with no
/// shots only the input scaffold is emitted.
PromptText render_doc_prompt(const std::vector<std::string>& shot_source_lines,
                             const std::vector<std::string>& shot_reference_lines,
                             const std::vector<std::string>& window_lines, std::string_view target_language_name);

inline constexpr std::string_view kSectionSeparator = "####";

/// Warnings for inputs that would make a rendered prompt ambiguous, e.g. text
/// containing the section separator or a newline inside a sentence.
std::vector<std::string> lint_inputs(const std::vector<std::string>& texts);

}  // namespace mtkit::prompts
