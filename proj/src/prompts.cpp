#include "mtkit/prompts.hpp"

#include "mtkit/error.hpp"

namespace mtkit::prompts {

namespace {

void append_sentence_block(std::string& out, std::string_view lang, std::string_view source) {
  out += "Translate this into 1. ";
  out += lang;
  out += ":\n\n";
  out += source;
  out += "\n\n1.";
}

void append_lines(std::string& out, const std::vector<std::string>& lines) {
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (i > 0) out += "\n\n";
    out += lines[i];
  }
}

void append_instruction(std::string& out, std::string_view lang) {
  out += "####\n\nTranslate each line in document into ";
  out += lang;
  out += ".\n\nTranslated Document:";
}

}  // namespace

std::string_view kind_name(PromptKind kind) {
  switch (kind) {
    case PromptKind::kSentence:
      return "sentence";
    case PromptKind::kChat:
      return "chat";
    case PromptKind::kDocument:
      return "document";
  }
  return "?";
}

PromptText render_sentence_prompt(const std::vector<corpus::SentencePair>& shots, std::string_view input_text,
                                  std::string_view target_language_name) {
  std::string out;
  for (const auto& shot : shots) {
    append_sentence_block(out, target_language_name, shot.source);
    out += ' ';
    out += shot.target;
    out += "\n\n";
  }
  append_sentence_block(out, target_language_name, input_text);
  return {std::move(out), PromptKind::kSentence, shots.size()};
}

PromptText render_chat_prompt(std::string_view input_text, std::string_view source_language_name,
                              std::string_view target_language_name) {
  std::string out = "### Translate this sentence from ";
  out += source_language_name;
  out += " to ";
  out += target_language_name;
  out += ", Source:\n\n";
  out += input_text;
  out += "\n\n### Target:\n\n";
  return {std::move(out), PromptKind::kChat, 0};
}

PromptText render_doc_prompt(const std::vector<std::string>& shot_source_lines,
                             const std::vector<std::string>& shot_reference_lines,
                             const std::vector<std::string>& window_lines, std::string_view target_language_name) {
  if (shot_source_lines.size() != shot_reference_lines.size()) {
    throw Error("document shots: " + std::to_string(shot_source_lines.size()) + " source lines vs " +
                std::to_string(shot_reference_lines.size()) + " reference lines");
  }
  std::string out;
  if (!shot_source_lines.empty()) {
    out += "Document:\n";
    append_lines(out, shot_source_lines);
    out += "\n\n";
    append_instruction(out, target_language_name);
    out += "\n\n";
    append_lines(out, shot_reference_lines);
    out += "\n\n####\n\n";
  }
  out += "Document:\n";
  append_lines(out, window_lines);
  out += "\n\n";
  append_instruction(out, target_language_name);
  return {std::move(out), PromptKind::kDocument, shot_source_lines.size()};
}

std::vector<std::string> lint_inputs(const std::vector<std::string>& texts) {
  std::vector<std::string> warnings;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (texts[i].find(kSectionSeparator) != std::string::npos) {
      warnings.push_back("input " + std::to_string(i) + " contains the section separator ####");
    }
    if (texts[i].find('\n') != std::string::npos) {
      warnings.push_back("input " + std::to_string(i) + " contains a newline");
    }
  }
  return warnings;
}

}  // namespace mtkit::prompts
