#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mtkit::text {

/// Byte offset of the first invalid UTF-8 sequence, or nullopt if `s` is valid.
std::optional<std::size_t> find_invalid_utf8(std::string_view s);

/// Decodes `s` into codepoints. Assumes valid UTF-8.
std::vector<char32_t> codepoints(std::string_view s);
std::string encode_utf8(char32_t cp);
std::size_t codepoint_count(std::string_view s);

bool is_space(char c);
std::string_view trim(std::string_view s);
std::string_view rtrim(std::string_view s);

std::vector<std::string> split_whitespace(std::string_view s);
/// Splits on LF. A final LF does not start a new line; a CR before LF is dropped.
std::vector<std::string> split_lines(std::string_view s);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

/// Languages whose scripts are not whitespace-segmented.
bool is_unsegmented_language(std::string_view lang);

/// Whitespace token count; for ZH/JA the count is ceil(non-space codepoints / 4).
std::size_t token_count(std::string_view s, std::string_view lang = {});

}  // namespace mtkit::text
