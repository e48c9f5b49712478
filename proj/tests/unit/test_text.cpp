#include <gtest/gtest.h>

#include "mtkit/random.hpp"
#include "mtkit/text.hpp"

using namespace mtkit;

TEST(Utf8, FindsFirstInvalidByte) {
  EXPECT_FALSE(text::find_invalid_utf8("plain ascii"));
  EXPECT_FALSE(text::find_invalid_utf8("Grüße 中文"));
  EXPECT_EQ(text::find_invalid_utf8("ab\xff"), 2u);
  EXPECT_EQ(text::find_invalid_utf8("\xc3"), 0u);       // truncated sequence
  EXPECT_EQ(text::find_invalid_utf8("x\xc0\xaf"), 1u);  // overlong
}

TEST(Utf8, CodepointsRoundTrip) {
  const std::string s = "aé中😀";
  const auto cps = text::codepoints(s);
  ASSERT_EQ(cps.size(), 4u);
  std::string back;
  for (char32_t c : cps) back += text::encode_utf8(c);
  EXPECT_EQ(back, s);
  EXPECT_EQ(text::codepoint_count(s), 4u);
}

TEST(Text, SplitLinesIgnoresFinalNewline) {
  EXPECT_TRUE(text::split_lines("").empty());
  EXPECT_EQ(text::split_lines("a\nb\n"), (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(text::split_lines("a\n\nb"), (std::vector<std::string>{"a", "", "b"}));
  EXPECT_EQ(text::split_lines("a\r\nb"), (std::vector<std::string>{"a", "b"}));
}

TEST(Text, TrimAndSplit) {
  EXPECT_EQ(text::trim("  x y \t"), "x y");
  EXPECT_EQ(text::rtrim(" x \n"), " x");
  EXPECT_EQ(text::split_whitespace(" a  b\tc "), (std::vector<std::string>{"a", "b", "c"}));
  EXPECT_EQ(text::join({"a", "b", "c"}, ", "), "a, b, c");
}

TEST(Text, TokenCountUsesCharactersForChineseAndJapanese) {
  EXPECT_EQ(text::token_count("one two three"), 3u);
  EXPECT_EQ(text::token_count("中文中文中", "zh"), 2u);  // ceil(5 / 4)
  EXPECT_EQ(text::token_count("日本語", "ja"), 1u);
  EXPECT_EQ(text::token_count("", "zh"), 0u);
}

TEST(SeededRng, BelowStaysInRangeAndIsReproducible) {
  SeededRng a(7), b(7);
  for (std::uint64_t bound : {1ull, 2ull, 3ull, 10ull, 1000003ull, (1ull << 63) + 5}) {
    for (int i = 0; i < 200; ++i) {
      const auto x = a.below(bound);
      EXPECT_LT(x, bound);
      EXPECT_EQ(x, b.below(bound));
    }
  }
}

TEST(SeededRng, DrawWithoutReplacementIsDistinct) {
  const auto d = draw_without_replacement(50, 20, 3);
  ASSERT_EQ(d.size(), 20u);
  std::vector<std::size_t> s = d;
  std::sort(s.begin(), s.end());
  EXPECT_EQ(std::adjacent_find(s.begin(), s.end()), s.end());
  EXPECT_EQ(d, draw_without_replacement(50, 20, 3));
  EXPECT_NE(d, draw_without_replacement(50, 20, 4));
}
