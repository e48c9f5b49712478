#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "mtkit/docpipe.hpp"
#include "mtkit/text.hpp"
#include "support/brute.hpp"
#include "support/synth.hpp"

using namespace mtkit;
using namespace mtkit::docpipe;
using corpus::Document;

namespace {

Document doc_of(std::size_t n, std::string id = "d") {
  Document d{std::move(id), {}, std::nullopt};
  for (std::size_t i = 0; i < n; ++i) d.lines.push_back("line " + std::to_string(i));
  return d;
}

std::vector<std::size_t> sizes(const std::vector<Window>& ws) {
  std::vector<std::size_t> out;
  for (const auto& w : ws) out.push_back(w.lines.size());
  return out;
}

ParallelDocument pdoc(const std::string& id, std::size_t n) {
  ParallelDocument d{id, {}, {}};
  for (std::size_t i = 0; i < n; ++i) {
    d.source.push_back(id + " src " + std::to_string(i));
    d.target.push_back(id + " tgt " + std::to_string(i));
  }
  return d;
}

std::map<std::string, long> glyphs(const std::vector<std::string>& lines) {
  std::map<std::string, long> m;
  for (const auto& l : lines) {
    for (const auto& c : brute::utf8_chars(l)) {
      if (c != " " && c != "\t") ++m[c];
    }
  }
  return m;
}

}  // namespace

TEST(Windows, CeilingSplit) {
  EXPECT_EQ(sizes(window_document(doc_of(10), 4)), (std::vector<std::size_t>{4, 4, 2}));
  const auto one = window_document(doc_of(3), 32);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0].lines.size(), 3u);
  EXPECT_EQ(one[0].end_line, 3u);
  EXPECT_EQ(window_document(doc_of(5), 1).size(), 5u);
  EXPECT_TRUE(window_document(doc_of(0), 4).empty());
  EXPECT_THROW(window_document(doc_of(3), 0), Error);
}

TEST(Windows, PartitionAndMonotoneCount) {
  synth::Gen g(3);
  const auto docs = synth::documents(g, 60, 40);
  std::size_t prev = SIZE_MAX;
  for (std::size_t w = 1; w <= 64; ++w) {
    std::size_t brute_count = 0;
    for (const auto& d : docs) {
      const auto ws = window_document(d, w);
      std::vector<std::string> joined;
      std::size_t expect_start = 0;
      for (const auto& win : ws) {
        EXPECT_EQ(win.start_line, expect_start);
        EXPECT_EQ(win.end_line - win.start_line, win.lines.size());
        EXPECT_GE(win.lines.size(), 1u);
        EXPECT_LE(win.lines.size(), w);
        expect_start = win.end_line;
        joined.insert(joined.end(), win.lines.begin(), win.lines.end());
      }
      EXPECT_EQ(joined, d.lines);
      // count by walking line by line
      for (std::size_t i = 0; i < d.lines.size(); ++i) brute_count += (i % w == 0);
    }
    const auto c = count_windows(docs, w);
    EXPECT_EQ(c, brute_count) << w;
    EXPECT_LE(c, prev);
    prev = c;
  }
}

TEST(DocShots, HistoryEmptyGivesZeroShots) {
  DocShotRegime r{DocShotKind::kDocHistory, 5, 1, {}};
  const auto s = make_doc_shots(r, nullptr, {}, doc_of(3, "x"));
  EXPECT_TRUE(s.source_lines.empty());
  EXPECT_FALSE(s.short_count);
  r.history = {pdoc("x", 9)};  // only the input document itself
  EXPECT_TRUE(make_doc_shots(r, nullptr, {}, doc_of(3, "x")).source_lines.empty());
}

TEST(DocShots, HistoryUsesTranslatedDocument) {
  DocShotRegime r{DocShotKind::kDocHistory, 2, 5, {pdoc("h", 4)}};
  const auto s = make_doc_shots(r, nullptr, {}, doc_of(3, "x"));
  EXPECT_EQ(s.source_lines, (std::vector<std::string>{"h src 0", "h src 1"}));
  EXPECT_EQ(s.reference_lines, (std::vector<std::string>{"h tgt 0", "h tgt 1"}));
  EXPECT_EQ(s.from_doc, "h");
}

TEST(DocShots, FirstLinesOfSevenLineDocument) {
  const std::vector<ParallelDocument> pool{pdoc("x", 9), pdoc("p", 7)};
  DocShotRegime r{DocShotKind::kDocFirst, 5, 123, {}};
  const auto s = make_doc_shots(r, nullptr, pool, doc_of(3, "x"));
  ASSERT_EQ(s.source_lines.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(s.source_lines[i], "p src " + std::to_string(i));
    EXPECT_EQ(s.reference_lines[i], "p tgt " + std::to_string(i));
  }
  EXPECT_FALSE(s.short_count);
  EXPECT_EQ(s.from_doc, "p");

  r.k = 9;
  const auto short_doc = make_doc_shots(r, nullptr, pool, doc_of(3, "x"));
  EXPECT_EQ(short_doc.source_lines.size(), 7u);
  EXPECT_TRUE(short_doc.short_count);
}

TEST(DocShots, RandomMatchesSeededDrawOracle) {
  const std::vector<ParallelDocument> pool{pdoc("a", 4), pdoc("in", 3), pdoc("b", 6), pdoc("c", 2)};
  std::vector<std::pair<std::string, std::string>> flat;
  for (const auto& d : pool) {
    if (d.doc_id == "in") continue;
    for (std::size_t i = 0; i < d.source.size(); ++i) flat.emplace_back(d.source[i], d.target[i]);
  }
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    DocShotRegime r{DocShotKind::kDocRandom, 5, seed, {}};
    const auto s = make_doc_shots(r, nullptr, pool, doc_of(3, "in"));
    const auto want = brute::fisher_yates(flat.size(), 5, seed);
    ASSERT_EQ(s.source_lines.size(), 5u);
    for (std::size_t i = 0; i < 5; ++i) {
      EXPECT_EQ(s.source_lines[i], flat[want[i]].first);
      EXPECT_EQ(s.reference_lines[i], flat[want[i]].second);
    }
  }
  DocShotRegime big{DocShotKind::kDocRandom, 50, 1, {}};
  const auto s = make_doc_shots(big, nullptr, pool, doc_of(3, "in"));
  EXPECT_EQ(s.source_lines.size(), flat.size());
  EXPECT_TRUE(s.short_count);
}

TEST(DocShots, QualityRandomNeedsPool) {
  DocShotRegime r{DocShotKind::kQualityRandom, 2, 1, {}};
  EXPECT_THROW(make_doc_shots(r, nullptr, {}, doc_of(2)), Error);
  r.k = 0;
  EXPECT_TRUE(make_doc_shots(r, nullptr, {}, doc_of(2)).source_lines.empty());
}

TEST(Restore, AlignedOutputIsUnchanged) {
  const auto r = restore_alignment({"A", "B"}, {"tA", "tB"});
  EXPECT_EQ(r.lines, (std::vector<std::string>{"tA", "tB"}));
  EXPECT_TRUE(r.repairs.empty());
}

TEST(Restore, MergedLineIsSplitProportionally) {
  // Source lines 0 and 1 form one sentence the model merged into one line.
  // Weights 8:8 over 15 codepoints put the cut near offset 7.5; the space at
  // offset 7 ("dog|_sleeps") is nearer than the one at 3.
  const auto r = restore_alignment({"Der Hund", "schläft.", "Die Katze spielt."}, {"The dog sleeps.", "The cat plays."});
  EXPECT_EQ(r.lines, (std::vector<std::string>{"The dog", "sleeps.", "The cat plays."}));
  ASSERT_EQ(r.repairs.size(), 1u);
  EXPECT_EQ(r.repairs[0].kind, RepairKind::kMergeSplit);
  EXPECT_EQ(r.repairs[0].position, 1u);
}

TEST(Restore, TrailingEmptyMovesToSkippedPosition) {
  const auto r = restore_alignment({"A", "B", "C"}, {"tA", "tC", ""});
  EXPECT_EQ(r.lines, (std::vector<std::string>{"tA", "", "tC"}));
  ASSERT_EQ(r.repairs.size(), 1u);
  EXPECT_EQ(r.repairs[0].kind, RepairKind::kSkipFill);
  EXPECT_EQ(r.repairs[0].position, 1u);
}

TEST(Restore, OverflowIsUnrecoverable) {
  EXPECT_THROW(restore_alignment({"A", "B"}, {"x", "y", "z"}), UnrecoverableOverflow);
  EXPECT_THROW(restore_alignment({}, {"x"}), Error);
  // Surplus empty lines alone are not an overflow.
  const auto r = restore_alignment({"A", "B"}, {"x", "", "y", ""});
  EXPECT_EQ(r.lines, (std::vector<std::string>{"x", "y"}));
}

TEST(ProportionalSplit, Basics) {
  EXPECT_EQ(proportional_split("a b c d", {1, 1}), (std::vector<std::string>{"a b", "c d"}));
  EXPECT_EQ(proportional_split("one", {1}), (std::vector<std::string>{"one"}));
  // No whitespace to cut at: split by codepoint offset.
  EXPECT_EQ(proportional_split("中文中文", {1, 1}), (std::vector<std::string>{"中文", "中文"}));
}

TEST(Restore, PropertiesUnderRandomCorruption) {
  synth::Gen g(17);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<std::string> src;
    const std::size_t n = g.uniform(1, 12);
    for (std::size_t i = 0; i < n; ++i) src.push_back(g.sentence(1, 9));
    std::vector<std::string> out;
    for (const auto& s : src) out.push_back(mtkit::text::join(mtkit::text::split_whitespace(s), " ") + "x");
    const std::size_t edits = n > 1 ? g.uniform(0, 2) : 0;
    for (std::size_t e = 0; e < edits && out.size() > 1; ++e) {
      const std::size_t at = g.uniform(0, out.size() - 2);
      if (g.uniform(0, 1) == 0) {
        out[at] += " " + out[at + 1];
        out.erase(out.begin() + static_cast<std::ptrdiff_t>(at + 1));
      } else {
        out.erase(out.begin() + static_cast<std::ptrdiff_t>(at));
        out.push_back("");
      }
    }
    const auto r = restore_alignment(src, out);
    ASSERT_EQ(r.lines.size(), n);
    EXPECT_EQ(glyphs(r.lines), glyphs(out));
    // Non-empty lines keep their relative order.
    std::string flat_in, flat_out;
    for (const auto& l : out) flat_in += l;
    for (const auto& l : r.lines) flat_out += l;
    flat_in.erase(std::remove(flat_in.begin(), flat_in.end(), ' '), flat_in.end());
    flat_out.erase(std::remove(flat_out.begin(), flat_out.end(), ' '), flat_out.end());
    EXPECT_EQ(flat_in, flat_out);
    if (edits == 0) EXPECT_TRUE(r.repairs.empty());
  }
}
