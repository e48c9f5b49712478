#include <gtest/gtest.h>

#include <map>
#include <numeric>
#include <set>

#include "mtkit/random.hpp"
#include "mtkit/shots.hpp"
#include "mtkit/text.hpp"
#include "support/brute.hpp"
#include "support/stub_backend.hpp"
#include "support/synth.hpp"
#include "support/tempdir.hpp"

using namespace mtkit;
using namespace mtkit::shots;
using corpus::SentencePair;

TEST(Bm25, TermsAreLowercasedAsciiRuns) {
  EXPECT_EQ(retrieval_terms("Hello, World! x2-y"), (std::vector<std::string>{"hello", "world", "x2", "y"}));
  EXPECT_EQ(query_terms("b a b"), (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(retrieval_terms("Grüße"), (std::vector<std::string>{"grüße"}));
}

TEST(Bm25, SingleDocumentPoolReturnsItself) {
  RetrievalIndex idx({42}, {"the only document here"});
  const auto hits = idx.search("the only document here", 64);
  ASSERT_EQ(hits.size(), 1u);
  EXPECT_EQ(hits[0].id, 42u);
}

TEST(Bm25, MatchesExhaustiveScoring) {
  synth::Gen g(3);
  std::vector<std::size_t> ids;
  std::vector<std::string> docs;
  for (std::size_t i = 0; i < 300; ++i) {
    ids.push_back(1000 + i * 7);
    docs.push_back(g.sentence(1, 15, 40));
  }
  RetrievalIndex idx(ids, docs);
  for (int q = 0; q < 30; ++q) {
    const auto query = g.sentence(1, 8, 40);
    const auto got = idx.search(query, 64);
    const auto want = brute::bm25_rank(ids, docs, query, 64);
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      EXPECT_EQ(got[i].id, want[i].id);
      EXPECT_EQ(got[i].score, want[i].score);
    }
  }
}

TEST(Bm25, SaveLoadRoundTrip) {
  testing_support::TempDir dir;
  synth::Gen g(9);
  std::vector<std::size_t> ids;
  std::vector<std::string> docs;
  for (std::size_t i = 0; i < 50; ++i) {
    ids.push_back(i);
    docs.push_back(g.sentence(1, 10));
  }
  RetrievalIndex idx(ids, docs, {1.2, 0.6});
  idx.save(dir / "index.bin");
  const auto back = RetrievalIndex::load(dir / "index.bin");
  EXPECT_EQ(back.doc_ids(), idx.doc_ids());
  EXPECT_EQ(back.params().k1, 1.2);
  for (int q = 0; q < 10; ++q) {
    const auto query = g.sentence(1, 5);
    const auto a = idx.search(query, 10);
    const auto b = back.search(query, 10);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      EXPECT_EQ(a[i].id, b[i].id);
      EXPECT_EQ(a[i].score, b[i].score);
    }
  }
  dir.write("junk.bin", "not an index");
  EXPECT_THROW(RetrievalIndex::load(dir / "junk.bin"), Error);
}

TEST(Cosine, Basics) {
  EXPECT_EQ(cosine({1, 2, 3}, {1, 2, 3}), 1.0);
  EXPECT_EQ(cosine({0, 0}, {1, 2}), 0.0);
  EXPECT_NEAR(cosine({1, 0}, {0, 1}), 0.0, 1e-15);
  EXPECT_THROW(cosine({1}, {1, 2}), Error);
}

TEST(ScoredPool, SortedByQualityThenId) {
  std::vector<SentencePair> pairs{{0, "a", "x", 0.5, {}}, {1, "b", "y", 0.9, {}}, {2, "c", "z", 0.5, {}}};
  ScoredPool pool(pairs, 2);
  EXPECT_EQ(pool.sorted_view(), (std::vector<std::size_t>{1, 0, 2}));
  ASSERT_EQ(pool.top_slice().size(), 2u);
  EXPECT_EQ(pool.top_slice()[1], 0u);
  pairs[0].quality.reset();
  EXPECT_THROW(ScoredPool{pairs}, Error);
}

TEST(ScorePool, UsesCosineOfEmbeddings) {
  corpus::Corpus c{{{0, "same", "same", std::nullopt, {}}, {1, "one", "two", std::nullopt, {}}}, "de", "en"};
  const auto pool = score_pool(c, [](const std::vector<std::string>& texts) {
    std::vector<Embedding> out;
    for (const auto& t : texts) out.push_back(stub::embed(t));
    return out;
  });
  EXPECT_EQ(pool.by_id(0).quality, 1.0);
  EXPECT_EQ(pool.sorted_view().front(), 0u);
}

TEST(EmbeddingTable, TextAndBinaryFormats) {
  testing_support::TempDir dir;
  EmbeddingTable t;
  t.dim = 3;
  t.source = {{0, {1, 0, 0}}, {1, {0, 1, 0}}};
  t.target = {{0, {1, 0, 0}}, {1, {0, 0, 1}}};
  t.save_text(dir / "e.tsv");
  t.save_binary(dir / "e.bin");
  for (const auto* name : {"e.tsv", "e.bin"}) {
    const auto back = EmbeddingTable::load(dir / name);
    EXPECT_EQ(back.dim, 3u);
    EXPECT_EQ(back.source, t.source);
    EXPECT_EQ(back.target, t.target);
  }
  corpus::Corpus c{{{0, "a", "b", std::nullopt, {}}, {1, "c", "d", std::nullopt, {}}}, "", ""};
  const auto pool = score_pool(c, t);
  EXPECT_EQ(pool.by_id(0).quality, 1.0);
  EXPECT_EQ(pool.by_id(1).quality, 0.0);
}

namespace {

ScoredPool random_pool(std::uint64_t seed, std::size_t n, std::size_t cutoff = 1'000'000) {
  synth::Gen g(seed);
  return ScoredPool(synth::pool(g, n), cutoff);
}

}  // namespace

TEST(SelectRr, DeterministicAndDistinct) {
  const auto pool = random_pool(1, 100);
  const auto a = select_rr(pool, 5, 77);
  const auto b = select_rr(pool, 5, 77);
  EXPECT_EQ(a.shots, b.shots);
  std::set<std::size_t> ids;
  for (const auto& s : a.shots) ids.insert(s.id);
  EXPECT_EQ(ids.size(), 5u);
  EXPECT_NE(select_rr(pool, 5, 78).shots, a.shots);
  EXPECT_THROW(select_rr(pool, 101, 1), Error);
  EXPECT_TRUE(select_rr(pool, 0, 1).shots.empty());
}

TEST(SelectRr, MatchesSeededDrawOracle) {
  const auto pool = random_pool(2, 40);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    // Partial Fisher-Yates over positions with mt19937_64 and rejection sampling.
    std::mt19937_64 eng(seed);
    std::vector<std::size_t> perm(40);
    for (std::size_t i = 0; i < 40; ++i) perm[i] = i;
    std::vector<std::size_t> want;
    for (std::size_t i = 0; i < 5; ++i) {
      const std::uint64_t bound = 40 - i;
      const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % bound + 1) % bound;
      std::uint64_t x;
      do x = eng();
      while (x > limit);
      std::swap(perm[i], perm[i + x % bound]);
      want.push_back(pool.pairs()[perm[i]].id);
    }
    std::vector<std::size_t> got;
    for (const auto& s : select_rr(pool, 5, seed).shots) got.push_back(s.id);
    EXPECT_EQ(got, want) << "seed " << seed;
  }
}

TEST(SelectQr, DrawsOnlyFromTopSliceWithLongSources) {
  synth::Gen g(4);
  auto pairs = synth::pool(g, 200, 3, 80);
  ScoredPool pool(pairs, 60);
  bool fallback = false;
  const auto eligible = qr_eligible(pool, {}, fallback);
  EXPECT_FALSE(fallback);
  const std::set<std::size_t> top(pool.top_slice().begin(), pool.top_slice().end());
  for (std::size_t id : eligible) {
    EXPECT_TRUE(top.count(id));
    EXPECT_GT(text::token_count(pool.by_id(id).source), 50u);
  }
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    for (const auto& s : select_qr(pool, 5, seed).shots) {
      EXPECT_TRUE(std::find(eligible.begin(), eligible.end(), s.id) != eligible.end());
    }
  }
}

TEST(SelectQr, FallsBackWhenLengthFilterEmptiesSlice) {
  const auto pool = random_pool(5, 30, 10);  // all sources are short
  const auto set = select_qr(pool, 3, 1);
  EXPECT_TRUE(set.used_fallback);
  EXPECT_EQ(set.shots.size(), 3u);
  EXPECT_THROW(select_qr(pool, 11, 1), Error);
}

TEST(SelectQr, UniformOverEligibleSet) {
  const auto pool = random_pool(6, 50, 20);
  std::map<std::size_t, int> counts;
  const int draws = 20000;
  for (int s = 0; s < draws; ++s) counts[select_qr(pool, 1, static_cast<std::uint64_t>(s)).shots[0].id]++;
  ASSERT_EQ(counts.size(), 20u);
  double chi2 = 0;
  const double expected = draws / 20.0;
  for (const auto& [_, c] : counts) chi2 += (c - expected) * (c - expected) / expected;
  EXPECT_LT(chi2, 43.8);  // chi-square, 19 dof, p = 0.001
}

TEST(SelectQs, MatchesTwoStageBruteForce) {
  const auto pool = random_pool(7, 400);
  const auto index = build_index(pool);
  std::vector<std::size_t> ids;
  std::vector<std::string> srcs;
  for (std::size_t i : pool.top_slice()) {
    ids.push_back(i);
    srcs.push_back(pool.by_id(i).source);
  }
  // build_index orders documents by id.
  std::vector<std::size_t> order(ids.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return ids[a] < ids[b]; });
  std::vector<std::size_t> sid;
  std::vector<std::string> ssrc;
  for (auto o : order) {
    sid.push_back(ids[o]);
    ssrc.push_back(srcs[o]);
  }
  int embed_calls = 0;
  const EmbedOracle embed = [&](const std::vector<std::string>& texts) {
    ++embed_calls;
    std::vector<Embedding> out;
    for (const auto& t : texts) out.push_back(stub::embed(t));
    return out;
  };
  synth::Gen g(70);
  for (int q = 0; q < 10; ++q) {
    const auto query = g.sentence(3, 10, 60);
    const auto stage1 = brute::bm25_rank(sid, ssrc, query, 64);
    std::vector<std::pair<double, std::size_t>> ranked;
    const auto qv = stub::embed(query);
    for (const auto& h : stage1) ranked.push_back({brute::cosine(qv, stub::embed(pool.by_id(h.id).source)), h.id});
    std::sort(ranked.begin(), ranked.end(), [](auto& a, auto& b) { return a.first != b.first ? a.first > b.first : a.second < b.second; });
    const auto set = select_qs(index, pool, query, 5, embed);
    ASSERT_EQ(set.shots.size(), std::min<std::size_t>(5, ranked.size()));
    for (std::size_t i = 0; i < set.shots.size(); ++i) EXPECT_EQ(set.shots[i].id, ranked[i].second);
  }
  EXPECT_EQ(embed_calls, 10);
}

TEST(SelectQs, EdgeCases) {
  const auto pool = random_pool(8, 30);
  const auto index = build_index(pool);
  const EmbedOracle embed = [](const std::vector<std::string>& texts) {
    std::vector<Embedding> out;
    for (const auto& t : texts) out.push_back(stub::embed(t));
    return out;
  };
  EXPECT_TRUE(select_qs(index, pool, "anything", 0, embed).shots.empty());
  EXPECT_THROW(select_qs(index, pool, "x", 65, embed), Error);
  const auto none = select_qs(index, pool, "zzzz yyyy", 5, embed);
  EXPECT_TRUE(none.shots.empty());
  EXPECT_TRUE(none.short_count);
}
