#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mtkit/bm25.hpp"
#include "mtkit/corpus.hpp"
#include "mtkit/oracles.hpp"

namespace mtkit::shots {

using corpus::SentencePair;

inline constexpr std::size_t kDefaultTopCutoff = 1'000'000;
inline constexpr std::size_t kDefaultStageOne = 64;

double cosine(const Embedding& a, const Embedding& b);

/// Quality-scored shot pool. Every pair must carry a quality score.
class ScoredPool {
 public:
  explicit ScoredPool(std::vector<SentencePair> pairs, std::size_t top_k_cutoff = kDefaultTopCutoff);

  const std::vector<SentencePair>& pairs() const { return pairs_; }
  std::size_t size() const { return pairs_.size(); }
  /// Ids by quality descending, ties by id ascending.
  const std::vector<std::size_t>& sorted_view() const { return sorted_; }
  std::size_t top_k_cutoff() const { return cutoff_; }
  /// The leading min(cutoff, size) ids of sorted_view.
  std::span<const std::size_t> top_slice() const;
  const SentencePair& by_id(std::size_t id) const;
  bool contains(std::size_t id) const { return position_.count(id) != 0; }

 private:
  std::vector<SentencePair> pairs_;
  std::vector<std::size_t> sorted_;
  std::unordered_map<std::size_t, std::size_t> position_;
  std::size_t cutoff_;
};

/// Quality = cosine(source embedding, target embedding).
ScoredPool score_pool(const corpus::Corpus& corpus, const EmbedOracle& embed, std::size_t top_k_cutoff = kDefaultTopCutoff);

/// Precomputed embeddings keyed by pair id, one vector per side.
struct EmbeddingTable {
  std::size_t dim = 0;
  std::map<std::size_t, Embedding> source;
  std::map<std::size_t, Embedding> target;

  /// Text: "<id>\t<src|tgt>\t<v1> <v2> ...". Binary: magic "MTKEMB\0\0",
  /// u32 version, u64 dim, u64 rows, rows of (u64 id, u8 side, dim doubles).
  static EmbeddingTable load(const std::filesystem::path& path);
  void save_text(const std::filesystem::path& path) const;
  void save_binary(const std::filesystem::path& path) const;
};

ScoredPool score_pool(const corpus::Corpus& corpus, const EmbeddingTable& table, std::size_t top_k_cutoff = kDefaultTopCutoff);

/// Oracle answering from a fixed text -> vector map; unknown text throws.
EmbedOracle lookup_oracle(std::unordered_map<std::string, Embedding> by_text);

enum class Strategy { kRandom, kQualityRandom, kQualitySelected };
std::string_view strategy_name(Strategy s);

struct ShotSet {
  std::vector<SentencePair> shots;
  Strategy strategy = Strategy::kRandom;
  std::uint64_t seed = 0;
  bool short_count = false;    // fewer candidates than requested
  bool used_fallback = false;  // QR length filter emptied the set
};

/// Uniform draw without replacement over the full pool.
ShotSet select_rr(const ScoredPool& pool, std::size_t k, std::uint64_t seed);

struct QrOptions {
  std::size_t min_source_tokens = 50;  // strictly more tokens than this
  std::string src_lang;
};

/// Ids of the QR candidate set. Sets `used_fallback` when the length filter
/// removed every pair of the top slice.
std::vector<std::size_t> qr_eligible(const ScoredPool& pool, const QrOptions& options, bool& used_fallback);

/// Uniform draw without replacement over the long-source part of the top slice.
ShotSet select_qr(const ScoredPool& pool, std::size_t k, std::uint64_t seed, const QrOptions& options = {});

/// BM25 index over the sources of the pool's top slice.
RetrievalIndex build_index(const ScoredPool& pool, Bm25Params params = {});

struct QsOptions {
  std::size_t stage_one = kDefaultStageOne;
};

/// BM25 top-`stage_one` against the input, then re-ranked by cosine between
/// the input embedding and each candidate's source embedding.
ShotSet select_qs(const RetrievalIndex& index, const ScoredPool& pool, std::string_view input_text, std::size_t k,
                  const EmbedOracle& embed, const QsOptions& options = {});

}  // namespace mtkit::shots
