#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace mtkit::shots {

struct Bm25Params {
  double k1 = 1.5;
  double b = 0.75;
};

/// Lowercased ASCII, split on whitespace and ASCII punctuation. Non-ASCII
/// bytes are kept inside terms.
std::vector<std::string> retrieval_terms(std::string_view text);

/// Query terms in scoring order: unique, sorted.
std::vector<std::string> query_terms(std::string_view text);

/// Lucene-style BM25 idf, always positive.
double bm25_idf(std::size_t n_docs, std::size_t doc_freq);
double bm25_term_score(double idf, std::size_t tf, std::size_t doc_len, double avg_doc_len, const Bm25Params& p);

struct Hit {
  std::size_t id;
  double score;
};

/// Inverted index over a set of (id, text) documents.
class RetrievalIndex {
 public:
  struct Posting {
    std::uint32_t doc;  // position in doc_ids()
    std::uint32_t tf;
  };

  RetrievalIndex() = default;
  RetrievalIndex(std::vector<std::size_t> ids, const std::vector<std::string>& texts, Bm25Params params = {});

  /// Documents with positive score, descending, ties by id ascending, at most `limit`.
  std::vector<Hit> search(std::string_view query, std::size_t limit) const;

  std::size_t size() const { return ids_.size(); }
  double avg_doc_len() const { return avg_len_; }
  const Bm25Params& params() const { return params_; }
  const std::vector<std::size_t>& doc_ids() const { return ids_; }
  const std::vector<std::uint32_t>& doc_lengths() const { return lengths_; }
  const std::vector<Posting>* postings(const std::string& term) const;

  /// Versioned binary format: magic "MTKBM25\0", u32 version, params, docs, postings.
  void save(const std::filesystem::path& path) const;
  static RetrievalIndex load(const std::filesystem::path& path);

  static constexpr std::uint32_t kFormatVersion = 1;

 private:
  Bm25Params params_;
  std::vector<std::size_t> ids_;
  std::vector<std::uint32_t> lengths_;
  double avg_len_ = 0.0;
  std::unordered_map<std::string, std::vector<Posting>> postings_;
};

}  // namespace mtkit::shots
