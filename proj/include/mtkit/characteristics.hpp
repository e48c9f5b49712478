#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mtkit/oracles.hpp"

namespace mtkit::traits {

struct AlignmentSet {
  std::vector<std::pair<std::size_t, std::size_t>> links;  // (source, target), sorted and unique
  std::size_t src_len = 0;
  std::size_t tgt_len = 0;

  /// Sorts, removes duplicates and checks bounds.
  static AlignmentSet make(std::vector<std::pair<std::size_t, std::size_t>> links, std::size_t src_len, std::size_t tgt_len);
};

/// Parses one Pharaoh line ("0-0 1-2 ...").
AlignmentSet parse_pharaoh(std::string_view line, std::size_t src_len, std::size_t tgt_len);
std::string to_pharaoh(const AlignmentSet& alignment);

struct NonMonotonicity {
  double value = 0.0;
  bool no_alignment = false;
};

/// 100 x mean over links of |s/max(S-1,1) - t/max(T-1,1)|.
NonMonotonicity non_monotonicity(const AlignmentSet& alignment);

std::size_t unaligned_source_words(const AlignmentSet& alignment);
std::size_t unaligned_translation_words(const AlignmentSet& alignment);

inline const std::vector<std::string> kDefaultMarkers{".", "!", ","};

/// True iff the hypothesis ends with a marker and the source does not
/// (trailing whitespace ignored on both sides).
bool punctuation_insertion(std::string_view source, std::string_view hypothesis,
                           const std::vector<std::string>& markers = kDefaultMarkers);

/// 100 x fraction of items with a punctuation insertion.
double punctuation_insertion_rate(const std::vector<std::string>& sources, const std::vector<std::string>& hypotheses,
                                  const std::vector<std::string>& markers = kDefaultMarkers);

/// Pooled perplexity exp(-sum logprob / sum tokens).
double fluency(const std::vector<std::string>& texts, const LmOracle& lm);

struct TraitReport {
  double nm = 0.0;
  double pi_rate = 0.0;
  double usw_mean = 0.0;
  double utw_mean = 0.0;
  std::optional<double> fluency_ppl;
  std::size_t n_items = 0;
  std::size_t no_alignment = 0;  // items excluded from the NM mean
};

struct TraitItem {
  std::string source;
  std::string hypothesis;
  AlignmentSet alignment;
};

/// Corpus-level means of the per-item measurements. `lm` is optional.
TraitReport trait_report(const std::vector<TraitItem>& items, const LmOracle& lm = {},
                         const std::vector<std::string>& markers = kDefaultMarkers);

enum class Bucket { kLowest, kMedium, kHighest };
std::string_view bucket_name(Bucket b);

struct PerplexityItem {
  std::size_t id = 0;
  double source_ppl = 0.0;
  double qe_a = 0.0;
  double qe_b = 0.0;
};

struct PerplexityBuckets {
  std::vector<std::pair<std::size_t, Bucket>> assignments;  // in input order
  std::array<double, 3> deltas{};                           // mean(qe_a - qe_b) per bucket
  std::array<std::size_t, 3> sizes{};
};

/// Tercile split by source perplexity ascending (ties by id); when n is not
/// divisible by 3 the lower buckets take the extra items.
PerplexityBuckets perplexity_buckets(const std::vector<PerplexityItem>& items);

}  // namespace mtkit::traits
