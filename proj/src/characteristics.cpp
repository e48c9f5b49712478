#include "mtkit/characteristics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <set>

#include "mtkit/error.hpp"
#include "mtkit/text.hpp"

namespace mtkit::traits {

AlignmentSet AlignmentSet::make(std::vector<std::pair<std::size_t, std::size_t>> links, std::size_t src_len,
                                std::size_t tgt_len) {
  for (const auto& [s, t] : links) {
    if (s >= src_len || t >= tgt_len) {
      throw Error("alignment link " + std::to_string(s) + "-" + std::to_string(t) + " out of range for " +
                  std::to_string(src_len) + "x" + std::to_string(tgt_len));
    }
  }
  std::sort(links.begin(), links.end());
  links.erase(std::unique(links.begin(), links.end()), links.end());
  return {std::move(links), src_len, tgt_len};
}

AlignmentSet parse_pharaoh(std::string_view line, std::size_t src_len, std::size_t tgt_len) {
  std::vector<std::pair<std::size_t, std::size_t>> links;
  for (const auto& tok : text::split_whitespace(line)) {
    const auto dash = tok.find('-');
    if (dash == std::string::npos || dash == 0 || dash + 1 == tok.size()) throw Error("bad alignment token '" + tok + "'");
    try {
      std::size_t used_s = 0;
      std::size_t used_t = 0;
      const auto s = std::stoul(tok.substr(0, dash), &used_s);
      const auto t = std::stoul(tok.substr(dash + 1), &used_t);
      if (used_s != dash || used_t != tok.size() - dash - 1) throw std::invalid_argument(tok);
      links.emplace_back(s, t);
    } catch (const std::logic_error&) {
      throw Error("bad alignment token '" + tok + "'");
    }
  }
  return AlignmentSet::make(std::move(links), src_len, tgt_len);
}

std::string to_pharaoh(const AlignmentSet& alignment) {
  std::string out;
  for (const auto& [s, t] : alignment.links) {
    if (!out.empty()) out += ' ';
    out += std::to_string(s) + "-" + std::to_string(t);
  }
  return out;
}

NonMonotonicity non_monotonicity(const AlignmentSet& alignment) {
  if (alignment.links.empty()) return {0.0, true};
  const double sd = static_cast<double>(std::max<std::size_t>(alignment.src_len, 2) - 1);
  const double td = static_cast<double>(std::max<std::size_t>(alignment.tgt_len, 2) - 1);
  double sum = 0.0;
  for (const auto& [s, t] : alignment.links) sum += std::abs(static_cast<double>(s) / sd - static_cast<double>(t) / td);
  return {100.0 * sum / static_cast<double>(alignment.links.size()), false};
}

std::size_t unaligned_source_words(const AlignmentSet& alignment) {
  std::set<std::size_t> linked;
  for (const auto& l : alignment.links) linked.insert(l.first);
  return alignment.src_len - linked.size();
}

std::size_t unaligned_translation_words(const AlignmentSet& alignment) {
  std::set<std::size_t> linked;
  for (const auto& l : alignment.links) linked.insert(l.second);
  return alignment.tgt_len - linked.size();
}

namespace {

bool ends_with_marker(std::string_view s, const std::vector<std::string>& markers) {
  s = text::rtrim(s);
  return std::any_of(markers.begin(), markers.end(), [&](const std::string& m) {
    return !m.empty() && s.size() >= m.size() && s.substr(s.size() - m.size()) == m;
  });
}

}  // namespace

bool punctuation_insertion(std::string_view source, std::string_view hypothesis, const std::vector<std::string>& markers) {
  if (markers.empty()) throw Error("punctuation insertion needs at least one marker");
  return ends_with_marker(hypothesis, markers) && !ends_with_marker(source, markers);
}

double punctuation_insertion_rate(const std::vector<std::string>& sources, const std::vector<std::string>& hypotheses,
                                  const std::vector<std::string>& markers) {
  if (sources.size() != hypotheses.size()) throw Error("punctuation insertion: source/hypothesis count mismatch");
  if (sources.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < sources.size(); ++i) hits += punctuation_insertion(sources[i], hypotheses[i], markers) ? 1 : 0;
  return 100.0 * static_cast<double>(hits) / static_cast<double>(sources.size());
}

double fluency(const std::vector<std::string>& texts, const LmOracle& lm) {
  if (texts.empty()) throw Error("fluency needs at least one text");
  const auto scores = lm(texts);
  if (scores.size() != texts.size()) throw Error("language model returned wrong number of scores");
  double logprob = 0.0;
  long tokens = 0;
  for (const auto& s : scores) {
    logprob += s.logprob_sum;
    tokens += s.token_count;
  }
  if (tokens <= 0) throw Error("language model reported zero tokens");
  return std::exp(-logprob / static_cast<double>(tokens));
}

TraitReport trait_report(const std::vector<TraitItem>& items, const LmOracle& lm, const std::vector<std::string>& markers) {
  TraitReport report;
  report.n_items = items.size();
  if (items.empty()) return report;
  double nm_sum = 0.0;
  std::size_t nm_n = 0;
  double usw = 0.0;
  double utw = 0.0;
  std::vector<std::string> sources;
  std::vector<std::string> hyps;
  for (const auto& item : items) {
    const auto nm = non_monotonicity(item.alignment);
    if (nm.no_alignment) {
      ++report.no_alignment;
    } else {
      nm_sum += nm.value;
      ++nm_n;
    }
    usw += static_cast<double>(unaligned_source_words(item.alignment));
    utw += static_cast<double>(unaligned_translation_words(item.alignment));
    sources.push_back(item.source);
    hyps.push_back(item.hypothesis);
  }
  const auto n = static_cast<double>(items.size());
  report.nm = nm_n ? nm_sum / static_cast<double>(nm_n) : 0.0;
  report.usw_mean = usw / n;
  report.utw_mean = utw / n;
  report.pi_rate = punctuation_insertion_rate(sources, hyps, markers);
  if (lm) report.fluency_ppl = fluency(hyps, lm);
  return report;
}

std::string_view bucket_name(Bucket b) {
  switch (b) {
    case Bucket::kLowest:
      return "Lowest";
    case Bucket::kMedium:
      return "Medium";
    case Bucket::kHighest:
      return "Highest";
  }
  return "?";
}

PerplexityBuckets perplexity_buckets(const std::vector<PerplexityItem>& items) {
  if (items.size() < 3) throw Error("perplexity buckets need at least 3 items");
  std::vector<std::size_t> order(items.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& x = items[a];
    const auto& y = items[b];
    return x.source_ppl != y.source_ppl ? x.source_ppl < y.source_ppl : x.id < y.id;
  });
  const std::size_t n = items.size();
  const std::array<std::size_t, 3> sizes{n / 3 + (n % 3 > 0 ? 1 : 0), n / 3 + (n % 3 > 1 ? 1 : 0), n / 3};

  PerplexityBuckets out;
  out.sizes = sizes;
  std::vector<Bucket> bucket_of(n);
  std::array<double, 3> sum{};
  std::size_t rank = 0;
  for (std::size_t b = 0; b < 3; ++b) {
    for (std::size_t k = 0; k < sizes[b]; ++k, ++rank) {
      const std::size_t i = order[rank];
      bucket_of[i] = static_cast<Bucket>(b);
      sum[b] += items[i].qe_a - items[i].qe_b;
    }
  }
  for (std::size_t b = 0; b < 3; ++b) out.deltas[b] = sum[b] / static_cast<double>(sizes[b]);
  out.assignments.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.assignments.emplace_back(items[i].id, bucket_of[i]);
  return out;
}

}  // namespace mtkit::traits
