#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "mtkit/corpus.hpp"
#include "mtkit/oracles.hpp"

namespace mtkit::metrics {

struct MetricScore {
  std::string name;
  double value = 0.0;
  std::size_t n_items = 0;
};

enum class Tokenizer {
  k13a,    // mteval-v13a style punctuation splitting
  kChar,   // one token per non-space codepoint (ZH/JA)
  kNone,   // whitespace split only
};

/// 13a for whitespace-segmented languages, character tokens for ZH/JA.
Tokenizer default_tokenizer(std::string_view target_lang);
std::vector<std::string> tokenize(std::string_view text, Tokenizer tokenizer);

enum class Smoothing { kNone, kExp };

struct BleuOptions {
  Tokenizer tokenizer = Tokenizer::k13a;
  Smoothing smoothing = Smoothing::kNone;
  int max_order = 4;
  /// Drop n-gram orders for which the hypothesis side has no n-grams at all,
  /// so very short segments are not forced to zero.
  bool effective_order = true;
};

struct BleuStats {
  std::array<long, 9> matches{};
  std::array<long, 9> totals{};
  long hyp_len = 0;
  long ref_len = 0;

  BleuStats& operator+=(const BleuStats& other);
};

BleuStats bleu_stats(std::string_view hypothesis, std::string_view reference, const BleuOptions& options = {});
double bleu_from_stats(const BleuStats& stats, const BleuOptions& options = {});

/// Corpus BLEU in [0, 100].
MetricScore bleu(const std::vector<std::string>& hypotheses, const std::vector<std::string>& references,
                 const BleuOptions& options = {});

struct ChrfOptions {
  int char_order = 6;
  double beta = 2.0;
};

/// Corpus chrF in [0, 100]. Whitespace is removed before extracting character
/// n-grams; precision and recall are averaged over orders present on both sides.
MetricScore chrf(const std::vector<std::string>& hypotheses, const std::vector<std::string>& references,
                 const ChrfOptions& options = {});

/// Each document's lines joined with a space, then corpus BLEU over documents.
MetricScore doc_bleu(const std::vector<std::vector<std::string>>& doc_hypotheses,
                     const std::vector<std::vector<std::string>>& doc_references, const BleuOptions& options = {});

struct Segment {
  std::size_t doc = 0;  // index into the document list
  std::string doc_id;
  std::size_t start = 0;
  std::size_t end = 0;
};

struct DocEvalPlan {
  std::size_t window = 4;
  std::size_t stride = 1;
  std::vector<Segment> segments;
};

/// Overlapping sliding-window segments [i, i + window) for i = 0, stride, ...
/// clamped to the document end; the last segment of each document reaches its
/// final line.
DocEvalPlan plan_doc_eval(const std::vector<corpus::Document>& docs, std::size_t window = 4, std::size_t stride = 1);

struct DocQeResult {
  MetricScore corpus;
  std::vector<double> per_document;
};

/// Mean over documents of the mean segment score. Segment texts are the
/// segment lines joined with a space.
DocQeResult doc_qe(const DocEvalPlan& plan, const std::vector<corpus::Document>& src_docs,
                   const std::vector<corpus::Document>& hyp_docs, const QeOracle& qe);

/// One evaluation item for grouped reports.
struct EvalItem {
  std::size_t id = 0;
  std::string source;
  std::string hypothesis;
  std::string reference;
  std::map<std::string, std::string> tags;    // domain, language pair, system...
  std::map<std::string, double> item_scores;  // precomputed per-item metrics, averaged per group
};

struct GroupRow {
  std::string group;
  std::size_t n_items = 0;
  std::vector<MetricScore> scores;
};

struct GroupedReport {
  std::string group_key;
  std::vector<GroupRow> rows;  // groups in name order, then "all"
  std::size_t untagged = 0;
};

inline constexpr std::string_view kUntaggedGroup = "untagged";
inline constexpr std::string_view kAllGroup = "all";

/// Corpus BLEU and chrF recomputed within each group plus the means of any
/// per-item scores. `metric_order` lists the output columns; names other than
/// "BLEU" and "ChrF" are looked up in item_scores.
GroupedReport aggregate_report(const std::vector<EvalItem>& items, const std::string& group_key,
                               const std::vector<std::string>& metric_order, const BleuOptions& bleu_options = {});

/// Aligned plain-text table, one row per (system, group).
void write_table(std::ostream& out, const std::vector<std::pair<std::string, GroupedReport>>& by_system,
                 const std::vector<std::string>& metric_order);
/// CSV with columns system,group,metric,value,n.
void write_csv(std::ostream& out, const std::vector<std::pair<std::string, GroupedReport>>& by_system);

std::string format_value(double v);

}  // namespace mtkit::metrics
