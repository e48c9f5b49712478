#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "mtkit/corpus.hpp"
#include "mtkit/error.hpp"
#include "mtkit/shots.hpp"

namespace mtkit::docpipe {

struct Window {
  std::string doc_id;
  std::size_t start_line = 0;  // half-open [start_line, end_line)
  std::size_t end_line = 0;
  std::vector<std::string> lines;
};

/// Consecutive non-overlapping windows of w lines; the last holds the remainder.
std::vector<Window> window_document(const corpus::Document& doc, std::size_t w);

/// Total windows over a set of documents: sum of ceil(n_d / w).
std::size_t count_windows(const std::vector<corpus::Document>& docs, std::size_t w);

/// A document with its reference (or system output) lines.
struct ParallelDocument {
  std::string doc_id;
  std::vector<std::string> source;
  std::vector<std::string> target;
};

enum class DocShotKind {
  kQualityRandom,  // QR: sentence pairs from the quality pool
  kDocRandom,      // DR: random sentence pairs from the document pool
  kDocFirst,       // DF: first k lines of a random pool document
  kDocHistory,     // DH: first k lines of a random already translated document
};

std::string_view doc_shot_name(DocShotKind kind);

struct DocShotRegime {
  DocShotKind kind = DocShotKind::kQualityRandom;
  std::size_t k = 5;
  std::uint64_t seed = 0;
  std::vector<ParallelDocument> history;  // (source, output) pairs, DH only
};

struct DocShots {
  std::vector<std::string> source_lines;
  std::vector<std::string> reference_lines;
  bool short_count = false;
  std::string from_doc;  // DF/DH: the document the shots came from
};

/// Documents whose id equals input_doc.doc_id are never used as shots.
DocShots make_doc_shots(const DocShotRegime& regime, const shots::ScoredPool* shot_pool,
                        const std::vector<ParallelDocument>& doc_pool, const corpus::Document& input_doc,
                        const shots::QrOptions& qr_options = {});

enum class RepairKind { kMergeSplit, kSkipFill, kDropEmpty };
std::string_view repair_name(RepairKind kind);

struct Repair {
  RepairKind kind;
  std::size_t position;  // source line index the repair produced (dropped output index for kDropEmpty)
  std::string note;
};

struct RestoredOutput {
  std::vector<std::string> lines;
  std::vector<Repair> repairs;
};

class UnrecoverableOverflow : public Error {
 public:
  using Error::Error;
};

/// Restores a one-to-one line mapping between a document's source lines and
/// the model output for it.
///
/// Trailing empty output lines signal skipped sentences; every other missing
/// line is taken as two source lines merged into one output line. A dynamic
/// program over line lengths chooses where the skips and merges happened by
/// minimising squared log length-ratio distortion against the document's
/// overall output/source length ratio, with shared characters as a tie-break.
/// Skipped positions become empty lines and merged lines are split at the
/// whitespace nearest to the source-proportional offset.
///
/// Throws UnrecoverableOverflow when there are more non-empty output lines
/// than source lines.
RestoredOutput restore_alignment(const std::vector<std::string>& source_lines, const std::vector<std::string>& output_lines);

/// Splits `text` into `weights.size()` pieces at the whitespace runs nearest
/// to the weight-proportional codepoint offsets. Whitespace at a cut is dropped.
std::vector<std::string> proportional_split(std::string_view text, const std::vector<std::size_t>& weights);

}  // namespace mtkit::docpipe
