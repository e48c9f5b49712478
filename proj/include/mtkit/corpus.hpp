#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "mtkit/oracles.hpp"

namespace mtkit::corpus {

struct SentencePair {
  std::size_t id = 0;
  std::string source;
  std::string target;
  std::optional<double> quality;  // cross-lingual similarity in [-1, 1]
  std::map<std::string, std::string> meta;

  bool operator==(const SentencePair&) const = default;
};

struct Corpus {
  std::vector<SentencePair> pairs;
  std::string src_lang;
  std::string tgt_lang;
};

struct Document {
  std::string doc_id;
  std::vector<std::string> lines;
  std::optional<std::string> domain;
};

enum class ParallelFormat {
  kTwoFile,  // source and target files, line aligned
  kTsv,      // source<TAB>target in one file
  kJsonl,    // {"source", "target", "doc_id"?, "domain"?} per line
};

std::optional<ParallelFormat> parse_format(std::string_view name);

/// Reads one file as UTF-8 lines. Throws naming the byte offset of the first
/// undecodable sequence. A final line without a trailing LF is still a line.
std::vector<std::string> read_lines(const std::filesystem::path& path);
void write_lines(const std::filesystem::path& path, const std::vector<std::string>& lines);

/// For kTsv and kJsonl the target path is ignored.
Corpus load_parallel(const std::filesystem::path& source_path, const std::filesystem::path& target_path,
                     ParallelFormat format, std::string src_lang = {}, std::string tgt_lang = {});

void save_parallel(const Corpus& corpus, const std::filesystem::path& source_path,
                   const std::filesystem::path& target_path, ParallelFormat format);

/// Applies "<line_index>\t<key>=<value>" records to pair metadata.
void apply_sidecar(Corpus& corpus, const std::filesystem::path& sidecar_path);

struct CleaningRules {
  double max_length_ratio = 3.0;
  std::size_t min_tokens = 1;
  std::size_t max_tokens = 1024;
  bool langid_required = false;
  bool dedup_exact = false;

  void validate() const;
};

struct CleanReport {
  std::size_t kept = 0;
  std::map<std::string, std::size_t> dropped;  // rule name -> count of first failing rule
};

struct CleanResult {
  Corpus corpus;
  CleanReport report;
};

/// Keeps the pairs that pass every rule, preserving order and ids.
/// `langid` may be empty when rules.langid_required is false.
CleanResult clean(const Corpus& corpus, const CleaningRules& rules, const LangIdOracle& langid = {});

struct DocIdPerLine {
  std::vector<std::string> ids;
};
struct BlankLineDelimited {};
using BoundarySpec = std::variant<DocIdPerLine, BlankLineDelimited>;

/// Splits lines into documents. With DocIdPerLine each run of equal ids is a
/// document; an id recurring after a different one is rejected.
std::vector<Document> segment_documents(const std::vector<std::string>& lines, const BoundarySpec& spec);

}  // namespace mtkit::corpus
