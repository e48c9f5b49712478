#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mtkit/docpipe.hpp"
#include "mtkit/error.hpp"
#include "mtkit/router.hpp"
#include "mtkit/scorerio.hpp"
#include "mtkit/shots.hpp"

namespace mtkit::campaign {

using Json = nlohmann::json;

inline constexpr int kLayoutVersion = 1;

class ConfigError : public Error {
 public:
  using Error::Error;
};

struct ParallelFiles {
  std::filesystem::path source;
  std::filesystem::path target;  // unused for tsv/jsonl
  corpus::ParallelFormat format = corpus::ParallelFormat::kTwoFile;
  std::filesystem::path doc_ids;  // one document id per line
  std::filesystem::path sidecar;  // "<index>\t<key>=<value>" tags, e.g. domain
};

struct SystemSpec {
  std::string name;
  bool from_backend = true;
  std::filesystem::path hypotheses;  // file systems: one line per test item
};

enum class Mode { kSentence, kDocument };
enum class PromptStyle { kSentence, kChat };

struct RoutingSpec {
  std::string primary;
  std::string fallback;
  router::RoutingPolicy policy;
};

struct CampaignConfig {
  std::string src_lang;
  std::string tgt_lang;
  std::string src_name;  // language names used in prompts
  std::string tgt_name;
  ParallelFiles test_set;
  std::optional<ParallelFiles> shot_pool;
  std::filesystem::path pool_embeddings;  // optional precomputed embedding table
  std::size_t pool_cutoff = shots::kDefaultTopCutoff;
  shots::Strategy strategy = shots::Strategy::kRandom;
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::size_t min_source_tokens = 50;
  Mode mode = Mode::kSentence;
  PromptStyle prompt_style = PromptStyle::kSentence;
  std::size_t window = 1;
  docpipe::DocShotKind doc_regime = docpipe::DocShotKind::kQualityRandom;
  std::optional<ParallelFiles> doc_pool;
  std::vector<SystemSpec> systems;
  std::vector<std::string> metrics;
  std::vector<std::string> group_by;
  std::size_t doc_eval_window = 4;
  std::size_t doc_eval_stride = 1;
  bool characteristics = false;
  std::optional<RoutingSpec> routing;
  scorer::ScorerConfig scorer;

  /// Relative paths are resolved against base_dir. Throws ConfigError.
  static CampaignConfig from_json(const Json& j, const std::filesystem::path& base_dir = {});
  static CampaignConfig load(const std::filesystem::path& path);
  Json to_json() const;

  /// Throws ConfigError on hard errors; returns warnings.
  std::vector<std::string> validate() const;
};

/// Metric names understood by campaigns, in report column order.
inline const std::vector<std::string> kKnownMetrics{"COMET-22", "COMETkiwi", "ChrF", "BLEU", "Doc-BLEU", "Doc-COMETkiwi"};

std::string language_name(const std::string& code);

struct RunOptions {
  bool dry_run = false;
};

struct RunSummary {
  std::filesystem::path run_dir;
  std::size_t items = 0;
  std::size_t requests = 0;       // items handed to the scorer client
  std::size_t backend_calls = 0;  // transport round-trips
  std::size_t errors = 0;
};

/// Run directory layout (version 1):
///   manifest.json          config, config hash, input hashes, seeds
///   items/items.jsonl      one record per (system, test item)
///   items/windows.jsonl    document mode: one record per translated window
///   items/docs.jsonl       per-document scores
///   reports/report.txt     aligned tables; reports/report.csv
///   reports/routing.txt    when routing is configured
///   reports/characteristics.txt when characteristics are enabled
///   logs/repairs.jsonl logs/decisions.jsonl logs/errors.jsonl
/// A dry run writes manifest.json and items/prompts.jsonl only.
RunSummary run_campaign(const CampaignConfig& config, scorer::ScorerClient& client, const std::filesystem::path& run_dir,
                        const RunOptions& options = {});

/// Rebuilds reports/ from the per-item records of a run directory.
void write_reports(const std::filesystem::path& run_dir);

struct ItemScores {
  std::string label;                 // "<run dir>:<system>"
  std::map<std::size_t, double> by_id;
};

/// Reads one system's per-item score (e.g. "COMETkiwi", "ChrF") from a run.
/// An empty system picks the first system of the run.
ItemScores load_item_scores(const std::filesystem::path& run_dir, const std::string& system, const std::string& score);

struct PairComparison {
  std::string a;
  std::string b;
  double mean_a = 0.0;
  double mean_b = 0.0;
  std::size_t wins = 0;  // a better than b
  std::size_t ties = 0;
  std::size_t losses = 0;
  std::size_t n = 0;
};

/// All ordered pairs (i < j). Differences within tie_epsilon count as ties.
/// Throws listing divergent ids when the item sets differ.
std::vector<PairComparison> compare_systems(const std::vector<ItemScores>& systems, double tie_epsilon = 0.0);
void write_comparison(std::ostream& out, const std::vector<PairComparison>& rows, const std::string& score);

}  // namespace mtkit::campaign
