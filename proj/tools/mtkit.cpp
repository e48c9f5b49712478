#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mtkit/campaign.hpp"
#include "mtkit/characteristics.hpp"
#include "mtkit/corpus.hpp"
#include "mtkit/router.hpp"
#include "mtkit/text.hpp"

namespace {

using mtkit::campaign::CampaignConfig;
using mtkit::campaign::ConfigError;
using mtkit::campaign::Json;

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitPartial = 3;

struct Overrides {
  std::string strategy;
  long long k = -1;
  long long seed = -1;
  std::string mode;
  long long window = -1;
  std::string scorer_url;
  std::string cache;
};

void add_overrides(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--strategy", o.strategy, "shot strategy: RR, QR or QS");
  cmd->add_option("-k,--shots", o.k, "number of shots");
  cmd->add_option("--seed", o.seed, "shot selection seed");
  cmd->add_option("--mode", o.mode, "sentence or document");
  cmd->add_option("--window", o.window, "document window size");
  cmd->add_option("--scorer-url", o.scorer_url, "scorer base address");
  cmd->add_option("--cache", o.cache, "response cache log");
}

CampaignConfig load_config(const std::string& path, const Overrides& o) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path);
  Json j = Json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError(path + ": not valid JSON");
  if (!j.is_object()) throw ConfigError(path + ": config must be an object");
  if (!o.strategy.empty()) j["shots"]["strategy"] = o.strategy;
  if (o.k >= 0) j["shots"]["k"] = o.k;
  if (o.seed >= 0) j["shots"]["seed"] = o.seed;
  if (!o.mode.empty()) j["mode"] = o.mode;
  if (o.window >= 0) j["window"] = o.window;
  auto config = CampaignConfig::from_json(j, std::filesystem::path(path).parent_path());
  config.scorer.apply_env();
  if (!o.scorer_url.empty()) config.scorer.base_url = o.scorer_url;
  if (!o.cache.empty()) config.scorer.cache_path = o.cache;
  return config;
}

int validate(const std::string& path, const Overrides& o) {
  const auto config = load_config(path, o);
  for (const auto& w : config.validate()) std::cerr << "warning: " << w << '\n';
  std::cout << "ok: " << config.systems.size() << " system(s), " << config.metrics.size() << " metric(s)\n";
  return kExitOk;
}

int run(const std::string& path, const Overrides& o, const std::string& out, bool dry_run, bool offline) {
  const auto config = load_config(path, o);
  for (const auto& w : config.validate()) std::cerr << "warning: " << w << '\n';
  auto client = mtkit::scorer::make_client(config.scorer);
  client.set_offline(offline);
  const auto summary = mtkit::campaign::run_campaign(config, client, out, {dry_run});
  std::cout << (dry_run ? "dry run: " : "run: ") << summary.items << " items, " << summary.requests << " requests, "
            << summary.backend_calls << " backend calls, " << summary.errors << " errors -> " << summary.run_dir.string()
            << '\n';
  return summary.errors > 0 ? kExitPartial : kExitOk;
}

int characteristics(const std::string& src_path, const std::string& hyp_path, const std::string& align_path,
                    const std::string& markers_arg) {
  const auto src = mtkit::corpus::read_lines(src_path);
  const auto hyp = mtkit::corpus::read_lines(hyp_path);
  const auto aligns = mtkit::corpus::read_lines(align_path);
  if (src.size() != hyp.size() || src.size() != aligns.size()) {
    throw ConfigError("source, hypothesis and alignment files differ in line count");
  }
  std::vector<std::string> markers = mtkit::traits::kDefaultMarkers;
  if (!markers_arg.empty()) markers = mtkit::text::split_whitespace(markers_arg);
  std::vector<mtkit::traits::TraitItem> items;
  for (std::size_t i = 0; i < src.size(); ++i) {
    const auto s = mtkit::text::split_whitespace(src[i]).size();
    const auto t = mtkit::text::split_whitespace(hyp[i]).size();
    items.push_back({src[i], hyp[i], mtkit::traits::parse_pharaoh(aligns[i], s, t)});
  }
  const auto r = mtkit::traits::trait_report(items, {}, markers);
  std::cout << std::fixed << std::setprecision(2) << "NM  " << r.nm << "\nPI  " << r.pi_rate << "\nUSW " << r.usw_mean
            << "\nUTW " << r.utw_mean << "\nN   " << r.n_items << " (" << r.no_alignment << " without alignment)\n";
  return kExitOk;
}

int route(const std::string& scores_path, const std::string& policy, double percentile, std::optional<double> threshold,
          const std::string& decisions_path) {
  std::vector<std::string> ids;
  std::vector<double> cols[4];
  const auto lines = mtkit::corpus::read_lines(scores_path);
  for (std::size_t n = 0; n < lines.size(); ++n) {
    const auto fields = mtkit::text::split_whitespace(lines[n]);
    if (fields.empty() || fields[0].front() == '#') continue;
    if (fields.size() != 5) {
      throw ConfigError(scores_path + ":" + std::to_string(n + 1) +
                        ": expected id primary_qe fallback_qe primary_final fallback_final");
    }
    ids.push_back(fields[0]);
    for (int c = 0; c < 4; ++c) cols[c].push_back(std::stod(fields[static_cast<std::size_t>(c) + 1]));
  }
  mtkit::router::RoutingPolicy p;
  if (policy == "max") {
    p.kind = mtkit::router::PolicyKind::kMaxRouting;
  } else if (policy == "threshold") {
    p.kind = mtkit::router::PolicyKind::kThreshold;
    p.threshold = threshold;
    p.source = threshold ? mtkit::router::ThresholdSource::kGiven : mtkit::router::ThresholdSource::kSameItems;
  } else {
    throw ConfigError("policy must be 'threshold' or 'max'");
  }
  p.percentile = percentile;
  try {
    p.validate();
  } catch (const mtkit::Error& e) {
    throw ConfigError(e.what());
  }
  const auto r = mtkit::router::evaluate_hybrid_scores(ids, cols[0], cols[1], cols[2], cols[3], p);
  mtkit::router::write_hybrid_summary(std::cout, r);
  if (!decisions_path.empty()) {
    std::ofstream out(decisions_path);
    mtkit::router::write_decision_log(out, r.decisions);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Evaluation campaigns for machine translation"};
  app.require_subcommand(1);

  Overrides overrides;
  std::string config_path;
  std::string out_dir = "run";
  bool offline = false;

  auto* validate_cmd = app.add_subcommand("validate", "check a campaign config");
  validate_cmd->add_option("config", config_path)->required();
  add_overrides(validate_cmd, overrides);

  auto* dry_cmd = app.add_subcommand("dry-run", "render prompts and plans without backend calls");
  dry_cmd->add_option("config", config_path)->required();
  dry_cmd->add_option("-o,--out", out_dir, "run directory");
  add_overrides(dry_cmd, overrides);

  auto* run_cmd = app.add_subcommand("run", "run a campaign");
  run_cmd->add_option("config", config_path)->required();
  run_cmd->add_option("-o,--out", out_dir, "run directory");
  run_cmd->add_flag("--offline", offline, "serve from the cache only");
  add_overrides(run_cmd, overrides);

  std::string run_dir;
  auto* report_cmd = app.add_subcommand("report", "rebuild reports from a run directory");
  report_cmd->add_option("run_dir", run_dir)->required();

  std::vector<std::string> compare_dirs;
  std::vector<std::string> compare_systems;
  std::string score = "COMETkiwi";
  double tie_epsilon = 0.0;
  auto* compare_cmd = app.add_subcommand("compare", "per-item win/tie/loss between runs or systems");
  compare_cmd->add_option("run_dirs", compare_dirs)->required();
  compare_cmd->add_option("--system", compare_systems, "system per run dir (or one run dir with several systems)");
  compare_cmd->add_option("--score", score, "per-item score name");
  compare_cmd->add_option("--tie-epsilon", tie_epsilon, "differences up to this are ties");

  std::string src_path, hyp_path, align_path, markers;
  auto* chars_cmd = app.add_subcommand("characteristics", "NM, PI, USW and UTW from alignment files");
  chars_cmd->add_option("--source", src_path)->required();
  chars_cmd->add_option("--hyp", hyp_path)->required();
  chars_cmd->add_option("--align", align_path, "Pharaoh alignments, one line per item")->required();
  chars_cmd->add_option("--markers", markers, "space separated terminal punctuation markers");

  std::string scores_path, policy = "threshold", decisions_path;
  double percentile = 50.0;
  std::optional<double> threshold;
  auto* route_cmd = app.add_subcommand("route", "QE routing between a primary and a fallback system");
  route_cmd->add_option("--scores", scores_path, "whitespace table: id primary_qe fallback_qe primary_final fallback_final")
      ->required();
  route_cmd->add_option("--policy", policy, "threshold or max");
  route_cmd->add_option("--percentile", percentile, "same-items percentile when no threshold is given");
  route_cmd->add_option("--threshold", threshold, "fixed threshold");
  route_cmd->add_option("--decisions", decisions_path, "write the decision log here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*validate_cmd) return validate(config_path, overrides);
    if (*dry_cmd) return run(config_path, overrides, out_dir, true, false);
    if (*run_cmd) return run(config_path, overrides, out_dir, false, offline);
    if (*report_cmd) {
      mtkit::campaign::write_reports(run_dir);
      std::ifstream in(std::filesystem::path(run_dir) / "reports" / "report.txt");
      std::cout << in.rdbuf();
      return kExitOk;
    }
    if (*compare_cmd) {
      std::vector<mtkit::campaign::ItemScores> systems;
      if (compare_dirs.size() == 1) {
        for (const auto& s : compare_systems) systems.push_back(mtkit::campaign::load_item_scores(compare_dirs[0], s, score));
      } else {
        if (!compare_systems.empty() && compare_systems.size() != compare_dirs.size()) {
          throw ConfigError("give one --system per run dir");
        }
        for (std::size_t i = 0; i < compare_dirs.size(); ++i) {
          systems.push_back(
              mtkit::campaign::load_item_scores(compare_dirs[i], compare_systems.empty() ? "" : compare_systems[i], score));
        }
      }
      mtkit::campaign::write_comparison(std::cout, mtkit::campaign::compare_systems(systems, tie_epsilon), score);
      return kExitOk;
    }
    if (*chars_cmd) return characteristics(src_path, hyp_path, align_path, markers);
    if (*route_cmd) return route(scores_path, policy, percentile, threshold, decisions_path);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitFailure;
}
