#include "mtkit/campaign.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "mtkit/characteristics.hpp"
#include "mtkit/corpus.hpp"
#include "mtkit/metrics.hpp"
#include "mtkit/prompts.hpp"
#include "mtkit/random.hpp"
#include "mtkit/text.hpp"

namespace mtkit::campaign {

namespace fs = std::filesystem;

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return {};
  fs::path path(p);
  if (path.is_relative() && !base.empty()) path = base / path;
  return path.lexically_normal();
}

void reject_unknown(const Json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  for (const auto& [key, _] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw ConfigError(where + ": unknown key '" + key + "'");
    }
  }
}

template <typename T>
T get_or(const Json& j, const char* key, T fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(where + ": key '" + key + "' has the wrong type");
  }
}

ParallelFiles parse_files(const Json& j, const fs::path& base, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  reject_unknown(j, {"source", "target", "format", "doc_ids", "sidecar"}, where);
  ParallelFiles f;
  f.source = resolve(base, get_or<std::string>(j, "source", "", where));
  if (f.source.empty()) throw ConfigError(where + ": 'source' is required");
  f.target = resolve(base, get_or<std::string>(j, "target", "", where));
  const auto format = get_or<std::string>(j, "format", "two-file", where);
  auto parsed = corpus::parse_format(format);
  if (!parsed) throw ConfigError(where + ": unknown format '" + format + "'");
  f.format = *parsed;
  f.doc_ids = resolve(base, get_or<std::string>(j, "doc_ids", "", where));
  f.sidecar = resolve(base, get_or<std::string>(j, "sidecar", "", where));
  return f;
}

std::string format_name(corpus::ParallelFormat f) {
  switch (f) {
    case corpus::ParallelFormat::kTwoFile:
      return "two-file";
    case corpus::ParallelFormat::kTsv:
      return "tsv";
    case corpus::ParallelFormat::kJsonl:
      return "jsonl";
  }
  return "?";
}

Json files_json(const ParallelFiles& f) {
  Json j{{"source", f.source.string()}, {"format", format_name(f.format)}};
  if (!f.target.empty()) j["target"] = f.target.string();
  if (!f.doc_ids.empty()) j["doc_ids"] = f.doc_ids.string();
  if (!f.sidecar.empty()) j["sidecar"] = f.sidecar.string();
  return j;
}

bool contains(const std::vector<std::string>& v, const std::string& x) { return std::find(v.begin(), v.end(), x) != v.end(); }

}  // namespace

std::string language_name(const std::string& code) {
  static const std::map<std::string, std::string> names{
      {"cs", "Czech"},     {"de", "German"},   {"en", "English"}, {"fr", "French"},  {"ha", "Hausa"},
      {"is", "Icelandic"}, {"ja", "Japanese"}, {"ru", "Russian"}, {"uk", "Ukrainian"}, {"zh", "Chinese"}};
  auto it = names.find(code);
  return it == names.end() ? code : it->second;
}

CampaignConfig CampaignConfig::from_json(const Json& j, const fs::path& base) {
  if (!j.is_object()) throw ConfigError("config must be an object");
  reject_unknown(j,
                 {"language_pair", "language_names", "test_set", "shot_pool", "pool_embeddings", "pool_cutoff", "shots", "mode",
                  "window", "prompt_style", "doc_regime", "doc_pool", "systems", "metrics", "group_by", "doc_eval",
                  "characteristics", "routing", "scorer"},
                 "config");
  CampaignConfig c;
  const auto pair = get_or<std::string>(j, "language_pair", "", "config");
  const auto dash = pair.find('-');
  if (dash == std::string::npos || dash == 0 || dash + 1 == pair.size()) {
    throw ConfigError("config: language_pair must look like 'de-en'");
  }
  c.src_lang = pair.substr(0, dash);
  c.tgt_lang = pair.substr(dash + 1);
  c.src_name = language_name(c.src_lang);
  c.tgt_name = language_name(c.tgt_lang);
  if (j.contains("language_names")) {
    const auto& n = j["language_names"];
    c.src_name = get_or<std::string>(n, "src", c.src_name, "language_names");
    c.tgt_name = get_or<std::string>(n, "tgt", c.tgt_name, "language_names");
  }
  if (!j.contains("test_set")) throw ConfigError("config: 'test_set' is required");
  c.test_set = parse_files(j["test_set"], base, "test_set");
  if (j.contains("shot_pool")) c.shot_pool = parse_files(j["shot_pool"], base, "shot_pool");
  if (j.contains("doc_pool")) c.doc_pool = parse_files(j["doc_pool"], base, "doc_pool");
  c.pool_embeddings = resolve(base, get_or<std::string>(j, "pool_embeddings", "", "config"));
  c.pool_cutoff = get_or<std::size_t>(j, "pool_cutoff", c.pool_cutoff, "config");

  if (j.contains("shots")) {
    const auto& s = j["shots"];
    reject_unknown(s, {"strategy", "k", "seed", "min_source_tokens"}, "shots");
    const auto name = get_or<std::string>(s, "strategy", "RR", "shots");
    bool found = false;
    for (auto st : {shots::Strategy::kRandom, shots::Strategy::kQualityRandom, shots::Strategy::kQualitySelected}) {
      if (shots::strategy_name(st) == name) {
        c.strategy = st;
        found = true;
      }
    }
    if (!found) throw ConfigError("shots: unknown strategy '" + name + "' (RR, QR or QS)");
    const auto k = get_or<long long>(s, "k", 0, "shots");
    if (k < 0) throw ConfigError("shots: k must be >= 0");
    c.k = static_cast<std::size_t>(k);
    c.seed = get_or<std::uint64_t>(s, "seed", 0, "shots");
    c.min_source_tokens = get_or<std::size_t>(s, "min_source_tokens", c.min_source_tokens, "shots");
  }

  const auto mode = get_or<std::string>(j, "mode", "sentence", "config");
  if (mode == "sentence") {
    c.mode = Mode::kSentence;
  } else if (mode == "document") {
    c.mode = Mode::kDocument;
  } else {
    throw ConfigError("config: mode must be 'sentence' or 'document'");
  }
  const auto window = get_or<long long>(j, "window", 1, "config");
  if (window < 1) throw ConfigError("config: window must be >= 1");
  c.window = static_cast<std::size_t>(window);
  const auto style = get_or<std::string>(j, "prompt_style", "sentence", "config");
  if (style == "sentence") {
    c.prompt_style = PromptStyle::kSentence;
  } else if (style == "chat") {
    c.prompt_style = PromptStyle::kChat;
  } else {
    throw ConfigError("config: prompt_style must be 'sentence' or 'chat'");
  }
  const auto regime = get_or<std::string>(j, "doc_regime", "QR", "config");
  bool found = false;
  for (auto kind : {docpipe::DocShotKind::kQualityRandom, docpipe::DocShotKind::kDocRandom, docpipe::DocShotKind::kDocFirst,
                    docpipe::DocShotKind::kDocHistory}) {
    if (docpipe::doc_shot_name(kind) == regime) {
      c.doc_regime = kind;
      found = true;
    }
  }
  if (!found) throw ConfigError("config: unknown doc_regime '" + regime + "' (QR, DR, DF or DH)");

  if (!j.contains("systems") || !j["systems"].is_array()) throw ConfigError("config: 'systems' must be a list");
  for (const auto& s : j["systems"]) {
    if (!s.is_object()) throw ConfigError("systems: entries must be objects");
    reject_unknown(s, {"name", "hypotheses"}, "systems");
    SystemSpec sys;
    sys.name = get_or<std::string>(s, "name", "", "systems");
    if (sys.name.empty()) throw ConfigError("systems: every system needs a name");
    sys.hypotheses = resolve(base, get_or<std::string>(s, "hypotheses", "", "systems"));
    sys.from_backend = sys.hypotheses.empty();
    c.systems.push_back(std::move(sys));
  }
  c.metrics = get_or<std::vector<std::string>>(j, "metrics", {"COMET-22", "COMETkiwi", "ChrF", "BLEU"}, "config");
  c.group_by = get_or<std::vector<std::string>>(j, "group_by", {}, "config");
  if (j.contains("doc_eval")) {
    const auto& d = j["doc_eval"];
    reject_unknown(d, {"window", "stride"}, "doc_eval");
    c.doc_eval_window = get_or<std::size_t>(d, "window", c.doc_eval_window, "doc_eval");
    c.doc_eval_stride = get_or<std::size_t>(d, "stride", c.doc_eval_stride, "doc_eval");
  }
  c.characteristics = get_or<bool>(j, "characteristics", false, "config");
  if (j.contains("routing")) {
    const auto& r = j["routing"];
    reject_unknown(r, {"primary", "fallback", "policy", "percentile", "threshold", "threshold_source"}, "routing");
    RoutingSpec spec;
    spec.primary = get_or<std::string>(r, "primary", "", "routing");
    spec.fallback = get_or<std::string>(r, "fallback", "", "routing");
    const auto policy = get_or<std::string>(r, "policy", "threshold", "routing");
    if (policy == "threshold") {
      spec.policy.kind = router::PolicyKind::kThreshold;
    } else if (policy == "max") {
      spec.policy.kind = router::PolicyKind::kMaxRouting;
    } else {
      throw ConfigError("routing: policy must be 'threshold' or 'max'");
    }
    spec.policy.percentile = get_or<double>(r, "percentile", 50.0, "routing");
    if (r.contains("threshold")) spec.policy.threshold = get_or<double>(r, "threshold", 0.0, "routing");
    const auto source = get_or<std::string>(r, "threshold_source", spec.policy.threshold ? "given" : "same_items", "routing");
    if (source == "given") {
      spec.policy.source = router::ThresholdSource::kGiven;
    } else if (source == "same_items") {
      spec.policy.source = router::ThresholdSource::kSameItems;
    } else {
      throw ConfigError("routing: threshold_source must be 'given' or 'same_items'");
    }
    try {
      spec.policy.validate();
    } catch (const Error& e) {
      throw ConfigError(std::string("routing: ") + e.what());
    }
    c.routing = spec;
  }
  try {
    if (j.contains("scorer")) {
      Json s = j["scorer"];
      if (s.contains("cache_path") && s["cache_path"].is_string()) {
        s["cache_path"] = resolve(base, s["cache_path"].get<std::string>()).string();
      }
      c.scorer = scorer::ScorerConfig::from_json(s);
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("scorer: ") + e.what());
  }
  return c;
}

CampaignConfig CampaignConfig::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  Json j = Json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError(path.string() + ": not valid JSON");
  return from_json(j, path.parent_path());
}

Json CampaignConfig::to_json() const {
  Json j{{"language_pair", src_lang + "-" + tgt_lang},
         {"language_names", {{"src", src_name}, {"tgt", tgt_name}}},
         {"test_set", files_json(test_set)},
         {"pool_cutoff", pool_cutoff},
         {"shots",
          {{"strategy", std::string(shots::strategy_name(strategy))},
           {"k", k},
           {"seed", seed},
           {"min_source_tokens", min_source_tokens}}},
         {"mode", mode == Mode::kSentence ? "sentence" : "document"},
         {"window", window},
         {"prompt_style", prompt_style == PromptStyle::kSentence ? "sentence" : "chat"},
         {"doc_regime", std::string(docpipe::doc_shot_name(doc_regime))},
         {"metrics", metrics},
         {"group_by", group_by},
         {"doc_eval", {{"window", doc_eval_window}, {"stride", doc_eval_stride}}},
         {"characteristics", characteristics},
         {"scorer", scorer.to_json()}};
  if (shot_pool) j["shot_pool"] = files_json(*shot_pool);
  if (doc_pool) j["doc_pool"] = files_json(*doc_pool);
  if (!pool_embeddings.empty()) j["pool_embeddings"] = pool_embeddings.string();
  j["systems"] = Json::array();
  for (const auto& s : systems) {
    Json sj{{"name", s.name}};
    if (!s.from_backend) sj["hypotheses"] = s.hypotheses.string();
    j["systems"].push_back(sj);
  }
  if (routing) {
    Json r{{"primary", routing->primary},
           {"fallback", routing->fallback},
           {"policy", routing->policy.kind == router::PolicyKind::kThreshold ? "threshold" : "max"},
           {"percentile", routing->policy.percentile},
           {"threshold_source", routing->policy.source == router::ThresholdSource::kGiven ? "given" : "same_items"}};
    if (routing->policy.threshold) r["threshold"] = *routing->policy.threshold;
    j["routing"] = r;
  }
  return j;
}

std::vector<std::string> CampaignConfig::validate() const {
  std::vector<std::string> warnings;
  auto need = [](const fs::path& p, const std::string& what) {
    if (!p.empty() && !fs::exists(p)) throw ConfigError(what + ": file not found: " + p.string());
  };
  auto need_files = [&](const ParallelFiles& f, const std::string& what) {
    need(f.source, what + ".source");
    if (f.format == corpus::ParallelFormat::kTwoFile) {
      if (f.target.empty()) throw ConfigError(what + ": two-file format needs 'target'");
      need(f.target, what + ".target");
    }
    need(f.doc_ids, what + ".doc_ids");
    need(f.sidecar, what + ".sidecar");
  };
  need_files(test_set, "test_set");
  if (shot_pool) need_files(*shot_pool, "shot_pool");
  if (doc_pool) {
    need_files(*doc_pool, "doc_pool");
    if (doc_pool->doc_ids.empty()) throw ConfigError("doc_pool: 'doc_ids' is required");
  }
  need(pool_embeddings, "pool_embeddings");

  if (systems.empty()) throw ConfigError("config: at least one system is required");
  std::set<std::string> names;
  for (const auto& s : systems) {
    if (!names.insert(s.name).second) throw ConfigError("systems: duplicate name '" + s.name + "'");
    need(s.hypotheses, "systems." + s.name + ".hypotheses");
  }
  for (const auto& m : metrics) {
    if (!contains(kKnownMetrics, m)) throw ConfigError("metrics: unknown metric '" + m + "'");
  }
  if (k != 0 && k != 1 && k != 5) warnings.push_back("k = " + std::to_string(k) + " is outside the usual {0, 1, 5}");

  const bool uses_docs = mode == Mode::kDocument || contains(metrics, "Doc-BLEU") || contains(metrics, "Doc-COMETkiwi");
  if (uses_docs && test_set.doc_ids.empty()) throw ConfigError("test_set: document mode and Doc-* metrics need 'doc_ids'");
  if (doc_eval_window < 1 || doc_eval_stride < 1 || doc_eval_stride > doc_eval_window) {
    throw ConfigError("doc_eval: need 1 <= stride <= window");
  }
  if (mode == Mode::kSentence) {
    if (prompt_style == PromptStyle::kChat && k > 0) throw ConfigError("prompt_style chat takes no shots (k must be 0)");
    if (k > 0 && !shot_pool) throw ConfigError("shots: k > 0 needs a 'shot_pool'");
    if (window != 1) warnings.push_back("window is ignored in sentence mode");
  } else if (k > 0) {
    if (doc_regime == docpipe::DocShotKind::kQualityRandom && !shot_pool) {
      throw ConfigError("doc_regime QR needs a 'shot_pool'");
    }
    if ((doc_regime == docpipe::DocShotKind::kDocRandom || doc_regime == docpipe::DocShotKind::kDocFirst) && !doc_pool) {
      throw ConfigError("doc_regime DR and DF need a 'doc_pool'");
    }
  }
  if (routing) {
    if (!names.count(routing->primary) || !names.count(routing->fallback)) {
      throw ConfigError("routing: primary and fallback must name configured systems");
    }
    if (routing->primary == routing->fallback) throw ConfigError("routing: primary and fallback must differ");
    if (!contains(metrics, "COMETkiwi") || !contains(metrics, "COMET-22")) {
      throw ConfigError("routing: needs the COMETkiwi (decision) and COMET-22 (evaluation) metrics");
    }
  }
  return warnings;
}

namespace {

struct TestItem {
  std::size_t id = 0;
  std::string source;
  std::string reference;
  std::map<std::string, std::string> tags;
  std::optional<std::size_t> doc;  // index into docs
  std::size_t line = 0;            // line within its document
};

struct Inputs {
  std::vector<TestItem> items;
  std::vector<corpus::Document> src_docs;
  std::vector<corpus::Document> ref_docs;
  std::vector<std::vector<std::size_t>> doc_items;  // item indices per document
};

struct Record {
  std::string hypothesis;
  std::string prompt;
  std::string raw_output;
  std::optional<std::size_t> window;
  std::optional<std::string> error;
  std::map<std::string, double> scores;
  Json traits;
};

Inputs load_inputs(const CampaignConfig& c) {
  Inputs in;
  auto corp = corpus::load_parallel(c.test_set.source, c.test_set.target, c.test_set.format, c.src_lang, c.tgt_lang);
  if (!c.test_set.sidecar.empty()) corpus::apply_sidecar(corp, c.test_set.sidecar);
  for (const auto& p : corp.pairs) in.items.push_back({p.id, p.source, p.target, p.meta, std::nullopt, 0});
  if (!c.test_set.doc_ids.empty()) {
    const auto ids = corpus::read_lines(c.test_set.doc_ids);
    std::vector<std::string> src;
    std::vector<std::string> ref;
    for (const auto& it : in.items) {
      src.push_back(it.source);
      ref.push_back(it.reference);
    }
    in.src_docs = corpus::segment_documents(src, corpus::DocIdPerLine{ids});
    in.ref_docs = corpus::segment_documents(ref, corpus::DocIdPerLine{ids});
    std::size_t next = 0;
    for (std::size_t d = 0; d < in.src_docs.size(); ++d) {
      in.doc_items.emplace_back();
      for (std::size_t l = 0; l < in.src_docs[d].lines.size(); ++l, ++next) {
        in.items[next].doc = d;
        in.items[next].line = l;
        in.items[next].tags["doc_id"] = in.src_docs[d].doc_id;
        in.doc_items[d].push_back(next);
      }
    }
  }
  return in;
}

std::vector<docpipe::ParallelDocument> load_doc_pool(const ParallelFiles& f, const CampaignConfig& c) {
  auto corp = corpus::load_parallel(f.source, f.target, f.format, c.src_lang, c.tgt_lang);
  std::vector<std::string> src;
  std::vector<std::string> tgt;
  for (const auto& p : corp.pairs) {
    src.push_back(p.source);
    tgt.push_back(p.target);
  }
  const auto ids = corpus::read_lines(f.doc_ids);
  const auto sdocs = corpus::segment_documents(src, corpus::DocIdPerLine{ids});
  const auto tdocs = corpus::segment_documents(tgt, corpus::DocIdPerLine{ids});
  std::vector<docpipe::ParallelDocument> out;
  for (std::size_t d = 0; d < sdocs.size(); ++d) out.push_back({sdocs[d].doc_id, sdocs[d].lines, tdocs[d].lines});
  return out;
}

std::optional<shots::ScoredPool> load_shot_pool(const CampaignConfig& c, scorer::ScorerClient& client, bool needs_quality) {
  if (!c.shot_pool) return std::nullopt;
  auto corp = corpus::load_parallel(c.shot_pool->source, c.shot_pool->target, c.shot_pool->format, c.src_lang, c.tgt_lang);
  if (!c.shot_pool->sidecar.empty()) corpus::apply_sidecar(corp, c.shot_pool->sidecar);
  if (!c.pool_embeddings.empty()) return shots::score_pool(corp, shots::EmbeddingTable::load(c.pool_embeddings), c.pool_cutoff);
  const bool scored = std::all_of(corp.pairs.begin(), corp.pairs.end(), [](const auto& p) { return p.quality.has_value(); });
  if (scored) return shots::ScoredPool(corp.pairs, c.pool_cutoff);
  if (needs_quality) return shots::score_pool(corp, scorer::embed_oracle(client), c.pool_cutoff);
  // Random selection ignores quality.
  for (auto& p : corp.pairs) p.quality = 0.0;
  return shots::ScoredPool(corp.pairs, c.pool_cutoff);
}

void write_jsonl(const fs::path& path, const std::vector<Json>& records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& r : records) out << r.dump() << '\n';
}

std::vector<Json> read_jsonl(const fs::path& path) {
  std::vector<Json> out;
  if (!fs::exists(path)) return out;
  for (const auto& line : corpus::read_lines(path)) {
    if (text::trim(line).empty()) continue;
    out.push_back(Json::parse(line));
  }
  return out;
}

std::string file_sha256(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return scorer::sha256_hex(buf.str());
}

// Scores one endpoint over items; failures are recorded, not thrown.
std::vector<std::optional<Json>> score_batch(scorer::ScorerClient& client, scorer::Endpoint e, const std::vector<Json>& batch,
                                             std::vector<std::string>& errors) {
  std::vector<std::optional<Json>> out(batch.size());
  errors.assign(batch.size(), {});
  if (batch.empty()) return out;
  auto results = client.call(e, batch);
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (results[i].ok()) {
      out[i] = std::move(results[i].value);
    } else {
      errors[i] = results[i].error;
    }
  }
  return out;
}

struct SystemRun {
  std::vector<Record> records;  // parallel to Inputs::items
  std::vector<Json> windows;
  std::vector<Json> repairs;
  std::vector<Json> errors;
  std::vector<Json> docs;
  std::vector<Json> prompts;  // dry run
};

class Runner {
 public:
  Runner(const CampaignConfig& c, scorer::ScorerClient& client, const Inputs& in, bool dry_run)
      : c_(c), client_(client), in_(in), dry_run_(dry_run) {
    const bool quality = (c.mode == Mode::kSentence && c.k > 0 && c.strategy != shots::Strategy::kRandom) ||
                         (c.mode == Mode::kDocument && c.k > 0 && c.doc_regime == docpipe::DocShotKind::kQualityRandom);
    pool_ = load_shot_pool(c, client, quality);
    if (pool_ && c.mode == Mode::kSentence && c.strategy == shots::Strategy::kQualitySelected && c.k > 0) {
      index_ = shots::build_index(*pool_);
    }
    if (c.doc_pool) doc_pool_ = load_doc_pool(*c.doc_pool, c);
    qr_.min_source_tokens = c.min_source_tokens;
    qr_.src_lang = c.src_lang;
  }

  SystemRun run(const SystemSpec& sys) {
    SystemRun out;
    out.records.resize(in_.items.size());
    if (!sys.from_backend) {
      const auto lines = corpus::read_lines(sys.hypotheses);
      if (lines.size() != in_.items.size()) {
        throw ConfigError("system " + sys.name + ": " + std::to_string(lines.size()) + " hypotheses for " +
                          std::to_string(in_.items.size()) + " test items");
      }
      for (std::size_t i = 0; i < lines.size(); ++i) out.records[i].hypothesis = lines[i];
    } else if (c_.mode == Mode::kSentence) {
      translate_sentences(sys, out);
    } else {
      translate_documents(sys, out);
    }
    if (!dry_run_) score(sys, out);
    return out;
  }

  std::size_t requests() const { return requests_; }

 private:
  void fail(SystemRun& out, const std::string& system, std::size_t i, const std::string& stage, const std::string& error) {
    if (!out.records[i].error) out.records[i].error = stage + ": " + error;
    out.errors.push_back({{"system", system}, {"id", in_.items[i].id}, {"stage", stage}, {"error", error}});
  }

  TranslateInput translate_input(std::string text, std::string prompt) const {
    return {std::move(text), c_.src_lang, c_.tgt_lang, std::move(prompt), c_.scorer.temperature, c_.scorer.max_tokens};
  }

  void translate_sentences(const SystemSpec& sys, SystemRun& out) {
    std::vector<Json> batch;
    std::vector<std::size_t> which;
    for (std::size_t i = 0; i < in_.items.size(); ++i) {
      const auto& item = in_.items[i];
      prompts::PromptText prompt;
      if (c_.prompt_style == PromptStyle::kChat) {
        prompt = prompts::render_chat_prompt(item.source, c_.src_name, c_.tgt_name);
      } else {
        shots::ShotSet set;
        const auto seed = derive_seed(c_.seed, item.id);
        try {
          if (c_.k > 0) {
            switch (c_.strategy) {
              case shots::Strategy::kRandom:
                set = shots::select_rr(*pool_, c_.k, seed);
                break;
              case shots::Strategy::kQualityRandom:
                set = shots::select_qr(*pool_, c_.k, seed, qr_);
                break;
              case shots::Strategy::kQualitySelected:
                set = shots::select_qs(*index_, *pool_, item.source, c_.k, scorer::embed_oracle(client_));
                break;
            }
          }
        } catch (const OracleItemError& e) {
          fail(out, sys.name, i, "shots", e.what());
          continue;
        }
        prompt = prompts::render_sentence_prompt(set.shots, item.source, c_.tgt_name);
      }
      out.records[i].prompt = prompt.text;
      if (dry_run_) {
        out.prompts.push_back({{"system", sys.name}, {"id", item.id}, {"prompt", prompt.text}});
      } else {
        batch.push_back(scorer::to_request(translate_input(item.source, prompt.text)));
        which.push_back(i);
      }
    }
    requests_ += batch.size();
    std::vector<std::string> errors;
    auto results = score_batch(client_, scorer::Endpoint::kTranslate, batch, errors);
    for (std::size_t b = 0; b < which.size(); ++b) {
      const std::size_t i = which[b];
      if (!results[b]) {
        fail(out, sys.name, i, "translate", errors[b]);
        continue;
      }
      out.records[i].raw_output = (*results[b])["text"].get<std::string>();
      out.records[i].hypothesis = std::string(text::trim(out.records[i].raw_output));
    }
  }

  struct PlannedWindow {
    std::size_t doc = 0;
    docpipe::Window window;
    std::string prompt;
  };

  void translate_documents(const SystemSpec& sys, SystemRun& out) {
    std::vector<docpipe::ParallelDocument> history;
    std::vector<PlannedWindow> pending;
    const bool sequential = c_.doc_regime == docpipe::DocShotKind::kDocHistory;

    auto flush = [&] {
      if (pending.empty()) return;
      std::vector<Json> batch;
      for (const auto& pw : pending) {
        batch.push_back(scorer::to_request(translate_input(text::join(pw.window.lines, "\n"), pw.prompt)));
      }
      requests_ += batch.size();
      std::vector<std::string> errors;
      auto results = dry_run_ ? std::vector<std::optional<Json>>() : score_batch(client_, scorer::Endpoint::kTranslate, batch, errors);
      for (std::size_t b = 0; b < pending.size(); ++b) {
        const auto& pw = pending[b];
        const std::size_t wid = out.windows.size();
        Json wrec{{"system", sys.name},   {"window", wid},           {"doc_id", pw.window.doc_id},
                  {"start", pw.window.start_line}, {"end", pw.window.end_line}, {"prompt", pw.prompt}};
        const auto& items = in_.doc_items[pw.doc];
        if (dry_run_) {
          out.prompts.push_back(wrec);
          continue;
        }
        auto fail_window = [&](const std::string& stage, const std::string& error) {
          for (std::size_t l = pw.window.start_line; l < pw.window.end_line; ++l) fail(out, sys.name, items[l], stage, error);
          wrec["error"] = stage + ": " + error;
        };
        if (!results[b]) {
          fail_window("translate", errors[b]);
        } else {
          const auto raw = (*results[b])["text"].get<std::string>();
          wrec["raw_output"] = raw;
          try {
            const auto restored = docpipe::restore_alignment(pw.window.lines, text::split_lines(raw));
            for (std::size_t l = 0; l < restored.lines.size(); ++l) {
              auto& rec = out.records[items[pw.window.start_line + l]];
              rec.hypothesis = restored.lines[l];
              rec.window = wid;
            }
            wrec["restored"] = restored.lines;
            for (const auto& r : restored.repairs) {
              out.repairs.push_back({{"system", sys.name},
                                     {"window", wid},
                                     {"doc_id", pw.window.doc_id},
                                     {"kind", std::string(docpipe::repair_name(r.kind))},
                                     {"position", r.position},
                                     {"note", r.note}});
            }
          } catch (const Error& e) {
            fail_window("restore", e.what());
          }
        }
        out.windows.push_back(std::move(wrec));
      }
      pending.clear();
    };

    for (std::size_t d = 0; d < in_.src_docs.size(); ++d) {
      const auto& doc = in_.src_docs[d];
      docpipe::DocShotRegime regime{c_.doc_regime, c_.k, derive_seed(c_.seed, d), history};
      docpipe::DocShots shots_for_doc;
      try {
        shots_for_doc = docpipe::make_doc_shots(regime, pool_ ? &*pool_ : nullptr, doc_pool_, doc, qr_);
      } catch (const OracleItemError& e) {
        for (std::size_t i : in_.doc_items[d]) fail(out, sys.name, i, "shots", e.what());
        continue;
      }
      for (auto& w : docpipe::window_document(doc, c_.window)) {
        auto prompt =
            prompts::render_doc_prompt(shots_for_doc.source_lines, shots_for_doc.reference_lines, w.lines, c_.tgt_name);
        pending.push_back({d, std::move(w), std::move(prompt.text)});
      }
      if (sequential) {
        flush();
        std::vector<std::string> output;
        for (std::size_t i : in_.doc_items[d]) output.push_back(out.records[i].hypothesis);
        history.push_back({doc.doc_id, doc.lines, std::move(output)});
      }
    }
    flush();
  }

  void score(const SystemSpec& sys, SystemRun& out) {
    std::vector<std::size_t> ok;
    for (std::size_t i = 0; i < in_.items.size(); ++i) {
      if (!out.records[i].error) ok.push_back(i);
    }
    auto run_metric = [&](scorer::Endpoint e, const std::string& name, auto make, auto apply) {
      std::vector<Json> batch;
      for (std::size_t i : ok) batch.push_back(make(in_.items[i], out.records[i]));
      requests_ += batch.size();
      std::vector<std::string> errors;
      auto results = score_batch(client_, e, batch, errors);
      for (std::size_t b = 0; b < ok.size(); ++b) {
        if (results[b]) {
          apply(out.records[ok[b]], *results[b]);
        } else {
          fail(out, sys.name, ok[b], name, errors[b]);
        }
      }
    };
    const auto wants = [&](const std::string& m) { return contains(c_.metrics, m); };
    if (wants("COMET-22")) {
      run_metric(
          scorer::Endpoint::kRefMetric, "COMET-22",
          [](const TestItem& it, const Record& r) {
            return Json{{"source", it.source}, {"hypothesis", r.hypothesis}, {"reference", it.reference}};
          },
          [](Record& r, const Json& v) { r.scores["COMET-22"] = v["score"].get<double>(); });
    }
    if (wants("COMETkiwi")) {
      run_metric(
          scorer::Endpoint::kQe, "COMETkiwi",
          [](const TestItem& it, const Record& r) { return Json{{"source", it.source}, {"hypothesis", r.hypothesis}}; },
          [](Record& r, const Json& v) { r.scores["COMETkiwi"] = v["score"].get<double>(); });
    }
    for (std::size_t i : ok) {
      out.records[i].scores["ChrF"] = metrics::chrf({out.records[i].hypothesis}, {in_.items[i].reference}).value;
    }
    if (c_.characteristics) {
      run_metric(
          scorer::Endpoint::kAlign, "align",
          [](const TestItem& it, const Record& r) { return Json{{"source", it.source}, {"hypothesis", r.hypothesis}}; },
          [](Record& r, const Json& v) {
            std::vector<std::pair<std::size_t, std::size_t>> links;
            for (const auto& l : v["links"]) links.emplace_back(l[0].get<std::size_t>(), l[1].get<std::size_t>());
            const auto a = traits::AlignmentSet::make(links, v["src_tokens"].size(), v["hyp_tokens"].size());
            const auto nm = traits::non_monotonicity(a);
            r.traits["nm"] = nm.no_alignment ? Json(nullptr) : Json(nm.value);
            r.traits["usw"] = traits::unaligned_source_words(a);
            r.traits["utw"] = traits::unaligned_translation_words(a);
            r.traits["alignment"] = traits::to_pharaoh(a);
          });
      run_metric(
          scorer::Endpoint::kLm, "lm", [](const TestItem&, const Record& r) { return Json{{"text", r.hypothesis}}; },
          [](Record& r, const Json& v) {
            r.traits["logprob_sum"] = v["logprob_sum"];
            r.traits["token_count"] = v["token_count"];
          });
      for (std::size_t i : ok) {
        out.records[i].traits["pi"] = traits::punctuation_insertion(in_.items[i].source, out.records[i].hypothesis);
      }
    }
    if (wants("Doc-COMETkiwi") && !in_.src_docs.empty()) {
      std::vector<corpus::Document> hyp_docs;
      for (std::size_t d = 0; d < in_.src_docs.size(); ++d) {
        corpus::Document h{in_.src_docs[d].doc_id, {}, std::nullopt};
        for (std::size_t i : in_.doc_items[d]) h.lines.push_back(out.records[i].hypothesis);
        hyp_docs.push_back(std::move(h));
      }
      const auto plan = metrics::plan_doc_eval(in_.src_docs, c_.doc_eval_window, c_.doc_eval_stride);
      requests_ += plan.segments.size();
      try {
        const auto res = metrics::doc_qe(plan, in_.src_docs, hyp_docs, scorer::qe_oracle(client_));
        for (std::size_t d = 0; d < in_.src_docs.size(); ++d) {
          out.docs.push_back({{"system", sys.name}, {"doc_id", in_.src_docs[d].doc_id}, {"Doc-COMETkiwi", res.per_document[d]}});
        }
      } catch (const Error& e) {
        out.errors.push_back({{"system", sys.name}, {"stage", "Doc-COMETkiwi"}, {"error", e.what()}});
      }
    }
  }

  const CampaignConfig& c_;
  scorer::ScorerClient& client_;
  const Inputs& in_;
  bool dry_run_;
  std::optional<shots::ScoredPool> pool_;
  std::optional<shots::RetrievalIndex> index_;
  std::vector<docpipe::ParallelDocument> doc_pool_;
  shots::QrOptions qr_;
  std::size_t requests_ = 0;
};

Json manifest_json(const CampaignConfig& c, bool dry_run) {
  const Json cfg = c.to_json();
  Json inputs = Json::object();
  auto add = [&](const fs::path& p) {
    if (!p.empty() && fs::exists(p)) inputs[p.string()] = file_sha256(p);
  };
  for (const auto* f : {&c.test_set, c.shot_pool ? &*c.shot_pool : nullptr, c.doc_pool ? &*c.doc_pool : nullptr}) {
    if (!f) continue;
    add(f->source);
    add(f->target);
    add(f->doc_ids);
    add(f->sidecar);
  }
  add(c.pool_embeddings);
  for (const auto& s : c.systems) add(s.hypotheses);
  return Json{{"layout_version", kLayoutVersion},
              {"config", cfg},
              {"config_sha256", scorer::sha256_hex(scorer::canonicalize(cfg))},
              {"inputs", inputs},
              {"seeds",
               {{"base", c.seed},
                {"sentence_items", "derive_seed(base, item id)"},
                {"documents", "derive_seed(base, document index)"}}},
              {"dry_run", dry_run}};
}

}  // namespace

RunSummary run_campaign(const CampaignConfig& config, scorer::ScorerClient& client, const fs::path& run_dir,
                        const RunOptions& options) {
  config.validate();
  const Inputs in = load_inputs(config);
  const bool was_offline = client.offline();
  const std::size_t calls_before = client.backend_calls();
  if (options.dry_run) client.set_offline(true);

  RunSummary summary;
  summary.run_dir = run_dir;
  summary.items = in.items.size();
  std::vector<Json> items;
  std::vector<Json> windows;
  std::vector<Json> repairs;
  std::vector<Json> errors;
  std::vector<Json> docs;
  std::vector<Json> prompts_out;
  try {
    Runner runner(config, client, in, options.dry_run);
    for (const auto& sys : config.systems) {
      auto res = runner.run(sys);
      for (std::size_t i = 0; i < in.items.size(); ++i) {
        const auto& it = in.items[i];
        const auto& r = res.records[i];
        Json rec{{"system", sys.name}, {"id", it.id}, {"source", it.source}, {"reference", it.reference},
                 {"tags", it.tags},    {"hypothesis", r.hypothesis}, {"scores", r.scores}};
        if (sys.from_backend && config.mode == Mode::kSentence) {
          rec["prompt"] = r.prompt;
          rec["raw_output"] = r.raw_output;
        }
        if (r.window) rec["window"] = *r.window;
        if (it.doc) rec["line"] = it.line;
        if (r.error) rec["error"] = *r.error;
        if (!r.traits.is_null()) rec["traits"] = r.traits;
        items.push_back(std::move(rec));
      }
      for (auto* dst : {&windows, &repairs, &errors, &docs, &prompts_out}) {
        auto& src = dst == &windows   ? res.windows
                    : dst == &repairs ? res.repairs
                    : dst == &errors  ? res.errors
                    : dst == &docs    ? res.docs
                                      : res.prompts;
        for (auto& j : src) dst->push_back(std::move(j));
      }
    }
    summary.requests = runner.requests();
  } catch (...) {
    client.set_offline(was_offline);
    throw;
  }
  client.set_offline(was_offline);
  summary.backend_calls = client.backend_calls() - calls_before;
  summary.errors = errors.size();

  fs::create_directories(run_dir / "items");
  {
    std::ofstream m(run_dir / "manifest.json", std::ios::trunc);
    m << manifest_json(config, options.dry_run).dump(2) << '\n';
  }
  if (options.dry_run) {
    write_jsonl(run_dir / "items" / "prompts.jsonl", prompts_out);
    return summary;
  }
  fs::create_directories(run_dir / "reports");
  fs::create_directories(run_dir / "logs");
  write_jsonl(run_dir / "items" / "items.jsonl", items);
  write_jsonl(run_dir / "items" / "windows.jsonl", windows);
  write_jsonl(run_dir / "items" / "docs.jsonl", docs);
  write_jsonl(run_dir / "logs" / "repairs.jsonl", repairs);
  write_jsonl(run_dir / "logs" / "errors.jsonl", errors);
  write_reports(run_dir);
  return summary;
}

namespace {

struct LoadedRun {
  CampaignConfig config;
  std::vector<Json> items;
  std::vector<Json> docs;
};

LoadedRun load_run(const fs::path& run_dir) {
  std::ifstream m(run_dir / "manifest.json");
  if (!m) throw Error(run_dir.string() + ": no manifest.json");
  const Json manifest = Json::parse(m);
  if (manifest.value("layout_version", 0) != kLayoutVersion) throw Error(run_dir.string() + ": unsupported layout version");
  if (manifest.value("dry_run", false)) throw Error(run_dir.string() + ": dry run has no item records");
  return {CampaignConfig::from_json(manifest["config"]), read_jsonl(run_dir / "items" / "items.jsonl"),
          read_jsonl(run_dir / "items" / "docs.jsonl")};
}

std::string group_tag(const Json& item, const std::string& key) {
  const auto& tags = item["tags"];
  if (tags.contains(key)) return tags[key].get<std::string>();
  return std::string(metrics::kUntaggedGroup);
}

}  // namespace

void write_reports(const fs::path& run_dir) {
  const auto run = load_run(run_dir);
  const auto& c = run.config;
  std::vector<std::string> sentence_metrics;
  std::vector<std::string> doc_metrics;
  for (const auto& m : c.metrics) (m.rfind("Doc-", 0) == 0 ? doc_metrics : sentence_metrics).push_back(m);
  std::vector<std::string> columns = sentence_metrics;
  columns.insert(columns.end(), doc_metrics.begin(), doc_metrics.end());

  metrics::BleuOptions bleu_options;
  bleu_options.tokenizer = metrics::default_tokenizer(c.tgt_lang);

  std::vector<std::string> keys = c.group_by;
  if (keys.empty()) keys.push_back("");

  std::ofstream txt(run_dir / "reports" / "report.txt", std::ios::trunc);
  std::ofstream csv(run_dir / "reports" / "report.csv", std::ios::trunc);
  txt << "language pair: " << c.src_lang << "-" << c.tgt_lang << '\n';
  txt << "mode: " << (c.mode == Mode::kSentence ? "sentence" : "document (window " + std::to_string(c.window) + ")") << '\n';
  txt << "shots: " << c.k << " ("
      << (c.mode == Mode::kSentence ? shots::strategy_name(c.strategy) : docpipe::doc_shot_name(c.doc_regime)) << ")\n";

  bool csv_header = true;
  for (const auto& key : keys) {
    std::vector<std::pair<std::string, metrics::GroupedReport>> by_system;
    for (const auto& sys : c.systems) {
      std::vector<metrics::EvalItem> eval;
      // Document-level scores per group, from items in document order.
      std::map<std::string, std::map<std::string, std::pair<std::vector<std::string>, std::vector<std::string>>>> doc_text;
      std::map<std::string, std::string> doc_group;
      for (const auto& item : run.items) {
        if (item["system"] != sys.name || item.contains("error")) continue;
        metrics::EvalItem e;
        e.id = item["id"].get<std::size_t>();
        e.source = item["source"].get<std::string>();
        e.hypothesis = item["hypothesis"].get<std::string>();
        e.reference = item["reference"].get<std::string>();
        e.tags = item["tags"].get<std::map<std::string, std::string>>();
        e.item_scores = item["scores"].get<std::map<std::string, double>>();
        eval.push_back(std::move(e));
      }
      for (const auto& item : run.items) {
        if (item["system"] != sys.name || !item["tags"].contains("doc_id")) continue;
        const auto doc_id = item["tags"]["doc_id"].get<std::string>();
        const auto group = key.empty() ? std::string(metrics::kAllGroup) : group_tag(item, key);
        doc_group.emplace(doc_id, group);
        auto& [h, r] = doc_text[group][doc_id];
        h.push_back(item["hypothesis"].get<std::string>());
        r.push_back(item["reference"].get<std::string>());
      }
      auto report = metrics::aggregate_report(eval, key, sentence_metrics, bleu_options);
      if (key.empty()) {
        // Without a grouping key only the overall row is shown.
        std::erase_if(report.rows, [](const auto& row) { return row.group != metrics::kAllGroup; });
      }
      for (auto& row : report.rows) {
        const bool all = row.group == metrics::kAllGroup;
        for (const auto& m : doc_metrics) {
          if (m == "Doc-BLEU") {
            std::vector<std::vector<std::string>> hyps;
            std::vector<std::vector<std::string>> refs;
            for (const auto& [group, docs] : doc_text) {
              if (!all && group != row.group) continue;
              for (const auto& [_, hr] : docs) {
                hyps.push_back(hr.first);
                refs.push_back(hr.second);
              }
            }
            if (!hyps.empty()) row.scores.push_back(metrics::doc_bleu(hyps, refs, bleu_options));
          } else if (m == "Doc-COMETkiwi") {
            double sum = 0.0;
            std::size_t n = 0;
            for (const auto& d : run.docs) {
              if (d["system"] != sys.name || !d.contains(m)) continue;
              const auto g = doc_group.find(d["doc_id"].get<std::string>());
              if (!all && (g == doc_group.end() || g->second != row.group)) continue;
              sum += d[m].get<double>();
              ++n;
            }
            if (n > 0) row.scores.push_back({m, sum / static_cast<double>(n), n});
          }
        }
      }
      by_system.emplace_back(sys.name, std::move(report));
    }
    txt << '\n';
    if (!key.empty()) txt << "grouped by: " << key << '\n';
    metrics::write_table(txt, by_system, columns);
    std::ostringstream part;
    metrics::write_csv(part, by_system);
    const auto body = part.str();
    const auto nl = body.find('\n');
    if (csv_header) {
      csv << body;
      csv_header = false;
    } else if (nl != std::string::npos) {
      csv << body.substr(nl + 1);
    }
  }

  if (c.characteristics) {
    std::ofstream out(run_dir / "reports" / "characteristics.txt", std::ios::trunc);
    out << std::left << std::setw(16) << "System" << std::right << std::setw(10) << "NM" << std::setw(10) << "PI"
        << std::setw(10) << "USW" << std::setw(10) << "UTW" << std::setw(12) << "Fluency" << std::setw(8) << "N" << '\n';
    for (const auto& sys : c.systems) {
      double nm = 0, usw = 0, utw = 0, lp = 0;
      long tok = 0;
      std::size_t n_nm = 0, n = 0, pi = 0;
      for (const auto& item : run.items) {
        if (item["system"] != sys.name || !item.contains("traits")) continue;
        const auto& t = item["traits"];
        if (!t.contains("usw") || !t.contains("pi")) continue;
        ++n;
        if (!t["nm"].is_null()) {
          nm += t["nm"].get<double>();
          ++n_nm;
        }
        usw += t["usw"].get<double>();
        utw += t["utw"].get<double>();
        pi += t["pi"].get<bool>();
        if (t.contains("logprob_sum")) {
          lp += t["logprob_sum"].get<double>();
          tok += t["token_count"].get<long>();
        }
      }
      auto cell = [&](double v, bool ok) {
        std::ostringstream s;
        if (ok) {
          s << std::fixed << std::setprecision(2) << v;
        } else {
          s << "--";
        }
        return s.str();
      };
      const double dn = static_cast<double>(std::max<std::size_t>(n, 1));
      out << std::left << std::setw(16) << sys.name << std::right << std::setw(10)
          << cell(nm / static_cast<double>(std::max<std::size_t>(n_nm, 1)), n_nm > 0) << std::setw(10)
          << cell(100.0 * static_cast<double>(pi) / dn, n > 0) << std::setw(10) << cell(usw / dn, n > 0) << std::setw(10)
          << cell(utw / dn, n > 0) << std::setw(12) << cell(std::exp(-lp / static_cast<double>(tok)), tok > 0)
          << std::setw(8) << n << '\n';
    }
  }

  if (c.routing) {
    std::map<std::size_t, const Json*> primary;
    std::map<std::size_t, const Json*> fallback;
    for (const auto& item : run.items) {
      if (!item["scores"].contains("COMETkiwi") || !item["scores"].contains("COMET-22")) continue;
      const auto id = item["id"].get<std::size_t>();
      if (item["system"] == c.routing->primary) primary[id] = &item;
      if (item["system"] == c.routing->fallback) fallback[id] = &item;
    }
    std::vector<std::string> ids;
    std::vector<double> pq, fq, pf, ff;
    for (const auto& [id, p] : primary) {
      auto f = fallback.find(id);
      if (f == fallback.end()) continue;
      ids.push_back(std::to_string(id));
      pq.push_back((*p)["scores"]["COMETkiwi"].get<double>());
      fq.push_back((*f->second)["scores"]["COMETkiwi"].get<double>());
      pf.push_back((*p)["scores"]["COMET-22"].get<double>());
      ff.push_back((*f->second)["scores"]["COMET-22"].get<double>());
    }
    std::ofstream summary(run_dir / "reports" / "routing.txt", std::ios::trunc);
    std::ofstream log(run_dir / "logs" / "decisions.jsonl", std::ios::trunc);
    if (ids.empty()) {
      summary << "routing: no item has scores for both systems\n";
    } else {
      const auto r = router::evaluate_hybrid_scores(ids, pq, fq, pf, ff, c.routing->policy, c.routing->primary,
                                                    c.routing->fallback);
      router::write_hybrid_summary(summary, r);
      router::write_decision_log(log, r.decisions);
    }
  }
}

ItemScores load_item_scores(const fs::path& run_dir, const std::string& system, const std::string& score) {
  const auto run = load_run(run_dir);
  const std::string sys = system.empty() ? run.config.systems.front().name : system;
  const bool known = std::any_of(run.config.systems.begin(), run.config.systems.end(), [&](const auto& s) { return s.name == sys; });
  if (!known) throw Error(run_dir.string() + ": no system '" + sys + "'");
  ItemScores out{run_dir.filename().string() + ":" + sys, {}};
  if (out.label.front() == ':') out.label = run_dir.string() + ":" + sys;
  for (const auto& item : run.items) {
    if (item["system"] != sys || !item["scores"].contains(score)) continue;
    out.by_id[item["id"].get<std::size_t>()] = item["scores"][score].get<double>();
  }
  return out;
}

std::vector<PairComparison> compare_systems(const std::vector<ItemScores>& systems, double tie_epsilon) {
  if (systems.size() < 2) throw Error("compare: need at least two systems");
  for (std::size_t s = 1; s < systems.size(); ++s) {
    std::vector<std::size_t> diff;
    for (const auto& [id, _] : systems[0].by_id) {
      if (!systems[s].by_id.count(id)) diff.push_back(id);
    }
    for (const auto& [id, _] : systems[s].by_id) {
      if (!systems[0].by_id.count(id)) diff.push_back(id);
    }
    if (!diff.empty()) {
      std::sort(diff.begin(), diff.end());
      std::string list;
      for (auto id : diff) list += (list.empty() ? "" : ", ") + std::to_string(id);
      throw Error("compare: item sets of " + systems[0].label + " and " + systems[s].label + " differ at ids " + list);
    }
  }
  std::vector<PairComparison> rows;
  for (std::size_t a = 0; a < systems.size(); ++a) {
    for (std::size_t b = a + 1; b < systems.size(); ++b) {
      PairComparison p{systems[a].label, systems[b].label};
      for (const auto& [id, va] : systems[a].by_id) {
        const double vb = systems[b].by_id.at(id);
        p.mean_a += va;
        p.mean_b += vb;
        const double d = va - vb;
        if (std::abs(d) <= tie_epsilon) {
          ++p.ties;
        } else if (d > 0) {
          ++p.wins;
        } else {
          ++p.losses;
        }
        ++p.n;
      }
      if (p.n > 0) {
        p.mean_a /= static_cast<double>(p.n);
        p.mean_b /= static_cast<double>(p.n);
      }
      rows.push_back(p);
    }
  }
  return rows;
}

void write_comparison(std::ostream& out, const std::vector<PairComparison>& rows, const std::string& score) {
  out << "score: " << score << '\n';
  out << std::left << std::setw(24) << "A" << std::setw(24) << "B" << std::right << std::setw(10) << "mean A" << std::setw(10)
      << "mean B" << std::setw(10) << "delta" << std::setw(8) << "win%" << std::setw(8) << "tie%" << std::setw(8) << "loss%"
      << std::setw(8) << "N" << '\n';
  for (const auto& r : rows) {
    const double n = static_cast<double>(std::max<std::size_t>(r.n, 1));
    auto pct = [&](std::size_t x) { return metrics::format_value(100.0 * static_cast<double>(x) / n); };
    out << std::left << std::setw(24) << r.a << std::setw(24) << r.b << std::right << std::setw(10)
        << metrics::format_value(r.mean_a) << std::setw(10) << metrics::format_value(r.mean_b) << std::setw(10)
        << metrics::format_value(r.mean_a - r.mean_b) << std::setw(8) << pct(r.wins) << std::setw(8) << pct(r.ties)
        << std::setw(8) << pct(r.losses) << std::setw(8) << r.n << '\n';
  }
}

}  // namespace mtkit::campaign
