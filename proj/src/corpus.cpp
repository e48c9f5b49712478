#include "mtkit/corpus.hpp"

#include <fstream>
#include <iterator>
#include <set>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "mtkit/error.hpp"
#include "mtkit/text.hpp"

namespace mtkit::corpus {

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

std::optional<ParallelFormat> parse_format(std::string_view name) {
  if (name == "two-file" || name == "text") return ParallelFormat::kTwoFile;
  if (name == "tsv") return ParallelFormat::kTsv;
  if (name == "jsonl") return ParallelFormat::kJsonl;
  return std::nullopt;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  const std::string data = read_file(path);
  if (auto bad = text::find_invalid_utf8(data)) {
    throw Error(path.string() + ": invalid UTF-8 at byte offset " + std::to_string(*bad));
  }
  return text::split_lines(data);
}

void write_lines(const std::filesystem::path& path, const std::vector<std::string>& lines) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& line : lines) out << line << '\n';
}

Corpus load_parallel(const std::filesystem::path& source_path, const std::filesystem::path& target_path,
                     ParallelFormat format, std::string src_lang, std::string tgt_lang) {
  Corpus corpus{{}, std::move(src_lang), std::move(tgt_lang)};
  switch (format) {
    case ParallelFormat::kTwoFile: {
      auto src = read_lines(source_path);
      auto tgt = read_lines(target_path);
      if (src.size() != tgt.size()) {
        throw Error("line count mismatch " + std::to_string(src.size()) + " vs " + std::to_string(tgt.size()));
      }
      corpus.pairs.reserve(src.size());
      for (std::size_t i = 0; i < src.size(); ++i) {
        corpus.pairs.push_back({i, std::move(src[i]), std::move(tgt[i]), std::nullopt, {}});
      }
      break;
    }
    case ParallelFormat::kTsv: {
      auto lines = read_lines(source_path);
      for (std::size_t i = 0; i < lines.size(); ++i) {
        const auto tab = lines[i].find('\t');
        if (tab == std::string::npos) throw Error(source_path.string() + ":" + std::to_string(i + 1) + ": missing tab");
        corpus.pairs.push_back({i, lines[i].substr(0, tab), lines[i].substr(tab + 1), std::nullopt, {}});
      }
      break;
    }
    case ParallelFormat::kJsonl: {
      auto lines = read_lines(source_path);
      for (std::size_t i = 0; i < lines.size(); ++i) {
        nlohmann::json rec;
        try {
          rec = nlohmann::json::parse(lines[i]);
        } catch (const nlohmann::json::exception& e) {
          throw Error(source_path.string() + ":" + std::to_string(i + 1) + ": " + e.what());
        }
        if (!rec.is_object() || !rec.contains("source") || !rec.contains("target") || !rec["source"].is_string() ||
            !rec["target"].is_string()) {
          throw Error(source_path.string() + ":" + std::to_string(i + 1) + ": record needs string source and target");
        }
        SentencePair pair{i, rec["source"].get<std::string>(), rec["target"].get<std::string>(), std::nullopt, {}};
        for (const char* key : {"doc_id", "domain"}) {
          if (rec.contains(key)) pair.meta[key] = rec[key].get<std::string>();
        }
        if (rec.contains("quality") && rec["quality"].is_number()) pair.quality = rec["quality"].get<double>();
        corpus.pairs.push_back(std::move(pair));
      }
      break;
    }
  }
  return corpus;
}

void save_parallel(const Corpus& corpus, const std::filesystem::path& source_path,
                   const std::filesystem::path& target_path, ParallelFormat format) {
  std::vector<std::string> a;
  std::vector<std::string> b;
  for (const auto& p : corpus.pairs) {
    switch (format) {
      case ParallelFormat::kTwoFile:
        a.push_back(p.source);
        b.push_back(p.target);
        break;
      case ParallelFormat::kTsv:
        a.push_back(p.source + "\t" + p.target);
        break;
      case ParallelFormat::kJsonl: {
        nlohmann::json rec{{"source", p.source}, {"target", p.target}};
        for (const char* key : {"doc_id", "domain"}) {
          if (auto it = p.meta.find(key); it != p.meta.end()) rec[key] = it->second;
        }
        if (p.quality) rec["quality"] = *p.quality;
        a.push_back(rec.dump());
        break;
      }
    }
  }
  write_lines(source_path, a);
  if (format == ParallelFormat::kTwoFile) write_lines(target_path, b);
}

void apply_sidecar(Corpus& corpus, const std::filesystem::path& sidecar_path) {
  const auto lines = read_lines(sidecar_path);
  for (std::size_t n = 0; n < lines.size(); ++n) {
    const std::string& line = lines[n];
    if (text::trim(line).empty()) continue;
    const auto where = sidecar_path.string() + ":" + std::to_string(n + 1);
    const auto tab = line.find('\t');
    const auto eq = line.find('=', tab == std::string::npos ? 0 : tab);
    if (tab == std::string::npos || eq == std::string::npos) throw Error(where + ": expected <index>\\t<key>=<value>");
    std::size_t index = 0;
    try {
      std::size_t used = 0;
      index = std::stoul(line.substr(0, tab), &used);
      if (used != tab) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw Error(where + ": bad line index");
    }
    if (index >= corpus.pairs.size()) {
      throw Error(where + ": line index " + std::to_string(index) + " out of range");
    }
    corpus.pairs[index].meta[line.substr(tab + 1, eq - tab - 1)] = line.substr(eq + 1);
  }
}

void CleaningRules::validate() const {
  if (!(max_length_ratio > 1.0)) throw Error("max_length_ratio must be > 1");
  if (min_tokens > max_tokens) throw Error("min_tokens must not exceed max_tokens");
}

CleanResult clean(const Corpus& corpus, const CleaningRules& rules, const LangIdOracle& langid) {
  rules.validate();
  if (rules.langid_required && !langid) throw Error("langid_required set but no language identifier given");

  CleanResult result;
  result.corpus.src_lang = corpus.src_lang;
  result.corpus.tgt_lang = corpus.tgt_lang;
  std::unordered_set<std::string> seen;

  auto drop = [&](const char* rule) { ++result.report.dropped[rule]; };

  for (const auto& pair : corpus.pairs) {
    if (text::trim(pair.source).empty() || text::trim(pair.target).empty()) {
      drop("empty");
      continue;
    }
    const std::size_t ns = text::token_count(pair.source, corpus.src_lang);
    const std::size_t nt = text::token_count(pair.target, corpus.tgt_lang);
    if (std::min(ns, nt) < rules.min_tokens) {
      drop("min_tokens");
      continue;
    }
    if (std::max(ns, nt) > rules.max_tokens) {
      drop("max_tokens");
      continue;
    }
    const double ratio = static_cast<double>(std::max(ns, nt)) / static_cast<double>(std::max<std::size_t>(1, std::min(ns, nt)));
    if (ratio > rules.max_length_ratio) {
      drop("length_ratio");
      continue;
    }
    if (rules.langid_required) {
      if (langid(pair.source) != corpus.src_lang) {
        drop("langid_source");
        continue;
      }
      if (langid(pair.target) != corpus.tgt_lang) {
        drop("langid_target");
        continue;
      }
    }
    if (rules.dedup_exact) {
      std::string key = pair.source;
      key.push_back('\t');
      key += pair.target;
      if (!seen.insert(std::move(key)).second) {
        drop("duplicate");
        continue;
      }
    }
    result.corpus.pairs.push_back(pair);
  }
  result.report.kept = result.corpus.pairs.size();
  return result;
}

std::vector<Document> segment_documents(const std::vector<std::string>& lines, const BoundarySpec& spec) {
  std::vector<Document> docs;
  if (const auto* per_line = std::get_if<DocIdPerLine>(&spec)) {
    if (per_line->ids.size() > lines.size()) {
      throw Error("boundary spec references unknown line index " + std::to_string(lines.size()));
    }
    if (per_line->ids.size() < lines.size()) {
      throw Error("boundary spec has no document id for line " + std::to_string(per_line->ids.size()));
    }
    std::set<std::string> closed;
    for (std::size_t i = 0; i < lines.size(); ++i) {
      const std::string& id = per_line->ids[i];
      if (docs.empty() || docs.back().doc_id != id) {
        if (!docs.empty()) closed.insert(docs.back().doc_id);
        if (closed.count(id)) throw Error("document " + id + " is not contiguous (line " + std::to_string(i) + ")");
        docs.push_back({id, {}, std::nullopt});
      }
      docs.back().lines.push_back(lines[i]);
    }
    return docs;
  }

  bool open = false;
  for (const auto& line : lines) {
    if (text::trim(line).empty()) {
      open = false;
      continue;
    }
    if (!open) {
      docs.push_back({"doc" + std::to_string(docs.size()), {}, std::nullopt});
      open = true;
    }
    docs.back().lines.push_back(line);
  }
  return docs;
}

}  // namespace mtkit::corpus
