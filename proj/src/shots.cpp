#include "mtkit/shots.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "mtkit/error.hpp"
#include "mtkit/random.hpp"
#include "mtkit/text.hpp"

namespace mtkit::shots {

double cosine(const Embedding& a, const Embedding& b) {
  if (a.size() != b.size()) throw Error("embedding dimension mismatch " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  if (na == nb && dot == na) return 1.0;
  return std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
}

ScoredPool::ScoredPool(std::vector<SentencePair> pairs, std::size_t top_k_cutoff)
    : pairs_(std::move(pairs)), cutoff_(top_k_cutoff) {
  sorted_.reserve(pairs_.size());
  for (std::size_t i = 0; i < pairs_.size(); ++i) {
    if (!pairs_[i].quality) throw Error("scored pool: pair " + std::to_string(pairs_[i].id) + " has no quality score");
    if (!position_.emplace(pairs_[i].id, i).second) throw Error("scored pool: duplicate id " + std::to_string(pairs_[i].id));
    sorted_.push_back(pairs_[i].id);
  }
  std::sort(sorted_.begin(), sorted_.end(), [this](std::size_t a, std::size_t b) {
    const double qa = *by_id(a).quality;
    const double qb = *by_id(b).quality;
    return qa != qb ? qa > qb : a < b;
  });
}

std::span<const std::size_t> ScoredPool::top_slice() const {
  return {sorted_.data(), std::min(cutoff_, sorted_.size())};
}

const SentencePair& ScoredPool::by_id(std::size_t id) const {
  auto it = position_.find(id);
  if (it == position_.end()) throw Error("scored pool: unknown id " + std::to_string(id));
  return pairs_[it->second];
}

ScoredPool score_pool(const corpus::Corpus& corpus, const EmbedOracle& embed, std::size_t top_k_cutoff) {
  std::vector<std::string> sources;
  std::vector<std::string> targets;
  sources.reserve(corpus.pairs.size());
  targets.reserve(corpus.pairs.size());
  for (const auto& p : corpus.pairs) {
    sources.push_back(p.source);
    targets.push_back(p.target);
  }
  std::vector<Embedding> es;
  std::vector<Embedding> et;
  if (!corpus.pairs.empty()) {
    es = embed(sources);
    et = embed(targets);
  }
  if (es.size() != sources.size() || et.size() != targets.size()) throw Error("embedder returned wrong batch size");
  std::vector<SentencePair> pairs = corpus.pairs;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (es[i].size() != et[i].size()) {
      throw Error("embedding dimension mismatch between source and target batches: " + std::to_string(es[i].size()) +
                  " vs " + std::to_string(et[i].size()));
    }
    pairs[i].quality = cosine(es[i], et[i]);
  }
  return ScoredPool(std::move(pairs), top_k_cutoff);
}

namespace {

constexpr char kEmbMagic[8] = {'M', 'T', 'K', 'E', 'M', 'B', '\0', '\0'};
constexpr std::uint32_t kEmbVersion = 1;

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw Error("embedding file truncated");
  return v;
}

void check_dim(EmbeddingTable& t, std::size_t dim, std::size_t id) {
  if (t.dim == 0) t.dim = dim;
  if (dim != t.dim) throw Error("embedding dimension mismatch at id " + std::to_string(id));
}

}  // namespace

EmbeddingTable EmbeddingTable::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  EmbeddingTable table;
  char magic[8] = {};
  in.read(magic, sizeof(magic));
  if (in && std::memcmp(magic, kEmbMagic, sizeof(magic)) == 0) {
    const auto version = get<std::uint32_t>(in);
    if (version != kEmbVersion) throw Error(path.string() + ": unsupported embedding version");
    table.dim = static_cast<std::size_t>(get<std::uint64_t>(in));
    const auto rows = get<std::uint64_t>(in);
    for (std::uint64_t r = 0; r < rows; ++r) {
      const auto id = static_cast<std::size_t>(get<std::uint64_t>(in));
      const auto side = get<std::uint8_t>(in);
      Embedding v(table.dim);
      for (auto& x : v) x = get<double>(in);
      (side == 0 ? table.source : table.target)[id] = std::move(v);
    }
    return table;
  }
  in.clear();
  in.seekg(0);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    std::istringstream fields(line);
    std::size_t id = 0;
    std::string side;
    if (!(fields >> id >> side) || (side != "src" && side != "tgt")) {
      throw Error(path.string() + ":" + std::to_string(lineno) + ": expected <id>\\t<src|tgt>\\t<values>");
    }
    Embedding v;
    double x = 0.0;
    while (fields >> x) v.push_back(x);
    check_dim(table, v.size(), id);
    (side == "src" ? table.source : table.target)[id] = std::move(v);
  }
  return table;
}

void EmbeddingTable::save_text(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out.precision(17);
  auto emit = [&](const std::map<std::size_t, Embedding>& side, const char* name) {
    for (const auto& [id, v] : side) {
      out << id << '\t' << name << '\t';
      for (std::size_t i = 0; i < v.size(); ++i) out << (i ? " " : "") << v[i];
      out << '\n';
    }
  };
  emit(source, "src");
  emit(target, "tgt");
}

void EmbeddingTable::save_binary(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(kEmbMagic, sizeof(kEmbMagic));
  put<std::uint32_t>(out, kEmbVersion);
  put<std::uint64_t>(out, dim);
  put<std::uint64_t>(out, source.size() + target.size());
  for (const auto* side : {&source, &target}) {
    for (const auto& [id, v] : *side) {
      put<std::uint64_t>(out, id);
      put<std::uint8_t>(out, side == &source ? 0 : 1);
      for (double x : v) put<double>(out, x);
    }
  }
}

ScoredPool score_pool(const corpus::Corpus& corpus, const EmbeddingTable& table, std::size_t top_k_cutoff) {
  std::vector<SentencePair> pairs = corpus.pairs;
  for (auto& p : pairs) {
    auto s = table.source.find(p.id);
    auto t = table.target.find(p.id);
    if (s == table.source.end() || t == table.target.end()) {
      throw Error("no precomputed embedding for pair " + std::to_string(p.id));
    }
    p.quality = cosine(s->second, t->second);
  }
  return ScoredPool(std::move(pairs), top_k_cutoff);
}

EmbedOracle lookup_oracle(std::unordered_map<std::string, Embedding> by_text) {
  return [table = std::move(by_text)](const std::vector<std::string>& texts) {
    std::vector<Embedding> out;
    out.reserve(texts.size());
    for (std::size_t i = 0; i < texts.size(); ++i) {
      auto it = table.find(texts[i]);
      if (it == table.end()) throw OracleItemError(i, "no embedding for text: " + texts[i]);
      out.push_back(it->second);
    }
    return out;
  };
}

std::string_view strategy_name(Strategy s) {
  switch (s) {
    case Strategy::kRandom:
      return "RR";
    case Strategy::kQualityRandom:
      return "QR";
    case Strategy::kQualitySelected:
      return "QS";
  }
  return "?";
}

ShotSet select_rr(const ScoredPool& pool, std::size_t k, std::uint64_t seed) {
  if (k > pool.size()) throw Error("RR: k=" + std::to_string(k) + " exceeds pool size " + std::to_string(pool.size()));
  ShotSet set{{}, Strategy::kRandom, seed};
  for (std::size_t pos : draw_without_replacement(pool.size(), k, seed)) set.shots.push_back(pool.pairs()[pos]);
  return set;
}

std::vector<std::size_t> qr_eligible(const ScoredPool& pool, const QrOptions& options, bool& used_fallback) {
  const auto slice = pool.top_slice();
  std::vector<std::size_t> eligible;
  for (std::size_t id : slice) {
    if (text::token_count(pool.by_id(id).source, options.src_lang) > options.min_source_tokens) eligible.push_back(id);
  }
  used_fallback = eligible.empty() && !slice.empty();
  if (used_fallback) eligible.assign(slice.begin(), slice.end());
  return eligible;
}

ShotSet select_qr(const ScoredPool& pool, std::size_t k, std::uint64_t seed, const QrOptions& options) {
  ShotSet set{{}, Strategy::kQualityRandom, seed};
  const auto eligible = qr_eligible(pool, options, set.used_fallback);
  if (k > eligible.size()) {
    throw Error("QR: k=" + std::to_string(k) + " exceeds eligible set size " + std::to_string(eligible.size()) +
                (set.used_fallback ? " (length filter fallback)" : ""));
  }
  for (std::size_t pos : draw_without_replacement(eligible.size(), k, seed)) set.shots.push_back(pool.by_id(eligible[pos]));
  return set;
}

RetrievalIndex build_index(const ScoredPool& pool, Bm25Params params) {
  if (pool.size() == 0) throw Error("cannot index an empty pool");
  const auto slice = pool.top_slice();
  std::vector<std::size_t> ids(slice.begin(), slice.end());
  std::sort(ids.begin(), ids.end());
  std::vector<std::string> texts;
  texts.reserve(ids.size());
  for (std::size_t id : ids) texts.push_back(pool.by_id(id).source);
  return RetrievalIndex(std::move(ids), texts, params);
}

ShotSet select_qs(const RetrievalIndex& index, const ScoredPool& pool, std::string_view input_text, std::size_t k,
                  const EmbedOracle& embed, const QsOptions& options) {
  if (k > options.stage_one) {
    throw Error("QS: k=" + std::to_string(k) + " exceeds stage-one size " + std::to_string(options.stage_one));
  }
  ShotSet set{{}, Strategy::kQualitySelected, 0};
  if (k == 0) return set;

  const auto hits = index.search(input_text, options.stage_one);
  if (hits.empty()) {
    set.short_count = true;
    return set;
  }
  std::vector<std::string> texts;
  texts.reserve(hits.size() + 1);
  texts.emplace_back(input_text);
  for (const auto& h : hits) texts.push_back(pool.by_id(h.id).source);
  const auto vectors = embed(texts);
  if (vectors.size() != texts.size()) throw Error("embedder returned wrong batch size");

  struct Ranked {
    std::size_t id;
    double sim;
  };
  std::vector<Ranked> ranked;
  ranked.reserve(hits.size());
  for (std::size_t i = 0; i < hits.size(); ++i) ranked.push_back({hits[i].id, cosine(vectors[0], vectors[i + 1])});
  std::sort(ranked.begin(), ranked.end(),
            [](const Ranked& a, const Ranked& b) { return a.sim != b.sim ? a.sim > b.sim : a.id < b.id; });

  set.short_count = ranked.size() < k;
  for (std::size_t i = 0; i < std::min(k, ranked.size()); ++i) set.shots.push_back(pool.by_id(ranked[i].id));
  return set;
}

}  // namespace mtkit::shots
