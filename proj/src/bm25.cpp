#include "mtkit/bm25.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>

#include "mtkit/error.hpp"

namespace mtkit::shots {

namespace {

bool is_separator(unsigned char c) {
  if (c >= 0x80) return false;
  return !std::isalnum(c);
}

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw Error("retrieval index file truncated");
  return value;
}

void put_string(std::ostream& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& in) {
  const auto n = get<std::uint32_t>(in);
  std::string s(n, '\0');
  in.read(s.data(), n);
  if (!in) throw Error("retrieval index file truncated");
  return s;
}

constexpr char kMagic[8] = {'M', 'T', 'K', 'B', 'M', '2', '5', '\0'};

}  // namespace

std::vector<std::string> retrieval_terms(std::string_view text) {
  std::vector<std::string> terms;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (is_separator(c)) {
      if (!cur.empty()) terms.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : ch);
    }
  }
  if (!cur.empty()) terms.push_back(std::move(cur));
  return terms;
}

std::vector<std::string> query_terms(std::string_view text) {
  auto terms = retrieval_terms(text);
  std::sort(terms.begin(), terms.end());
  terms.erase(std::unique(terms.begin(), terms.end()), terms.end());
  return terms;
}

double bm25_idf(std::size_t n_docs, std::size_t doc_freq) {
  const double n = static_cast<double>(n_docs);
  const double df = static_cast<double>(doc_freq);
  return std::log(1.0 + (n - df + 0.5) / (df + 0.5));
}

double bm25_term_score(double idf, std::size_t tf, std::size_t doc_len, double avg_doc_len, const Bm25Params& p) {
  const double f = static_cast<double>(tf);
  const double norm = avg_doc_len > 0.0 ? static_cast<double>(doc_len) / avg_doc_len : 0.0;
  return idf * f * (p.k1 + 1.0) / (f + p.k1 * (1.0 - p.b + p.b * norm));
}

RetrievalIndex::RetrievalIndex(std::vector<std::size_t> ids, const std::vector<std::string>& texts, Bm25Params params)
    : params_(params), ids_(std::move(ids)) {
  if (ids_.size() != texts.size()) throw Error("retrieval index: id/text count mismatch");
  lengths_.reserve(ids_.size());
  std::uint64_t total = 0;
  for (std::size_t d = 0; d < texts.size(); ++d) {
    const auto terms = retrieval_terms(texts[d]);
    lengths_.push_back(static_cast<std::uint32_t>(terms.size()));
    total += terms.size();
    std::map<std::string, std::uint32_t> tf;
    for (const auto& t : terms) ++tf[t];
    for (const auto& [term, count] : tf) postings_[term].push_back({static_cast<std::uint32_t>(d), count});
  }
  avg_len_ = ids_.empty() ? 0.0 : static_cast<double>(total) / static_cast<double>(ids_.size());
}

const std::vector<RetrievalIndex::Posting>* RetrievalIndex::postings(const std::string& term) const {
  auto it = postings_.find(term);
  return it == postings_.end() ? nullptr : &it->second;
}

std::vector<Hit> RetrievalIndex::search(std::string_view query, std::size_t limit) const {
  // Term contributions are added in sorted query-term order so the result
  // is bit-identical to scoring every document exhaustively in that order.
  std::unordered_map<std::uint32_t, double> acc;
  for (const auto& term : query_terms(query)) {
    const auto* list = postings(term);
    if (list == nullptr) continue;
    const double idf = bm25_idf(ids_.size(), list->size());
    for (const auto& p : *list) acc[p.doc] += bm25_term_score(idf, p.tf, lengths_[p.doc], avg_len_, params_);
  }
  std::vector<Hit> hits;
  hits.reserve(acc.size());
  for (const auto& [doc, score] : acc) {
    if (score > 0.0) hits.push_back({ids_[doc], score});
  }
  auto better = [](const Hit& a, const Hit& b) { return a.score != b.score ? a.score > b.score : a.id < b.id; };
  if (hits.size() > limit) {
    std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(limit), hits.end(), better);
    hits.resize(limit);
  } else {
    std::sort(hits.begin(), hits.end(), better);
  }
  return hits;
}

void RetrievalIndex::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kFormatVersion);
  put<double>(out, params_.k1);
  put<double>(out, params_.b);
  put<std::uint64_t>(out, ids_.size());
  for (std::size_t d = 0; d < ids_.size(); ++d) {
    put<std::uint64_t>(out, ids_[d]);
    put<std::uint32_t>(out, lengths_[d]);
  }
  std::vector<const std::string*> terms;
  terms.reserve(postings_.size());
  for (const auto& [term, _] : postings_) terms.push_back(&term);
  std::sort(terms.begin(), terms.end(), [](const auto* a, const auto* b) { return *a < *b; });
  put<std::uint64_t>(out, terms.size());
  for (const auto* term : terms) {
    put_string(out, *term);
    const auto& list = postings_.at(*term);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(list.size()));
    for (const auto& p : list) {
      put<std::uint32_t>(out, p.doc);
      put<std::uint32_t>(out, p.tf);
    }
  }
}

RetrievalIndex RetrievalIndex::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw Error(path.string() + ": not a retrieval index");
  const auto version = get<std::uint32_t>(in);
  if (version != kFormatVersion) throw Error(path.string() + ": unsupported index version " + std::to_string(version));
  RetrievalIndex index;
  index.params_.k1 = get<double>(in);
  index.params_.b = get<double>(in);
  const auto n = get<std::uint64_t>(in);
  std::uint64_t total = 0;
  for (std::uint64_t d = 0; d < n; ++d) {
    index.ids_.push_back(static_cast<std::size_t>(get<std::uint64_t>(in)));
    index.lengths_.push_back(get<std::uint32_t>(in));
    total += index.lengths_.back();
  }
  index.avg_len_ = n == 0 ? 0.0 : static_cast<double>(total) / static_cast<double>(n);
  const auto n_terms = get<std::uint64_t>(in);
  for (std::uint64_t t = 0; t < n_terms; ++t) {
    auto term = get_string(in);
    const auto count = get<std::uint32_t>(in);
    std::vector<Posting> list;
    list.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
      const auto doc = get<std::uint32_t>(in);
      const auto tf = get<std::uint32_t>(in);
      if (doc >= n) throw Error(path.string() + ": posting references unknown document");
      list.push_back({doc, tf});
    }
    index.postings_.emplace(std::move(term), std::move(list));
  }
  return index;
}

}  // namespace mtkit::shots
