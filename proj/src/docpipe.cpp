#include "mtkit/docpipe.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "mtkit/random.hpp"
#include "mtkit/text.hpp"

namespace mtkit::docpipe {

std::vector<Window> window_document(const corpus::Document& doc, std::size_t w) {
  if (w < 1) throw Error("window length must be >= 1");
  std::vector<Window> windows;
  const std::size_t n = doc.lines.size();
  windows.reserve((n + w - 1) / w);
  for (std::size_t start = 0; start < n; start += w) {
    const std::size_t end = std::min(n, start + w);
    windows.push_back({doc.doc_id, start, end, {doc.lines.begin() + static_cast<std::ptrdiff_t>(start),
                                                doc.lines.begin() + static_cast<std::ptrdiff_t>(end)}});
  }
  return windows;
}

std::size_t count_windows(const std::vector<corpus::Document>& docs, std::size_t w) {
  if (w < 1) throw Error("window length must be >= 1");
  std::size_t total = 0;
  for (const auto& d : docs) total += (d.lines.size() + w - 1) / w;
  return total;
}

std::string_view doc_shot_name(DocShotKind kind) {
  switch (kind) {
    case DocShotKind::kQualityRandom:
      return "QR";
    case DocShotKind::kDocRandom:
      return "DR";
    case DocShotKind::kDocFirst:
      return "DF";
    case DocShotKind::kDocHistory:
      return "DH";
  }
  return "?";
}

namespace {

DocShots first_lines_of_random_doc(const std::vector<const ParallelDocument*>& docs, std::size_t k, std::uint64_t seed) {
  DocShots out;
  if (k == 0) return out;
  if (docs.empty()) {
    out.short_count = true;
    return out;
  }
  SeededRng rng(seed);
  const ParallelDocument& doc = *docs[static_cast<std::size_t>(rng.below(docs.size()))];
  const std::size_t take = std::min({k, doc.source.size(), doc.target.size()});
  out.source_lines.assign(doc.source.begin(), doc.source.begin() + static_cast<std::ptrdiff_t>(take));
  out.reference_lines.assign(doc.target.begin(), doc.target.begin() + static_cast<std::ptrdiff_t>(take));
  out.short_count = take < k;
  out.from_doc = doc.doc_id;
  return out;
}

}  // namespace

DocShots make_doc_shots(const DocShotRegime& regime, const shots::ScoredPool* shot_pool,
                        const std::vector<ParallelDocument>& doc_pool, const corpus::Document& input_doc,
                        const shots::QrOptions& qr_options) {
  DocShots out;
  switch (regime.kind) {
    case DocShotKind::kQualityRandom: {
      if (regime.k == 0) return out;
      if (shot_pool == nullptr) throw Error("QR document shots need a quality pool");
      const auto set = shots::select_qr(*shot_pool, regime.k, regime.seed, qr_options);
      for (const auto& p : set.shots) {
        out.source_lines.push_back(p.source);
        out.reference_lines.push_back(p.target);
      }
      return out;
    }
    case DocShotKind::kDocRandom: {
      std::vector<std::pair<const std::string*, const std::string*>> candidates;
      for (const auto& d : doc_pool) {
        if (d.doc_id == input_doc.doc_id) continue;
        const std::size_t n = std::min(d.source.size(), d.target.size());
        for (std::size_t i = 0; i < n; ++i) candidates.emplace_back(&d.source[i], &d.target[i]);
      }
      const std::size_t take = std::min(regime.k, candidates.size());
      out.short_count = take < regime.k;
      for (std::size_t pos : draw_without_replacement(candidates.size(), take, regime.seed)) {
        out.source_lines.push_back(*candidates[pos].first);
        out.reference_lines.push_back(*candidates[pos].second);
      }
      return out;
    }
    case DocShotKind::kDocFirst:
    case DocShotKind::kDocHistory: {
      const auto& source = regime.kind == DocShotKind::kDocFirst ? doc_pool : regime.history;
      std::vector<const ParallelDocument*> docs;
      for (const auto& d : source) {
        if (d.doc_id != input_doc.doc_id) docs.push_back(&d);
      }
      // The first document of a history run is translated zero-shot.
      if (regime.kind == DocShotKind::kDocHistory && docs.empty()) return out;
      return first_lines_of_random_doc(docs, regime.k, regime.seed);
    }
  }
  return out;
}

std::string_view repair_name(RepairKind kind) {
  switch (kind) {
    case RepairKind::kMergeSplit:
      return "merge_split";
    case RepairKind::kSkipFill:
      return "skip_fill";
    case RepairKind::kDropEmpty:
      return "drop_empty";
  }
  return "?";
}

std::vector<std::string> proportional_split(std::string_view text, const std::vector<std::size_t>& weights) {
  const std::size_t parts = weights.size();
  if (parts <= 1) return {std::string(text)};

  // Codepoint start byte offsets, plus the end.
  std::vector<std::size_t> at;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if ((static_cast<unsigned char>(text[i]) & 0xC0) != 0x80) at.push_back(i);
  }
  const std::size_t len = at.size();
  at.push_back(text.size());

  struct Run {
    std::size_t begin;  // codepoint index
    std::size_t end;
  };
  std::vector<Run> runs;
  for (std::size_t c = 0; c < len;) {
    if (text::is_space(text[at[c]])) {
      std::size_t e = c;
      while (e < len && text::is_space(text[at[e]])) ++e;
      if (c > 0 && e < len) runs.push_back({c, e});  // interior runs only
      c = e;
    } else {
      ++c;
    }
  }

  std::size_t total = 0;
  for (auto w : weights) total += w;
  std::vector<double> targets;
  double cum = 0.0;
  for (std::size_t k = 0; k + 1 < parts; ++k) {
    cum += total > 0 ? static_cast<double>(weights[k]) : 1.0;
    const double denom = total > 0 ? static_cast<double>(total) : static_cast<double>(parts);
    targets.push_back(cum / denom * static_cast<double>(len));
  }

  std::vector<Run> cuts;
  const bool use_runs = runs.size() >= targets.size();
  std::size_t next_run = 0;
  std::size_t last_pos = 0;
  for (std::size_t k = 0; k < targets.size(); ++k) {
    const std::size_t remaining = targets.size() - k - 1;
    if (use_runs) {
      std::size_t best = next_run;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t r = next_run; r + remaining < runs.size(); ++r) {
        const double d = std::abs(static_cast<double>(runs[r].begin) - targets[k]);
        if (d < best_d) {
          best_d = d;
          best = r;
        }
      }
      cuts.push_back(runs[best]);
      next_run = best + 1;
    } else {
      auto pos = static_cast<std::size_t>(std::llround(targets[k]));
      pos = std::clamp(pos, last_pos, len);
      cuts.push_back({pos, pos});
      last_pos = pos;
    }
  }

  std::vector<std::string> pieces;
  std::size_t from = 0;
  for (const auto& cut : cuts) {
    pieces.emplace_back(text.substr(at[from], at[cut.begin] - at[from]));
    from = cut.end;
  }
  pieces.emplace_back(text.substr(at[from]));
  return pieces;
}

namespace {

bool blank(const std::string& s) { return text::trim(s).empty(); }

struct Cost {
  double distortion = std::numeric_limits<double>::infinity();
  long overlap = 0;

  bool finite() const { return std::isfinite(distortion); }
};

bool better(const Cost& a, const Cost& b) {
  const double tol = 1e-9 * (1.0 + std::abs(b.distortion));
  if (!b.finite()) return a.finite();
  if (a.distortion < b.distortion - tol) return true;
  if (a.distortion > b.distortion + tol) return false;
  return a.overlap > b.overlap;
}

std::map<char32_t, long> char_counts(std::string_view s) {
  std::map<char32_t, long> counts;
  for (char32_t cp : text::codepoints(s)) {
    if (cp < 0x80 && text::is_space(static_cast<char>(cp))) continue;
    ++counts[cp];
  }
  return counts;
}

long shared_chars(const std::map<char32_t, long>& a, const std::map<char32_t, long>& b) {
  long n = 0;
  for (const auto& [cp, count] : a) {
    if (auto it = b.find(cp); it != b.end()) n += std::min(count, it->second);
  }
  return n;
}

enum class Step : unsigned char { kNone, kSkip, kMatch };

struct Back {
  Step step = Step::kNone;
  std::size_t group = 0;
  bool counted = false;  // skip consumed one of the signalled skips
};

}  // namespace

RestoredOutput restore_alignment(const std::vector<std::string>& source_lines, const std::vector<std::string>& output_lines) {
  if (source_lines.empty() || output_lines.empty()) throw Error("restore_alignment: source and output must be non-empty");
  const std::size_t n = source_lines.size();
  const auto non_empty = static_cast<std::size_t>(std::count_if(output_lines.begin(), output_lines.end(),
                                                                [](const std::string& s) { return !blank(s); }));
  if (non_empty > n) {
    throw UnrecoverableOverflow("unrecoverable_overflow: " + std::to_string(non_empty) + " non-empty output lines for " +
                                std::to_string(n) + " source lines");
  }

  RestoredOutput result;
  std::vector<std::string> core = output_lines;
  std::size_t trailing = 0;
  while (!core.empty() && blank(core.back())) {
    core.pop_back();
    ++trailing;
  }
  if (core.size() > n) {
    // Surplus interior empty lines: drop the latest ones.
    std::size_t surplus = core.size() - n;
    std::vector<std::size_t> dropped;
    for (std::size_t i = core.size(); i-- > 0 && surplus > 0;) {
      if (blank(core[i])) {
        dropped.push_back(i);
        --surplus;
      }
    }
    std::sort(dropped.begin(), dropped.end());
    for (auto it = dropped.rbegin(); it != dropped.rend(); ++it) core.erase(core.begin() + static_cast<std::ptrdiff_t>(*it));
    for (std::size_t i : dropped) result.repairs.push_back({RepairKind::kDropEmpty, i, "dropped surplus empty output line"});
  }

  const std::size_t m = core.size();
  if (m == n) {
    result.lines = std::move(core);
    return result;
  }

  if (m == 0) {
    result.lines.assign(n, "");
    for (std::size_t i = 0; i < n; ++i) {
      if (!blank(source_lines[i])) result.repairs.push_back({RepairKind::kSkipFill, i, "no output for document"});
    }
    return result;
  }

  const std::size_t deficit = n - m;
  const std::size_t skips = std::min(deficit, trailing);
  const std::size_t max_group = 1 + deficit;

  std::vector<std::size_t> src_len(n);
  std::size_t src_total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    src_len[i] = text::codepoint_count(text::trim(source_lines[i]));
    src_total += src_len[i];
  }
  std::vector<std::size_t> out_len(m);
  std::size_t out_total = 0;
  for (std::size_t j = 0; j < m; ++j) {
    out_len[j] = text::codepoint_count(text::trim(core[j]));
    out_total += out_len[j];
  }
  const double ratio = src_total > 0 && out_total > 0 ? static_cast<double>(out_total) / static_cast<double>(src_total) : 1.0;

  std::vector<std::map<char32_t, long>> src_chars(n);
  std::vector<std::map<char32_t, long>> out_chars(m);
  for (std::size_t i = 0; i < n; ++i) src_chars[i] = char_counts(source_lines[i]);
  for (std::size_t j = 0; j < m; ++j) out_chars[j] = char_counts(core[j]);

  auto match_cost = [&](std::size_t i, std::size_t g, std::size_t j) {
    std::size_t s = 0;
    std::map<char32_t, long> span;
    for (std::size_t k = i; k < i + g; ++k) {
      s += src_len[k];
      for (const auto& [cp, c] : src_chars[k]) span[cp] += c;
    }
    const double d = std::log((static_cast<double>(out_len[j]) + 1.0) / (ratio * static_cast<double>(s) + 1.0));
    return Cost{d * d, shared_chars(span, out_chars[j])};
  };

  const std::size_t S = skips + 1;
  auto idx = [&](std::size_t i, std::size_t j, std::size_t s) { return (i * (m + 1) + j) * S + s; };
  std::vector<Cost> dp((n + 1) * (m + 1) * S);
  std::vector<Back> back(dp.size());
  dp[idx(0, 0, 0)] = Cost{0.0, 0};

  for (std::size_t i = 0; i <= n; ++i) {
    for (std::size_t j = 0; j <= std::min(i, m); ++j) {
      for (std::size_t s = 0; s < S; ++s) {
        const Cost cur = dp[idx(i, j, s)];
        if (!cur.finite() || i == n) continue;
        // Skip source line i. An empty source line may absorb one of the
        // trailing empty outputs or be skipped for free.
        if (s + 1 < S && better(cur, dp[idx(i + 1, j, s + 1)])) {
          dp[idx(i + 1, j, s + 1)] = cur;
          back[idx(i + 1, j, s + 1)] = {Step::kSkip, 0, true};
        }
        if (src_len[i] == 0 && better(cur, dp[idx(i + 1, j, s)])) {
          dp[idx(i + 1, j, s)] = cur;
          back[idx(i + 1, j, s)] = {Step::kSkip, 0, false};
        }
        // Output line j covers source lines [i, i+g).
        if (j < m) {
          for (std::size_t g = 1; g <= max_group && i + g <= n; ++g) {
            const Cost mc = match_cost(i, g, j);
            const Cost cand{cur.distortion + mc.distortion, cur.overlap + mc.overlap};
            if (better(cand, dp[idx(i + g, j + 1, s)])) {
              dp[idx(i + g, j + 1, s)] = cand;
              back[idx(i + g, j + 1, s)] = {Step::kMatch, g};
            }
          }
        }
      }
    }
  }

  // Use exactly the signalled number of skips when feasible.
  std::size_t final_s = S;
  for (std::size_t s = S; s-- > 0;) {
    if (dp[idx(n, m, s)].finite()) {
      final_s = s;
      break;
    }
  }
  if (final_s == S) throw Error("restore_alignment: no feasible alignment");

  struct Op {
    Step step;
    std::size_t i;
    std::size_t g;
    std::size_t j;
  };
  std::vector<Op> ops;
  for (std::size_t i = n, j = m, s = final_s; i > 0 || j > 0;) {
    const Back b = back[idx(i, j, s)];
    if (b.step == Step::kSkip) {
      --i;
      if (b.counted) --s;
      ops.push_back({Step::kSkip, i, 1, j});
    } else {
      i -= b.group;
      --j;
      ops.push_back({Step::kMatch, i, b.group, j});
    }
  }
  std::reverse(ops.begin(), ops.end());

  result.lines.reserve(n);
  for (const auto& op : ops) {
    if (op.step == Step::kSkip) {
      result.lines.emplace_back();
      if (src_len[op.i] != 0) {
        result.repairs.push_back({RepairKind::kSkipFill, op.i, "source line " + std::to_string(op.i) + " had no translation"});
      }
      continue;
    }
    if (op.g == 1) {
      result.lines.push_back(core[op.j]);
      continue;
    }
    std::vector<std::size_t> weights(src_len.begin() + static_cast<std::ptrdiff_t>(op.i),
                                     src_len.begin() + static_cast<std::ptrdiff_t>(op.i + op.g));
    auto pieces = proportional_split(core[op.j], weights);
    for (std::size_t k = 0; k < pieces.size(); ++k) {
      if (k > 0) {
        result.repairs.push_back({RepairKind::kMergeSplit, op.i + k,
                                  "split output line " + std::to_string(op.j) + " across source lines " +
                                      std::to_string(op.i) + "-" + std::to_string(op.i + op.g - 1)});
      }
      result.lines.push_back(std::move(pieces[k]));
    }
  }
  return result;
}

}  // namespace mtkit::docpipe
