#include "mtkit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>
#include <unordered_map>

#include "mtkit/error.hpp"
#include "mtkit/text.hpp"

namespace mtkit::metrics {

namespace {

bool is_digit(char c) { return c >= '0' && c <= '9'; }

// ASCII characters that 13a surrounds with spaces.
bool is_13a_symbol(unsigned char c) {
  return (c >= '{' && c <= '~') || (c >= '[' && c <= '`') || (c >= ' ' && c <= '&') || (c >= '(' && c <= '+') ||
         (c >= ':' && c <= '@') || c == '/';
}

void replace_all(std::string& s, std::string_view from, std::string_view to) {
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
}

std::string tokenize_13a_string(std::string_view input) {
  std::string line(input);
  replace_all(line, "<skipped>", "");
  replace_all(line, "-\n", "");
  replace_all(line, "\n", " ");
  if (line.find('&') != std::string::npos) {
    replace_all(line, "&quot;", "\"");
    replace_all(line, "&amp;", "&");
    replace_all(line, "&lt;", "<");
    replace_all(line, "&gt;", ">");
  }
  line = " " + line + " ";

  std::string a;
  a.reserve(line.size() * 2);
  for (char c : line) {
    if (is_13a_symbol(static_cast<unsigned char>(c))) {
      a += ' ';
      a += c;
      a += ' ';
    } else {
      a += c;
    }
  }
  // The remaining rules are two-character patterns applied left to right
  // without overlap, exactly like a global regex substitution.
  std::string b;
  for (std::size_t i = 0; i < a.size();) {
    if (i + 1 < a.size() && !is_digit(a[i]) && (a[i + 1] == '.' || a[i + 1] == ',')) {
      b += a[i];
      b += ' ';
      b += a[i + 1];
      b += ' ';
      i += 2;
    } else {
      b += a[i++];
    }
  }
  std::string c;
  for (std::size_t i = 0; i < b.size();) {
    if (i + 1 < b.size() && (b[i] == '.' || b[i] == ',') && !is_digit(b[i + 1])) {
      c += ' ';
      c += b[i];
      c += ' ';
      c += b[i + 1];
      i += 2;
    } else {
      c += b[i++];
    }
  }
  std::string d;
  for (std::size_t i = 0; i < c.size();) {
    if (i + 1 < c.size() && is_digit(c[i]) && c[i + 1] == '-') {
      d += c[i];
      d += " - ";
      i += 2;
    } else {
      d += c[i++];
    }
  }
  return d;
}

using NgramCounts = std::unordered_map<std::string, long>;

NgramCounts ngram_counts(const std::vector<std::string>& tokens, int n) {
  NgramCounts counts;
  if (static_cast<int>(tokens.size()) < n) return counts;
  for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= tokens.size(); ++i) {
    std::string key = tokens[i];
    for (int k = 1; k < n; ++k) {
      key += '\x1f';
      key += tokens[i + static_cast<std::size_t>(k)];
    }
    ++counts[key];
  }
  return counts;
}

void check_sizes(std::size_t h, std::size_t r) {
  if (h != r) throw Error("hypothesis/reference count mismatch: " + std::to_string(h) + " vs " + std::to_string(r));
  if (h == 0) throw Error("metric needs at least one segment");
}

}  // namespace

Tokenizer default_tokenizer(std::string_view target_lang) {
  return text::is_unsegmented_language(target_lang) ? Tokenizer::kChar : Tokenizer::k13a;
}

std::vector<std::string> tokenize(std::string_view input, Tokenizer tokenizer) {
  switch (tokenizer) {
    case Tokenizer::k13a:
      return text::split_whitespace(tokenize_13a_string(input));
    case Tokenizer::kChar: {
      std::vector<std::string> out;
      for (char32_t cp : text::codepoints(input)) {
        if (cp < 0x80 && text::is_space(static_cast<char>(cp))) continue;
        out.push_back(text::encode_utf8(cp));
      }
      return out;
    }
    case Tokenizer::kNone:
      return text::split_whitespace(input);
  }
  return {};
}

BleuStats& BleuStats::operator+=(const BleuStats& other) {
  for (std::size_t i = 0; i < matches.size(); ++i) {
    matches[i] += other.matches[i];
    totals[i] += other.totals[i];
  }
  hyp_len += other.hyp_len;
  ref_len += other.ref_len;
  return *this;
}

BleuStats bleu_stats(std::string_view hypothesis, std::string_view reference, const BleuOptions& options) {
  if (options.max_order < 1 || options.max_order > 9) throw Error("BLEU max_order must be in [1, 9]");
  const auto hyp = tokenize(hypothesis, options.tokenizer);
  const auto ref = tokenize(reference, options.tokenizer);
  BleuStats stats;
  stats.hyp_len = static_cast<long>(hyp.size());
  stats.ref_len = static_cast<long>(ref.size());
  for (int n = 1; n <= options.max_order; ++n) {
    const auto h = ngram_counts(hyp, n);
    const auto r = ngram_counts(ref, n);
    long matched = 0;
    for (const auto& [gram, count] : h) {
      if (auto it = r.find(gram); it != r.end()) matched += std::min(count, it->second);
    }
    stats.matches[static_cast<std::size_t>(n - 1)] = matched;
    stats.totals[static_cast<std::size_t>(n - 1)] = std::max<long>(0, stats.hyp_len - n + 1);
  }
  return stats;
}

double bleu_from_stats(const BleuStats& stats, const BleuOptions& options) {
  if (stats.hyp_len == 0) return 0.0;
  int order = 0;
  double log_sum = 0.0;
  double smooth = 1.0;
  for (int n = 1; n <= options.max_order; ++n) {
    const auto i = static_cast<std::size_t>(n - 1);
    if (stats.totals[i] == 0) {
      if (options.effective_order) break;
      return 0.0;
    }
    ++order;
    if (stats.matches[i] == 0) {
      if (options.smoothing == Smoothing::kNone) return 0.0;
      smooth *= 2.0;
      log_sum += std::log(1.0 / (smooth * static_cast<double>(stats.totals[i])));
    } else {
      log_sum += std::log(static_cast<double>(stats.matches[i]) / static_cast<double>(stats.totals[i]));
    }
  }
  if (order == 0) return 0.0;
  const double bp = stats.hyp_len >= stats.ref_len
                        ? 1.0
                        : std::exp(1.0 - static_cast<double>(stats.ref_len) / static_cast<double>(stats.hyp_len));
  return 100.0 * bp * std::exp(log_sum / order);
}

MetricScore bleu(const std::vector<std::string>& hypotheses, const std::vector<std::string>& references,
                 const BleuOptions& options) {
  check_sizes(hypotheses.size(), references.size());
  BleuStats total;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) total += bleu_stats(hypotheses[i], references[i], options);
  return {"BLEU", bleu_from_stats(total, options), hypotheses.size()};
}

MetricScore chrf(const std::vector<std::string>& hypotheses, const std::vector<std::string>& references,
                 const ChrfOptions& options) {
  check_sizes(hypotheses.size(), references.size());
  const auto order = static_cast<std::size_t>(options.char_order);
  std::vector<long> n_hyp(order, 0);
  std::vector<long> n_ref(order, 0);
  std::vector<long> n_match(order, 0);

  auto chars = [](std::string_view s) {
    std::vector<std::string> out;
    for (char32_t cp : text::codepoints(s)) {
      if (cp < 0x80 && text::is_space(static_cast<char>(cp))) continue;
      out.push_back(text::encode_utf8(cp));
    }
    return out;
  };

  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    const auto h = chars(hypotheses[i]);
    const auto r = chars(references[i]);
    for (std::size_t n = 1; n <= order; ++n) {
      const auto hc = ngram_counts(h, static_cast<int>(n));
      const auto rc = ngram_counts(r, static_cast<int>(n));
      long hs = 0;
      long rs = 0;
      long ms = 0;
      for (const auto& [g, c] : hc) {
        hs += c;
        if (auto it = rc.find(g); it != rc.end()) ms += std::min(c, it->second);
      }
      for (const auto& [g, c] : rc) rs += c;
      // A segment whose reference has no n-grams of this order contributes no
      // hypothesis n-grams either, as in the reference chrF tool.
      n_hyp[n - 1] += rs > 0 ? hs : 0;
      n_ref[n - 1] += rs;
      n_match[n - 1] += ms;
    }
  }

  const double factor = options.beta * options.beta;
  double avg_prec = 0.0;
  double avg_rec = 0.0;
  int effective = 0;
  for (std::size_t n = 0; n < order; ++n) {
    if (n_hyp[n] > 0 && n_ref[n] > 0) {
      avg_prec += static_cast<double>(n_match[n]) / static_cast<double>(n_hyp[n]);
      avg_rec += static_cast<double>(n_match[n]) / static_cast<double>(n_ref[n]);
      ++effective;
    }
  }
  double score = 0.0;
  if (effective > 0) {
    avg_prec /= effective;
    avg_rec /= effective;
    if (avg_prec + avg_rec > 0.0) score = 100.0 * (1.0 + factor) * avg_prec * avg_rec / (factor * avg_prec + avg_rec);
  }
  return {"ChrF", score, hypotheses.size()};
}

MetricScore doc_bleu(const std::vector<std::vector<std::string>>& doc_hypotheses,
                     const std::vector<std::vector<std::string>>& doc_references, const BleuOptions& options) {
  if (doc_hypotheses.size() != doc_references.size()) {
    throw Error("document count mismatch: " + std::to_string(doc_hypotheses.size()) + " vs " +
                std::to_string(doc_references.size()));
  }
  std::vector<std::string> hyp;
  std::vector<std::string> ref;
  for (std::size_t d = 0; d < doc_hypotheses.size(); ++d) {
    hyp.push_back(text::join(doc_hypotheses[d], " "));
    ref.push_back(text::join(doc_references[d], " "));
  }
  auto score = bleu(hyp, ref, options);
  score.name = "Doc-BLEU";
  return score;
}

DocEvalPlan plan_doc_eval(const std::vector<corpus::Document>& docs, std::size_t window, std::size_t stride) {
  if (window < 1 || stride < 1) throw Error("doc eval window and stride must be >= 1");
  if (stride > window) throw Error("doc eval stride must not exceed window");
  DocEvalPlan plan{window, stride, {}};
  for (std::size_t d = 0; d < docs.size(); ++d) {
    const std::size_t n = docs[d].lines.size();
    for (std::size_t start = 0; start < n; start += stride) {
      const std::size_t end = std::min(n, start + window);
      plan.segments.push_back({d, docs[d].doc_id, start, end});
      if (end == n) break;
    }
  }
  return plan;
}

DocQeResult doc_qe(const DocEvalPlan& plan, const std::vector<corpus::Document>& src_docs,
                   const std::vector<corpus::Document>& hyp_docs, const QeOracle& qe) {
  if (src_docs.size() != hyp_docs.size()) throw Error("doc_qe: source/hypothesis document count mismatch");
  for (std::size_t d = 0; d < src_docs.size(); ++d) {
    if (src_docs[d].lines.size() != hyp_docs[d].lines.size()) {
      throw Error("doc_qe: document " + src_docs[d].doc_id + " is not line aligned");
    }
  }
  std::vector<QeInput> inputs;
  inputs.reserve(plan.segments.size());
  auto slice = [](const std::vector<std::string>& lines, std::size_t a, std::size_t b) {
    return text::join(std::vector<std::string>(lines.begin() + static_cast<std::ptrdiff_t>(a),
                                               lines.begin() + static_cast<std::ptrdiff_t>(b)),
                      " ");
  };
  for (const auto& seg : plan.segments) {
    if (seg.doc >= src_docs.size() || seg.end > src_docs[seg.doc].lines.size() || seg.start >= seg.end) {
      throw Error("doc_qe: plan does not match documents");
    }
    inputs.push_back({slice(src_docs[seg.doc].lines, seg.start, seg.end), slice(hyp_docs[seg.doc].lines, seg.start, seg.end)});
  }

  std::vector<double> scores;
  try {
    scores = inputs.empty() ? std::vector<double>{} : qe(inputs);
  } catch (const OracleItemError& e) {
    const auto& seg = plan.segments.at(e.index());
    throw Error("doc_qe: segment " + seg.doc_id + "[" + std::to_string(seg.start) + "," + std::to_string(seg.end) +
                ") failed: " + e.what());
  }
  if (scores.size() != inputs.size()) throw Error("doc_qe: oracle returned wrong number of scores");

  std::vector<double> sum(src_docs.size(), 0.0);
  std::vector<std::size_t> count(src_docs.size(), 0);
  for (std::size_t s = 0; s < plan.segments.size(); ++s) {
    sum[plan.segments[s].doc] += scores[s];
    ++count[plan.segments[s].doc];
  }
  DocQeResult result;
  double total = 0.0;
  std::size_t n_docs = 0;
  for (std::size_t d = 0; d < src_docs.size(); ++d) {
    if (count[d] == 0) continue;
    result.per_document.push_back(sum[d] / static_cast<double>(count[d]));
    total += result.per_document.back();
    ++n_docs;
  }
  result.corpus = {"Doc-QE", n_docs ? total / static_cast<double>(n_docs) : 0.0, n_docs};
  return result;
}

namespace {

GroupRow score_group(const std::string& name, const std::vector<const EvalItem*>& items,
                     const std::vector<std::string>& metric_order, const BleuOptions& bleu_options) {
  GroupRow row{name, items.size(), {}};
  std::vector<std::string> hyp;
  std::vector<std::string> ref;
  for (const auto* it : items) {
    hyp.push_back(it->hypothesis);
    ref.push_back(it->reference);
  }
  for (const auto& metric : metric_order) {
    if (metric == "BLEU") {
      row.scores.push_back(bleu(hyp, ref, bleu_options));
    } else if (metric == "ChrF") {
      row.scores.push_back(chrf(hyp, ref));
    } else {
      double sum = 0.0;
      std::size_t n = 0;
      for (const auto* it : items) {
        if (auto s = it->item_scores.find(metric); s != it->item_scores.end()) {
          sum += s->second;
          ++n;
        }
      }
      if (n > 0) row.scores.push_back({metric, sum / static_cast<double>(n), n});
    }
  }
  return row;
}

}  // namespace

GroupedReport aggregate_report(const std::vector<EvalItem>& items, const std::string& group_key,
                               const std::vector<std::string>& metric_order, const BleuOptions& bleu_options) {
  GroupedReport report{group_key, {}, 0};
  std::map<std::string, std::vector<const EvalItem*>> groups;
  std::vector<const EvalItem*> all;
  for (const auto& item : items) {
    auto it = item.tags.find(group_key);
    if (it == item.tags.end()) {
      ++report.untagged;
      groups[std::string(kUntaggedGroup)].push_back(&item);
    } else {
      groups[it->second].push_back(&item);
    }
    all.push_back(&item);
  }
  if (all.empty()) return report;
  for (const auto& [name, members] : groups) report.rows.push_back(score_group(name, members, metric_order, bleu_options));
  report.rows.push_back(score_group(std::string(kAllGroup), all, metric_order, bleu_options));
  return report;
}

std::string format_value(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << v;
  return os.str();
}

void write_table(std::ostream& out, const std::vector<std::pair<std::string, GroupedReport>>& by_system,
                 const std::vector<std::string>& metric_order) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> header{"System", "Group"};
  header.insert(header.end(), metric_order.begin(), metric_order.end());
  header.push_back("N");
  rows.push_back(header);
  for (const auto& [system, report] : by_system) {
    for (const auto& row : report.rows) {
      std::vector<std::string> cells{system, row.group};
      for (const auto& metric : metric_order) {
        auto it = std::find_if(row.scores.begin(), row.scores.end(), [&](const MetricScore& s) { return s.name == metric; });
        cells.push_back(it == row.scores.end() ? "--" : format_value(it->value));
      }
      cells.push_back(std::to_string(row.n_items));
      rows.push_back(std::move(cells));
    }
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], text::codepoint_count(r[c]));
  }
  for (const auto& r : rows) {
    std::string line;
    for (std::size_t c = 0; c < r.size(); ++c) {
      const std::size_t pad = width[c] - text::codepoint_count(r[c]);
      if (c < 2) {
        line += r[c] + std::string(pad, ' ');
      } else {
        line += std::string(pad, ' ') + r[c];
      }
      if (c + 1 < r.size()) line += "  ";
    }
    out << text::rtrim(line) << '\n';
  }
}

void write_csv(std::ostream& out, const std::vector<std::pair<std::string, GroupedReport>>& by_system) {
  auto quote = [](const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
      if (c == '"') q += '"';
      q += c;
    }
    return q + "\"";
  };
  out << "system,group,metric,value,n\n";
  for (const auto& [system, report] : by_system) {
    for (const auto& row : report.rows) {
      for (const auto& s : row.scores) {
        std::ostringstream v;
        v << std::setprecision(10) << s.value;
        out << quote(system) << ',' << quote(row.group) << ',' << quote(s.name) << ',' << v.str() << ',' << s.n_items << '\n';
      }
    }
  }
}

}  // namespace mtkit::metrics
