#include "mtkit/router.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>

#include <json.hpp>

#include "mtkit/error.hpp"

namespace mtkit::router {

void RoutingPolicy::validate() const {
  if (!(percentile > 0.0 && percentile <= 100.0)) throw Error("routing percentile must be in (0, 100]");
  if (kind == PolicyKind::kMaxRouting && threshold) throw Error("max routing takes no threshold");
  if (kind == PolicyKind::kThreshold && source == ThresholdSource::kGiven && !threshold) {
    throw Error("threshold routing with a given threshold needs a value");
  }
  if (threshold && std::isnan(*threshold)) throw Error("routing threshold is NaN");
}

std::string_view reason_name(Reason r) {
  switch (r) {
    case Reason::kPrimaryAboveThreshold:
      return "primary_above_threshold";
    case Reason::kBelowThresholdFallback:
      return "below_threshold_fallback";
    case Reason::kMaxChoice:
      return "max_choice";
  }
  return "?";
}

RoutingDecision max_route(const std::vector<Candidate>& candidates, std::string segment_id) {
  if (candidates.empty()) throw Error("max_route: no candidates");
  std::size_t best = 0;
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    if (candidates[i].qe_score > candidates[best].qe_score) best = i;
  }
  RoutingDecision d{std::move(segment_id), candidates[best].system, candidates[0].qe_score, std::nullopt, Reason::kMaxChoice};
  if (candidates.size() > 1) d.fallback_score = candidates[1].qe_score;
  return d;
}

double estimate_threshold(std::vector<double> history_scores, double percentile) {
  if (history_scores.empty()) throw Error("estimate_threshold: empty history");
  if (!(percentile > 0.0 && percentile <= 100.0)) throw Error("percentile must be in (0, 100]");
  std::sort(history_scores.begin(), history_scores.end());
  const double h = static_cast<double>(history_scores.size() - 1) * percentile / 100.0;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, history_scores.size() - 1);
  const double frac = h - static_cast<double>(lo);
  if (frac == 0.0) return history_scores[lo];
  return history_scores[lo] + frac * (history_scores[hi] - history_scores[lo]);
}

RoutingDecision threshold_route(double primary_qe, double threshold, const std::string& primary, const std::string& fallback,
                                std::string segment_id, std::optional<double> fallback_qe) {
  const bool use_fallback = primary_qe < threshold;
  return {std::move(segment_id), use_fallback ? fallback : primary, primary_qe, fallback_qe,
          use_fallback ? Reason::kBelowThresholdFallback : Reason::kPrimaryAboveThreshold};
}

HybridReport evaluate_hybrid_scores(const std::vector<std::string>& ids, const std::vector<double>& primary_qe,
                                    const std::vector<double>& fallback_qe, const std::vector<double>& primary_final,
                                    const std::vector<double>& fallback_final, const RoutingPolicy& policy,
                                    const std::string& primary_system, const std::string& fallback_system) {
  policy.validate();
  const std::size_t n = ids.size();
  if (primary_qe.size() != n || fallback_qe.size() != n || primary_final.size() != n || fallback_final.size() != n) {
    throw Error("evaluate_hybrid: score vectors differ in length");
  }
  if (n == 0) throw Error("evaluate_hybrid: no items");

  HybridReport r;
  r.primary_system = primary_system;
  r.fallback_system = fallback_system;
  r.policy = policy.kind;
  r.threshold_source = policy.source;
  r.n_items = n;
  if (policy.kind == PolicyKind::kThreshold) {
    r.threshold = policy.source == ThresholdSource::kSameItems ? estimate_threshold(primary_qe, policy.percentile) : *policy.threshold;
  }

  double sums[8] = {};
  std::size_t threshold_fallbacks = 0;
  std::size_t max_fallbacks = 0;
  std::vector<RoutingDecision> threshold_decisions;
  for (std::size_t i = 0; i < n; ++i) {
    const auto td = threshold_route(primary_qe[i], r.threshold, primary_system, fallback_system, ids[i], fallback_qe[i]);
    const bool t_fb = td.reason == Reason::kBelowThresholdFallback;
    const auto md = max_route({{primary_system, {}, primary_qe[i]}, {fallback_system, {}, fallback_qe[i]}}, ids[i]);
    const bool m_fb = fallback_qe[i] > primary_qe[i];
    threshold_fallbacks += t_fb;
    max_fallbacks += m_fb;

    sums[0] += primary_qe[i];
    sums[1] += primary_final[i];
    sums[2] += fallback_qe[i];
    sums[3] += fallback_final[i];
    sums[4] += t_fb ? fallback_qe[i] : primary_qe[i];
    sums[5] += t_fb ? fallback_final[i] : primary_final[i];
    sums[6] += m_fb ? fallback_qe[i] : primary_qe[i];
    sums[7] += m_fb ? fallback_final[i] : primary_final[i];
    if (policy.kind == PolicyKind::kThreshold) threshold_decisions.push_back(td);
    r.max_decisions.push_back(md);
  }
  const auto dn = static_cast<double>(n);
  r.primary_only = {sums[0] / dn, sums[1] / dn};
  r.fallback_only = {sums[2] / dn, sums[3] / dn};
  r.hybrid_threshold = {sums[4] / dn, sums[5] / dn};
  r.hybrid_max = {sums[6] / dn, sums[7] / dn};
  if (policy.kind == PolicyKind::kThreshold) {
    r.decisions = std::move(threshold_decisions);
    r.fallback_fraction = static_cast<double>(threshold_fallbacks) / dn;
  } else {
    r.decisions = r.max_decisions;
    r.fallback_fraction = static_cast<double>(max_fallbacks) / dn;
  }
  return r;
}

HybridReport evaluate_hybrid(const std::vector<HybridItem>& items, const RoutingPolicy& policy, const QeOracle& qe,
                             const RefMetricOracle& final_metric, const std::string& primary_system,
                             const std::string& fallback_system) {
  std::vector<std::string> missing;
  for (const auto& item : items) {
    if (!item.primary || !item.fallback) missing.push_back(item.id);
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& id : missing) list += (list.empty() ? "" : ", ") + id;
    throw Error("evaluate_hybrid: items missing a candidate translation: " + list);
  }

  std::vector<QeInput> qe_in;
  std::vector<RefMetricInput> final_in;
  for (const auto& item : items) {
    qe_in.push_back({item.source, *item.primary});
    final_in.push_back({item.source, *item.primary, item.reference});
  }
  for (const auto& item : items) {
    qe_in.push_back({item.source, *item.fallback});
    final_in.push_back({item.source, *item.fallback, item.reference});
  }
  const auto qe_scores = qe(qe_in);
  const auto final_scores = final_metric(final_in);
  if (qe_scores.size() != qe_in.size() || final_scores.size() != final_in.size()) {
    throw Error("evaluate_hybrid: oracle returned wrong number of scores");
  }
  const std::size_t n = items.size();
  std::vector<std::string> ids;
  for (const auto& item : items) ids.push_back(item.id);
  auto half = [n](const std::vector<double>& v, std::size_t part) {
    return std::vector<double>(v.begin() + static_cast<std::ptrdiff_t>(part * n),
                               v.begin() + static_cast<std::ptrdiff_t>((part + 1) * n));
  };
  return evaluate_hybrid_scores(ids, half(qe_scores, 0), half(qe_scores, 1), half(final_scores, 0), half(final_scores, 1),
                                policy, primary_system, fallback_system);
}

void write_decision_log(std::ostream& out, const std::vector<RoutingDecision>& decisions) {
  for (const auto& d : decisions) {
    nlohmann::json rec{{"segment_id", d.segment_id},
                       {"chosen_system", d.chosen_system},
                       {"primary_score", d.primary_score},
                       {"reason", std::string(reason_name(d.reason))}};
    rec["fallback_score"] = d.fallback_score ? nlohmann::json(*d.fallback_score) : nlohmann::json(nullptr);
    out << rec.dump() << '\n';
  }
}

void write_hybrid_summary(std::ostream& out, const HybridReport& r) {
  auto row = [&](const std::string& name, const SystemScores& s) {
    out << std::left << std::setw(18) << name << std::right << std::fixed << std::setprecision(4) << std::setw(12)
        << s.mean_final << std::setw(12) << s.mean_qe << '\n';
  };
  out << "policy: " << (r.policy == PolicyKind::kThreshold ? "threshold" : "max_routing") << '\n';
  if (r.policy == PolicyKind::kThreshold) {
    out << "threshold: " << std::setprecision(6) << r.threshold << " ("
        << (r.threshold_source == ThresholdSource::kSameItems ? "same-items percentile" : "given/history") << ")\n";
  }
  out << "fallback usage: " << std::fixed << std::setprecision(2) << 100.0 * r.fallback_fraction << "% of " << r.n_items
      << " items\n";
  out << std::left << std::setw(18) << "System" << std::right << std::setw(12) << "Final" << std::setw(12) << "QE" << '\n';
  row(r.primary_system, r.primary_only);
  row(r.fallback_system, r.fallback_only);
  row("Hybrid-Threshold", r.hybrid_threshold);
  row("Max-Routing", r.hybrid_max);
}

}  // namespace mtkit::router
