#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "mtkit/oracles.hpp"

namespace mtkit::router {

struct QeEstimate {
  std::string system;
  std::string segment_id;
  double score = 0.0;
};

enum class PolicyKind { kMaxRouting, kThreshold };

/// Where a threshold policy's threshold came from. Reports name this because
/// the two modes are not interchangeable.
enum class ThresholdSource {
  kGiven,      // fixed value or estimated from earlier traffic
  kSameItems,  // percentile of the routed items' own primary scores
};

struct RoutingPolicy {
  PolicyKind kind = PolicyKind::kThreshold;
  std::optional<double> threshold;  // required for kThreshold unless source is kSameItems
  double percentile = 50.0;         // in (0, 100]
  ThresholdSource source = ThresholdSource::kSameItems;

  void validate() const;
};

enum class Reason { kPrimaryAboveThreshold, kBelowThresholdFallback, kMaxChoice };
std::string_view reason_name(Reason r);

struct RoutingDecision {
  std::string segment_id;
  std::string chosen_system;
  double primary_score = 0.0;
  std::optional<double> fallback_score;
  Reason reason = Reason::kMaxChoice;
};

struct Candidate {
  std::string system;
  std::string translation;
  double qe_score = 0.0;
};

/// Argmax of qe_score; ties go to the earliest candidate.
RoutingDecision max_route(const std::vector<Candidate>& candidates, std::string segment_id = {});

/// Percentile with linear interpolation between closest ranks of the sorted
/// history: h = (n - 1) p / 100, x[floor h] + frac(h) (x[floor h + 1] - x[floor h]).
double estimate_threshold(std::vector<double> history_scores, double percentile);

inline constexpr double kNeverFallback = -std::numeric_limits<double>::infinity();

/// Fallback iff primary_qe < threshold.
RoutingDecision threshold_route(double primary_qe, double threshold, const std::string& primary, const std::string& fallback,
                                std::string segment_id = {}, std::optional<double> fallback_qe = std::nullopt);

struct HybridItem {
  std::string id;
  std::string source;
  std::string reference;
  std::optional<std::string> primary;   // translation by the primary system
  std::optional<std::string> fallback;  // translation by the fallback system
};

struct SystemScores {
  double mean_qe = 0.0;
  double mean_final = 0.0;
};

struct HybridReport {
  std::string primary_system;
  std::string fallback_system;
  PolicyKind policy = PolicyKind::kThreshold;
  ThresholdSource threshold_source = ThresholdSource::kSameItems;
  double threshold = 0.0;
  double fallback_fraction = 0.0;  // under the threshold policy
  std::vector<RoutingDecision> decisions;       // policy decisions, item order
  std::vector<RoutingDecision> max_decisions;   // Max-Routing decisions, item order
  SystemScores primary_only;
  SystemScores fallback_only;
  SystemScores hybrid_threshold;
  SystemScores hybrid_max;
  std::size_t n_items = 0;
};

/// Routes every item with both policies. QE scores decide, the final metric
/// only evaluates. Throws listing every item missing a candidate.
HybridReport evaluate_hybrid(const std::vector<HybridItem>& items, const RoutingPolicy& policy, const QeOracle& qe,
                             const RefMetricOracle& final_metric, const std::string& primary_system = "primary",
                             const std::string& fallback_system = "fallback");

/// Same evaluation from precomputed per-item scores (parallel vectors).
HybridReport evaluate_hybrid_scores(const std::vector<std::string>& ids, const std::vector<double>& primary_qe,
                                    const std::vector<double>& fallback_qe, const std::vector<double>& primary_final,
                                    const std::vector<double>& fallback_final, const RoutingPolicy& policy,
                                    const std::string& primary_system = "primary",
                                    const std::string& fallback_system = "fallback");

/// One JSON record per decision.
void write_decision_log(std::ostream& out, const std::vector<RoutingDecision>& decisions);
void write_hybrid_summary(std::ostream& out, const HybridReport& report);

}  // namespace mtkit::router
