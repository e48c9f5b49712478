#include <gtest/gtest.h>

#include <algorithm>
#include <sstream>
#include <string>
#include <vector>

#include "mtkit/error.hpp"
#include "mtkit/router.hpp"
#include "mtkit/text.hpp"
#include "support/synth.hpp"

using namespace mtkit;
using namespace mtkit::router;

namespace {

struct Scores {
  std::vector<std::string> ids;
  std::vector<double> pq, fq, pf, ff;
};

Scores synthetic(std::uint64_t seed, std::size_t n) {
  synth::Gen g(seed);
  Scores s;
  for (std::size_t i = 0; i < n; ++i) {
    s.ids.push_back("s" + std::to_string(i));
    s.pq.push_back(0.8 + 0.05 * g.normal());
    s.fq.push_back(0.78 + 0.05 * g.normal());
    s.pf.push_back(s.pq.back() + 0.02 * g.normal());
    s.ff.push_back(s.fq.back() + 0.02 * g.normal());
  }
  return s;
}

RoutingPolicy given(double t) {
  RoutingPolicy p;
  p.kind = PolicyKind::kThreshold;
  p.source = ThresholdSource::kGiven;
  p.threshold = t;
  return p;
}

}  // namespace

TEST(Router, PolicyValidation) {
  RoutingPolicy p;
  p.percentile = 0.0;
  EXPECT_THROW(p.validate(), Error);
  p = given(0.5);
  p.threshold.reset();
  EXPECT_THROW(p.validate(), Error);
  p = {};
  p.kind = PolicyKind::kMaxRouting;
  p.threshold = 1.0;
  EXPECT_THROW(p.validate(), Error);
}

TEST(Router, MaxRouteTiesGoToFirst) {
  EXPECT_EQ(max_route({{"a", "x", 0.4}, {"b", "y", 0.7}, {"c", "z", 0.7}}).chosen_system, "b");
  EXPECT_EQ(max_route({{"a", "x", 0.5}, {"b", "y", 0.5}}).chosen_system, "a");
  EXPECT_THROW(max_route({}), Error);
}

TEST(Router, ThresholdRoute) {
  EXPECT_EQ(threshold_route(0.3, 0.5, "p", "f").chosen_system, "f");
  EXPECT_EQ(threshold_route(0.5, 0.5, "p", "f").chosen_system, "p");  // equal keeps primary
  EXPECT_EQ(threshold_route(0.3, kNeverFallback, "p", "f").chosen_system, "p");
  EXPECT_EQ(threshold_route(0.3, 0.5, "p", "f").reason, Reason::kBelowThresholdFallback);
}

TEST(Router, PercentileInterpolation) {
  EXPECT_DOUBLE_EQ(estimate_threshold({4, 1, 3, 2}, 50.0), 2.5);
  EXPECT_DOUBLE_EQ(estimate_threshold({1, 2, 3, 4, 5}, 25.0), 2.0);
  EXPECT_DOUBLE_EQ(estimate_threshold({10, 20}, 10.0), 11.0);
  EXPECT_DOUBLE_EQ(estimate_threshold({7}, 50.0), 7.0);
  EXPECT_DOUBLE_EQ(estimate_threshold({1, 2, 3}, 100.0), 3.0);
  EXPECT_THROW(estimate_threshold({}, 50.0), Error);
}

TEST(Hybrid, MaxEqualsPerItemMax) {
  const auto s = synthetic(1, 2000);
  RoutingPolicy p;
  p.kind = PolicyKind::kMaxRouting;
  const auto r = evaluate_hybrid_scores(s.ids, s.pq, s.fq, s.pf, s.ff, p);
  double sum = 0;
  for (std::size_t i = 0; i < s.ids.size(); ++i) sum += std::max(s.pq[i], s.fq[i]);
  EXPECT_EQ(r.hybrid_max.mean_qe, sum / 2000.0);
  EXPECT_GE(r.hybrid_max.mean_qe, std::max(r.primary_only.mean_qe, r.fallback_only.mean_qe));
  EXPECT_EQ(r.decisions.size(), 2000u);
}

TEST(Hybrid, HeldOutMedianRoutesAboutHalf) {
  const auto history = synthetic(2, 10000);
  const auto live = synthetic(3, 10000);
  const double t = estimate_threshold(history.pq, 50.0);
  const auto r = evaluate_hybrid_scores(live.ids, live.pq, live.fq, live.pf, live.ff, given(t));
  EXPECT_NEAR(r.fallback_fraction, 0.5, 0.03);
  EXPECT_EQ(r.threshold_source, ThresholdSource::kGiven);
}

TEST(Hybrid, SameItemsPercentile) {
  const auto s = synthetic(4, 1001);
  RoutingPolicy p;
  p.percentile = 30.0;
  const auto r = evaluate_hybrid_scores(s.ids, s.pq, s.fq, s.pf, s.ff, p);
  EXPECT_DOUBLE_EQ(r.threshold, estimate_threshold(s.pq, 30.0));
  EXPECT_NEAR(r.fallback_fraction, 0.30, 0.002);
}

TEST(Hybrid, MonotoneInThreshold) {
  const auto s = synthetic(5, 3000);
  double prev = -1.0;
  std::vector<bool> prev_fb(s.ids.size(), false);
  for (double t = 0.5; t <= 1.1; t += 0.01) {
    const auto r = evaluate_hybrid_scores(s.ids, s.pq, s.fq, s.pf, s.ff, given(t));
    EXPECT_GE(r.fallback_fraction, prev);
    prev = r.fallback_fraction;
    for (std::size_t i = 0; i < s.ids.size(); ++i) {
      const bool fb = r.decisions[i].chosen_system == "fallback";
      EXPECT_TRUE(fb || !prev_fb[i]) << "item left fallback as threshold rose";
      prev_fb[i] = fb;
    }
  }
}

TEST(Hybrid, OracleVersionUsesQeToDecideAndFinalToEvaluate) {
  std::vector<HybridItem> items{{"0", "s0", "r0", "good", "bad"}, {"1", "s1", "r1", "bad", "good"}};
  const QeOracle qe = [](const std::vector<QeInput>& in) {
    std::vector<double> out;
    for (const auto& x : in) out.push_back(x.hypothesis == "good" ? 0.9 : 0.1);
    return out;
  };
  const RefMetricOracle fin = [](const std::vector<RefMetricInput>& in) {
    std::vector<double> out;
    for (const auto& x : in) out.push_back(x.hypothesis == "good" ? 80.0 : 20.0);
    return out;
  };
  const auto r = evaluate_hybrid(items, given(0.5), qe, fin, "gpt", "ms");
  EXPECT_EQ(r.decisions[0].chosen_system, "gpt");
  EXPECT_EQ(r.decisions[1].chosen_system, "ms");
  EXPECT_DOUBLE_EQ(r.hybrid_threshold.mean_final, 80.0);
  EXPECT_DOUBLE_EQ(r.primary_only.mean_final, 50.0);

  items[1].fallback.reset();
  try {
    evaluate_hybrid(items, given(0.5), qe, fin);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find(": 1"), std::string::npos) << e.what();
  }
}

TEST(Hybrid, DecisionLogAndSummary) {
  const auto s = synthetic(6, 5);
  const auto r = evaluate_hybrid_scores(s.ids, s.pq, s.fq, s.pf, s.ff, given(0.8));
  std::ostringstream log, summary;
  write_decision_log(log, r.decisions);
  write_hybrid_summary(summary, r);
  const auto lines = text::split_lines(log.str());
  ASSERT_EQ(lines.size(), 5u);
  EXPECT_NE(lines[0].find("\"segment_id\":\"s0\""), std::string::npos) << lines[0];
  EXPECT_NE(summary.str().find("fallback usage"), std::string::npos);
  EXPECT_NE(summary.str().find("given"), std::string::npos);
}
