#include <gtest/gtest.h>

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mtkit/campaign.hpp"
#include "mtkit/text.hpp"
#include "support/stub_backend.hpp"
#include "support/tempdir.hpp"

using namespace mtkit;
using namespace mtkit::campaign;
using testing_support::slurp;
using testing_support::TempDir;

namespace {

std::vector<Json> read_jsonl(const std::filesystem::path& p) {
  std::vector<Json> out;
  for (const auto& line : text::split_lines(slurp(p))) out.push_back(Json::parse(line));
  return out;
}

// Six test items in two documents, tagged by domain, plus a small shot pool.
struct Fixture {
  TempDir dir;

  Fixture() {
    dir.write("test.de", "Guten Morgen.\nWie geht es dir?\nDas Wetter ist schön.\nIch gehe nach Hause.\nDer Zug ist spät.\nBis morgen.\n");
    dir.write("test.en", "Good morning.\nHow are you?\nThe weather is nice.\nI am going home.\nThe train is late.\nSee you tomorrow.\n");
    dir.write("test.docs", "d1\nd1\nd1\nd2\nd2\nd2\n");
    dir.write("test.tags", "0\tdomain=news\n1\tdomain=news\n2\tdomain=news\n3\tdomain=conv\n4\tdomain=conv\n5\tdomain=conv\n");
    std::string pool;
    for (int i = 0; i < 12; ++i) {
      pool += R"({"source":"Satz Nummer )" + std::to_string(i) + R"( ist hier.","target":"Sentence number )" +
              std::to_string(i) + R"( is here.","quality":)" + std::to_string(0.5 + i / 100.0) + "}\n";
    }
    dir.write("pool.jsonl", pool);
    dir.write("ms.en", "Good morning!\nHow are you?\nThe weather is fine.\nI go home.\nThe train is late.\nUntil tomorrow.\n");
  }

  Json config() const {
    return Json::parse(R"({
      "language_pair": "de-en",
      "test_set": {"source": "test.de", "target": "test.en", "doc_ids": "test.docs", "sidecar": "test.tags"},
      "shot_pool": {"source": "pool.jsonl", "format": "jsonl"},
      "shots": {"strategy": "QR", "k": 1, "seed": 7, "min_source_tokens": 2},
      "systems": [{"name": "gpt"}, {"name": "ms", "hypotheses": "ms.en"}],
      "group_by": ["domain"],
      "characteristics": true,
      "routing": {"primary": "gpt", "fallback": "ms", "policy": "threshold", "percentile": 50}
    })");
  }

  CampaignConfig load(const Json& j) const { return CampaignConfig::from_json(j, dir.path()); }
};

std::unique_ptr<scorer::ScorerClient> client(stub::Backend& b, const std::filesystem::path& cache = {}) {
  scorer::CallPolicy p;
  p.backoff = std::chrono::milliseconds(1);
  return std::make_unique<scorer::ScorerClient>(b.transport(), std::make_shared<scorer::ResponseCache>(cache), p);
}

ItemScores scores(const std::string& label, const std::vector<double>& v, std::size_t first_id = 0) {
  ItemScores s{label, {}};
  for (std::size_t i = 0; i < v.size(); ++i) s.by_id[first_id + i] = v[i];
  return s;
}

}  // namespace

TEST(CampaignConfig, ParsesAndRoundTrips) {
  Fixture f;
  const auto c = f.load(f.config());
  EXPECT_EQ(c.src_name, "German");
  EXPECT_EQ(c.tgt_name, "English");
  EXPECT_EQ(c.strategy, shots::Strategy::kQualityRandom);
  EXPECT_EQ(c.metrics, (std::vector<std::string>{"COMET-22", "COMETkiwi", "ChrF", "BLEU"}));
  EXPECT_EQ(c.test_set.source, f.dir / "test.de");
  EXPECT_FALSE(c.systems[1].from_backend);
  const auto warnings = c.validate();
  EXPECT_TRUE(warnings.empty());
  const auto again = CampaignConfig::from_json(c.to_json());
  EXPECT_EQ(again.to_json(), c.to_json());
}

TEST(CampaignConfig, RejectsBadConfigs) {
  Fixture f;
  auto bad = [&](const std::function<void(Json&)>& edit) {
    Json j = f.config();
    edit(j);
    try {
      f.load(j).validate();
    } catch (const ConfigError&) {
      return true;
    }
    return false;
  };
  EXPECT_TRUE(bad([](Json& j) { j["colour"] = "red"; }));
  EXPECT_TRUE(bad([](Json& j) { j["language_pair"] = "german"; }));
  EXPECT_TRUE(bad([](Json& j) { j["metrics"] = {"METEOR"}; }));
  EXPECT_TRUE(bad([](Json& j) { j["prompt_style"] = "chat"; }));  // chat is zero-shot
  EXPECT_TRUE(bad([](Json& j) { j["systems"] = Json::array(); }));
  EXPECT_TRUE(bad([](Json& j) { j["systems"][1]["name"] = "gpt"; }));
  EXPECT_TRUE(bad([](Json& j) { j["test_set"]["source"] = "missing.de"; }));
  EXPECT_TRUE(bad([](Json& j) { j["routing"]["fallback"] = "nobody"; }));
  EXPECT_TRUE(bad([](Json& j) { j["metrics"] = {"BLEU"}; }));  // routing needs QE and COMET-22
  EXPECT_TRUE(bad([](Json& j) { j.erase("shot_pool"); }));
  EXPECT_TRUE(bad([](Json& j) { j["shots"]["strategy"] = "XX"; }));
  EXPECT_TRUE(bad([](Json& j) {
    j["mode"] = "document";
    j["test_set"].erase("doc_ids");
  }));
  EXPECT_FALSE(bad([](Json& j) { j["shots"]["k"] = 3; }));
  Json j = f.config();
  j["shots"]["k"] = 3;
  EXPECT_EQ(f.load(j).validate().size(), 1u);  // unusual shot count warns only
}

TEST(Campaign, DryRunMakesNoBackendCalls) {
  Fixture f;
  stub::Backend backend;
  auto c = client(backend);
  const auto s = run_campaign(f.load(f.config()), *c, f.dir / "dry", {true});
  EXPECT_EQ(backend.calls.load(), 0);
  EXPECT_EQ(s.backend_calls, 0u);
  EXPECT_TRUE(std::filesystem::exists(f.dir / "dry" / "manifest.json"));
  EXPECT_FALSE(std::filesystem::exists(f.dir / "dry" / "items" / "items.jsonl"));
  const auto prompts = read_jsonl(f.dir / "dry" / "items" / "prompts.jsonl");
  ASSERT_EQ(prompts.size(), 6u);  // the file system has no prompts
  const auto p = prompts[0]["prompt"].get<std::string>();
  EXPECT_EQ(p.rfind("Translate this into 1. English:\n\nSatz Nummer ", 0), 0u) << p;
  EXPECT_NE(p.find("Guten Morgen.\n\n1."), std::string::npos);
  EXPECT_FALSE(c->offline());
}

TEST(Campaign, RunWritesLayoutAndReports) {
  Fixture f;
  stub::Backend backend;
  auto c = client(backend);
  const auto s = run_campaign(f.load(f.config()), *c, f.dir / "run");
  EXPECT_EQ(s.errors, 0u);
  EXPECT_EQ(s.items, 6u);
  EXPECT_GT(backend.calls.load(), 0);
  for (const char* p : {"manifest.json", "items/items.jsonl", "reports/report.txt", "reports/report.csv", "reports/routing.txt",
                        "reports/characteristics.txt", "logs/decisions.jsonl", "logs/errors.jsonl"}) {
    EXPECT_TRUE(std::filesystem::exists(f.dir / "run" / p)) << p;
  }
  const auto items = read_jsonl(f.dir / "run" / "items" / "items.jsonl");
  ASSERT_EQ(items.size(), 12u);
  EXPECT_EQ(items[0]["hypothesis"], "GUTEN MORGEN.");
  EXPECT_EQ(items[6]["hypothesis"], "Good morning!");
  EXPECT_TRUE(items[0]["scores"].contains("COMETkiwi"));
  EXPECT_TRUE(items[0]["scores"].contains("COMET-22"));
  EXPECT_TRUE(items[0].contains("traits"));

  const auto report = text::split_lines(slurp(f.dir / "run" / "reports" / "report.txt"));
  auto header = std::find_if(report.begin(), report.end(), [](const std::string& l) { return l.rfind("System", 0) == 0; });
  ASSERT_NE(header, report.end());
  EXPECT_EQ(text::split_whitespace(*header),
            (std::vector<std::string>{"System", "Group", "COMET-22", "COMETkiwi", "ChrF", "BLEU", "N"}));
  const std::string all = slurp(f.dir / "run" / "reports" / "report.txt");
  EXPECT_NE(all.find("language pair: de-en"), std::string::npos);
  EXPECT_NE(all.find("conv"), std::string::npos);
  EXPECT_EQ(read_jsonl(f.dir / "run" / "logs" / "decisions.jsonl").size(), 6u);
  const auto m = Json::parse(slurp(f.dir / "run" / "manifest.json"));
  EXPECT_EQ(m["layout_version"], kLayoutVersion);
  EXPECT_EQ(m["config_sha256"].get<std::string>().size(), 64u);
}

TEST(Campaign, WarmCacheRerunIsByteIdentical) {
  Fixture f;
  const auto cache = f.dir / "cache.jsonl";
  {
    stub::Backend backend;
    auto c = client(backend, cache);
    run_campaign(f.load(f.config()), *c, f.dir / "r1");
  }
  stub::Backend backend;
  auto c = client(backend, cache);
  const auto s = run_campaign(f.load(f.config()), *c, f.dir / "r2");
  EXPECT_EQ(backend.calls.load(), 0);
  EXPECT_EQ(s.backend_calls, 0u);
  for (const char* p : {"reports/report.txt", "reports/report.csv", "reports/routing.txt", "reports/characteristics.txt",
                        "items/items.jsonl", "logs/decisions.jsonl"}) {
    EXPECT_EQ(slurp(f.dir / "r1" / p), slurp(f.dir / "r2" / p)) << p;
  }
  // Reports rebuild from the records alone.
  const auto before = slurp(f.dir / "r2" / "reports" / "report.txt");
  std::filesystem::remove(f.dir / "r2" / "reports" / "report.txt");
  write_reports(f.dir / "r2");
  EXPECT_EQ(slurp(f.dir / "r2" / "reports" / "report.txt"), before);
}

TEST(Campaign, PartialFailureIsRecordedPerItem) {
  Fixture f;
  stub::Backend backend;
  backend.override_handler = [](scorer::Endpoint e, const std::string& body) {
    if (e != scorer::Endpoint::kTranslate) return stub::handle(e, body);
    const auto req = Json::parse(body);
    Json out{{"items", Json::array()}};
    for (const auto& item : req["items"]) {
      out["items"].push_back(item["text"] == "Bis morgen." ? Json{{"error", "content filter"}} : stub::answer(e, item));
    }
    return scorer::TransportResponse{200, out.dump()};
  };
  auto c = client(backend);
  const auto s = run_campaign(f.load(f.config()), *c, f.dir / "run");
  EXPECT_EQ(s.errors, 1u);
  const auto errors = read_jsonl(f.dir / "run" / "logs" / "errors.jsonl");
  ASSERT_EQ(errors.size(), 1u);
  EXPECT_EQ(errors[0]["id"], 5);
  EXPECT_EQ(errors[0]["stage"], "translate");
  const auto items = read_jsonl(f.dir / "run" / "items" / "items.jsonl");
  EXPECT_TRUE(items[5].contains("error"));
  EXPECT_FALSE(items[4].contains("error"));
  // The errored item is left out of the report counts.
  EXPECT_NE(slurp(f.dir / "run" / "reports" / "report.txt").find(" 5\n"), std::string::npos);
}

TEST(Campaign, DocumentModeWindowsAndDocMetrics) {
  Fixture f;
  Json j = f.config();
  j["mode"] = "document";
  j["window"] = 2;
  j["metrics"] = {"COMET-22", "COMETkiwi", "ChrF", "BLEU", "Doc-BLEU", "Doc-COMETkiwi"};
  j["doc_eval"] = {{"window", 2}, {"stride", 1}};
  j.erase("routing");
  stub::Backend backend;
  auto c = client(backend);
  const auto s = run_campaign(f.load(j), *c, f.dir / "doc");
  EXPECT_EQ(s.errors, 0u);
  const auto windows = read_jsonl(f.dir / "doc" / "items" / "windows.jsonl");
  EXPECT_EQ(std::count_if(windows.begin(), windows.end(), [](const Json& w) { return w["system"] == "gpt"; }), 4);
  const auto items = read_jsonl(f.dir / "doc" / "items" / "items.jsonl");
  EXPECT_EQ(items[3]["hypothesis"], "ICH GEHE NACH HAUSE.");
  const auto docs = read_jsonl(f.dir / "doc" / "items" / "docs.jsonl");
  EXPECT_EQ(docs.size(), 4u);  // two documents for each system
  const auto report = slurp(f.dir / "doc" / "reports" / "report.txt");
  EXPECT_NE(report.find("Doc-BLEU"), std::string::npos);
  EXPECT_NE(report.find("Doc-COMETkiwi"), std::string::npos);
}

TEST(Compare, IdenticalSystemsTie) {
  const auto a = scores("a", {0.1, 0.5, 0.9});
  const auto rows = compare_systems({a, scores("b", {0.1, 0.5, 0.9})});
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].ties, 3u);
  EXPECT_EQ(rows[0].wins + rows[0].losses, 0u);
}

TEST(Compare, ShiftedSystemAlwaysWins) {
  const std::vector<double> base{0.1, 0.5, 0.9, 0.3};
  std::vector<double> up;
  for (double v : base) up.push_back(v + 0.1);
  const auto rows = compare_systems({scores("up", up), scores("base", base)});
  EXPECT_EQ(rows[0].wins, 4u);
  EXPECT_NEAR(rows[0].mean_a - rows[0].mean_b, 0.1, 1e-12);
}

TEST(Compare, TenItemHandTally) {
  const auto a = scores("a", {0.9, 0.2, 0.5, 0.5, 0.7, 0.1, 0.8, 0.4, 0.6, 0.30});
  const auto b = scores("b", {0.8, 0.3, 0.5, 0.4, 0.7, 0.2, 0.9, 0.1, 0.6, 0.35});
  // a wins at 0, 3, 7; ties at 2, 4, 8; b wins at 1, 5, 6, 9.
  const auto rows = compare_systems({a, b});
  EXPECT_EQ(rows[0].wins, 3u);
  EXPECT_EQ(rows[0].ties, 3u);
  EXPECT_EQ(rows[0].losses, 4u);
  EXPECT_EQ(rows[0].n, 10u);
  // With a tolerance of 0.06 the 0.05 difference at 9 becomes a tie.
  EXPECT_EQ(compare_systems({a, b}, 0.06)[0].ties, 4u);
  std::ostringstream out;
  write_comparison(out, rows, "COMETkiwi");
  EXPECT_NE(out.str().find("30.0"), std::string::npos) << out.str();
}

TEST(Compare, MismatchedItemsListIds) {
  try {
    compare_systems({scores("a", {1, 2, 3}), scores("b", {1, 2, 3}, 1)});
    FAIL();
  } catch (const Error& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("0"), std::string::npos) << msg;
    EXPECT_NE(msg.find("3"), std::string::npos) << msg;
  }
}

TEST(Compare, ReadsScoresFromRuns) {
  Fixture f;
  stub::Backend backend;
  auto c = client(backend);
  run_campaign(f.load(f.config()), *c, f.dir / "run");
  const auto gpt = load_item_scores(f.dir / "run", "gpt", "ChrF");
  const auto ms = load_item_scores(f.dir / "run", "ms", "ChrF");
  EXPECT_EQ(gpt.by_id.size(), 6u);
  EXPECT_EQ(load_item_scores(f.dir / "run", "", "ChrF").label, gpt.label);
  const auto rows = compare_systems({gpt, ms});
  EXPECT_EQ(rows[0].wins + rows[0].ties + rows[0].losses, 6u);
  EXPECT_THROW(load_item_scores(f.dir / "run", "nobody", "ChrF"), Error);
}
