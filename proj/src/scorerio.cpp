#include "mtkit/scorerio.hpp"

#include <algorithm>
#include <cstdlib>
#include <iomanip>
#include <map>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <openssl/evp.h>

namespace mtkit::scorer {

std::string_view endpoint_name(Endpoint e) {
  switch (e) {
    case Endpoint::kTranslate:
      return "translate";
    case Endpoint::kEmbed:
      return "embed";
    case Endpoint::kQe:
      return "qe";
    case Endpoint::kRefMetric:
      return "ref_metric";
    case Endpoint::kLm:
      return "lm";
    case Endpoint::kAlign:
      return "align";
  }
  return "?";
}

std::optional<Endpoint> parse_endpoint(std::string_view name) {
  for (Endpoint e : kAllEndpoints) {
    if (endpoint_name(e) == name) return e;
  }
  return std::nullopt;
}

std::string endpoint_path(Endpoint e) { return "/v1/" + std::string(endpoint_name(e)); }

namespace {

enum class Kind { kString, kNumber, kInteger, kObject };

struct Field {
  const char* name;
  Kind kind;
  bool required;
};

bool has_kind(const Json& v, Kind k) {
  switch (k) {
    case Kind::kString:
      return v.is_string();
    case Kind::kNumber:
      return v.is_number();
    case Kind::kInteger:
      return v.is_number_integer();
    case Kind::kObject:
      return v.is_object();
  }
  return false;
}

std::optional<std::string> check_fields(const Json& item, const std::vector<Field>& fields, bool strict) {
  if (!item.is_object()) return "item is not an object";
  for (const auto& f : fields) {
    if (!item.contains(f.name)) {
      if (f.required) return std::string("missing field '") + f.name + "'";
      continue;
    }
    if (!has_kind(item[f.name], f.kind)) return std::string("field '") + f.name + "' has the wrong type";
  }
  if (strict) {
    for (const auto& [key, _] : item.items()) {
      if (std::none_of(fields.begin(), fields.end(), [&](const Field& f) { return key == f.name; })) {
        return "unknown field '" + key + "'";
      }
    }
  }
  return std::nullopt;
}

bool is_string_array(const Json& v) {
  return v.is_array() && std::all_of(v.begin(), v.end(), [](const Json& x) { return x.is_string(); });
}

}  // namespace

std::optional<std::string> validate_request_item(Endpoint e, const Json& item) {
  switch (e) {
    case Endpoint::kTranslate: {
      if (auto err = check_fields(item,
                                  {{"text", Kind::kString, true},
                                   {"src_lang", Kind::kString, true},
                                   {"tgt_lang", Kind::kString, true},
                                   {"prompt", Kind::kString, false},
                                   {"params", Kind::kObject, true}},
                                  true)) {
        return err;
      }
      if (auto err = check_fields(item["params"], {{"temperature", Kind::kNumber, true}, {"max_tokens", Kind::kInteger, true}},
                                  true)) {
        return "params: " + *err;
      }
      return std::nullopt;
    }
    case Endpoint::kEmbed:
    case Endpoint::kLm:
      return check_fields(item, {{"text", Kind::kString, true}}, true);
    case Endpoint::kQe:
    case Endpoint::kAlign:
      return check_fields(item, {{"source", Kind::kString, true}, {"hypothesis", Kind::kString, true}}, true);
    case Endpoint::kRefMetric:
      return check_fields(
          item, {{"source", Kind::kString, true}, {"hypothesis", Kind::kString, true}, {"reference", Kind::kString, true}}, true);
  }
  return "unknown endpoint";
}

std::optional<std::string> validate_response_item(Endpoint e, const Json& item) {
  switch (e) {
    case Endpoint::kTranslate:
      return check_fields(item, {{"text", Kind::kString, true}}, false);
    case Endpoint::kEmbed: {
      if (auto err = check_fields(item, {{"dim", Kind::kInteger, true}}, false)) return err;
      const auto& v = item.contains("vector") ? item["vector"] : Json();
      if (!v.is_array() || !std::all_of(v.begin(), v.end(), [](const Json& x) { return x.is_number(); })) {
        return "field 'vector' must be a list of numbers";
      }
      if (static_cast<long long>(v.size()) != item["dim"].get<long long>()) return "vector length differs from dim";
      return std::nullopt;
    }
    case Endpoint::kQe:
    case Endpoint::kRefMetric:
      return check_fields(item, {{"score", Kind::kNumber, true}}, false);
    case Endpoint::kLm: {
      if (auto err = check_fields(item, {{"logprob_sum", Kind::kNumber, true}, {"token_count", Kind::kInteger, true}}, false)) {
        return err;
      }
      if (item["token_count"].get<long long>() < 0) return "token_count must be >= 0";
      return std::nullopt;
    }
    case Endpoint::kAlign: {
      if (!item.is_object()) return "item is not an object";
      if (!item.contains("src_tokens") || !is_string_array(item["src_tokens"])) return "field 'src_tokens' must be a list of strings";
      if (!item.contains("hyp_tokens") || !is_string_array(item["hyp_tokens"])) return "field 'hyp_tokens' must be a list of strings";
      if (!item.contains("links") || !item["links"].is_array()) return "field 'links' must be a list";
      const auto ns = item["src_tokens"].size();
      const auto nt = item["hyp_tokens"].size();
      for (const auto& link : item["links"]) {
        if (!link.is_array() || link.size() != 2 || !link[0].is_number_unsigned() || !link[1].is_number_unsigned()) {
          return "each link must be [s, t] with non-negative integers";
        }
        if (link[0].get<std::size_t>() >= ns || link[1].get<std::size_t>() >= nt) return "link index out of range";
      }
      return std::nullopt;
    }
  }
  return "unknown endpoint";
}

std::string canonicalize(const Json& item) {
  // nlohmann::json objects are std::map backed, so dump() emits sorted keys.
  return item.dump(-1, ' ', false, Json::error_handler_t::strict);
}

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) throw Error("sha256 failed");
  std::ostringstream out;
  for (unsigned int i = 0; i < len; ++i) out << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  return out.str();
}

std::string cache_key(Endpoint e, const Json& item) {
  std::string data(endpoint_name(e));
  data.push_back('\n');
  data += canonicalize(item);
  return sha256_hex(data);
}

ResponseCache::ResponseCache(std::filesystem::path log_path) : path_(std::move(log_path)) {
  if (path_.empty()) return;
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  if (std::filesystem::exists(path_)) {
    std::ifstream in(path_);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      // A torn final record from an interrupted run is skipped.
      auto rec = Json::parse(line, nullptr, false);
      if (rec.is_discarded() || !rec.is_object() || !rec.contains("value") || !rec.value("key", Json()).is_string() ||
          !rec.value("endpoint", Json()).is_string()) {
        continue;
      }
      auto e = parse_endpoint(rec["endpoint"].get<std::string>());
      if (!e) continue;
      entries_.insert_or_assign(rec["key"].get<std::string>(), std::make_pair(*e, rec["value"]));
    }
  }
  log_.open(path_, std::ios::app);
  if (!log_) throw Error("cannot open cache log " + path_.string());
}

std::optional<Json> ResponseCache::get(const std::string& key) const {
  std::shared_lock lock(mu_);
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second.second;
}

void ResponseCache::put(const std::string& key, Endpoint e, const Json& value) {
  std::unique_lock lock(mu_);
  if (entries_.count(key)) return;
  entries_.emplace(key, std::make_pair(e, value));
  if (log_.is_open()) {
    const auto now = std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch());
    Json rec{{"key", key}, {"endpoint", std::string(endpoint_name(e))}, {"value", value}, {"created_at", now.count()}};
    log_ << rec.dump() << '\n';
    log_.flush();
  }
}

std::size_t ResponseCache::size() const {
  std::shared_lock lock(mu_);
  return entries_.size();
}

void ResponseCache::compact() {
  std::unique_lock lock(mu_);
  if (path_.empty()) return;
  log_.close();
  const auto tmp = path_.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    std::map<std::string, const std::pair<Endpoint, Json>*> sorted;
    for (const auto& [k, v] : entries_) sorted.emplace(k, &v);
    for (const auto& [k, v] : sorted) {
      out << Json{{"key", k}, {"endpoint", std::string(endpoint_name(v->first))}, {"value", v->second}}.dump() << '\n';
    }
  }
  std::filesystem::rename(tmp, path_);
  log_.open(path_, std::ios::app);
}

HttpTransport::HttpTransport(std::string base_url, std::chrono::milliseconds timeout, std::string bearer_token)
    : base_url_(std::move(base_url)), timeout_(timeout), bearer_token_(std::move(bearer_token)) {}

TransportResponse HttpTransport::post(Endpoint e, const std::string& body) {
  httplib::Client client(base_url_);
  const auto secs = timeout_.count() / 1000;
  const auto usecs = (timeout_.count() % 1000) * 1000;
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);
  httplib::Headers headers;
  if (!bearer_token_.empty()) headers.emplace("Authorization", "Bearer " + bearer_token_);
  auto res = client.Post(endpoint_path(e), headers, body, "application/json");
  if (!res) throw Error("transport error: " + httplib::to_string(res.error()));
  return {res->status, res->body};
}

void CallPolicy::validate() const {
  if (retries < 0) throw Error("retries must be >= 0");
  if (max_in_flight < 1) throw Error("max_in_flight must be >= 1");
  if (max_batch < 1) throw Error("max_batch must be >= 1");
}

ScorerClient::ScorerClient(std::shared_ptr<Transport> transport, std::shared_ptr<ResponseCache> cache, CallPolicy policy)
    : transport_(std::move(transport)),
      cache_(cache ? std::move(cache) : std::make_shared<ResponseCache>()),
      policy_(policy),
      sleep_([](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }) {
  policy_.validate();
}

std::vector<ItemResult> ScorerClient::call(Endpoint e, const std::vector<Json>& batch) { return call(e, batch, policy_); }

void ScorerClient::send_batch(Endpoint e, const std::vector<std::string>& keys, const std::vector<const Json*>& items,
                              const CallPolicy& policy, std::unordered_map<std::string, ItemResult>& results,
                              std::mutex& results_mu) {
  Json body{{"items", Json::array()}};
  for (const auto* item : items) body["items"].push_back(*item);
  const std::string payload = body.dump();

  std::string failure;
  auto delay = policy.backoff;
  for (int attempt = 0; attempt <= policy.retries; ++attempt) {
    if (attempt > 0) {
      sleep_(delay);
      delay *= 2;
    }
    TransportResponse res;
    try {
      ++backend_calls_;
      res = transport_->post(e, payload);
    } catch (const std::exception& ex) {
      failure = ex.what();
      continue;
    }
    if (res.status >= 500 || res.status == 429) {
      failure = "backend status " + std::to_string(res.status);
      continue;
    }
    if (res.status != 200) {
      failure = "backend status " + std::to_string(res.status) + ": " + res.body;
      break;
    }
    auto parsed = Json::parse(res.body, nullptr, false);
    if (parsed.is_discarded() || !parsed.contains("items") || !parsed["items"].is_array() ||
        parsed["items"].size() != items.size()) {
      failure = "malformed backend response";
      break;
    }
    std::lock_guard lock(results_mu);
    for (std::size_t i = 0; i < items.size(); ++i) {
      const Json& out = parsed["items"][i];
      ItemResult r;
      if (out.is_object() && out.contains("error")) {
        r.error = out["error"].is_string() ? out["error"].get<std::string>() : out["error"].dump();
      } else if (auto err = validate_response_item(e, out)) {
        r.error = "response schema violation: " + *err;
      } else {
        r.value = out;
        cache_->put(keys[i], e, out);
      }
      results[keys[i]] = std::move(r);
    }
    return;
  }
  std::lock_guard lock(results_mu);
  for (const auto& key : keys) {
    results[key] = ItemResult{std::nullopt, failure + " after " + std::to_string(policy.retries + 1) + " attempt(s)", false};
  }
}

std::vector<ItemResult> ScorerClient::call(Endpoint e, const std::vector<Json>& batch, const CallPolicy& policy) {
  policy.validate();
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (auto err = validate_request_item(e, batch[i])) {
      throw SchemaError(std::string(endpoint_name(e)) + " item " + std::to_string(i) + ": " + *err);
    }
  }

  std::vector<std::string> keys;
  keys.reserve(batch.size());
  for (const auto& item : batch) keys.push_back(cache_key(e, item));

  std::vector<ItemResult> out(batch.size());
  std::vector<std::size_t> pending;
  std::vector<std::string> owned_keys;
  std::vector<const Json*> owned_items;
  std::unordered_map<std::string, std::promise<ItemResult>> promises;
  std::unordered_map<std::string, std::shared_future<ItemResult>> waits;

  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (auto hit = cache_->get(keys[i])) {
      out[i] = ItemResult{std::move(hit), {}, true};
      continue;
    }
    if (offline_) {
      out[i] = ItemResult{std::nullopt, "not cached (offline)", false};
      continue;
    }
    pending.push_back(i);
    if (waits.count(keys[i])) continue;
    std::lock_guard lock(inflight_mu_);
    if (auto it = inflight_.find(keys[i]); it != inflight_.end()) {
      waits.emplace(keys[i], it->second);
    } else {
      auto& p = promises[keys[i]];
      auto f = p.get_future().share();
      inflight_.emplace(keys[i], f);
      waits.emplace(keys[i], f);
      owned_keys.push_back(keys[i]);
      owned_items.push_back(&batch[i]);
    }
  }

  if (!owned_keys.empty()) {
    std::unordered_map<std::string, ItemResult> results;
    std::mutex results_mu;
    const std::size_t n_batches = (owned_keys.size() + policy.max_batch - 1) / policy.max_batch;
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t b = next++; b < n_batches; b = next++) {
        const std::size_t lo = b * policy.max_batch;
        const std::size_t hi = std::min(owned_keys.size(), lo + policy.max_batch);
        std::vector<std::string> k(owned_keys.begin() + static_cast<std::ptrdiff_t>(lo),
                                   owned_keys.begin() + static_cast<std::ptrdiff_t>(hi));
        std::vector<const Json*> items(owned_items.begin() + static_cast<std::ptrdiff_t>(lo),
                                       owned_items.begin() + static_cast<std::ptrdiff_t>(hi));
        try {
          send_batch(e, k, items, policy, results, results_mu);
        } catch (const std::exception& ex) {
          std::lock_guard lock(results_mu);
          for (const auto& key : k) results[key] = ItemResult{std::nullopt, ex.what(), false};
        }
      }
    };
    const std::size_t n_workers = std::min(policy.max_in_flight, n_batches);
    std::vector<std::thread> threads;
    for (std::size_t t = 1; t < n_workers; ++t) threads.emplace_back(worker);
    worker();
    for (auto& t : threads) t.join();

    std::lock_guard lock(inflight_mu_);
    for (const auto& key : owned_keys) {
      promises[key].set_value(results[key]);
      inflight_.erase(key);
    }
  }

  for (std::size_t i : pending) out[i] = waits.at(keys[i]).get();
  return out;
}

ScorerConfig ScorerConfig::from_json(const Json& j) {
  ScorerConfig c;
  if (!j.is_object()) throw Error("scorer config must be an object");
  static const char* const kKeys[] = {"base_url", "timeout_ms", "cache_path", "bearer_token", "max_in_flight",
                                      "max_batch", "retries", "backoff_ms", "temperature", "max_tokens"};
  for (const auto& [key, _] : j.items()) {
    if (std::find(std::begin(kKeys), std::end(kKeys), key) == std::end(kKeys)) throw Error("unknown scorer config key: " + key);
  }
  try {
    c.base_url = j.value("base_url", c.base_url);
    c.timeout = std::chrono::milliseconds(j.value("timeout_ms", static_cast<long long>(c.timeout.count())));
    c.cache_path = j.value("cache_path", std::string());
    c.bearer_token = j.value("bearer_token", std::string());
    c.policy.max_in_flight = j.value("max_in_flight", c.policy.max_in_flight);
    c.policy.max_batch = j.value("max_batch", c.policy.max_batch);
    c.policy.retries = j.value("retries", c.policy.retries);
    c.policy.backoff = std::chrono::milliseconds(j.value("backoff_ms", static_cast<long long>(c.policy.backoff.count())));
    c.temperature = j.value("temperature", c.temperature);
    c.max_tokens = j.value("max_tokens", c.max_tokens);
  } catch (const Json::exception& e) {
    throw Error(std::string("scorer config: ") + e.what());
  }
  c.policy.validate();
  return c;
}

void ScorerConfig::apply_env() {
  if (const char* v = std::getenv("MTKIT_SCORER_URL")) base_url = v;
  if (const char* v = std::getenv("MTKIT_SCORER_TIMEOUT_MS")) timeout = std::chrono::milliseconds(std::stoll(v));
  if (const char* v = std::getenv("MTKIT_SCORER_CACHE")) cache_path = v;
  if (const char* v = std::getenv("MTKIT_SCORER_MAX_IN_FLIGHT")) policy.max_in_flight = std::stoul(v);
  if (const char* v = std::getenv("MTKIT_SCORER_TOKEN")) bearer_token = v;
  policy.validate();
}

Json ScorerConfig::to_json() const {
  // The bearer token is deliberately not serialised.
  return Json{{"base_url", base_url},
              {"timeout_ms", timeout.count()},
              {"cache_path", cache_path.string()},
              {"max_in_flight", policy.max_in_flight},
              {"max_batch", policy.max_batch},
              {"retries", policy.retries},
              {"backoff_ms", policy.backoff.count()},
              {"temperature", temperature},
              {"max_tokens", max_tokens}};
}

ScorerClient make_client(const ScorerConfig& config) {
  auto transport = std::make_shared<HttpTransport>(config.base_url, config.timeout, config.bearer_token);
  auto cache = std::make_shared<ResponseCache>(config.cache_path);
  return ScorerClient(std::move(transport), std::move(cache), config.policy);
}

namespace {

std::vector<Json> checked(ScorerClient& client, Endpoint e, const std::vector<Json>& batch) {
  if (batch.empty()) return {};
  auto results = client.call(e, batch);
  std::vector<Json> values;
  values.reserve(results.size());
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (!results[i].ok()) {
      throw OracleItemError(i, std::string(endpoint_name(e)) + " item " + std::to_string(i) + ": " + results[i].error);
    }
    values.push_back(std::move(*results[i].value));
  }
  return values;
}

}  // namespace

Json to_request(const TranslateInput& in) {
  Json j{{"text", in.text},
         {"src_lang", in.src_lang},
         {"tgt_lang", in.tgt_lang},
         {"params", {{"temperature", in.temperature}, {"max_tokens", in.max_tokens}}}};
  if (!in.prompt.empty()) j["prompt"] = in.prompt;
  return j;
}

EmbedOracle embed_oracle(ScorerClient& client) {
  return [&client](const std::vector<std::string>& texts) {
    std::vector<Json> batch;
    for (const auto& t : texts) batch.push_back({{"text", t}});
    std::vector<Embedding> out;
    for (const auto& v : checked(client, Endpoint::kEmbed, batch)) out.push_back(v["vector"].get<Embedding>());
    return out;
  };
}

QeOracle qe_oracle(ScorerClient& client) {
  return [&client](const std::vector<QeInput>& items) {
    std::vector<Json> batch;
    for (const auto& it : items) batch.push_back({{"source", it.source}, {"hypothesis", it.hypothesis}});
    std::vector<double> out;
    for (const auto& v : checked(client, Endpoint::kQe, batch)) out.push_back(v["score"].get<double>());
    return out;
  };
}

RefMetricOracle ref_metric_oracle(ScorerClient& client) {
  return [&client](const std::vector<RefMetricInput>& items) {
    std::vector<Json> batch;
    for (const auto& it : items) {
      batch.push_back({{"source", it.source}, {"hypothesis", it.hypothesis}, {"reference", it.reference}});
    }
    std::vector<double> out;
    for (const auto& v : checked(client, Endpoint::kRefMetric, batch)) out.push_back(v["score"].get<double>());
    return out;
  };
}

LmOracle lm_oracle(ScorerClient& client) {
  return [&client](const std::vector<std::string>& texts) {
    std::vector<Json> batch;
    for (const auto& t : texts) batch.push_back({{"text", t}});
    std::vector<LmScore> out;
    for (const auto& v : checked(client, Endpoint::kLm, batch)) {
      out.push_back({v["logprob_sum"].get<double>(), v["token_count"].get<long>()});
    }
    return out;
  };
}

TranslateOracle translate_oracle(ScorerClient& client) {
  return [&client](const std::vector<TranslateInput>& items) {
    std::vector<Json> batch;
    for (const auto& it : items) batch.push_back(to_request(it));
    std::vector<std::string> out;
    for (const auto& v : checked(client, Endpoint::kTranslate, batch)) out.push_back(v["text"].get<std::string>());
    return out;
  };
}

std::vector<AlignResult> align(ScorerClient& client, const std::vector<QeInput>& pairs) {
  std::vector<Json> batch;
  for (const auto& p : pairs) batch.push_back({{"source", p.source}, {"hypothesis", p.hypothesis}});
  std::vector<AlignResult> out;
  for (const auto& v : checked(client, Endpoint::kAlign, batch)) {
    AlignResult r;
    r.src_tokens = v["src_tokens"].get<std::vector<std::string>>();
    r.hyp_tokens = v["hyp_tokens"].get<std::vector<std::string>>();
    std::vector<std::pair<std::size_t, std::size_t>> links;
    for (const auto& l : v["links"]) links.emplace_back(l[0].get<std::size_t>(), l[1].get<std::size_t>());
    r.alignment = traits::AlignmentSet::make(std::move(links), r.src_tokens.size(), r.hyp_tokens.size());
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace mtkit::scorer
