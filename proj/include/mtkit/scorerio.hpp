#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "mtkit/characteristics.hpp"
#include "mtkit/error.hpp"
#include "mtkit/oracles.hpp"

namespace mtkit::scorer {

using Json = nlohmann::json;

enum class Endpoint { kTranslate, kEmbed, kQe, kRefMetric, kLm, kAlign };
inline constexpr Endpoint kAllEndpoints[] = {Endpoint::kTranslate, Endpoint::kEmbed, Endpoint::kQe,
                                             Endpoint::kRefMetric, Endpoint::kLm,    Endpoint::kAlign};

std::string_view endpoint_name(Endpoint e);
std::optional<Endpoint> parse_endpoint(std::string_view name);

/// Request path for an endpoint: "/v1/<name>". Both sides exchange
/// {"items": [...]} bodies; a response item may be {"error": "..."}.
std::string endpoint_path(Endpoint e);
inline constexpr std::string_view kHealthPath = "/v1/health";

/// Empty optional when the item matches the endpoint's request schema.
std::optional<std::string> validate_request_item(Endpoint e, const Json& item);
std::optional<std::string> validate_response_item(Endpoint e, const Json& item);

class SchemaError : public Error {
 public:
  using Error::Error;
};

/// Compact JSON with sorted keys; string contents are kept byte for byte.
std::string canonicalize(const Json& item);
std::string sha256_hex(std::string_view data);
/// Content hash of the endpoint name and the canonical item.
std::string cache_key(Endpoint e, const Json& item);

/// Append-only response log with an in-memory index. Concurrent readers,
/// serialised writers. An empty path keeps everything in memory.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path log_path = {});

  std::optional<Json> get(const std::string& key) const;
  void put(const std::string& key, Endpoint e, const Json& value);
  std::size_t size() const;
  const std::filesystem::path& path() const { return path_; }

  /// Rewrites the log with one record per key, in key order.
  void compact();

 private:
  mutable std::shared_mutex mu_;
  std::unordered_map<std::string, std::pair<Endpoint, Json>> entries_;
  std::filesystem::path path_;
  std::ofstream log_;
};

struct TransportResponse {
  int status = 0;
  std::string body;
};

class Transport {
 public:
  virtual ~Transport() = default;
  /// May throw on connection failure; callers treat that as transient.
  virtual TransportResponse post(Endpoint e, const std::string& body) = 0;
};

/// In-process transport, for stubs and fault injection.
class FunctionTransport : public Transport {
 public:
  using Handler = std::function<TransportResponse(Endpoint, const std::string&)>;
  explicit FunctionTransport(Handler handler) : handler_(std::move(handler)) {}
  TransportResponse post(Endpoint e, const std::string& body) override { return handler_(e, body); }

 private:
  Handler handler_;
};

class HttpTransport : public Transport {
 public:
  HttpTransport(std::string base_url, std::chrono::milliseconds timeout, std::string bearer_token = {});
  TransportResponse post(Endpoint e, const std::string& body) override;

 private:
  std::string base_url_;
  std::chrono::milliseconds timeout_;
  std::string bearer_token_;
};

struct CallPolicy {
  std::size_t max_in_flight = 4;
  std::size_t max_batch = 64;
  int retries = 2;  // additional attempts after the first
  std::chrono::milliseconds backoff{200};  // doubled after every failed attempt

  void validate() const;
};

struct ItemResult {
  std::optional<Json> value;
  std::string error;
  bool from_cache = false;

  bool ok() const { return value.has_value(); }
};

class ScorerClient {
 public:
  ScorerClient(std::shared_ptr<Transport> transport, std::shared_ptr<ResponseCache> cache, CallPolicy policy = {});

  /// One result per batch item, in order. Throws SchemaError before any
  /// transmission when an item does not match the endpoint schema.
  std::vector<ItemResult> call(Endpoint e, const std::vector<Json>& batch);
  std::vector<ItemResult> call(Endpoint e, const std::vector<Json>& batch, const CallPolicy& policy);

  /// Cache-only mode: misses become item errors and nothing is transmitted.
  void set_offline(bool offline) { offline_ = offline; }
  bool offline() const { return offline_; }

  std::size_t backend_calls() const { return backend_calls_.load(); }
  void set_sleep(std::function<void(std::chrono::milliseconds)> sleep) { sleep_ = std::move(sleep); }
  const CallPolicy& policy() const { return policy_; }

 private:
  void send_batch(Endpoint e, const std::vector<std::string>& keys, const std::vector<const Json*>& items,
                  const CallPolicy& policy, std::unordered_map<std::string, ItemResult>& results, std::mutex& results_mu);

  std::shared_ptr<Transport> transport_;
  std::shared_ptr<ResponseCache> cache_;
  CallPolicy policy_;
  std::atomic<bool> offline_{false};
  std::atomic<std::size_t> backend_calls_{0};
  std::function<void(std::chrono::milliseconds)> sleep_;

  std::mutex inflight_mu_;
  std::unordered_map<std::string, std::shared_future<ItemResult>> inflight_;
};

struct ScorerConfig {
  std::string base_url = "http://127.0.0.1:8765";
  std::chrono::milliseconds timeout{60000};
  std::filesystem::path cache_path;
  std::string bearer_token;
  CallPolicy policy;
  double temperature = 0.0;
  int max_tokens = 1024;

  static ScorerConfig from_json(const Json& j);
  /// MTKIT_SCORER_URL, MTKIT_SCORER_TIMEOUT_MS, MTKIT_SCORER_CACHE,
  /// MTKIT_SCORER_MAX_IN_FLIGHT, MTKIT_SCORER_TOKEN.
  void apply_env();
  Json to_json() const;
};

ScorerClient make_client(const ScorerConfig& config);

// Oracle adapters. The first failed item raises OracleItemError.
EmbedOracle embed_oracle(ScorerClient& client);
QeOracle qe_oracle(ScorerClient& client);
RefMetricOracle ref_metric_oracle(ScorerClient& client);
LmOracle lm_oracle(ScorerClient& client);
TranslateOracle translate_oracle(ScorerClient& client);

struct AlignResult {
  traits::AlignmentSet alignment;
  std::vector<std::string> src_tokens;
  std::vector<std::string> hyp_tokens;
};
std::vector<AlignResult> align(ScorerClient& client, const std::vector<QeInput>& pairs);

Json to_request(const TranslateInput& in);

}  // namespace mtkit::scorer
