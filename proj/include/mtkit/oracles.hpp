#pragma once

// Callable seams for every external model. Library code takes these; the
// scorer client provides network-backed implementations and tests pass stubs.
// Batch oracles return one result per input in the same position and report
// a failing item by throwing OracleItemError.

#include <functional>
#include <string>
#include <vector>

namespace mtkit {

using Embedding = std::vector<double>;

struct QeInput {
  std::string source;
  std::string hypothesis;
};

struct RefMetricInput {
  std::string source;
  std::string hypothesis;
  std::string reference;
};

struct LmScore {
  double logprob_sum = 0.0;
  long token_count = 0;
};

struct TranslateInput {
  std::string text;
  std::string src_lang;
  std::string tgt_lang;
  std::string prompt;
  double temperature = 0.0;
  int max_tokens = 1024;
};

using LangIdOracle = std::function<std::string(const std::string& text)>;
using EmbedOracle = std::function<std::vector<Embedding>(const std::vector<std::string>& texts)>;
using QeOracle = std::function<std::vector<double>(const std::vector<QeInput>& items)>;
using RefMetricOracle = std::function<std::vector<double>(const std::vector<RefMetricInput>& items)>;
using LmOracle = std::function<std::vector<LmScore>(const std::vector<std::string>& texts)>;
using TranslateOracle = std::function<std::vector<std::string>(const std::vector<TranslateInput>& items)>;

}  // namespace mtkit
