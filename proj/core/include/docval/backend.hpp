#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "docval/prompt.hpp"

namespace docval {

struct TokenProb {
  std::string token;
  double prob = 0.0;

  friend bool operator==(const TokenProb&, const TokenProb&) = default;
};

/// One sampled generation for a document.
struct Candidate {
  std::string doc_id;
  std::size_t sample_index = 0;
  std::string raw_text;
  std::vector<TokenProb> tokens;  // empty when the backend reports no probabilities
  std::string finish_reason;

  friend bool operator==(const Candidate&, const Candidate&) = default;
};

/// JSONL record: {doc_id, sample_index, raw_text, tokens:[{t, p}], finish_reason}.
nlohmann::json candidate_to_json(const Candidate& c);
/// Throws std::invalid_argument on a malformed record.
Candidate candidate_from_json(const nlohmann::json& j);

struct GenerationRequest {
  std::string doc_id;
  PromptSpec prompt;
  double temperature = 0.0;
  std::size_t n_samples = 1;
  std::size_t max_tokens = 2048;
  bool want_token_probs = true;
  std::optional<std::uint64_t> seed;

  /// Throws std::invalid_argument: negative temperature, zero samples, or
  /// several samples under greedy decoding.
  void validate() const;
};

class BackendError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class AuthError : public BackendError {
 public:
  using BackendError::BackendError;
};

class MissingFixtureError : public BackendError {
 public:
  using BackendError::BackendError;
};

/// Generation backend. Implementations must accept concurrent calls and
/// return exactly n_samples candidates (sample_index 0..n-1) or throw.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::vector<Candidate> generate(const GenerationRequest& request) = 0;
};

/// Serves canned candidates keyed by (doc_id, sample_index).
class ReplayBackend final : public Backend {
 public:
  explicit ReplayBackend(std::vector<Candidate> fixtures);
  /// Reads a JSONL fixture file.
  static ReplayBackend from_file(const std::string& path);

  std::vector<Candidate> generate(const GenerationRequest& request) override;
  std::size_t size() const { return fixtures_.size(); }

 private:
  std::map<std::pair<std::string, std::size_t>, Candidate> fixtures_;
};

struct EndpointConfig {
  std::string base_url = "http://localhost:8000";  // scheme://host[:port]
  std::string path = "/v1/chat/completions";
  std::string model;
  std::string api_key;
  int max_retries = 3;
  std::chrono::milliseconds initial_backoff{500};
  std::chrono::seconds timeout{120};
  std::size_t max_in_flight = 4;

  /// JSON config file; the API key comes from DOCVAL_API_KEY (or
  /// OPENAI_API_KEY) unless the file sets "api_key".
  static EndpointConfig from_file(const std::string& path);
  void apply_environment();
};

/// OpenAI-compatible chat-completions client with logprobs.
class HttpBackend final : public Backend {
 public:
  explicit HttpBackend(EndpointConfig config);
  ~HttpBackend() override;
  HttpBackend(const HttpBackend&) = delete;
  HttpBackend& operator=(const HttpBackend&) = delete;

  std::vector<Candidate> generate(const GenerationRequest& request) override;

  /// Request body for `n` choices; exposed for inspection and tests.
  nlohmann::json request_body(const GenerationRequest& request, std::size_t n) const;

 private:
  struct Impl;
  EndpointConfig config_;
  std::unique_ptr<Impl> impl_;
};

/// Parses the "choices" of a chat-completions response into candidates
/// numbered from `first_index`.
std::vector<Candidate> parse_chat_completion(const nlohmann::json& response, const std::string& doc_id,
                                             std::size_t first_index);

std::string base64_encode(std::string_view bytes);

// --- selection ------------------------------------------------------------------

enum class MeanKind { arithmetic, geometric };

/// Mean per-token probability; nullopt when the candidate has no tokens.
std::optional<double> mean_token_prob(const Candidate& c, MeanKind kind = MeanKind::arithmetic);

/// Indices into `candidates`, best first: higher mean probability first,
/// ties (to 1e-12) by lower sample index, candidates without token
/// probabilities last.
std::vector<std::size_t> rank_candidates(std::span<const Candidate> candidates, MeanKind kind = MeanKind::arithmetic);

/// Best of the given (already fully validated) candidates, or nullopt when empty.
std::optional<std::size_t> select_best(std::span<const Candidate> valid, MeanKind kind = MeanKind::arithmetic);

}  // namespace docval
