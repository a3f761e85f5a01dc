#include <cmath>
#include <condition_variable>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <spdlog/spdlog.h>

#include "docval/backend.hpp"
#include "httplib.h"

namespace docval {

EndpointConfig EndpointConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open endpoint config '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument("endpoint config '" + path + "': " + e.what());
  }
  EndpointConfig c;
  if (j.contains("base_url")) c.base_url = j["base_url"].get<std::string>();
  if (j.contains("path")) c.path = j["path"].get<std::string>();
  if (j.contains("model")) c.model = j["model"].get<std::string>();
  if (j.contains("api_key")) c.api_key = j["api_key"].get<std::string>();
  if (j.contains("max_retries")) c.max_retries = j["max_retries"].get<int>();
  if (j.contains("initial_backoff_ms")) c.initial_backoff = std::chrono::milliseconds(j["initial_backoff_ms"].get<int>());
  if (j.contains("timeout_s")) c.timeout = std::chrono::seconds(j["timeout_s"].get<int>());
  if (j.contains("max_in_flight")) c.max_in_flight = j["max_in_flight"].get<std::size_t>();
  c.apply_environment();
  return c;
}

void EndpointConfig::apply_environment() {
  if (!api_key.empty()) return;
  for (const char* var : {"DOCVAL_API_KEY", "OPENAI_API_KEY"}) {
    if (const char* v = std::getenv(var); v != nullptr && *v != '\0') {
      api_key = v;
      return;
    }
  }
}

struct HttpBackend::Impl {
  std::mutex mu;
  std::condition_variable cv;
  std::size_t in_flight = 0;
  std::size_t limit = 1;

  // Counting semaphore over outstanding HTTP requests.
  class Slot {
   public:
    explicit Slot(Impl& impl) : impl_(impl) {
      std::unique_lock lock(impl_.mu);
      impl_.cv.wait(lock, [&] { return impl_.in_flight < impl_.limit; });
      ++impl_.in_flight;
    }
    ~Slot() {
      {
        std::lock_guard lock(impl_.mu);
        --impl_.in_flight;
      }
      impl_.cv.notify_one();
    }
    Slot(const Slot&) = delete;
    Slot& operator=(const Slot&) = delete;

   private:
    Impl& impl_;
  };
};

HttpBackend::HttpBackend(EndpointConfig config) : config_(std::move(config)), impl_(std::make_unique<Impl>()) {
  impl_->limit = std::max<std::size_t>(1, config_.max_in_flight);
}

HttpBackend::~HttpBackend() = default;

namespace {

std::string image_mime(const std::string& path) {
  auto dot = path.rfind('.');
  std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
  for (auto& ch : ext) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  if (ext == "jpg" || ext == "jpeg") return "image/jpeg";
  if (ext == "webp") return "image/webp";
  if (ext == "gif") return "image/gif";
  return "image/png";
}

std::string read_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot read image '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

bool transient_status(int status) { return status == 408 || status == 409 || status == 429 || status >= 500; }

}  // namespace

nlohmann::json HttpBackend::request_body(const GenerationRequest& request, std::size_t n) const {
  nlohmann::json content;
  std::string text = request.prompt.render();
  if (request.prompt.include_image && request.prompt.image_path) {
    const std::string& path = *request.prompt.image_path;
    std::string url = "data:" + image_mime(path) + ";base64," + base64_encode(read_binary(path));
    content = nlohmann::json::array({{{"type", "text"}, {"text", text}},
                                     {{"type", "image_url"}, {"image_url", {{"url", url}}}}});
  } else {
    content = text;
  }
  nlohmann::json body{{"model", config_.model},
                      {"messages", nlohmann::json::array({{{"role", "user"}, {"content", content}}})},
                      {"n", n},
                      {"temperature", request.temperature},
                      {"max_tokens", request.max_tokens}};
  if (request.want_token_probs) body["logprobs"] = true;
  if (request.seed) body["seed"] = *request.seed;
  return body;
}

std::vector<Candidate> parse_chat_completion(const nlohmann::json& response, const std::string& doc_id,
                                             std::size_t first_index) {
  std::vector<Candidate> out;
  if (!response.contains("choices") || !response["choices"].is_array()) {
    throw BackendError("chat completion response has no choices");
  }
  for (const auto& choice : response["choices"]) {
    Candidate c;
    c.doc_id = doc_id;
    c.sample_index = first_index + out.size();
    const auto& msg = choice.value("message", nlohmann::json::object());
    if (msg.contains("content") && msg["content"].is_string()) c.raw_text = msg["content"].get<std::string>();
    if (choice.contains("finish_reason") && choice["finish_reason"].is_string()) {
      c.finish_reason = choice["finish_reason"].get<std::string>();
    }
    if (choice.contains("logprobs") && choice["logprobs"].is_object() && choice["logprobs"].contains("content") &&
        choice["logprobs"]["content"].is_array()) {
      for (const auto& tok : choice["logprobs"]["content"]) {
        double lp = tok.value("logprob", 0.0);
        c.tokens.push_back({tok.value("token", std::string()), std::clamp(std::exp(lp), 0.0, 1.0)});
      }
    }
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<Candidate> HttpBackend::generate(const GenerationRequest& request) {
  request.validate();
  std::vector<Candidate> out;
  // Some servers ignore n > 1; keep asking until every sample has arrived.
  int stalls = 0;
  while (out.size() < request.n_samples) {
    std::size_t want = request.n_samples - out.size();
    std::string body = request_body(request, want).dump();
    nlohmann::json response;
    std::chrono::milliseconds backoff = config_.initial_backoff;
    for (int attempt = 0;; ++attempt) {
      std::string failure;
      {
        Impl::Slot slot(*impl_);
        httplib::Client client(config_.base_url);
        client.set_connection_timeout(config_.timeout);
        client.set_read_timeout(config_.timeout);
        client.set_write_timeout(config_.timeout);
        if (!config_.api_key.empty()) client.set_bearer_token_auth(config_.api_key);
        auto res = client.Post(config_.path, body, "application/json");
        if (!res) {
          failure = "cannot reach " + config_.base_url + config_.path + ": " + httplib::to_string(res.error());
        } else if (res->status == 401 || res->status == 403) {
          throw AuthError("authentication rejected by " + config_.base_url + " (HTTP " + std::to_string(res->status) + ")");
        } else if (transient_status(res->status)) {
          failure = "HTTP " + std::to_string(res->status) + " from " + config_.base_url + config_.path;
        } else if (res->status < 200 || res->status >= 300) {
          throw BackendError("HTTP " + std::to_string(res->status) + " from " + config_.base_url + config_.path + ": " +
                             res->body.substr(0, 300));
        } else {
          response = nlohmann::json::parse(res->body, nullptr, false);
          if (response.is_discarded()) throw BackendError("malformed JSON from " + config_.base_url + config_.path);
          break;
        }
      }
      if (attempt >= config_.max_retries) throw BackendError(failure + " (after " + std::to_string(attempt + 1) + " attempts)");
      spdlog::warn("{}; retrying in {} ms", failure, backoff.count());
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }

    auto got = parse_chat_completion(response, request.doc_id, out.size());
    if (got.empty()) {
      if (++stalls > config_.max_retries) {
        throw BackendError("endpoint returned no choices for document '" + request.doc_id + "'");
      }
      continue;
    }
    if (got.size() > want) got.resize(want);
    for (auto& c : got) {
      if (request.want_token_probs && c.tokens.empty()) {
        spdlog::warn("backend returned no token probabilities for {} sample {}", c.doc_id, c.sample_index);
      }
      out.push_back(std::move(c));
    }
  }
  return out;
}

}  // namespace docval
