#include "docval/backend.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace docval {

nlohmann::json candidate_to_json(const Candidate& c) {
  nlohmann::json tokens = nlohmann::json::array();
  for (const auto& t : c.tokens) tokens.push_back({{"t", t.token}, {"p", t.prob}});
  return {{"doc_id", c.doc_id},
          {"sample_index", c.sample_index},
          {"raw_text", c.raw_text},
          {"tokens", std::move(tokens)},
          {"finish_reason", c.finish_reason}};
}

Candidate candidate_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("candidate record is not an object");
  Candidate c;
  try {
    c.doc_id = j.at("doc_id").get<std::string>();
    c.sample_index = j.at("sample_index").get<std::size_t>();
    c.raw_text = j.at("raw_text").get<std::string>();
    if (j.contains("tokens")) {
      for (const auto& t : j.at("tokens")) {
        TokenProb tp{t.at("t").get<std::string>(), t.at("p").get<double>()};
        if (!(tp.prob >= 0.0 && tp.prob <= 1.0)) throw std::invalid_argument("token probability outside [0, 1]");
        c.tokens.push_back(std::move(tp));
      }
    }
    if (j.contains("finish_reason") && j["finish_reason"].is_string()) c.finish_reason = j["finish_reason"];
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed candidate record: ") + e.what());
  }
  return c;
}

void GenerationRequest::validate() const {
  if (!(temperature >= 0.0)) throw std::invalid_argument("temperature must be non-negative");
  if (n_samples == 0) throw std::invalid_argument("n_samples must be positive");
  if (temperature == 0.0 && n_samples != 1) {
    throw std::invalid_argument("greedy decoding (temperature 0) yields a single sample");
  }
}

ReplayBackend::ReplayBackend(std::vector<Candidate> fixtures) {
  for (auto& c : fixtures) {
    auto key = std::make_pair(c.doc_id, c.sample_index);
    fixtures_.insert_or_assign(std::move(key), std::move(c));
  }
}

ReplayBackend ReplayBackend::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open replay fixtures '" + path + "'");
  std::vector<Candidate> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(candidate_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw std::invalid_argument(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return ReplayBackend(std::move(out));
}

std::vector<Candidate> ReplayBackend::generate(const GenerationRequest& request) {
  std::vector<Candidate> out;
  out.reserve(request.n_samples);
  for (std::size_t i = 0; i < request.n_samples; ++i) {
    auto it = fixtures_.find({request.doc_id, i});
    if (it == fixtures_.end()) {
      throw MissingFixtureError("no replay fixture for document '" + request.doc_id + "' sample " + std::to_string(i));
    }
    out.push_back(it->second);
  }
  return out;
}

std::string base64_encode(std::string_view bytes) {
  static constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    auto n = (static_cast<unsigned char>(bytes[i]) << 16) | (static_cast<unsigned char>(bytes[i + 1]) << 8) |
             static_cast<unsigned char>(bytes[i + 2]);
    out += kAlphabet[(n >> 18) & 63];
    out += kAlphabet[(n >> 12) & 63];
    out += kAlphabet[(n >> 6) & 63];
    out += kAlphabet[n & 63];
  }
  if (std::size_t rest = bytes.size() - i; rest > 0) {
    unsigned n = static_cast<unsigned char>(bytes[i]) << 16;
    if (rest == 2) n |= static_cast<unsigned char>(bytes[i + 1]) << 8;
    out += kAlphabet[(n >> 18) & 63];
    out += kAlphabet[(n >> 12) & 63];
    out += rest == 2 ? kAlphabet[(n >> 6) & 63] : '=';
    out += '=';
  }
  return out;
}

// --- selection ------------------------------------------------------------------

std::optional<double> mean_token_prob(const Candidate& c, MeanKind kind) {
  if (c.tokens.empty()) return std::nullopt;
  double sum = 0.0;
  for (const auto& t : c.tokens) {
    sum += kind == MeanKind::arithmetic ? t.prob : std::log(std::max(t.prob, 1e-300));
  }
  double mean = sum / static_cast<double>(c.tokens.size());
  return kind == MeanKind::arithmetic ? mean : std::exp(mean);
}

std::vector<std::size_t> rank_candidates(std::span<const Candidate> candidates, MeanKind kind) {
  struct Key {
    bool has_tokens;
    long long quantized;  // mean rounded to 1e-12 so near-equal means tie
    std::size_t sample_index;
  };
  std::vector<Key> keys;
  keys.reserve(candidates.size());
  for (const auto& c : candidates) {
    auto m = mean_token_prob(c, kind);
    keys.push_back({m.has_value(), m ? std::llround(*m * 1e12) : 0LL, c.sample_index});
  }
  std::vector<std::size_t> order(candidates.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const Key& x = keys[a];
    const Key& y = keys[b];
    if (x.has_tokens != y.has_tokens) return x.has_tokens;
    if (x.quantized != y.quantized) return x.quantized > y.quantized;
    return x.sample_index < y.sample_index;
  });
  return order;
}

std::optional<std::size_t> select_best(std::span<const Candidate> valid, MeanKind kind) {
  if (valid.empty()) return std::nullopt;
  return rank_candidates(valid, kind).front();
}

}  // namespace docval
