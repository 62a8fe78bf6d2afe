#pragma once

// Document embeddings from an external provider, with a JSONL cache keyed by
// (embedder name, document id).

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <mutex>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "cartograph/http.hpp"
#include "json.hpp"

#include "cartograph/common.hpp"
#include "cartograph/corpus.hpp"

namespace cartograph {

using Vector = std::vector<double>;

struct EmbeddedCorpus {
  Corpus corpus;
  std::vector<Vector> vectors;
  std::string embedder_name;
  bool normalized = false;

  std::size_t size() const { return vectors.size(); }
  std::size_t dimension() const { return vectors.empty() ? 0 : vectors.front().size(); }
};

// Throws unless every document has one finite vector of a common dimension >= 2.
inline void validate(const EmbeddedCorpus& ec) {
  if (ec.vectors.size() != ec.corpus.size())
    throw Error("embedded corpus has " + std::to_string(ec.vectors.size()) + " vectors for " +
                std::to_string(ec.corpus.size()) + " documents");
  if (ec.vectors.empty()) return;
  const std::size_t dim = ec.vectors.front().size();
  if (dim < 2) throw Error("embedding dimension must be at least 2");
  for (std::size_t i = 0; i < ec.vectors.size(); ++i) {
    if (ec.vectors[i].size() != dim)
      throw Error("embedding dimension mismatch at document '" + ec.corpus.documents[i].id + "'");
    for (double v : ec.vectors[i])
      if (!std::isfinite(v))
        throw Error("non-finite embedding component at document '" + ec.corpus.documents[i].id + "'");
  }
}

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::string name() const = 0;
  // Largest accepted request size.
  virtual std::size_t max_batch() const { return 256; }
  // One vector per text, same order. Must be callable concurrently.
  virtual std::vector<Vector> fetch_embeddings(std::span<const std::string> texts) = 0;
};

// Deterministic offline embedder: a document is the sum of per-token Gaussian
// vectors seeded by (embedder seed, token). Texts sharing vocabulary land close
// together, which is enough to exercise the whole pipeline without a model.
class HashingEmbeddingProvider final : public EmbeddingProvider {
 public:
  HashingEmbeddingProvider(std::string name, std::size_t dimension, std::uint64_t seed)
      : name_(std::move(name)), dimension_(dimension), seed_(seed) {
    if (dimension_ < 2) throw Error("hashing embedder needs dimension >= 2");
  }

  std::string name() const override { return name_; }
  std::size_t dimension() const { return dimension_; }

  std::vector<Vector> fetch_embeddings(std::span<const std::string> texts) override {
    std::vector<Vector> out;
    out.reserve(texts.size());
    for (const auto& text : texts) out.push_back(embed(text));
    return out;
  }

  Vector embed(std::string_view text) const {
    Vector v(dimension_, 0.0);
    auto tokens = alphabetic_tokens(text);
    if (tokens.empty()) tokens.emplace_back(text);
    for (const auto& token : tokens) {
      std::mt19937_64 rng(stable_hash(token, seed_));
      std::normal_distribution<double> normal(0.0, 1.0);
      for (auto& x : v) x += normal(rng);
    }
    return v;
  }

 private:
  std::string name_;
  std::size_t dimension_;
  std::uint64_t seed_;
};

struct RetryPolicy {
  int max_retries = 3;
  std::chrono::milliseconds base_delay{500};
  std::function<void(std::chrono::milliseconds)> sleep = [](std::chrono::milliseconds d) {
    std::this_thread::sleep_for(d);
  };
};

// Client for POST {endpoint} {"texts":[...]} -> {"embeddings":[[...]...]}.
class HttpEmbeddingProvider final : public EmbeddingProvider {
 public:
  HttpEmbeddingProvider(std::string name, const std::string& endpoint, RetryPolicy retry = {},
                        std::size_t max_batch = 256)
      : name_(std::move(name)), retry_(std::move(retry)), max_batch_(max_batch) {
    const auto scheme_end = endpoint.find("://");
    if (scheme_end == std::string::npos) throw Error("embedder url needs a scheme: " + endpoint);
    const auto path_start = endpoint.find('/', scheme_end + 3);
    origin_ = endpoint.substr(0, path_start);
    path_ = path_start == std::string::npos ? "/" : endpoint.substr(path_start);
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
    if (endpoint.rfind("https://", 0) == 0)
      throw Error("https embedder urls require a TLS-enabled build");
#endif
    if (const char* key = std::getenv("EMBEDDER_API_KEY"); key && *key) api_key_ = key;
  }

  std::string name() const override { return name_; }
  std::size_t max_batch() const override { return max_batch_; }

  std::vector<Vector> fetch_embeddings(std::span<const std::string> texts) override {
    if (texts.empty() || texts.size() > max_batch_)
      throw Error("embedding request size " + std::to_string(texts.size()) + " outside [1, " +
                  std::to_string(max_batch_) + "]");
    nlohmann::json body;
    body["texts"] = std::vector<std::string>(texts.begin(), texts.end());
    const std::string payload = body.dump();

    std::string last_failure;
    for (int attempt = 0; attempt <= retry_.max_retries; ++attempt) {
      if (attempt > 0) retry_.sleep(retry_.base_delay * (1 << (attempt - 1)));
      httplib::Client client(origin_);
      client.set_connection_timeout(10);
      client.set_read_timeout(120);
      httplib::Headers headers;
      if (api_key_) headers.emplace("Authorization", "Bearer " + *api_key_);
      auto res = client.Post(path_, headers, payload, "application/json");
      if (!res) {
        last_failure = "connection error: " + httplib::to_string(res.error());
        continue;
      }
      if (is_transient(res->status)) {
        last_failure = "HTTP " + std::to_string(res->status);
        continue;
      }
      if (res->status != 200)
        throw Error("embedder returned non-retryable HTTP " + std::to_string(res->status));
      return parse_response(res->body, texts.size());
    }
    throw Error("embedder failed after " + std::to_string(retry_.max_retries + 1) +
                " attempts: " + last_failure);
  }

  static bool is_transient(int status) {
    return status == 408 || status == 429 || status == 500 || status == 502 || status == 503 ||
           status == 504;
  }

  static std::vector<Vector> parse_response(const std::string& body, std::size_t expected) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::parse_error&) {
      throw Error("embedder response is not JSON");
    }
    if (!j.is_object() || !j.contains("embeddings") || !j["embeddings"].is_array())
      throw Error("embedder response lacks an 'embeddings' array");
    if (j["embeddings"].size() != expected)
      throw Error("count mismatch: requested " + std::to_string(expected) + " embeddings, got " +
                  std::to_string(j["embeddings"].size()));
    std::vector<Vector> out;
    out.reserve(expected);
    for (const auto& row : j["embeddings"]) {
      if (!row.is_array()) throw Error("embedding is not an array");
      out.push_back(row.get<Vector>());
    }
    return out;
  }

 private:
  std::string name_;
  std::string origin_;
  std::string path_;
  std::optional<std::string> api_key_;
  RetryPolicy retry_;
  std::size_t max_batch_;
};

// Append-only JSONL cache: {"id":..., "embedder":..., "vector":[...]} per line.
class EmbeddingCache {
 public:
  explicit EmbeddingCache(std::filesystem::path path) : path_(std::move(path)) {}

  const std::filesystem::path& path() const { return path_; }

  // Records for `embedder`; later lines override earlier ones for the same id.
  std::unordered_map<std::string, Vector> load(const std::string& embedder) const {
    std::unordered_map<std::string, Vector> out;
    std::ifstream in(path_);
    if (!in) return out;
    std::string line;
    std::size_t line_no = 0;
    std::size_t dim = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (trim(line).empty()) continue;
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::parse_error&) {
        throw Error("cache " + path_.string() + " line " + std::to_string(line_no) + ": malformed record");
      }
      if (!j.is_object() || !j.contains("id") || !j.contains("embedder") || !j.contains("vector"))
        throw Error("cache " + path_.string() + " line " + std::to_string(line_no) + ": incomplete record");
      if (j["embedder"].get<std::string>() != embedder) continue;
      auto v = j["vector"].get<Vector>();
      if (dim == 0) dim = v.size();
      if (v.size() != dim)
        throw Error("cache " + path_.string() + " line " + std::to_string(line_no) + ": dimension mismatch");
      out[j["id"].get<std::string>()] = std::move(v);
    }
    return out;
  }

  // Embedder names in first-appearance order.
  std::vector<std::string> embedders() const {
    std::vector<std::string> names;
    std::ifstream in(path_);
    std::string line;
    while (std::getline(in, line)) {
      if (trim(line).empty()) continue;
      const auto name = nlohmann::json::parse(line).at("embedder").get<std::string>();
      if (std::find(names.begin(), names.end(), name) == names.end()) names.push_back(name);
    }
    return names;
  }

  void append(const std::string& embedder, std::span<const std::string> ids, std::span<const Vector> vectors) {
    std::lock_guard lock(mutex_);
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    std::ofstream out(path_, std::ios::app);
    if (!out) throw Error("cannot write cache " + path_.string());
    for (std::size_t i = 0; i < ids.size(); ++i) {
      nlohmann::ordered_json j;
      j["id"] = ids[i];
      j["embedder"] = embedder;
      j["vector"] = vectors[i];
      out << j.dump() << '\n';
    }
  }

 private:
  std::filesystem::path path_;
  std::mutex mutex_;
};

struct EmbedOptions {
  std::size_t batch_size = 64;
  std::size_t max_concurrent_batches = 4;
};

// Cache first, then batched provider calls for the misses. Completed batches
// are appended to the cache even when a later batch fails.
inline EmbeddedCorpus embed_corpus(const Corpus& corpus, EmbeddingProvider& provider,
                                   const EmbedOptions& options = {},
                                   const std::optional<std::filesystem::path>& cache_path = std::nullopt) {
  if (options.batch_size == 0) throw Error("batch size must be positive");
  const std::size_t batch_size = std::min(options.batch_size, provider.max_batch());
  const std::string embedder = provider.name();

  EmbeddedCorpus out{corpus, std::vector<Vector>(corpus.size()), embedder, false};
  std::optional<EmbeddingCache> cache;
  std::unordered_map<std::string, Vector> cached;
  if (cache_path) {
    cache.emplace(*cache_path);
    cached = cache->load(embedder);
  }

  std::size_t dim = cached.empty() ? 0 : cached.begin()->second.size();
  std::vector<std::size_t> misses;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto it = cached.find(corpus.documents[i].id);
    if (it != cached.end())
      out.vectors[i] = it->second;
    else
      misses.push_back(i);
  }

  std::vector<std::pair<std::size_t, std::size_t>> batches;  // [begin, end) into misses
  for (std::size_t b = 0; b < misses.size(); b += batch_size)
    batches.emplace_back(b, std::min(misses.size(), b + batch_size));

  const std::size_t wave = std::max<std::size_t>(1, options.max_concurrent_batches);
  for (std::size_t first = 0; first < batches.size(); first += wave) {
    const std::size_t last = std::min(batches.size(), first + wave);
    std::vector<std::future<std::vector<Vector>>> inflight;
    for (std::size_t b = first; b < last; ++b) {
      auto [begin, end] = batches[b];
      std::vector<std::string> texts;
      for (std::size_t m = begin; m < end; ++m) texts.push_back(corpus.documents[misses[m]].text);
      inflight.push_back(std::async(std::launch::async, [&provider, texts = std::move(texts)] {
        auto vectors = provider.fetch_embeddings(texts);
        if (vectors.size() != texts.size())
          throw Error("count mismatch: requested " + std::to_string(texts.size()) + " embeddings, got " +
                      std::to_string(vectors.size()));
        return vectors;
      }));
    }
    std::exception_ptr failure;
    for (std::size_t b = first; b < last; ++b) {
      std::vector<Vector> vectors;
      try {
        vectors = inflight[b - first].get();
        for (const auto& v : vectors) {
          if (dim == 0) dim = v.size();
          if (v.size() != dim)
            throw Error("dimension mismatch: expected " + std::to_string(dim) + ", provider returned " +
                        std::to_string(v.size()));
        }
      } catch (...) {
        if (!failure) failure = std::current_exception();
        continue;
      }
      auto [begin, end] = batches[b];
      std::vector<std::string> ids;
      for (std::size_t m = begin; m < end; ++m) {
        ids.push_back(corpus.documents[misses[m]].id);
        out.vectors[misses[m]] = vectors[m - begin];
      }
      if (cache) cache->append(embedder, ids, vectors);
    }
    if (failure) std::rethrow_exception(failure);
  }

  validate(out);
  return out;
}

// Resolves a provider from a CLI-style url: `hash://<dim>` selects the offline
// hashing embedder, anything else is treated as an HTTP endpoint.
inline std::unique_ptr<EmbeddingProvider> make_provider(const std::string& name, const std::string& url) {
  if (url.rfind("hash://", 0) == 0) {
    const std::size_t dim = std::stoul(url.substr(7));
    return std::make_unique<HashingEmbeddingProvider>(name, dim, stable_hash(name));
  }
  return std::make_unique<HttpEmbeddingProvider>(name, url);
}

}  // namespace cartograph
