#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "protrag/token_probs.hpp"

namespace protrag {

using EmbeddingVector = std::vector<double>;

/// Teacher role: probabilities of a forced continuation.
class TokenScorer {
public:
    virtual ~TokenScorer() = default;
    virtual TokenProbSequence score_tokens(std::string_view prompt, std::string_view target) = 0;
};

/// Encoder role: one dense vector per text, order preserved.
class Embedder {
public:
    virtual ~Embedder() = default;
    virtual std::vector<EmbeddingVector> embed(std::span<const std::string> texts) = 0;
};

struct GenerationParams {
    double temperature = 0.7;
    double top_p = 0.9;
    std::uint32_t max_tokens = 2048;
    double presence_penalty = 0.0;
    double frequency_penalty = 0.0;

    void validate() const;
};

/// Answer-generation role.
class TextGenerator {
public:
    virtual ~TextGenerator() = default;
    virtual std::string generate(std::string_view prompt, const GenerationParams& params) = 0;
};

enum class BackendRole { Scorer, Embedder, Generator };

std::string_view to_string(BackendRole role);

struct BackendConfig {
    BackendRole role = BackendRole::Generator;
    /// Base URL ("http://host:port") or "mock:<name>".
    std::string endpoint;
    std::string model;
    std::chrono::milliseconds timeout{60000};
    std::uint32_t max_retries = 2;
    std::uint32_t max_in_flight = 4;
    std::chrono::milliseconds retry_backoff{200};
    std::size_t max_prompt_chars = 200000;
    /// Output dimension of the hash-projection mock embedder.
    std::uint32_t embedding_dim = 64;
    std::string api_key;

    bool is_mock() const { return endpoint.starts_with("mock:"); }
    void validate() const;
};

/// Default mock endpoint for each role (used by --offline).
std::string default_mock_endpoint(BackendRole role);

struct CacheKey {
    BackendRole role = BackendRole::Generator;
    std::string model;
    std::string digest;

    std::string str() const;
    friend bool operator==(const CacheKey&, const CacheKey&) = default;
};

/// `canonical_request` must already be in canonical form (sorted keys, compact).
CacheKey make_cache_key(BackendRole role, std::string_view model, std::string_view canonical_request);

/// Thrown by transports for failures worth retrying.
class TransportError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Posts a JSON body to `path` relative to the backend endpoint and returns the
/// response body.
class Transport {
public:
    virtual ~Transport() = default;
    virtual std::string post(const std::string& path, const std::string& body, std::chrono::milliseconds timeout) = 0;
};

std::shared_ptr<Transport> make_http_transport(const std::string& endpoint, const std::string& api_key);

/// Response cache with an optional on-disk layer (<dir>/<role>/<digest>.json).
/// Concurrent readers, serialized writers.
class ResponseCache {
public:
    explicit ResponseCache(std::optional<std::filesystem::path> dir = std::nullopt);

    std::optional<std::string> get(const CacheKey& key) const;
    void put(const CacheKey& key, const std::string& response);

private:
    std::filesystem::path file_for(const CacheKey& key) const;

    std::optional<std::filesystem::path> dir_;
    mutable std::shared_mutex mutex_;
    std::map<std::string, std::string> memory_;
};

/// Counting limiter bounding in-flight requests.
class ConcurrencyLimiter {
public:
    explicit ConcurrencyLimiter(std::uint32_t max_in_flight);

    void acquire();
    void release();
    std::uint32_t peak() const { return peak_.load(); }

private:
    std::mutex mutex_;
    std::condition_variable cv_;
    std::uint32_t in_flight_ = 0;
    std::uint32_t max_;
    std::atomic<std::uint32_t> peak_{0};
};

/// Client for one backend. Implements whichever role its config names; calling
/// another role's method throws std::logic_error.
///
/// Requests are canonicalized, looked up in the cache, and otherwise answered by
/// the mock (for "mock:" endpoints) or the transport with retries. Wire shapes:
///   scorer    POST /v1/completions {model, prompt: prompt+target, echo: true,
///             logprobs: 0, max_tokens: 0, temperature: 0}
///             -> choices[0].logprobs.{tokens, token_logprobs, text_offset}
///   generator POST /v1/completions {model, prompt, temperature, top_p, max_tokens,
///             presence_penalty, frequency_penalty} -> choices[0].text
///   embedder  POST /v1/embeddings {model, input: [texts]} -> data[i].{index, embedding}
class BackendClient : public TokenScorer, public Embedder, public TextGenerator {
public:
    BackendClient(BackendConfig config, std::shared_ptr<ResponseCache> cache = nullptr,
                  std::shared_ptr<Transport> transport = nullptr);

    TokenProbSequence score_tokens(std::string_view prompt, std::string_view target) override;
    std::vector<EmbeddingVector> embed(std::span<const std::string> texts) override;
    std::string generate(std::string_view prompt, const GenerationParams& params) override;

    const BackendConfig& config() const noexcept { return config_; }
    /// Requests that reached the transport (attempts, including retries).
    std::uint64_t transport_calls() const noexcept { return transport_calls_.load(); }
    std::uint64_t cache_hits() const noexcept { return cache_hits_.load(); }
    std::uint32_t peak_in_flight() const { return limiter_.peak(); }

private:
    std::string request(const std::string& path, const std::string& canonical_body);
    std::string mock_response(const std::string& path, const std::string& canonical_body) const;
    void require_role(BackendRole role) const;

    BackendConfig config_;
    std::shared_ptr<ResponseCache> cache_;
    std::shared_ptr<Transport> transport_;
    ConcurrencyLimiter limiter_;
    std::atomic<std::uint64_t> transport_calls_{0};
    std::atomic<std::uint64_t> cache_hits_{0};
};

namespace mock {

/// Documented hash projection: each lowercase alphanumeric word w contributes
/// d values 2u-1, where u are successive splitmix64 draws (top 53 bits scaled
/// to [0,1)) seeded with fnv1a64(w). The summed vector is L2-normalized; texts
/// without words map to the zero vector.
EmbeddingVector hash_projection(std::string_view text, std::size_t dim);

/// Probabilities for target words: constant `p` for every word.
TokenProbSequence uniform_scores(std::string_view target, double p);

/// Probabilities for target words: 0.9 when the word also occurs in the prompt,
/// otherwise 0.4.
TokenProbSequence keyword_boost_scores(std::string_view prompt, std::string_view target);

/// Deterministic echo: every prompt line starting with "Homolog " (the rendered
/// evidence lines), or a fixed no-evidence sentence when there are none.
std::string echo_generation(std::string_view prompt);

}  // namespace mock

}  // namespace protrag
