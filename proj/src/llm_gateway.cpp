#include "protrag/llm_gateway.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "protrag/digest.hpp"
#include "protrag/error.hpp"
#include "protrag/text.hpp"

namespace protrag {

using nlohmann::json;

void TokenProbSequence::validate() const {
    if (tokens.size() != probs.size())
        throw std::invalid_argument("token/probability length mismatch (" + std::to_string(tokens.size()) + " vs " +
                                    std::to_string(probs.size()) + ")");
    for (double p : probs) {
        if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("token probability outside [0, 1]");
    }
}

void GenerationParams::validate() const {
    if (!(temperature >= 0.0)) throw ConfigError("generation.temperature must be >= 0");
    if (!(top_p > 0.0 && top_p <= 1.0)) throw ConfigError("generation.top_p must lie in (0, 1]");
    if (max_tokens < 1) throw ConfigError("generation.max_tokens must be >= 1");
}

std::string_view to_string(BackendRole role) {
    switch (role) {
        case BackendRole::Scorer: return "scorer";
        case BackendRole::Embedder: return "embedder";
        case BackendRole::Generator: return "generator";
    }
    return "generator";
}

std::string default_mock_endpoint(BackendRole role) {
    switch (role) {
        case BackendRole::Scorer: return "mock:keyword-boost";
        case BackendRole::Embedder: return "mock:hash";
        case BackendRole::Generator: return "mock:echo";
    }
    return "mock:echo";
}

namespace {

struct MockEndpoint {
    std::string name;
    std::optional<double> arg;
};

MockEndpoint parse_mock(std::string_view endpoint) {
    auto body = endpoint.substr(5);
    MockEndpoint parsed;
    const auto open = body.find('(');
    if (open == std::string_view::npos) {
        parsed.name = std::string(body);
        return parsed;
    }
    if (!body.ends_with(')')) throw ConfigError("malformed mock endpoint '" + std::string(endpoint) + "'");
    parsed.name = std::string(body.substr(0, open));
    const auto arg = body.substr(open + 1, body.size() - open - 2);
    try {
        std::size_t used = 0;
        parsed.arg = std::stod(std::string(arg), &used);
        if (used != arg.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
        throw ConfigError("malformed mock argument in '" + std::string(endpoint) + "'");
    }
    return parsed;
}

}  // namespace

void BackendConfig::validate() const {
    if (max_in_flight < 1) throw ConfigError(std::string(to_string(role)) + ": max_in_flight must be >= 1");
    if (endpoint.empty()) throw ConfigError(std::string(to_string(role)) + ": endpoint is empty");
    if (!is_mock()) {
        if (!endpoint.starts_with("http://") && !endpoint.starts_with("https://"))
            throw ConfigError(std::string(to_string(role)) + ": endpoint must be http(s)://... or mock:<name>, got '" +
                              endpoint + "'");
        return;
    }
    const auto parsed = parse_mock(endpoint);
    bool ok = false;
    switch (role) {
        case BackendRole::Scorer:
            ok = (parsed.name == "uniform" && parsed.arg && *parsed.arg >= 0.0 && *parsed.arg <= 1.0) ||
                 (parsed.name == "keyword-boost" && !parsed.arg);
            break;
        case BackendRole::Embedder:
            ok = parsed.name == "hash" && (!parsed.arg || *parsed.arg >= 1.0);
            break;
        case BackendRole::Generator:
            ok = parsed.name == "echo" && !parsed.arg;
            break;
    }
    if (!ok) throw ConfigError("unknown " + std::string(to_string(role)) + " mock '" + endpoint + "'");
}

std::string CacheKey::str() const { return std::string(to_string(role)) + "/" + model + "/" + digest; }

CacheKey make_cache_key(BackendRole role, std::string_view model, std::string_view canonical_request) {
    std::string material;
    material.append(to_string(role)).append("\n").append(model).append("\n").append(canonical_request);
    return CacheKey{role, std::string(model), sha256_hex(material)};
}

// ---------------------------------------------------------------------------
// HTTP transport

namespace {

class HttpTransport final : public Transport {
public:
    HttpTransport(const std::string& endpoint, std::string api_key) : api_key_(std::move(api_key)) {
        const auto scheme_end = endpoint.find("://");
        const auto path_start = endpoint.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
        if (path_start == std::string::npos) {
            base_ = endpoint;
        } else {
            base_ = endpoint.substr(0, path_start);
            prefix_ = endpoint.substr(path_start);
            while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
        }
    }

    std::string post(const std::string& path, const std::string& body, std::chrono::milliseconds timeout) override {
        httplib::Client client(base_);
        const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
        const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);
        client.set_connection_timeout(secs.count(), usecs.count());
        client.set_read_timeout(secs.count(), usecs.count());
        client.set_write_timeout(secs.count(), usecs.count());
        httplib::Headers headers;
        if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
        auto res = client.Post(prefix_ + path, headers, body, "application/json");
        if (!res) throw TransportError("request to " + base_ + prefix_ + path + " failed: " + httplib::to_string(res.error()));
        if (res->status < 200 || res->status >= 300) {
            throw TransportError("HTTP " + std::to_string(res->status) + " from " + base_ + prefix_ + path + ": " +
                                 res->body.substr(0, 200));
        }
        return res->body;
    }

private:
    std::string base_;
    std::string prefix_;
    std::string api_key_;
};

}  // namespace

std::shared_ptr<Transport> make_http_transport(const std::string& endpoint, const std::string& api_key) {
    return std::make_shared<HttpTransport>(endpoint, api_key);
}

// ---------------------------------------------------------------------------
// Cache

ResponseCache::ResponseCache(std::optional<std::filesystem::path> dir) : dir_(std::move(dir)) {}

std::filesystem::path ResponseCache::file_for(const CacheKey& key) const {
    return *dir_ / std::string(to_string(key.role)) / (key.digest + ".json");
}

std::optional<std::string> ResponseCache::get(const CacheKey& key) const {
    const auto k = key.str();
    {
        std::shared_lock lock(mutex_);
        if (auto it = memory_.find(k); it != memory_.end()) return it->second;
    }
    if (!dir_) return std::nullopt;
    std::ifstream in(file_for(key), std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void ResponseCache::put(const CacheKey& key, const std::string& response) {
    std::unique_lock lock(mutex_);
    memory_[key.str()] = response;
    if (!dir_) return;
    const auto path = file_for(key);
    std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write cache file " + tmp.string());
        out << response;
    }
    std::filesystem::rename(tmp, path);
}

// ---------------------------------------------------------------------------
// Limiter

ConcurrencyLimiter::ConcurrencyLimiter(std::uint32_t max_in_flight) : max_(max_in_flight) {
    if (max_ < 1) throw ConfigError("max_in_flight must be >= 1");
}

void ConcurrencyLimiter::acquire() {
    std::unique_lock lock(mutex_);
    cv_.wait(lock, [&] { return in_flight_ < max_; });
    ++in_flight_;
    auto seen = peak_.load();
    while (in_flight_ > seen && !peak_.compare_exchange_weak(seen, in_flight_)) {
    }
}

void ConcurrencyLimiter::release() {
    {
        std::lock_guard lock(mutex_);
        --in_flight_;
    }
    cv_.notify_one();
}

// ---------------------------------------------------------------------------
// Mocks

namespace mock {

EmbeddingVector hash_projection(std::string_view text_in, std::size_t dim) {
    EmbeddingVector v(dim, 0.0);
    for (const auto& w : text::words(text_in)) {
        std::uint64_t state = text::fnv1a64(w);
        for (std::size_t i = 0; i < dim; ++i) {
            const double u = static_cast<double>(text::splitmix64(state) >> 11) * 0x1.0p-53;
            v[i] += 2.0 * u - 1.0;
        }
    }
    double sq = 0.0;
    for (double x : v) sq += x * x;
    const double norm = std::sqrt(sq);
    if (norm > 0.0) {
        for (auto& x : v) x /= norm;
    }
    return v;
}

TokenProbSequence uniform_scores(std::string_view target, double p) {
    TokenProbSequence out;
    out.tokens = text::words(target);
    out.probs.assign(out.tokens.size(), p);
    return out;
}

TokenProbSequence keyword_boost_scores(std::string_view prompt, std::string_view target) {
    const auto prompt_words = text::words(prompt);
    std::vector<std::string> sorted(prompt_words);
    std::sort(sorted.begin(), sorted.end());
    TokenProbSequence out;
    out.tokens = text::words(target);
    for (const auto& t : out.tokens) {
        out.probs.push_back(std::binary_search(sorted.begin(), sorted.end(), t) ? 0.9 : 0.4);
    }
    return out;
}

std::string echo_generation(std::string_view prompt) {
    std::vector<std::string> lines;
    for (const auto& line : text::split(prompt, '\n')) {
        if (line.starts_with("Homolog ")) lines.push_back(line);
    }
    if (lines.empty()) return "No supporting evidence was retrieved for this query.";
    return text::join(lines, "\n");
}

}  // namespace mock

// ---------------------------------------------------------------------------
// Client

namespace {

class InFlight {
public:
    explicit InFlight(ConcurrencyLimiter& l) : l_(l) { l_.acquire(); }
    ~InFlight() { l_.release(); }
    InFlight(const InFlight&) = delete;
    InFlight& operator=(const InFlight&) = delete;

private:
    ConcurrencyLimiter& l_;
};

// Logical request -> provider wire body.
std::string wire_body(const std::string& path, const json& logical, const std::string& model) {
    json body;
    body["model"] = model;
    const auto& op = logical.at("op").get_ref<const std::string&>();
    if (op == "score") {
        body["prompt"] = logical.at("prompt").get<std::string>() + logical.at("target").get<std::string>();
        body["echo"] = true;
        body["logprobs"] = 0;
        body["max_tokens"] = 0;
        body["temperature"] = 0;
    } else if (op == "generate") {
        body["prompt"] = logical.at("prompt");
        for (const auto& k : {"temperature", "top_p", "max_tokens", "presence_penalty", "frequency_penalty"}) {
            body[k] = logical.at("params").at(k);
        }
    } else if (op == "embed") {
        body["input"] = logical.at("texts");
    } else {
        throw std::logic_error("unknown request op for " + path);
    }
    return body.dump();
}

// Provider wire response -> normalized response stored in the cache.
std::string normalize_response(const json& logical, const std::string& raw) {
    const auto resp = json::parse(raw);
    const auto& op = logical.at("op").get_ref<const std::string&>();
    json out;
    if (op == "score") {
        const auto prompt_len = logical.at("prompt").get_ref<const std::string&>().size();
        const auto& lp = resp.at("choices").at(0).at("logprobs");
        const auto& toks = lp.at("tokens");
        const auto& logps = lp.at("token_logprobs");
        const auto& offs = lp.at("text_offset");
        json tokens = json::array();
        json probs = json::array();
        for (std::size_t i = 0; i < toks.size(); ++i) {
            if (offs.at(i).get<std::size_t>() < prompt_len || logps.at(i).is_null()) continue;
            tokens.push_back(toks.at(i));
            probs.push_back(std::clamp(std::exp(logps.at(i).get<double>()), 0.0, 1.0));
        }
        out["tokens"] = std::move(tokens);
        out["probs"] = std::move(probs);
    } else if (op == "generate") {
        out["text"] = resp.at("choices").at(0).at("text");
    } else {
        const auto& data = resp.at("data");
        json vecs = json::array();
        for (std::size_t i = 0; i < data.size(); ++i) vecs.push_back(nullptr);
        for (const auto& item : data) vecs.at(item.at("index").get<std::size_t>()) = item.at("embedding");
        out["embeddings"] = std::move(vecs);
    }
    return out.dump();
}

}  // namespace

BackendClient::BackendClient(BackendConfig config, std::shared_ptr<ResponseCache> cache,
                             std::shared_ptr<Transport> transport)
    : config_(std::move(config)),
      cache_(cache ? std::move(cache) : std::make_shared<ResponseCache>()),
      transport_(std::move(transport)),
      limiter_(config_.max_in_flight) {
    config_.validate();
    if (!transport_ && !config_.is_mock()) transport_ = make_http_transport(config_.endpoint, config_.api_key);
}

void BackendClient::require_role(BackendRole role) const {
    if (config_.role != role) {
        throw std::logic_error("backend configured as " + std::string(to_string(config_.role)) + " used as " +
                               std::string(to_string(role)));
    }
}

std::string BackendClient::mock_response(const std::string&, const std::string& canonical_body) const {
    const auto logical = json::parse(canonical_body);
    const auto parsed = parse_mock(config_.endpoint);
    const auto& op = logical.at("op").get_ref<const std::string&>();
    json out;
    if (op == "score") {
        const auto& prompt = logical.at("prompt").get_ref<const std::string&>();
        const auto& target = logical.at("target").get_ref<const std::string&>();
        const auto seq = parsed.name == "uniform" ? mock::uniform_scores(target, *parsed.arg)
                                                : mock::keyword_boost_scores(prompt, target);
        out["tokens"] = seq.tokens;
        out["probs"] = seq.probs;
    } else if (op == "generate") {
        out["text"] = mock::echo_generation(logical.at("prompt").get_ref<const std::string&>());
    } else {
        const auto dim = parsed.arg ? static_cast<std::size_t>(*parsed.arg) : config_.embedding_dim;
        json vecs = json::array();
        for (const auto& t : logical.at("texts")) vecs.push_back(mock::hash_projection(t.get_ref<const std::string&>(), dim));
        out["embeddings"] = std::move(vecs);
    }
    return out.dump();
}

std::string BackendClient::request(const std::string& path, const std::string& canonical_body) {
    const auto key = make_cache_key(config_.role, config_.model, canonical_body);
    if (auto hit = cache_->get(key)) {
        ++cache_hits_;
        return *hit;
    }
    if (config_.is_mock()) {
        auto resp = mock_response(path, canonical_body);
        cache_->put(key, resp);
        return resp;
    }

    const auto logical = json::parse(canonical_body);
    const auto body = wire_body(path, logical, config_.model);
    const std::size_t attempts = static_cast<std::size_t>(config_.max_retries) + 1;
    std::string last_error;
    for (std::size_t attempt = 1; attempt <= attempts; ++attempt) {
        try {
            std::string raw;
            {
                InFlight guard(limiter_);
                ++transport_calls_;
                raw = transport_->post(path, body, config_.timeout);
            }
            auto resp = normalize_response(logical, raw);
            cache_->put(key, resp);
            return resp;
        } catch (const TransportError& e) {
            last_error = e.what();
        } catch (const json::exception& e) {
            last_error = std::string("malformed response: ") + e.what();
        }
        if (attempt < attempts && config_.retry_backoff.count() > 0) {
            std::this_thread::sleep_for(config_.retry_backoff * (1 << std::min<std::size_t>(attempt - 1, 6)));
        }
    }
    throw BackendError(attempts, std::string(to_string(config_.role)) + " request to " + config_.endpoint +
                                     " failed: " + last_error);
}

TokenProbSequence BackendClient::score_tokens(std::string_view prompt, std::string_view target) {
    require_role(BackendRole::Scorer);
    const json logical = {{"op", "score"}, {"prompt", prompt}, {"target", target}};
    const auto resp = json::parse(request("/v1/completions", logical.dump()));
    TokenProbSequence seq;
    seq.tokens = resp.at("tokens").get<std::vector<std::string>>();
    seq.probs = resp.at("probs").get<std::vector<double>>();
    seq.validate();
    return seq;
}

std::vector<EmbeddingVector> BackendClient::embed(std::span<const std::string> texts) {
    require_role(BackendRole::Embedder);
    if (texts.empty()) return {};
    const json logical = {{"op", "embed"}, {"texts", std::vector<std::string>(texts.begin(), texts.end())}};
    const auto resp = json::parse(request("/v1/embeddings", logical.dump()));
    auto vecs = resp.at("embeddings").get<std::vector<EmbeddingVector>>();
    if (vecs.size() != texts.size()) {
        throw BackendError(1, "embedder returned " + std::to_string(vecs.size()) + " vectors for " +
                                  std::to_string(texts.size()) + " texts");
    }
    return vecs;
}

std::string BackendClient::generate(std::string_view prompt, const GenerationParams& params) {
    require_role(BackendRole::Generator);
    params.validate();
    if (prompt.empty()) throw std::invalid_argument("generate: empty prompt");
    if (prompt.size() > config_.max_prompt_chars) {
        throw Error("prompt is " + std::to_string(prompt.size()) + " characters, over the limit of " +
                    std::to_string(config_.max_prompt_chars));
    }
    const json logical = {{"op", "generate"},
                          {"prompt", prompt},
                          {"params",
                           {{"temperature", params.temperature},
                            {"top_p", params.top_p},
                            {"max_tokens", params.max_tokens},
                            {"presence_penalty", params.presence_penalty},
                            {"frequency_penalty", params.frequency_penalty}}}};
    const auto resp = json::parse(request("/v1/completions", logical.dump()));
    return resp.at("text").get<std::string>();
}

}  // namespace protrag
