#include "conflictrag/http_provider.hpp"

#include <cstdlib>

#include <httplib.h>
#include <json.hpp>

#include "conflictrag/errors.hpp"

namespace conflictrag {

namespace {

struct SplitUrl {
    std::string scheme_host_port;  // httplib client target
    std::string path_prefix;
};

SplitUrl split_base_url(const std::string& base_url) {
    const auto scheme_end = base_url.find("://");
    if (scheme_end == std::string::npos) {
        throw ConfigError("provider base_url must include a scheme: '" + base_url + "'");
    }
    const auto path_start = base_url.find('/', scheme_end + 3);
    SplitUrl split;
    if (path_start == std::string::npos) {
        split.scheme_host_port = base_url;
    } else {
        split.scheme_host_port = base_url.substr(0, path_start);
        split.path_prefix = base_url.substr(path_start);
        while (!split.path_prefix.empty() && split.path_prefix.back() == '/') {
            split.path_prefix.pop_back();
        }
    }
    return split;
}

std::string read_api_key(const std::string& env_name) {
    if (env_name.empty()) return {};
    const char* value = std::getenv(env_name.c_str());
    return value != nullptr ? value : std::string{};
}

nlohmann::json post_json(const HttpProviderConfig& config, const std::string& api_key,
                         const std::string& endpoint, const nlohmann::json& body) {
    const SplitUrl url = split_base_url(config.base_url);
    httplib::Client client(url.scheme_host_port);
    client.set_connection_timeout(config.timeout_seconds, 0);
    client.set_read_timeout(config.timeout_seconds, 0);

    httplib::Headers headers;
    if (!api_key.empty()) {
        headers.emplace("Authorization", "Bearer " + api_key);
    }
    const auto result = client.Post(url.path_prefix + endpoint, headers, body.dump(),
                                    "application/json");
    if (!result) {
        throw TransportError("POST " + config.base_url + endpoint + " failed: " +
                             httplib::to_string(result.error()));
    }
    if (result->status == 429 || result->status >= 500) {
        // Retryable per the backoff policy.
        throw TransportError("POST " + config.base_url + endpoint + " returned HTTP " +
                             std::to_string(result->status));
    }
    if (result->status != 200) {
        throw ProtocolError("POST " + config.base_url + endpoint + " returned HTTP " +
                            std::to_string(result->status) + ": " + result->body.substr(0, 200));
    }
    try {
        return nlohmann::json::parse(result->body);
    } catch (const nlohmann::json::parse_error& e) {
        throw ProtocolError("malformed JSON from " + endpoint + ": " + e.what());
    }
}

}  // namespace

RequestGate::RequestGate(int max_concurrent, int per_minute)
    : max_concurrent_(max_concurrent > 0 ? max_concurrent : 1), per_minute_(per_minute) {}

RequestGate::Ticket::Ticket(RequestGate& gate) : gate_(gate) { gate_.acquire(); }

RequestGate::Ticket::~Ticket() { gate_.release(); }

void RequestGate::acquire() {
    std::unique_lock<std::mutex> lock(mutex_);
    available_.wait(lock, [&] {
        const auto now = std::chrono::steady_clock::now();
        while (!recent_.empty() && now - recent_.front() > std::chrono::minutes(1)) {
            recent_.pop_front();
        }
        const bool under_concurrency = in_flight_ < max_concurrent_;
        const bool under_rate = per_minute_ <= 0 ||
                                static_cast<int>(recent_.size()) < per_minute_;
        return under_concurrency && under_rate;
    });
    ++in_flight_;
    recent_.push_back(std::chrono::steady_clock::now());
}

void RequestGate::release() {
    {
        std::lock_guard<std::mutex> lock(mutex_);
        --in_flight_;
    }
    available_.notify_all();
}

HttpChatProvider::HttpChatProvider(HttpProviderConfig config)
    : config_(std::move(config)),
      api_key_(read_api_key(config_.api_key_env)),
      gate_(std::make_unique<RequestGate>(config_.max_concurrent_requests,
                                          config_.requests_per_minute)) {
    split_base_url(config_.base_url);  // validate eagerly
}

std::string HttpChatProvider::chat(const ChatRequest& request) {
    const nlohmann::json body{
        {"model", config_.model},
        {"messages",
         {{{"role", "system"}, {"content", request.system_prompt}},
          {{"role", "user"}, {"content", request.user_prompt}}}},
        {"temperature", request.temperature}};

    return with_retries(
        [&]() -> std::string {
            RequestGate::Ticket ticket(*gate_);
            const nlohmann::json reply = post_json(config_, api_key_, "/chat/completions", body);
            if (!reply.contains("choices") || !reply["choices"].is_array() ||
                reply["choices"].empty()) {
                throw ProtocolError("chat reply has no choices");
            }
            const auto& message = reply["choices"][0]["message"];
            if (!message.contains("content") || !message["content"].is_string()) {
                throw ProtocolError("chat reply choice has no message content");
            }
            return message["content"].get<std::string>();
        },
        config_.max_attempts, config_.initial_backoff_ms);
}

HttpEmbeddingProvider::HttpEmbeddingProvider(HttpProviderConfig config)
    : config_(std::move(config)),
      api_key_(read_api_key(config_.api_key_env)),
      gate_(std::make_unique<RequestGate>(config_.max_concurrent_requests,
                                          config_.requests_per_minute)) {
    split_base_url(config_.base_url);
}

EmbeddingVector HttpEmbeddingProvider::embed(const std::string& text) {
    if (text.empty()) {
        throw ValidationError("cannot embed empty text");
    }
    const nlohmann::json body{{"model", config_.model}, {"input", text}};
    const std::string raw = with_retries(
        [&]() -> std::string {
            RequestGate::Ticket ticket(*gate_);
            return post_json(config_, api_key_, "/embeddings", body).dump();
        },
        config_.max_attempts, config_.initial_backoff_ms);

    const nlohmann::json reply = nlohmann::json::parse(raw);
    if (!reply.contains("data") || !reply["data"].is_array() || reply["data"].empty() ||
        !reply["data"][0].contains("embedding")) {
        throw ProtocolError("embedding reply has no data[0].embedding");
    }
    std::vector<double> values;
    for (const auto& v : reply["data"][0]["embedding"]) values.push_back(v.get<double>());
    if (values.size() != static_cast<std::size_t>(kEmbeddingDim)) {
        throw ProtocolError("remote embedding dimension " + std::to_string(values.size()) +
                            " != " + std::to_string(kEmbeddingDim));
    }
    return EmbeddingVector(std::move(values));
}

}  // namespace conflictrag
