#pragma once

#include <chrono>
#include <condition_variable>
#include <deque>
#include <memory>
#include <mutex>
#include <string>

#include "conflictrag/providers.hpp"

namespace conflictrag {

/// Connection settings for an OpenAI-compatible endpoint.
struct HttpProviderConfig {
    std::string base_url;  // e.g. "http://localhost:8000/v1"
    std::string model;
    std::string api_key_env;  // environment variable holding the key; may be empty
    int timeout_seconds = 60;
    int max_attempts = 3;
    int initial_backoff_ms = 500;
    int max_concurrent_requests = 4;
    int requests_per_minute = 0;  // 0 = unlimited
};

/// Shared concurrency cap + per-minute rate limit across a provider's calls.
class RequestGate {
public:
    RequestGate(int max_concurrent, int per_minute);
    ~RequestGate() = default;

    class Ticket {
    public:
        explicit Ticket(RequestGate& gate);
        ~Ticket();
        Ticket(const Ticket&) = delete;
        Ticket& operator=(const Ticket&) = delete;

    private:
        RequestGate& gate_;
    };

private:
    void acquire();
    void release();

    std::mutex mutex_;
    std::condition_variable available_;
    int max_concurrent_;
    int per_minute_;
    int in_flight_ = 0;
    std::deque<std::chrono::steady_clock::time_point> recent_;
};

/// POSTs to {base_url}/chat/completions and reads choices[0].message.content.
class HttpChatProvider : public ChatProvider {
public:
    explicit HttpChatProvider(HttpProviderConfig config);

    std::string chat(const ChatRequest& request) override;
    std::string model_id() const override { return config_.model; }

private:
    HttpProviderConfig config_;
    std::string api_key_;
    std::unique_ptr<RequestGate> gate_;
};

/// POSTs to {base_url}/embeddings and reads data[0].embedding; enforces the
/// 384-dim contract.
class HttpEmbeddingProvider : public EmbeddingProvider {
public:
    explicit HttpEmbeddingProvider(HttpProviderConfig config);

    EmbeddingVector embed(const std::string& text) override;
    std::string model_id() const override { return config_.model; }

private:
    HttpProviderConfig config_;
    std::string api_key_;
    std::unique_ptr<RequestGate> gate_;
};

}  // namespace conflictrag
