#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "conflictrag/types.hpp"

namespace conflictrag {

inline constexpr int kEmbeddingDim = 384;

/// Fixed 384-dim sentence embedding. Finite values enforced on construction.
class EmbeddingVector {
public:
    explicit EmbeddingVector(std::vector<double> values);

    const std::vector<double>& values() const { return values_; }
    double operator[](std::size_t i) const { return values_[i]; }
    std::size_t size() const { return values_.size(); }

private:
    std::vector<double> values_;
};

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);

struct ChatRequest {
    std::string system_prompt;
    std::string user_prompt;
    double temperature = 0.0;  // 0.0 detection/judging, 0.3 generation
};

/// Stable fingerprint of a request, used for scripting and response caches.
std::uint64_t request_fingerprint(const ChatRequest& request);

struct StructuredVerdict {
    bool is_conflict = false;
    ConflictType conflict_type = ConflictType::NoConflict;
    std::string rationale;
};

/// Extracts the first well-formed verdict object from an LLM reply,
/// tolerating surrounding prose. Throws ParseError when none is found or the
/// object is internally inconsistent (is_conflict=true with type none).
StructuredVerdict parse_verdict(const std::string& raw);

class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual EmbeddingVector embed(const std::string& text) = 0;
    virtual std::string model_id() const = 0;
};

class ChatProvider {
public:
    virtual ~ChatProvider() = default;
    virtual std::string chat(const ChatRequest& request) = 0;
    virtual std::string model_id() const = 0;
};

/// Deterministic offline embedder: a PRNG seeded with a stable 64-bit hash of
/// the input draws 384 values which are then L2-normalized. Pure function of
/// the input string.
class MockEmbeddingProvider : public EmbeddingProvider {
public:
    EmbeddingVector embed(const std::string& text) override;
    std::string model_id() const override { return "mock-embedder"; }
};

/// Test embedder with exact-text overrides; unknown texts fall back to the
/// mock embedding.
class ScriptedEmbeddingProvider : public EmbeddingProvider {
public:
    void script(const std::string& text, std::vector<double> embedding);
    EmbeddingVector embed(const std::string& text) override;
    std::string model_id() const override { return "scripted-embedder"; }

private:
    std::map<std::string, std::vector<double>> scripted_;
    MockEmbeddingProvider fallback_;
};

/// Test chat provider. Responses are selected by the first matching rule:
/// exact request fingerprint, then prompt substring. Unmatched requests throw
/// unless a default response is set.
class ScriptedChatProvider : public ChatProvider {
public:
    void script(const std::string& prompt_substring, const std::string& response);
    void script_fingerprint(std::uint64_t fingerprint, const std::string& response);
    void set_default_response(const std::string& response) { default_response_ = response; }

    std::string chat(const ChatRequest& request) override;
    std::string model_id() const override { return model_id_; }
    void set_model_id(std::string id) { model_id_ = std::move(id); }

    int call_count() const { return call_count_; }

private:
    std::vector<std::pair<std::string, std::string>> rules_;
    std::map<std::uint64_t, std::string> fingerprints_;
    std::optional<std::string> default_response_;
    std::string model_id_ = "scripted-chat";
    int call_count_ = 0;
    std::mutex mutex_;
};

/// Deterministic rule-based chat mock so the whole pipeline runs offline.
/// It recognizes each prompt family by its template markers and answers from
/// the text it is shown: pair judgments compare numbers/dates/opinion cues,
/// generation answers from the highest-priority document, judging checks gold
/// token containment. With temperature > 0 criteria scores get a small
/// seeded jitter (scale ~0.04 std) to emulate sampling noise.
class HeuristicChatProvider : public ChatProvider {
public:
    explicit HeuristicChatProvider(std::uint64_t seed = 0, std::string model_id = "mock-chat");

    std::string chat(const ChatRequest& request) override;
    std::string model_id() const override { return model_id_; }

private:
    std::uint64_t seed_;
    std::string model_id_;
    std::uint64_t jitter_counter_ = 0;
    std::mutex mutex_;
};

/// Retries fn up to `attempts` times with exponential backoff starting at
/// `initial_backoff_ms`. Only TransportError triggers a retry.
std::string with_retries(const std::function<std::string()>& fn, int attempts,
                         int initial_backoff_ms);

}  // namespace conflictrag
