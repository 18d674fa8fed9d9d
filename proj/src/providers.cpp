#include "conflictrag/providers.hpp"

#include <chrono>
#include <cmath>
#include <thread>

#include <json.hpp>

#include "conflictrag/errors.hpp"
#include "conflictrag/util.hpp"

namespace conflictrag {

EmbeddingVector::EmbeddingVector(std::vector<double> values) : values_(std::move(values)) {
    if (values_.size() != static_cast<std::size_t>(kEmbeddingDim)) {
        throw ValidationError("embedding dimension " + std::to_string(values_.size()) +
                              " != " + std::to_string(kEmbeddingDim));
    }
    for (double v : values_) {
        if (!std::isfinite(v)) {
            throw ValidationError("embedding contains a non-finite value");
        }
    }
}

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::uint64_t request_fingerprint(const ChatRequest& request) {
    std::string key = request.system_prompt;
    key.push_back('\x1f');
    key += request.user_prompt;
    return fnv1a64(key);
}

StructuredVerdict parse_verdict(const std::string& raw) {
    // Scan for the first balanced {...} block that parses as the verdict schema.
    for (std::size_t start = raw.find('{'); start != std::string::npos;
         start = raw.find('{', start + 1)) {
        int depth = 0;
        bool in_string = false;
        for (std::size_t i = start; i < raw.size(); ++i) {
            char c = raw[i];
            if (in_string) {
                if (c == '\\') {
                    ++i;
                } else if (c == '"') {
                    in_string = false;
                }
                continue;
            }
            if (c == '"') in_string = true;
            if (c == '{') ++depth;
            if (c == '}') {
                --depth;
                if (depth == 0) {
                    auto parsed = nlohmann::json::parse(raw.substr(start, i - start + 1), nullptr,
                                                        /*allow_exceptions=*/false);
                    if (parsed.is_object() && parsed.contains("is_conflict") &&
                        parsed["is_conflict"].is_boolean()) {
                        StructuredVerdict verdict;
                        verdict.is_conflict = parsed["is_conflict"].get<bool>();
                        std::string type_name = parsed.value("type", std::string{"none"});
                        try {
                            verdict.conflict_type = conflict_type_from_string(type_name);
                        } catch (const ParseError&) {
                            break;
                        }
                        if (verdict.is_conflict !=
                            (verdict.conflict_type != ConflictType::NoConflict)) {
                            // Inconsistent reply; treat as unparseable.
                            break;
                        }
                        verdict.rationale = parsed.value("rationale", parsed.value("reason", std::string{}));
                        return verdict;
                    }
                    break;
                }
            }
        }
    }
    throw ParseError("no structured verdict found in reply");
}

EmbeddingVector MockEmbeddingProvider::embed(const std::string& text) {
    if (text.empty()) {
        throw ValidationError("cannot embed empty text");
    }
    Rng rng(fnv1a64(text));
    std::vector<double> values(kEmbeddingDim);
    double norm_sq = 0.0;
    for (double& v : values) {
        v = rng.next_range(-1.0, 1.0);
        norm_sq += v * v;
    }
    const double norm = std::sqrt(norm_sq);
    for (double& v : values) v /= norm;
    return EmbeddingVector(std::move(values));
}

void ScriptedEmbeddingProvider::script(const std::string& text, std::vector<double> embedding) {
    scripted_[text] = std::move(embedding);
}

EmbeddingVector ScriptedEmbeddingProvider::embed(const std::string& text) {
    auto it = scripted_.find(text);
    if (it != scripted_.end()) {
        return EmbeddingVector(it->second);
    }
    return fallback_.embed(text);
}

void ScriptedChatProvider::script(const std::string& prompt_substring, const std::string& response) {
    rules_.emplace_back(prompt_substring, response);
}

void ScriptedChatProvider::script_fingerprint(std::uint64_t fingerprint, const std::string& response) {
    fingerprints_[fingerprint] = response;
}

std::string ScriptedChatProvider::chat(const ChatRequest& request) {
    std::lock_guard<std::mutex> lock(mutex_);
    ++call_count_;
    if (auto it = fingerprints_.find(request_fingerprint(request)); it != fingerprints_.end()) {
        return it->second;
    }
    for (const auto& [needle, response] : rules_) {
        if (request.user_prompt.find(needle) != std::string::npos ||
            request.system_prompt.find(needle) != std::string::npos) {
            return response;
        }
    }
    if (default_response_) return *default_response_;
    throw ProtocolError("scripted chat provider has no rule for prompt: " +
                        request.user_prompt.substr(0, 120));
}

std::string with_retries(const std::function<std::string()>& fn, int attempts,
                         int initial_backoff_ms) {
    int backoff_ms = initial_backoff_ms;
    for (int attempt = 1;; ++attempt) {
        try {
            return fn();
        } catch (const TransportError& e) {
            if (attempt >= attempts) {
                throw TransportError(std::string(e.what()) + " (after " + std::to_string(attempt) +
                                     " attempts)");
            }
            std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms));
            backoff_ms *= 2;
        }
    }
}

}  // namespace conflictrag
