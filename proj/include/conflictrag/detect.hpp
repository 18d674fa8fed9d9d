#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "conflictrag/neural.hpp"
#include "conflictrag/prompts.hpp"
#include "conflictrag/providers.hpp"
#include "conflictrag/types.hpp"

namespace conflictrag {

/// Pair interaction features: [e_i; e_j; |e_i - e_j|; e_i * e_j], 1536-dim.
struct PairFeatures {
    std::vector<double> values;
};

/// e_i = embed(query + " " + doc text); single-space separator.
PairFeatures build_features(const Query& query, const Document& doc_a, const Document& doc_b,
                            EmbeddingProvider& embedder);

struct Stage1Result {
    bool is_conflict = false;
    ConflictType conflict_type = ConflictType::NoConflict;
    double confidence = 0.0;  // Head 1 softmax probability of its argmax
};

/// Head 1 decides conflict/no-conflict with confidence; Head 2 supplies the
/// type for conflicts. When Head 2's argmax is NoConflict despite Head 1
/// detecting a conflict, the best non-NoConflict class is used instead.
Stage1Result stage1(const PairFeatures& features, const MlpModel& head1, const MlpModel& head2);

struct ThresholdConfig {
    double tau_c = 0.7;  // escalate strictly below this Stage-1 confidence

    void validate() const;
};

struct RoutingDecision {
    enum class Kind { AcceptStage1, EscalateToStage2 };
    Kind kind = Kind::AcceptStage1;
    // Present iff kind == AcceptStage1; conflict_type may be NoConflict.
    std::optional<ConflictFinding> finding;

    bool escalate() const { return kind == Kind::EscalateToStage2; }
};

RoutingDecision route(const Stage1Result& result, DocumentPair pair,
                      const ThresholdConfig& threshold);

/// USD estimate per chat call from prompt/reply sizes at 4 chars per token.
struct CostTable {
    double usd_per_1k_input_tokens = 0.15e-3;
    double usd_per_1k_output_tokens = 0.60e-3;

    double estimate(std::size_t prompt_chars, std::size_t reply_chars) const;
};

struct DetectionCostLedger {
    int pairs_total = 0;
    int stage1_resolved = 0;
    int stage2_calls = 0;
    double stage1_latency_ms = 0.0;
    double stage2_latency_ms = 0.0;
    double estimated_cost_usd = 0.0;

    void merge(const DetectionCostLedger& other);
};

struct Stage2Outcome {
    ConflictFinding finding;  // NoConflict at confidence 0.5 on parse failure
    double latency_ms = 0.0;
    double cost_usd = 0.0;
    bool parse_failed = false;
};

inline constexpr double kStage2Confidence = 0.95;

/// LLM pair judgment at temperature 0. Parse failures degrade to NoConflict
/// with confidence 0.5 and a warning; transport errors propagate.
Stage2Outcome stage2(const Query& query, const Document& doc_a, const Document& doc_b,
                     DocumentPair pair, ChatProvider& chat, const PromptLibrary& prompts,
                     const CostTable& cost);

struct DetectorConfig {
    ThresholdConfig threshold;
    CostTable cost;
};

/// Full two-stage detection over all C(K,2) pairs of one query.
std::pair<ConflictReport, DetectionCostLedger> detect_conflicts(
    const Query& query, std::span<const Document> documents, const MlpModel& head1,
    const MlpModel& head2, const DetectorConfig& config, EmbeddingProvider& embedder,
    ChatProvider& chat, const PromptLibrary& prompts);

/// Closed-book vs open-book comparison. Requires a non-empty document list.
ParametricVerdict detect_parametric(const Query& query, std::span<const Document> documents,
                                    ChatProvider& chat, const PromptLibrary& prompts);

}  // namespace conflictrag
