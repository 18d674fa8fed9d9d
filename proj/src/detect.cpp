#include "conflictrag/detect.hpp"

#include <chrono>
#include <cmath>

#include "conflictrag/errors.hpp"
#include "conflictrag/util.hpp"

namespace conflictrag {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

const std::string kDetectionSystemPrompt =
    "You are a careful analyst of retrieved evidence. Follow the reply format exactly.";

}  // namespace

PairFeatures build_features(const Query& query, const Document& doc_a, const Document& doc_b,
                            EmbeddingProvider& embedder) {
    query.validate();
    doc_a.validate();
    doc_b.validate();
    const EmbeddingVector e_i = embedder.embed(query.text + " " + doc_a.text);
    const EmbeddingVector e_j = embedder.embed(query.text + " " + doc_b.text);

    PairFeatures features;
    features.values.reserve(static_cast<std::size_t>(kFeatureDim));
    features.values.insert(features.values.end(), e_i.values().begin(), e_i.values().end());
    features.values.insert(features.values.end(), e_j.values().begin(), e_j.values().end());
    for (int k = 0; k < kEmbeddingDim; ++k) {
        features.values.push_back(std::abs(e_i[static_cast<std::size_t>(k)] -
                                           e_j[static_cast<std::size_t>(k)]));
    }
    for (int k = 0; k < kEmbeddingDim; ++k) {
        features.values.push_back(e_i[static_cast<std::size_t>(k)] *
                                  e_j[static_cast<std::size_t>(k)]);
    }
    return features;
}

Stage1Result stage1(const PairFeatures& features, const MlpModel& head1, const MlpModel& head2) {
    if (head1.kind() != HeadKind::Binary || head2.kind() != HeadKind::FourWay) {
        throw ValidationError("stage1 requires a binary head and a four-way head");
    }
    const auto [binary_label, confidence] = predict_with_confidence(head1, features.values);

    Stage1Result result;
    result.is_conflict = binary_label == 1;
    result.confidence = confidence;
    if (!result.is_conflict) {
        result.conflict_type = ConflictType::NoConflict;
        return result;
    }
    const std::vector<double> type_probs = softmax(head2.forward(features.values));
    int best = 0;
    for (std::size_t i = 1; i < type_probs.size(); ++i) {
        if (type_probs[i] > type_probs[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
    }
    if (best == static_cast<int>(ConflictType::NoConflict)) {
        // Head 1's binary decision is authoritative; take Head 2's best
        // conflicting class instead.
        int fallback = 1;
        for (std::size_t i = 2; i < type_probs.size(); ++i) {
            if (type_probs[i] > type_probs[static_cast<std::size_t>(fallback)]) {
                fallback = static_cast<int>(i);
            }
        }
        best = fallback;
    }
    result.conflict_type = static_cast<ConflictType>(best);
    return result;
}

void ThresholdConfig::validate() const {
    if (tau_c < 0.0 || tau_c > 1.0) {
        throw ValidationError("tau_c must be in [0,1]");
    }
}

RoutingDecision route(const Stage1Result& result, DocumentPair pair,
                      const ThresholdConfig& threshold) {
    threshold.validate();
    if (result.confidence < 0.0 || result.confidence > 1.0) {
        throw ValidationError("stage-1 confidence outside [0,1]");
    }
    RoutingDecision decision;
    if (result.confidence < threshold.tau_c) {  // strict: conf == tau_c is accepted
        decision.kind = RoutingDecision::Kind::EscalateToStage2;
        return decision;
    }
    decision.kind = RoutingDecision::Kind::AcceptStage1;
    decision.finding = ConflictFinding{pair, result.conflict_type, result.confidence,
                                       DetectionStage::Stage1};
    return decision;
}

double CostTable::estimate(std::size_t prompt_chars, std::size_t reply_chars) const {
    const double input_tokens = static_cast<double>((prompt_chars + 3) / 4);
    const double output_tokens = static_cast<double>((reply_chars + 3) / 4);
    return input_tokens / 1000.0 * usd_per_1k_input_tokens +
           output_tokens / 1000.0 * usd_per_1k_output_tokens;
}

void DetectionCostLedger::merge(const DetectionCostLedger& other) {
    pairs_total += other.pairs_total;
    stage1_resolved += other.stage1_resolved;
    stage2_calls += other.stage2_calls;
    stage1_latency_ms += other.stage1_latency_ms;
    stage2_latency_ms += other.stage2_latency_ms;
    estimated_cost_usd += other.estimated_cost_usd;
}

Stage2Outcome stage2(const Query& query, const Document& doc_a, const Document& doc_b,
                     DocumentPair pair, ChatProvider& chat, const PromptLibrary& prompts,
                     const CostTable& cost) {
    ChatRequest request;
    request.system_prompt = kDetectionSystemPrompt;
    request.user_prompt = prompts.render("pair_judge", {{"query", query.text},
                                                        {"doc_a", render_document_block(doc_a)},
                                                        {"doc_b", render_document_block(doc_b)}});
    request.temperature = 0.0;

    const auto start = Clock::now();
    const std::string reply = chat.chat(request);

    Stage2Outcome outcome;
    outcome.latency_ms = elapsed_ms(start);
    outcome.cost_usd =
        cost.estimate(request.system_prompt.size() + request.user_prompt.size(), reply.size());
    try {
        const StructuredVerdict verdict = parse_verdict(reply);
        // Parsed Stage-2 verdicts carry a fixed confidence.
        outcome.finding =
            ConflictFinding{pair, verdict.conflict_type, kStage2Confidence, DetectionStage::Stage2};
    } catch (const ParseError&) {
        log_warning("stage-2 verdict unparseable for pair (" + std::to_string(pair.index_a) +
                    ", " + std::to_string(pair.index_b) + "); treating as no-conflict");
        outcome.finding = ConflictFinding{pair, ConflictType::NoConflict, 0.5, DetectionStage::Stage2};
        outcome.parse_failed = true;
    }
    return outcome;
}

std::pair<ConflictReport, DetectionCostLedger> detect_conflicts(
    const Query& query, std::span<const Document> documents, const MlpModel& head1,
    const MlpModel& head2, const DetectorConfig& config, EmbeddingProvider& embedder,
    ChatProvider& chat, const PromptLibrary& prompts) {
    config.threshold.validate();

    ConflictReport report;
    DetectionCostLedger ledger;
    const auto pairs = enumerate_pairs(static_cast<int>(documents.size()));
    report.pairs_examined = static_cast<int>(pairs.size());
    ledger.pairs_total = static_cast<int>(pairs.size());

    for (const DocumentPair& pair : pairs) {
        const Document& doc_a = documents[static_cast<std::size_t>(pair.index_a)];
        const Document& doc_b = documents[static_cast<std::size_t>(pair.index_b)];

        const auto stage1_start = Clock::now();
        ConflictFinding finding;
        try {
            const PairFeatures features = build_features(query, doc_a, doc_b, embedder);
            const Stage1Result first_pass = stage1(features, head1, head2);
            ledger.stage1_latency_ms += elapsed_ms(stage1_start);

            const RoutingDecision decision = route(first_pass, pair, config.threshold);
            if (!decision.escalate()) {
                ++ledger.stage1_resolved;
                finding = *decision.finding;
            } else {
                const Stage2Outcome outcome =
                    stage2(query, doc_a, doc_b, pair, chat, prompts, config.cost);
                ++ledger.stage2_calls;
                ledger.stage2_latency_ms += outcome.latency_ms;
                ledger.estimated_cost_usd += outcome.cost_usd;
                finding = outcome.finding;
            }
        } catch (const TransportError& e) {
            throw TransportError("while judging pair (" + std::to_string(pair.index_a) + ", " +
                                 std::to_string(pair.index_b) + ") of query '" + query.id +
                                 "': " + e.what());
        }
        if (finding.conflict_type != ConflictType::NoConflict) {
            report.findings.push_back(finding);
        }
    }
    report.stage2_calls = ledger.stage2_calls;
    return {report, ledger};
}

ParametricVerdict detect_parametric(const Query& query, std::span<const Document> documents,
                                    ChatProvider& chat, const PromptLibrary& prompts) {
    if (documents.empty()) {
        throw ValidationError("parametric detection requires at least one document");
    }
    ChatRequest closed;
    closed.system_prompt = kDetectionSystemPrompt;
    closed.user_prompt = prompts.render("closed_book", {{"query", query.text}});
    closed.temperature = 0.0;
    const std::string closed_answer = trim(chat.chat(closed));

    ChatRequest open;
    open.system_prompt = kDetectionSystemPrompt;
    open.user_prompt = prompts.render(
        "open_book",
        {{"query", query.text}, {"documents", render_documents_plain(documents)}});
    open.temperature = 0.0;
    const std::string open_answer = trim(chat.chat(open));

    ChatRequest compare;
    compare.system_prompt = kDetectionSystemPrompt;
    compare.user_prompt = prompts.render("parametric_compare", {{"query", query.text},
                                                                {"answer_a", closed_answer},
                                                                {"answer_b", open_answer}});
    compare.temperature = 0.0;
    const std::string reply = chat.chat(compare);

    ParametricVerdict verdict;
    verdict.closed_book_answer = closed_answer;
    verdict.open_book_answer = open_answer;
    try {
        const StructuredVerdict parsed = parse_verdict(reply);
        verdict.conflicting = parsed.is_conflict;
    } catch (const ParseError&) {
        log_warning("parametric comparison verdict unparseable; assuming no conflict");
        verdict.conflicting = false;
    }
    if (verdict.conflicting) {
        verdict.resolution_note =
            "parametric knowledge disagrees with the documents; retrieved evidence is preferred";
    }
    return verdict;
}

}  // namespace conflictrag
