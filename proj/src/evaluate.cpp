#include "conflictrag/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "conflictrag/errors.hpp"
#include "conflictrag/json_io.hpp"
#include "conflictrag/util.hpp"

namespace conflictrag {

double token_f1(const std::string& prediction, const std::string& gold) {
    const auto pred_tokens = tokenize(prediction);
    const auto gold_tokens = tokenize(gold);
    if (pred_tokens.empty() && gold_tokens.empty()) return 1.0;
    if (pred_tokens.empty() || gold_tokens.empty()) return 0.0;

    std::map<std::string, int> pred_counts;
    for (const auto& token : pred_tokens) ++pred_counts[token];
    int overlap = 0;
    for (const auto& token : gold_tokens) {
        auto it = pred_counts.find(token);
        if (it != pred_counts.end() && it->second > 0) {
            --it->second;
            ++overlap;
        }
    }
    if (overlap == 0) return 0.0;
    const double precision = static_cast<double>(overlap) / pred_tokens.size();
    const double recall = static_cast<double>(overlap) / gold_tokens.size();
    return 2.0 * precision * recall / (precision + recall);
}

void CarsWeights::validate() const {
    for (double w : {answer, detection, resolution, source}) {
        if (!std::isfinite(w) || w < 0.0) throw ValidationError("CARS weights must be non-negative");
    }
    if (std::abs(answer + detection + resolution + source - 1.0) > 1e-9) {
        throw ValidationError("CARS weights must sum to 1");
    }
}

void CarsComponents::validate() const {
    for (double c : {ac, cda, ra, sf}) {
        if (!std::isfinite(c) || c < 0.0 || c > 1.0) {
            throw ValidationError("CARS components must be in [0,1]");
        }
    }
}

double cars(const CarsComponents& components, const CarsWeights& weights) {
    weights.validate();
    components.validate();
    return weights.answer * components.ac + weights.detection * components.cda +
           weights.resolution * components.ra + weights.source * components.sf;
}

DetectionMetrics detection_metrics(const ConflictReport& predicted,
                                   const std::vector<GoldConflict>& gold, int document_count) {
    std::map<DocumentPair, ConflictType> gold_by_pair;
    for (const GoldConflict& entry : gold) {
        entry.validate(document_count);
        gold_by_pair[entry.pair] = entry.conflict_type;
    }
    std::map<DocumentPair, ConflictType> predicted_by_pair;
    for (const ConflictFinding& finding : predicted.findings) {
        if (finding.pair.index_b >= document_count) {
            throw ValidationError("predicted pair out of range");
        }
        predicted_by_pair[finding.pair] = finding.conflict_type;
    }

    DetectionMetrics metrics;
    int type_correct = 0;
    for (const auto& [pair, type] : predicted_by_pair) {
        auto it = gold_by_pair.find(pair);
        if (it != gold_by_pair.end()) {
            ++metrics.true_positives;
            if (it->second == type) ++type_correct;
        } else {
            ++metrics.false_positives;
        }
    }
    metrics.false_negatives = static_cast<int>(gold_by_pair.size()) - metrics.true_positives;

    const bool no_predictions = predicted_by_pair.empty();
    const bool no_gold = gold_by_pair.empty();
    if (no_predictions && no_gold) {
        metrics.precision = metrics.recall = metrics.f1 = metrics.type_accuracy = 1.0;
        return metrics;
    }
    metrics.precision = no_predictions
                            ? 0.0
                            : static_cast<double>(metrics.true_positives) /
                                  static_cast<double>(predicted_by_pair.size());
    metrics.recall = no_gold ? 1.0
                             : static_cast<double>(metrics.true_positives) /
                                   static_cast<double>(gold_by_pair.size());
    metrics.f1 = (metrics.precision + metrics.recall) > 0.0
                     ? 2.0 * metrics.precision * metrics.recall /
                           (metrics.precision + metrics.recall)
                     : 0.0;
    metrics.type_accuracy = metrics.true_positives > 0
                                ? static_cast<double>(type_correct) /
                                      static_cast<double>(metrics.true_positives)
                                : 1.0;
    return metrics;
}

namespace {

std::vector<int> ranking_by_cars(const std::vector<std::pair<std::string, CarsComponents>>& systems,
                                 const CarsWeights& weights) {
    std::vector<int> order(systems.size());
    std::vector<double> scores(systems.size());
    for (std::size_t i = 0; i < systems.size(); ++i) {
        order[i] = static_cast<int>(i);
        scores[i] = cars(systems[i].second, weights);
    }
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return scores[static_cast<std::size_t>(a)] > scores[static_cast<std::size_t>(b)];
    });
    return order;
}

}  // namespace

WeightSweepResult cars_weight_sweep(const std::vector<std::pair<std::string, CarsComponents>>& systems,
                                    const CarsWeights& base, double delta) {
    if (systems.size() < 2) {
        throw ValidationError("weight sweep needs at least two systems");
    }
    base.validate();
    const std::vector<int> baseline = ranking_by_cars(systems, base);

    WeightSweepResult result;
    for (int component = 0; component < 4; ++component) {
        for (double sign : {+1.0, -1.0}) {
            double raw[4] = {base.answer, base.detection, base.resolution, base.source};
            raw[component] = std::max(0.0, raw[component] + sign * delta);
            const double sum = raw[0] + raw[1] + raw[2] + raw[3];
            CarsWeights variant{raw[0] / sum, raw[1] / sum, raw[2] / sum, raw[3] / sum};
            ++result.variants_checked;
            const std::vector<int> order = ranking_by_cars(systems, variant);
            if (order != baseline) {
                result.ranking_stable = false;
                std::ostringstream flip;
                flip << "shift " << (sign > 0 ? "+" : "-") << delta << " on w"
                     << "adrs"[component] << " reorders systems:";
                for (int idx : order) flip << " " << systems[static_cast<std::size_t>(idx)].first;
                result.flips.push_back(flip.str());
            }
        }
    }
    return result;
}

std::pair<int, std::string> judge_correctness(const Query& query, const std::string& answer_text,
                                              const std::string& gold_answer, ChatProvider& judge) {
    ChatRequest request;
    request.system_prompt = "You are an impartial grader of question answering systems.";
    std::ostringstream prompt;
    prompt << "Evaluate factual correctness regardless of output formatting.\n\n"
           << "Question: " << query.text << "\n"
           << "Gold answer: " << gold_answer << "\n"
           << "Candidate answer:\n" << answer_text << "\n"
           << "\nReply with a single JSON object: {\"correct\": true|false, \"rationale\": \"...\"}";
    request.user_prompt = prompt.str();
    request.temperature = 0.0;

    const std::string reply = judge.chat(request);
    const auto j = nlohmann::json::parse(reply, nullptr, /*allow_exceptions=*/false);
    if (j.is_object() && j.contains("correct") && j["correct"].is_boolean()) {
        return {j["correct"].get<bool>() ? 1 : 0, j.value("rationale", std::string{})};
    }
    // Tolerate prose around the object.
    const auto start = reply.find('{');
    const auto end = reply.rfind('}');
    if (start != std::string::npos && end != std::string::npos && end > start) {
        const auto inner = nlohmann::json::parse(reply.substr(start, end - start + 1), nullptr, false);
        if (inner.is_object() && inner.contains("correct") && inner["correct"].is_boolean()) {
            return {inner["correct"].get<bool>() ? 1 : 0, inner.value("rationale", std::string{})};
        }
    }
    log_warning("judge verdict unparseable for query '" + query.id + "'");
    return {0, "judge-parse-failure"};
}

int rate_quality(const Query& query, const std::string& answer_text, const ConflictReport& report,
                 ChatProvider& judge, QualityDimension dimension) {
    const std::string name =
        dimension == QualityDimension::Resolution ? "resolution" : "transparency";
    const std::string description =
        dimension == QualityDimension::Resolution
            ? "how appropriately the answer resolves the detected conflicts"
            : "how clearly the answer discloses conflicts and cites its sources";

    std::ostringstream conflicts;
    if (report.findings.empty()) {
        conflicts << "(none)";
    } else {
        for (const ConflictFinding& finding : report.findings) {
            conflicts << "- " << to_string(finding.conflict_type) << " conflict between doc "
                      << finding.pair.index_a << " and doc " << finding.pair.index_b << "\n";
        }
    }

    ChatRequest request;
    request.system_prompt = "You are an impartial grader of question answering systems.";
    std::ostringstream prompt;
    prompt << "Rate the " << name << " of the answer on a scale from 1 to 5 (" << description
           << ").\n\n"
           << "Question: " << query.text << "\n"
           << "Answer:\n" << answer_text << "\n\n"
           << "Detected conflicts:\n" << conflicts.str() << "\n"
           << "Reply with a single integer from 1 to 5.";
    request.user_prompt = prompt.str();
    request.temperature = 0.0;

    const std::string reply = judge.chat(request);
    int rating = 0;
    bool found = false;
    for (std::size_t i = 0; i < reply.size(); ++i) {
        if (std::isdigit(static_cast<unsigned char>(reply[i]))) {
            rating = reply[i] - '0';
            found = true;
            break;
        }
    }
    if (!found) {
        log_warning("quality rating unparseable; defaulting to 1");
        return 1;
    }
    if (rating < 1 || rating > 5) {
        log_warning("quality rating " + std::to_string(rating) + " clamped to [1,5]");
        rating = std::clamp(rating, 1, 5);
    }
    return rating;
}

double rescale_rating(int rating) {
    return (std::clamp(rating, 1, 5) - 1) / 4.0;
}

double paired_bootstrap(const std::vector<double>& scores_a, const std::vector<double>& scores_b,
                        int resamples, std::uint64_t seed) {
    if (scores_a.size() != scores_b.size()) {
        throw ValidationError("paired bootstrap requires equal-length score lists");
    }
    if (scores_a.size() < 2) {
        throw ValidationError("paired bootstrap requires at least two paired scores");
    }
    if (resamples < 1) {
        throw ValidationError("paired bootstrap requires at least one resample");
    }
    const std::size_t n = scores_a.size();
    std::vector<double> deltas(n);
    for (std::size_t i = 0; i < n; ++i) deltas[i] = scores_a[i] - scores_b[i];

    Rng rng(seed);
    long at_or_below_zero = 0;
    long at_or_above_zero = 0;
    for (int r = 0; r < resamples; ++r) {
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) sum += deltas[rng.next_below(n)];
        const double mean = sum / static_cast<double>(n);
        if (mean <= 0.0) ++at_or_below_zero;
        if (mean >= 0.0) ++at_or_above_zero;
    }
    const double tail = static_cast<double>(std::min(at_or_below_zero, at_or_above_zero) + 1) /
                        static_cast<double>(resamples + 1);
    return std::min(1.0, 2.0 * tail);
}

double source_fidelity(const AnnotatedAnswer& answer, const ResolvedContext& resolved) {
    if (answer.source_attribution.empty()) return 0.0;
    std::set<std::string> credible;
    for (const ResolvedDocument& entry : resolved.documents) {
        if (entry.role == RoleTag::PrimarySource || entry.role == RoleTag::Perspective) {
            credible.insert(entry.doc.source);
        }
    }
    if (credible.empty()) {
        // No resolution happened; any document source counts.
        for (const ResolvedDocument& entry : resolved.documents) credible.insert(entry.doc.source);
    }
    int matching = 0;
    for (const SourceAttribution& attribution : answer.source_attribution) {
        if (credible.count(attribution.source) > 0) ++matching;
    }
    return static_cast<double>(matching) / static_cast<double>(answer.source_attribution.size());
}

namespace {

nlohmann::json answer_to_json(const AnnotatedAnswer& answer) {
    nlohmann::json attributions = nlohmann::json::array();
    for (const SourceAttribution& attribution : answer.source_attribution) {
        nlohmann::json entry{{"source", attribution.source}};
        if (attribution.claim) entry["claim"] = *attribution.claim;
        attributions.push_back(entry);
    }
    return nlohmann::json{{"answer", answer.answer},
                          {"conflict_annotations", answer.conflict_annotations},
                          {"source_attribution", attributions},
                          {"confidence", to_string(answer.confidence)},
                          {"confidence_reason", answer.confidence_reason}};
}

AnnotatedAnswer answer_from_json(const nlohmann::json& j) {
    AnnotatedAnswer answer;
    answer.answer = j.value("answer", std::string{});
    for (const auto& line : j.value("conflict_annotations", nlohmann::json::array())) {
        answer.conflict_annotations.push_back(line.get<std::string>());
    }
    for (const auto& entry : j.value("source_attribution", nlohmann::json::array())) {
        SourceAttribution attribution;
        attribution.source = entry.value("source", std::string{});
        if (entry.contains("claim")) attribution.claim = entry["claim"].get<std::string>();
        answer.source_attribution.push_back(std::move(attribution));
    }
    const std::string level = j.value("confidence", std::string{"Moderate"});
    answer.confidence = level == "High"   ? ConfidenceLevel::High
                        : level == "Low"  ? ConfidenceLevel::Low
                                          : ConfidenceLevel::Moderate;
    answer.confidence_reason = j.value("confidence_reason", std::string{});
    return answer;
}

nlohmann::json ledger_to_json(const DetectionCostLedger& ledger) {
    return nlohmann::json{{"pairs_total", ledger.pairs_total},
                          {"stage1_resolved", ledger.stage1_resolved},
                          {"stage2_calls", ledger.stage2_calls},
                          {"stage1_latency_ms", ledger.stage1_latency_ms},
                          {"stage2_latency_ms", ledger.stage2_latency_ms},
                          {"estimated_cost_usd", ledger.estimated_cost_usd}};
}

DetectionCostLedger ledger_from_json(const nlohmann::json& j) {
    DetectionCostLedger ledger;
    ledger.pairs_total = j.value("pairs_total", 0);
    ledger.stage1_resolved = j.value("stage1_resolved", 0);
    ledger.stage2_calls = j.value("stage2_calls", 0);
    ledger.stage1_latency_ms = j.value("stage1_latency_ms", 0.0);
    ledger.stage2_latency_ms = j.value("stage2_latency_ms", 0.0);
    ledger.estimated_cost_usd = j.value("estimated_cost_usd", 0.0);
    return ledger;
}

}  // namespace

void save_run_file(const std::string& path, const std::vector<RunRecord>& records) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write run file '" + path + "'");
    for (const RunRecord& record : records) {
        nlohmann::json j{{"query_id", record.query_id},
                         {"answer", answer_to_json(record.answer)},
                         {"formatted_answer", record.formatted_answer},
                         {"report", to_json(record.report)},
                         {"ledger", ledger_to_json(record.ledger)},
                         {"scores", record.scores}};
        out << j.dump() << "\n";
    }
}

std::vector<RunRecord> load_run_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open run file '" + path + "'");
    std::vector<RunRecord> records;
    std::string line;
    int line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (trim(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError(path + ":" + std::to_string(line_number) + ": invalid JSON: " + e.what());
        }
        RunRecord record;
        record.query_id = j.value("query_id", std::string{});
        record.answer = answer_from_json(j.value("answer", nlohmann::json::object()));
        record.formatted_answer = j.value("formatted_answer", std::string{});
        record.report = report_from_json(j.value("report", nlohmann::json::object()));
        record.ledger = ledger_from_json(j.value("ledger", nlohmann::json::object()));
        for (const auto& [key, value] : j.value("scores", nlohmann::json::object()).items()) {
            record.scores[key] = value.get<double>();
        }
        records.push_back(std::move(record));
    }
    return records;
}

std::string EvalSummary::csv_header() {
    return "method,queries,correctness,token_f1,detection_precision,detection_recall,"
           "detection_f1,type_accuracy,resolution,transparency,cars,stage2_call_rate,"
           "estimated_cost_usd,failed_queries";
}

std::string EvalSummary::to_csv_row() const {
    std::ostringstream out;
    auto num = [](double v) {
        char buffer[32];
        std::snprintf(buffer, sizeof(buffer), "%.4f", v);
        return std::string(buffer);
    };
    out << method << "," << queries << "," << num(correctness) << "," << num(token_f1) << ",";
    if (detection) {
        out << num(detection->precision) << "," << num(detection->recall) << ","
            << num(detection->f1) << "," << num(detection->type_accuracy) << ",";
    } else {
        out << "n/a,n/a,n/a,n/a,";
    }
    out << num(resolution_rating) << "," << num(transparency_rating) << "," << num(cars_score)
        << "," << num(stage2_call_rate) << ",";
    char cost[32];
    std::snprintf(cost, sizeof(cost), "%.6f", estimated_cost_usd);
    out << cost << "," << failed_queries;
    return out.str();
}

std::string EvalSummary::to_table() const {
    std::ostringstream out;
    auto row = [&](const std::string& label, const std::string& value) {
        out << "  " << label;
        for (std::size_t i = label.size(); i < 24; ++i) out << ' ';
        out << value << "\n";
    };
    auto num = [](double v) {
        char buffer[32];
        std::snprintf(buffer, sizeof(buffer), "%.4f", v);
        return std::string(buffer);
    };
    out << "== " << method << " (" << queries << " queries) ==\n";
    row("correctness", num(correctness));
    row("token F1", num(token_f1));
    if (detection) {
        row("detection P", num(detection->precision));
        row("detection R", num(detection->recall));
        row("detection F1", num(detection->f1));
        row("type accuracy", num(detection->type_accuracy));
    } else {
        row("detection", "n/a (no gold conflict labels)");
    }
    row("resolution (1-5)", num(resolution_rating));
    row("transparency (1-5)", num(transparency_rating));
    row("CARS", num(cars_score));
    row("stage-2 call rate", num(stage2_call_rate));
    char cost[32];
    std::snprintf(cost, sizeof(cost), "$%.6f", estimated_cost_usd);
    row("estimated cost", cost);
    if (failed_queries > 0) {
        row("failed queries", std::to_string(failed_queries));
    }
    return out.str();
}

}  // namespace conflictrag
