#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "conflictrag/detect.hpp"
#include "conflictrag/generate.hpp"
#include "conflictrag/providers.hpp"
#include "conflictrag/resolve.hpp"
#include "conflictrag/types.hpp"

namespace conflictrag {

/// Token-level F1 over lowercase alphanumeric token multisets. Both empty ->
/// 1.0; exactly one empty -> 0.0. Symmetric.
double token_f1(const std::string& prediction, const std::string& gold);

struct CarsWeights {
    double answer = 0.35;
    double detection = 0.25;
    double resolution = 0.25;
    double source = 0.15;

    void validate() const;  // non-negative, sum to 1 within 1e-9
};

struct CarsComponents {
    double ac = 0.0;   // answer correctness
    double cda = 0.0;  // conflict detection F1
    double ra = 0.0;   // resolution appropriateness, rescaled to [0,1]
    double sf = 0.0;   // source fidelity

    void validate() const;
};

double cars(const CarsComponents& components, const CarsWeights& weights);

struct DetectionMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double type_accuracy = 0.0;  // over true-positive pairs; 1.0 when there are none
    int true_positives = 0;
    int false_positives = 0;
    int false_negatives = 0;
};

/// Pair-level binary precision/recall/F1 plus type accuracy over correctly
/// detected pairs. Empty-vs-empty scores 1 across the board.
DetectionMetrics detection_metrics(const ConflictReport& predicted,
                                   const std::vector<GoldConflict>& gold, int document_count);

struct WeightSweepResult {
    bool ranking_stable = true;
    int variants_checked = 0;
    std::vector<std::string> flips;  // human-readable descriptions of ranking changes
};

/// Shifts each CARS weight by +-delta (clamped at 0, renormalized) and checks
/// whether the system ordering by CARS survives every variant.
WeightSweepResult cars_weight_sweep(const std::vector<std::pair<std::string, CarsComponents>>& systems,
                                    const CarsWeights& base, double delta = 0.1);

/// LLM-as-judge binary correctness at temperature 0. Unparseable verdicts
/// score 0 with rationale "judge-parse-failure".
std::pair<int, std::string> judge_correctness(const Query& query, const std::string& answer_text,
                                              const std::string& gold_answer, ChatProvider& judge);

enum class QualityDimension { Resolution, Transparency };

/// 1-5 LLM rating; out-of-range replies are clamped with a warning.
int rate_quality(const Query& query, const std::string& answer_text, const ConflictReport& report,
                 ChatProvider& judge, QualityDimension dimension);

/// (rating - 1) / 4, the [0,1] rescaling used inside CARS.
double rescale_rating(int rating);

/// Two-sided paired bootstrap p-value for the mean difference, resampling
/// query indices with replacement. Deterministic for a fixed seed.
double paired_bootstrap(const std::vector<double>& scores_a, const std::vector<double>& scores_b,
                        int resamples = 10000, std::uint64_t seed = 0);

/// Fraction of attribution entries naming the resolved primary source (or any
/// presented perspective). No attributions -> 0.
double source_fidelity(const AnnotatedAnswer& answer, const ResolvedContext& resolved);

/// One evaluated query, serialized as a line in the run file.
struct RunRecord {
    std::string query_id;
    AnnotatedAnswer answer;
    std::string formatted_answer;
    ConflictReport report;
    DetectionCostLedger ledger;
    std::map<std::string, double> scores;
};

void save_run_file(const std::string& path, const std::vector<RunRecord>& records);
std::vector<RunRecord> load_run_file(const std::string& path);

/// Corpus-level aggregate of one evaluation run.
struct EvalSummary {
    std::string method;
    int queries = 0;
    double correctness = 0.0;
    double token_f1 = 0.0;
    std::optional<DetectionMetrics> detection;  // absent when no query had gold labels
    double resolution_rating = 0.0;             // mean raw 1-5
    double transparency_rating = 0.0;
    double cars_score = 0.0;
    double stage2_call_rate = 0.0;
    double estimated_cost_usd = 0.0;
    int failed_queries = 0;

    std::string to_table() const;
    std::string to_csv_row() const;
    static std::string csv_header();
};

}  // namespace conflictrag
