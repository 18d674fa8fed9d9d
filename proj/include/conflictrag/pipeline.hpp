#pragma once

#include <memory>
#include <string>
#include <vector>

#include "conflictrag/config.hpp"
#include "conflictrag/dataset.hpp"
#include "conflictrag/detect.hpp"
#include "conflictrag/evaluate.hpp"
#include "conflictrag/generate.hpp"
#include "conflictrag/prompts.hpp"
#include "conflictrag/providers.hpp"
#include "conflictrag/resolve.hpp"
#include "conflictrag/retrieval.hpp"

namespace conflictrag {

struct ProviderSet {
    std::shared_ptr<EmbeddingProvider> embedder;
    std::shared_ptr<ChatProvider> generator;
    std::shared_ptr<ChatProvider> judge;
};

/// Mock or HTTP providers per the config. Refuses a judge that shares the
/// generator's model id unless allow_self_judge is set.
ProviderSet make_providers(const PipelineConfig& config);

enum class PipelineMode {
    ConflictAware,  // retrieve -> detect -> resolve -> generate
    StandardRag,    // retrieve -> generate over the concatenated top-K
    RerankTop1,     // generate from the single top-ranked document
};

PipelineMode pipeline_mode_from_string(const std::string& name);

struct AskResult {
    std::vector<RetrievedDocument> retrieved;
    ConflictReport report;
    DetectionCostLedger ledger;
    ResolvedContext resolved;
    AnnotatedAnswer answer;
    std::string formatted_answer;
};

struct EvalOptions {
    PipelineMode mode = PipelineMode::ConflictAware;
    bool strip_annotations = false;
};

struct EvalResult {
    EvalSummary summary;
    std::vector<RunRecord> records;
};

class Pipeline {
public:
    explicit Pipeline(PipelineConfig config);
    Pipeline(PipelineConfig config, ProviderSet providers);  // test injection

    const PipelineConfig& config() const { return config_; }
    const ProviderSet& providers() const { return providers_; }
    const PromptLibrary& prompts() const { return prompts_; }

    /// Answers one question against an indexed corpus.
    AskResult ask(const std::string& question, const InvertedIndex& index,
                  PipelineMode mode = PipelineMode::ConflictAware,
                  bool strip_annotations = false) const;

    /// Runs one dataset record through the pipeline; gold-based scores are
    /// filled in when labels are present. Findings in the returned record use
    /// dataset document coordinates.
    RunRecord run_record(const DatasetRecord& record, const EvalOptions& options) const;

    /// Evaluates a whole dataset with the configured worker count. Failures
    /// are recorded per query; the run continues.
    EvalResult evaluate(const std::vector<DatasetRecord>& records, const EvalOptions& options) const;

private:
    PipelineConfig config_;
    ProviderSet providers_;
    PromptLibrary prompts_;
    MlpModel head1_;
    MlpModel head2_;
};

/// Builds labeled pair examples from the gold conflict annotations of a
/// dataset (pairs enumerated over each record's document list).
std::vector<LabeledPairExample> build_pair_examples(const std::vector<DatasetRecord>& records,
                                                    EmbeddingProvider& embedder);

struct DetectorTrainingReport {
    TrainResult head1;
    TrainResult head2;
    double head1_val_accuracy = 0.0;
    double head2_val_accuracy = 0.0;
    std::vector<double> head2_per_class_f1;  // indexed by ConflictType value
    int train_count = 0;
    int val_count = 0;
};

/// Shuffles, splits and trains both heads; also computes validation accuracy
/// and per-class F1 for reporting.
DetectorTrainingReport train_detector(const std::vector<DatasetRecord>& records,
                                      EmbeddingProvider& embedder, const TrainConfig& config,
                                      double val_fraction = 0.2);

}  // namespace conflictrag
