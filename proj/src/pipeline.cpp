#include "conflictrag/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <numeric>
#include <thread>
#include <tuple>

#include "conflictrag/errors.hpp"
#include "conflictrag/http_provider.hpp"
#include "conflictrag/util.hpp"

namespace conflictrag {

ProviderSet make_providers(const PipelineConfig& config) {
    ProviderSet providers;
    if (config.mock_providers) {
        providers.embedder = std::make_shared<MockEmbeddingProvider>();
        providers.generator =
            std::make_shared<HeuristicChatProvider>(config.seed, "mock-generator");
        providers.judge = std::make_shared<HeuristicChatProvider>(config.seed + 1, "mock-judge");
    } else {
        auto endpoint_config = [&](const EndpointConfig& endpoint) {
            HttpProviderConfig http;
            http.base_url = endpoint.base_url;
            http.model = endpoint.model;
            http.api_key_env = endpoint.api_key_env;
            return http;
        };
        providers.embedder = std::make_shared<HttpEmbeddingProvider>(endpoint_config(config.embedder));
        providers.generator = std::make_shared<HttpChatProvider>(endpoint_config(config.generator));
        providers.judge = std::make_shared<HttpChatProvider>(endpoint_config(config.judge));
    }
    if (!config.allow_self_judge &&
        providers.judge->model_id() == providers.generator->model_id()) {
        throw ConfigError("judge model '" + providers.judge->model_id() +
                          "' matches the generator; pass allow_self_judge to permit this");
    }
    return providers;
}

PipelineMode pipeline_mode_from_string(const std::string& name) {
    if (name == "conflict-aware" || name == "pipeline") return PipelineMode::ConflictAware;
    if (name == "standard") return PipelineMode::StandardRag;
    if (name == "rerank-top1") return PipelineMode::RerankTop1;
    throw ConfigError("unknown pipeline mode '" + name + "'");
}

namespace {

MlpModel load_head(const std::string& path, HeadKind kind) {
    if (path.empty()) {
        return MlpModel::zeros(kind);  // uniform confidence: every pair escalates
    }
    MlpModel model = load_model(path);
    if (model.kind() != kind) {
        throw ConfigError("model file '" + path + "' holds a " + to_string(model.kind()) +
                          " head where a " + to_string(kind) + " head was expected");
    }
    return model;
}

/// Identity resolution: retrieval order, no roles, no strategies.
ResolvedContext passthrough_context(std::span<const Document> documents) {
    ResolvedContext context;
    for (std::size_t i = 0; i < documents.size(); ++i) {
        ResolvedDocument resolved;
        resolved.doc = documents[i];
        resolved.original_index = static_cast<int>(i);
        context.documents.push_back(std::move(resolved));
    }
    return context;
}

}  // namespace

Pipeline::Pipeline(PipelineConfig config) : Pipeline(std::move(config), ProviderSet{}) {
    providers_ = make_providers(config_);
}

Pipeline::Pipeline(PipelineConfig config, ProviderSet providers)
    : config_(std::move(config)),
      providers_(std::move(providers)),
      prompts_(PromptLibrary::load(config_.templates_dir)),
      head1_(load_head(config_.head1_path, HeadKind::Binary)),
      head2_(load_head(config_.head2_path, HeadKind::FourWay)) {
    config_.validate();
}

AskResult Pipeline::ask(const std::string& question, const InvertedIndex& index,
                        PipelineMode mode, bool strip_annotations) const {
    AskResult result;
    const std::vector<EmbeddingVector> corpus_embeddings = embed_corpus(index, *providers_.embedder);
    result.retrieved =
        hybrid_retrieve(question, index, *providers_.embedder, corpus_embeddings, config_.retrieval);
    if (result.retrieved.empty()) {
        throw ValidationError("retrieval returned no documents");
    }
    if (mode == PipelineMode::RerankTop1) {
        result.retrieved.resize(1);
    }

    Query query;
    query.id = "ask";
    query.text = question;

    std::vector<Document> documents;
    for (const RetrievedDocument& retrieved : result.retrieved) documents.push_back(retrieved.doc);

    if (mode == PipelineMode::ConflictAware) {
        DetectorConfig detector;
        detector.threshold.tau_c = config_.tau_c;
        detector.cost = config_.cost;
        auto [report, ledger] = detect_conflicts(query, documents, head1_, head2_, detector,
                                                 *providers_.embedder, *providers_.generator,
                                                 prompts_);
        if (config_.parametric) {
            report.parametric =
                detect_parametric(query, documents, *providers_.generator, prompts_);
        }
        result.report = std::move(report);
        result.ledger = ledger;
        result.resolved = resolve(query, documents, result.report, *providers_.generator,
                                  prompts_, config_.resolve);
    } else {
        result.report.pairs_examined = 0;  // baselines skip pair examination
        result.resolved = passthrough_context(documents);
    }

    const ChatRequest request = build_generation_prompt(query, result.resolved, result.report,
                                                        prompts_, config_.generation);
    result.answer = generate_answer(request, result.report, result.resolved, *providers_.generator);
    result.formatted_answer = mode == PipelineMode::ConflictAware
                                  ? format_answer(result.answer, strip_annotations)
                                  : result.answer.answer;
    return result;
}

RunRecord Pipeline::run_record(const DatasetRecord& record, const EvalOptions& options) const {
    if (record.documents.empty()) {
        throw ValidationError("record '" + record.query.id + "' has no documents");
    }
    InvertedIndex index = InvertedIndex::build(record.documents);
    const std::vector<EmbeddingVector> corpus_embeddings = embed_corpus(index, *providers_.embedder);
    std::vector<RetrievedDocument> retrieved = hybrid_retrieve(
        record.query.text, index, *providers_.embedder, corpus_embeddings, config_.retrieval);
    if (options.mode == PipelineMode::RerankTop1) {
        retrieved.resize(1);
    }
    std::vector<Document> documents;
    for (const RetrievedDocument& entry : retrieved) documents.push_back(entry.doc);

    RunRecord run;
    run.query_id = record.query.id;

    ConflictReport report;  // in retrieved-list coordinates while the pipeline runs
    DetectionCostLedger ledger;
    ResolvedContext resolved;
    if (options.mode == PipelineMode::ConflictAware) {
        DetectorConfig detector;
        detector.threshold.tau_c = config_.tau_c;
        detector.cost = config_.cost;
        std::tie(report, ledger) =
            detect_conflicts(record.query, documents, head1_, head2_, detector,
                             *providers_.embedder, *providers_.generator, prompts_);
        resolved = resolve(record.query, documents, report, *providers_.generator, prompts_,
                           config_.resolve);
    } else {
        resolved = passthrough_context(documents);
    }

    const ChatRequest request = build_generation_prompt(record.query, resolved, report, prompts_,
                                                        config_.generation);
    run.answer = generate_answer(request, report, resolved, *providers_.generator);
    run.formatted_answer = options.mode == PipelineMode::ConflictAware
                               ? format_answer(run.answer, options.strip_annotations)
                               : run.answer.answer;
    run.ledger = ledger;

    // Store findings in dataset coordinates so they compare against gold
    // labels and stay meaningful outside this retrieval pass.
    run.report = report;
    for (ConflictFinding& finding : run.report.findings) {
        int a = retrieved[static_cast<std::size_t>(finding.pair.index_a)].index;
        int b = retrieved[static_cast<std::size_t>(finding.pair.index_b)].index;
        if (a > b) std::swap(a, b);
        finding.pair = DocumentPair{a, b};
    }

    if (record.query.gold_answer) {
        const auto [correct, rationale] =
            judge_correctness(record.query, run.formatted_answer, *record.query.gold_answer,
                              *providers_.judge);
        run.scores["correctness"] = correct;
        run.scores["token_f1"] = token_f1(run.answer.answer, *record.query.gold_answer);
    }
    if (record.query.gold_conflicts) {
        const DetectionMetrics metrics =
            detection_metrics(run.report, *record.query.gold_conflicts,
                              static_cast<int>(record.documents.size()));
        run.scores["detection_precision"] = metrics.precision;
        run.scores["detection_recall"] = metrics.recall;
        run.scores["detection_f1"] = metrics.f1;
        run.scores["type_accuracy"] = metrics.type_accuracy;
        run.scores["true_positives"] = metrics.true_positives;
        run.scores["false_positives"] = metrics.false_positives;
        run.scores["false_negatives"] = metrics.false_negatives;
    }
    run.scores["resolution_rating"] = rate_quality(record.query, run.formatted_answer, run.report,
                                                   *providers_.judge, QualityDimension::Resolution);
    run.scores["transparency_rating"] =
        rate_quality(record.query, run.formatted_answer, run.report, *providers_.judge,
                     QualityDimension::Transparency);
    run.scores["source_fidelity"] = source_fidelity(run.answer, resolved);
    run.scores["stage2_calls"] = ledger.stage2_calls;
    run.scores["pairs_total"] = ledger.pairs_total;
    return run;
}

EvalResult Pipeline::evaluate(const std::vector<DatasetRecord>& records,
                              const EvalOptions& options) const {
    EvalResult result;
    result.records.resize(records.size());
    std::vector<char> failed(records.size(), 0);

    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= records.size()) break;
            try {
                result.records[i] = run_record(records[i], options);
            } catch (const Error& e) {
                log_warning("query '" + records[i].query.id + "' failed: " + e.what());
                result.records[i].query_id = records[i].query.id;
                result.records[i].formatted_answer = std::string{"ERROR: "} + e.what();
                failed[i] = 1;
            }
        }
    };
    const int worker_count = std::max(1, std::min<int>(config_.workers,
                                                       static_cast<int>(records.size())));
    if (worker_count == 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        for (int t = 0; t < worker_count; ++t) threads.emplace_back(worker);
        for (std::thread& thread : threads) thread.join();
    }

    // Aggregate.
    EvalSummary& summary = result.summary;
    switch (options.mode) {
        case PipelineMode::ConflictAware:
            summary.method = options.strip_annotations ? "conflict-aware (stripped)"
                                                       : "conflict-aware";
            break;
        case PipelineMode::StandardRag: summary.method = "standard-rag"; break;
        case PipelineMode::RerankTop1: summary.method = "rerank-top1"; break;
    }
    summary.queries = static_cast<int>(records.size());

    double correct_sum = 0.0, f1_sum = 0.0, resolution_sum = 0.0, transparency_sum = 0.0;
    double sf_sum = 0.0;
    int judged = 0, rated = 0;
    long tp = 0, fp = 0, fn = 0;
    long type_correct_scaled = 0;  // sums of type_accuracy * tp per query
    long labeled_tp = 0;
    bool any_labels = false;
    long stage2 = 0, pairs = 0;
    for (std::size_t i = 0; i < result.records.size(); ++i) {
        if (failed[i] != 0) {
            ++summary.failed_queries;
            continue;
        }
        const RunRecord& run = result.records[i];
        if (run.scores.count("correctness") > 0) {
            correct_sum += run.scores.at("correctness");
            f1_sum += run.scores.at("token_f1");
            ++judged;
        }
        if (run.scores.count("detection_f1") > 0) {
            any_labels = true;
            tp += static_cast<long>(run.scores.at("true_positives"));
            fp += static_cast<long>(run.scores.at("false_positives"));
            fn += static_cast<long>(run.scores.at("false_negatives"));
            type_correct_scaled += static_cast<long>(std::lround(
                run.scores.at("type_accuracy") * run.scores.at("true_positives")));
            labeled_tp += static_cast<long>(run.scores.at("true_positives"));
        }
        resolution_sum += run.scores.at("resolution_rating");
        transparency_sum += run.scores.at("transparency_rating");
        sf_sum += run.scores.at("source_fidelity");
        ++rated;
        stage2 += run.ledger.stage2_calls;
        pairs += run.ledger.pairs_total;
        summary.estimated_cost_usd += run.ledger.estimated_cost_usd;
    }
    summary.correctness = judged > 0 ? correct_sum / judged : 0.0;
    summary.token_f1 = judged > 0 ? f1_sum / judged : 0.0;
    if (any_labels) {
        DetectionMetrics micro;
        micro.true_positives = static_cast<int>(tp);
        micro.false_positives = static_cast<int>(fp);
        micro.false_negatives = static_cast<int>(fn);
        micro.precision = (tp + fp) > 0 ? static_cast<double>(tp) / (tp + fp)
                                        : (fn == 0 ? 1.0 : 0.0);
        micro.recall = (tp + fn) > 0 ? static_cast<double>(tp) / (tp + fn) : 1.0;
        micro.f1 = (micro.precision + micro.recall) > 0.0
                       ? 2.0 * micro.precision * micro.recall / (micro.precision + micro.recall)
                       : 0.0;
        micro.type_accuracy =
            labeled_tp > 0 ? static_cast<double>(type_correct_scaled) / labeled_tp : 1.0;
        summary.detection = micro;
    }
    summary.resolution_rating = rated > 0 ? resolution_sum / rated : 0.0;
    summary.transparency_rating = rated > 0 ? transparency_sum / rated : 0.0;
    summary.stage2_call_rate = pairs > 0 ? static_cast<double>(stage2) / pairs : 0.0;

    CarsComponents components;
    components.ac = summary.correctness;
    components.cda = summary.detection ? summary.detection->f1 : 0.0;
    components.ra =
        rated > 0 ? std::clamp((summary.resolution_rating - 1.0) / 4.0, 0.0, 1.0) : 0.0;
    components.sf = rated > 0 ? sf_sum / rated : 0.0;
    summary.cars_score = cars(components, config_.cars_weights);
    return result;
}

std::vector<LabeledPairExample> build_pair_examples(const std::vector<DatasetRecord>& records,
                                                    EmbeddingProvider& embedder) {
    std::vector<LabeledPairExample> examples;
    bool any_labels = false;
    for (const DatasetRecord& record : records) {
        if (!record.query.gold_conflicts) continue;
        any_labels = true;
        std::map<DocumentPair, ConflictType> gold;
        for (const GoldConflict& entry : *record.query.gold_conflicts) {
            gold[entry.pair] = entry.conflict_type;
        }
        for (const DocumentPair& pair : enumerate_pairs(static_cast<int>(record.documents.size()))) {
            const PairFeatures features = build_features(
                record.query, record.documents[static_cast<std::size_t>(pair.index_a)],
                record.documents[static_cast<std::size_t>(pair.index_b)], embedder);
            LabeledPairExample example;
            example.features = features.values;
            auto it = gold.find(pair);
            example.type_label = it == gold.end() ? ConflictType::NoConflict : it->second;
            example.binary_label = example.type_label == ConflictType::NoConflict ? 0 : 1;
            examples.push_back(std::move(example));
        }
    }
    if (!any_labels) {
        throw ValidationError(
            "no record carries gold_conflicts; detector training needs labeled pairs");
    }
    return examples;
}

namespace {

double accuracy_of(const MlpModel& model, const std::vector<LabeledPairExample>& examples,
                   int begin, int count, HeadKind head) {
    if (count <= 0) return 0.0;
    int correct = 0;
    for (int i = begin; i < begin + count; ++i) {
        const auto& example = examples[static_cast<std::size_t>(i)];
        const int truth = head == HeadKind::Binary ? example.binary_label
                                                   : static_cast<int>(example.type_label);
        if (predict_with_confidence(model, example.features).first == truth) ++correct;
    }
    return static_cast<double>(correct) / count;
}

}  // namespace

DetectorTrainingReport train_detector(const std::vector<DatasetRecord>& records,
                                      EmbeddingProvider& embedder, const TrainConfig& config,
                                      double val_fraction) {
    if (val_fraction <= 0.0 || val_fraction >= 1.0) {
        throw ValidationError("val_fraction must be in (0,1)");
    }
    std::vector<LabeledPairExample> examples = build_pair_examples(records, embedder);
    Rng rng(config.seed ^ 0x5851f42d4c957f2dULL);
    rng.shuffle(examples);

    const int total = static_cast<int>(examples.size());
    int val_count = static_cast<int>(std::lround(total * val_fraction));
    val_count = std::clamp(val_count, 1, total - 1);
    const int train_count = total - val_count;

    DetectorTrainingReport report{
        train(examples, {train_count, val_count}, config, HeadKind::Binary),
        train(examples, {train_count, val_count}, config, HeadKind::FourWay),
    };
    report.train_count = train_count;
    report.val_count = val_count;
    report.head1_val_accuracy =
        accuracy_of(report.head1.model, examples, train_count, val_count, HeadKind::Binary);
    report.head2_val_accuracy =
        accuracy_of(report.head2.model, examples, train_count, val_count, HeadKind::FourWay);

    // Per-class F1 for the four-way head on the validation split.
    report.head2_per_class_f1.assign(4, 0.0);
    for (int cls = 0; cls < 4; ++cls) {
        int tp = 0, fp = 0, fn = 0;
        for (int i = train_count; i < train_count + val_count; ++i) {
            const auto& example = examples[static_cast<std::size_t>(i)];
            const int truth = static_cast<int>(example.type_label);
            const int predicted =
                predict_with_confidence(report.head2.model, example.features).first;
            if (predicted == cls && truth == cls) ++tp;
            if (predicted == cls && truth != cls) ++fp;
            if (predicted != cls && truth == cls) ++fn;
        }
        const double p = (tp + fp) > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
        const double r = (tp + fn) > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
        report.head2_per_class_f1[static_cast<std::size_t>(cls)] =
            (p + r) > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
    }
    return report;
}

}  // namespace conflictrag
