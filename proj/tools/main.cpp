#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "conflictrag/dataset.hpp"
#include "conflictrag/errors.hpp"
#include "conflictrag/json_io.hpp"
#include "conflictrag/pipeline.hpp"

namespace {

using namespace conflictrag;

constexpr int kExitOk = 0;
constexpr int kExitEvalFailures = 1;
constexpr int kExitUsage = 2;

struct GlobalOptions {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    bool mock_providers = false;
    std::optional<double> tau_c;
    std::optional<int> k;
    std::optional<std::string> templates_dir;
};

PipelineConfig effective_config(const GlobalOptions& options) {
    PipelineConfig config;
    if (!options.config_path.empty()) {
        config = load_config(options.config_path);
    }
    if (options.mock_providers) config.mock_providers = true;
    if (options.seed) config.seed = *options.seed;
    if (options.tau_c) config.tau_c = *options.tau_c;
    if (options.k) config.retrieval.k = *options.k;
    if (options.templates_dir) config.templates_dir = *options.templates_dir;
    return config;
}

void print_ask_result(const AskResult& result, std::ostream& out) {
    out << result.formatted_answer << "\n";
    out << "\n-- conflict report --\n";
    out << "pairs examined: " << result.report.pairs_examined
        << ", stage-1 resolved: " << result.ledger.stage1_resolved
        << ", stage-2 calls: " << result.ledger.stage2_calls << "\n";
    if (result.report.findings.empty()) {
        out << "no inter-document conflicts detected\n";
    } else {
        for (const ConflictFinding& finding : result.report.findings) {
            char confidence[16];
            std::snprintf(confidence, sizeof(confidence), "%.2f", finding.confidence);
            out << "- " << to_string(finding.conflict_type) << " conflict: docs ("
                << finding.pair.index_a << ", " << finding.pair.index_b << "), confidence "
                << confidence << ", " << to_string(finding.stage) << "\n";
        }
    }
    if (result.report.parametric) {
        const ParametricVerdict& verdict = *result.report.parametric;
        out << "parametric check: " << (verdict.conflicting ? "conflict" : "agreement")
            << " (closed-book: \"" << verdict.closed_book_answer << "\")\n";
        if (verdict.conflicting) out << "  note: " << verdict.resolution_note << "\n";
    }
    for (const std::string& note : result.resolved.notes) {
        out << "note: " << note << "\n";
    }
    char cost[32];
    std::snprintf(cost, sizeof(cost), "%.6f", result.ledger.estimated_cost_usd);
    out << "estimated detection cost: $" << cost << "\n";
}

int run(int argc, char** argv) {
    CLI::App app{"conflict-aware retrieval-augmented generation pipeline"};
    app.require_subcommand(1);

    GlobalOptions global;
    app.add_option("--config", global.config_path, "JSON config file");
    app.add_option("--seed", global.seed, "override the RNG seed");
    app.add_flag("--mock-providers", global.mock_providers,
                 "use the deterministic offline providers");
    app.add_option("--tau-c", global.tau_c, "stage-2 escalation threshold")
        ->check(CLI::Range(0.0, 1.0));
    app.add_option("--k", global.k, "retrieval depth K")->check(CLI::PositiveNumber);
    app.add_option("--templates", global.templates_dir, "prompt template directory");

    // index
    auto* cmd_index = app.add_subcommand("index", "build a BM25 index over a document corpus");
    std::string corpus_path, index_out;
    cmd_index->add_option("corpus", corpus_path, "line-delimited document corpus")->required();
    cmd_index->add_option("--out", index_out, "index file to write")->required();

    // train-detector
    auto* cmd_train = app.add_subcommand("train-detector", "train the two classifier heads");
    std::string train_dataset, head1_out = "head1.mlp", head2_out = "head2.mlp";
    TrainConfig train_config;
    double val_fraction = 0.2;
    cmd_train->add_option("dataset", train_dataset, "dataset with gold_conflicts")->required();
    cmd_train->add_option("--out-head1", head1_out, "binary head output path");
    cmd_train->add_option("--out-head2", head2_out, "four-way head output path");
    cmd_train->add_option("--epochs", train_config.max_epochs, "max epochs");
    cmd_train->add_option("--batch-size", train_config.batch_size, "batch size");
    cmd_train->add_option("--lr", train_config.learning_rate, "Adam learning rate");
    cmd_train->add_option("--patience", train_config.patience, "early stopping patience");
    cmd_train->add_option("--val-fraction", val_fraction, "validation fraction")
        ->check(CLI::Range(0.01, 0.99));

    // detect
    auto* cmd_detect = app.add_subcommand("detect", "run conflict detection over a dataset");
    std::string detect_dataset, detect_head1, detect_head2, detect_out;
    cmd_detect->add_option("dataset", detect_dataset, "dataset file")->required();
    cmd_detect->add_option("--head1", detect_head1, "binary head weights");
    cmd_detect->add_option("--head2", detect_head2, "four-way head weights");
    cmd_detect->add_option("--out", detect_out, "write reports as JSON lines");

    // ask
    auto* cmd_ask = app.add_subcommand("ask", "answer one question");
    std::string question, ask_index_path, ask_corpus_path, ask_head1, ask_head2;
    bool no_conflict_pipeline = false, strip_annotations_ask = false;
    bool parametric_on = false, parametric_off = false;
    cmd_ask->add_option("question", question, "the question to answer")->required();
    cmd_ask->add_option("--index", ask_index_path, "prebuilt index file");
    cmd_ask->add_option("--corpus", ask_corpus_path, "document corpus to index on the fly");
    cmd_ask->add_option("--head1", ask_head1, "binary head weights");
    cmd_ask->add_option("--head2", ask_head2, "four-way head weights");
    cmd_ask->add_flag("--no-conflict-pipeline", no_conflict_pipeline,
                      "baseline mode: skip detection and resolution");
    cmd_ask->add_flag("--strip-annotations", strip_annotations_ask,
                      "emit only the ANSWER section");
    cmd_ask->add_flag("--parametric", parametric_on, "run the closed-vs-open book check");
    cmd_ask->add_flag("--no-parametric", parametric_off, "skip the closed-vs-open book check");

    // eval
    auto* cmd_eval = app.add_subcommand("eval", "evaluate a dataset end to end");
    std::string eval_dataset, baseline, run_out, csv_out, eval_head1, eval_head2;
    bool strip_annotations_eval = false;
    int workers = 0;
    cmd_eval->add_option("dataset", eval_dataset, "dataset with gold answers")->required();
    cmd_eval->add_option("--baseline", baseline, "standard|rerank-top1")
        ->check(CLI::IsMember({"standard", "rerank-top1"}));
    cmd_eval->add_flag("--strip-annotations", strip_annotations_eval,
                       "judge annotation-stripped answers");
    cmd_eval->add_option("--out", run_out, "run file to write (JSON lines)");
    cmd_eval->add_option("--csv", csv_out, "summary CSV to write");
    cmd_eval->add_option("--workers", workers, "worker threads");
    cmd_eval->add_option("--head1", eval_head1, "binary head weights");
    cmd_eval->add_option("--head2", eval_head2, "four-way head weights");

    // bootstrap
    auto* cmd_bootstrap = app.add_subcommand("bootstrap", "paired bootstrap over two run files");
    std::string run_a, run_b, metric = "correctness";
    int resamples = 10000;
    cmd_bootstrap->add_option("run_a", run_a, "first run file")->required();
    cmd_bootstrap->add_option("run_b", run_b, "second run file")->required();
    cmd_bootstrap->add_option("--metric", metric, "score key to compare");
    cmd_bootstrap->add_option("--resamples", resamples, "bootstrap resamples")
        ->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (cmd_index->parsed()) {
            const std::vector<Document> corpus = load_corpus(corpus_path);
            const InvertedIndex index = InvertedIndex::build(corpus);
            index.save(index_out);
            std::cout << index.document_count() << " documents indexed to " << index_out << "\n";
            return kExitOk;
        }

        if (cmd_train->parsed()) {
            PipelineConfig config = effective_config(global);
            if (global.seed) train_config.seed = *global.seed;
            const ProviderSet providers = make_providers(config);
            const std::vector<DatasetRecord> records = load_dataset(train_dataset);
            const DetectorTrainingReport report =
                train_detector(records, *providers.embedder, train_config, val_fraction);
            save_model(report.head1.model, head1_out);
            save_model(report.head2.model, head2_out);
            std::cout << "trained on " << report.train_count << " pairs, validated on "
                      << report.val_count << "\n";
            std::cout << "head1 (binary): best epoch " << (report.head1.best_epoch + 1)
                      << ", val accuracy " << report.head1_val_accuracy << "\n";
            std::cout << "head2 (four-way): best epoch " << (report.head2.best_epoch + 1)
                      << ", val accuracy " << report.head2_val_accuracy << "\n";
            const char* class_names[] = {"none", "factual", "temporal", "opinion"};
            for (int cls = 0; cls < 4; ++cls) {
                std::cout << "  " << class_names[cls] << " F1: "
                          << report.head2_per_class_f1[static_cast<std::size_t>(cls)] << "\n";
            }
            std::cout << "weights written to " << head1_out << " and " << head2_out << "\n";
            return kExitOk;
        }

        if (cmd_detect->parsed()) {
            PipelineConfig config = effective_config(global);
            config.head1_path = detect_head1;
            config.head2_path = detect_head2;
            const Pipeline pipeline(config);
            const std::vector<DatasetRecord> records = load_dataset(detect_dataset);
            std::ofstream out_file;
            if (!detect_out.empty()) {
                out_file.open(detect_out);
                if (!out_file) throw IoError("cannot write '" + detect_out + "'");
            }
            DetectionCostLedger total;
            for (const DatasetRecord& record : records) {
                EvalOptions options;
                const RunRecord run = pipeline.run_record(record, options);
                std::cout << record.query.id << ": " << run.report.findings.size()
                          << " conflict(s), " << run.ledger.stage2_calls << "/"
                          << run.ledger.pairs_total << " pairs escalated\n";
                for (const ConflictFinding& finding : run.report.findings) {
                    std::cout << "  - " << to_string(finding.conflict_type) << " ("
                              << finding.pair.index_a << ", " << finding.pair.index_b << ")\n";
                }
                if (out_file) {
                    nlohmann::json line{{"query_id", record.query.id},
                                        {"report", to_json(run.report)}};
                    out_file << line.dump() << "\n";
                }
                total.merge(run.ledger);
            }
            std::cout << "total: " << total.stage2_calls << "/" << total.pairs_total
                      << " pairs escalated to stage 2\n";
            return kExitOk;
        }

        if (cmd_ask->parsed()) {
            PipelineConfig config = effective_config(global);
            config.head1_path = ask_head1;
            config.head2_path = ask_head2;
            if (parametric_on) config.parametric = true;
            if (parametric_off) config.parametric = false;
            const Pipeline pipeline(config);

            InvertedIndex index = [&] {
                if (!ask_index_path.empty()) return InvertedIndex::load(ask_index_path);
                if (!ask_corpus_path.empty()) return InvertedIndex::build(load_corpus(ask_corpus_path));
                throw ConfigError("ask needs --index or --corpus");
            }();

            const PipelineMode mode =
                no_conflict_pipeline ? PipelineMode::StandardRag : PipelineMode::ConflictAware;
            const AskResult result = pipeline.ask(question, index, mode, strip_annotations_ask);
            print_ask_result(result, std::cout);
            return kExitOk;
        }

        if (cmd_eval->parsed()) {
            PipelineConfig config = effective_config(global);
            config.head1_path = eval_head1;
            config.head2_path = eval_head2;
            if (workers > 0) config.workers = workers;
            const Pipeline pipeline(config);
            const std::vector<DatasetRecord> records = load_dataset(eval_dataset);

            EvalOptions options;
            options.strip_annotations = strip_annotations_eval;
            if (!baseline.empty()) options.mode = pipeline_mode_from_string(baseline);
            const EvalResult result = pipeline.evaluate(records, options);

            std::cout << result.summary.to_table();
            if (!run_out.empty()) {
                save_run_file(run_out, result.records);
                std::cout << "run file written to " << run_out << "\n";
            }
            if (!csv_out.empty()) {
                std::ofstream csv(csv_out);
                if (!csv) throw IoError("cannot write '" + csv_out + "'");
                csv << EvalSummary::csv_header() << "\n" << result.summary.to_csv_row() << "\n";
                std::cout << "summary CSV written to " << csv_out << "\n";
            }
            return result.summary.failed_queries > 0 ? kExitEvalFailures : kExitOk;
        }

        if (cmd_bootstrap->parsed()) {
            GlobalOptions& g = global;
            const std::vector<RunRecord> records_a = load_run_file(run_a);
            const std::vector<RunRecord> records_b = load_run_file(run_b);
            std::map<std::string, double> by_id;
            for (const RunRecord& record : records_b) {
                if (record.scores.count(metric) > 0) by_id[record.query_id] = record.scores.at(metric);
            }
            std::vector<double> scores_a, scores_b;
            for (const RunRecord& record : records_a) {
                auto it = by_id.find(record.query_id);
                if (it == by_id.end() || record.scores.count(metric) == 0) continue;
                scores_a.push_back(record.scores.at(metric));
                scores_b.push_back(it->second);
            }
            if (scores_a.size() < 2) {
                throw ValidationError("fewer than two paired '" + metric + "' scores across the runs");
            }
            const double p = paired_bootstrap(scores_a, scores_b, resamples, g.seed.value_or(42));
            char buffer[32];
            std::snprintf(buffer, sizeof(buffer), "%.4f", p);
            std::cout << "paired bootstrap over " << scores_a.size() << " queries, metric '"
                      << metric << "': p = " << buffer << "\n";
            return kExitOk;
        }
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}

}  // namespace

int main(int argc, char** argv) { return run(argc, argv); }
