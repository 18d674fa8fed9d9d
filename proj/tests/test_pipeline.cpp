#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "conflictrag/config.hpp"
#include "conflictrag/errors.hpp"
#include "conflictrag/pipeline.hpp"

#include "fixtures.hpp"

using namespace conflictrag;

namespace {

PipelineConfig mock_config() {
    PipelineConfig config;
    config.mock_providers = true;
    config.templates_dir = std::string(CONFLICTRAG_SOURCE_DIR) + "/templates";
    return config;
}

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("make_providers wires mocks and refuses self-judging") {
    PipelineConfig config = mock_config();
    const ProviderSet providers = make_providers(config);
    CHECK(providers.generator->model_id() == "mock-generator");
    CHECK(providers.judge->model_id() == "mock-judge");

    PipelineConfig self_judge = config;
    self_judge.mock_providers = false;
    self_judge.generator = {"http://localhost:1/v1", "gpt-x", ""};
    self_judge.judge = {"http://localhost:1/v1", "gpt-x", ""};
    self_judge.embedder = {"http://localhost:1/v1", "embed", ""};
    CHECK_THROWS_AS(make_providers(self_judge), ConfigError);
    self_judge.allow_self_judge = true;
    CHECK_NOTHROW(make_providers(self_judge));
}

TEST_CASE("pipeline config validation") {
    PipelineConfig config = mock_config();
    CHECK_NOTHROW(config.validate());

    SUBCASE("tau_c range") {
        config.tau_c = 1.5;
        CHECK_THROWS_AS(config.validate(), ConfigError);
    }
    SUBCASE("templates dir must exist") {
        config.templates_dir = "/no/such/dir";
        CHECK_THROWS_AS(config.validate(), ConfigError);
    }
    SUBCASE("model files must exist when named") {
        config.head1_path = "/no/such/file.mlp";
        CHECK_THROWS_AS(config.validate(), ConfigError);
    }
    SUBCASE("live mode needs endpoints") {
        config.mock_providers = false;
        CHECK_THROWS_AS(config.validate(), ConfigError);
    }
}

TEST_CASE("config file loads with environment interpolation") {
    const std::string path = temp_path("cr_config.json");
    {
        std::ofstream out(path);
        out << R"({
            "mock_providers": true,
            "tau_c": 0.6,
            "retrieval": {"k": 3},
            "templates_dir": "${CR_TEST_TEMPLATES}",
            "seed": 7,
            "cars_weights": {"answer": 0.4, "detection": 0.2, "resolution": 0.25, "source": 0.15}
        })";
    }
    const std::string templates = std::string(CONFLICTRAG_SOURCE_DIR) + "/templates";
    setenv("CR_TEST_TEMPLATES", templates.c_str(), 1);
    const PipelineConfig config = load_config(path);
    CHECK(config.tau_c == 0.6);
    CHECK(config.retrieval.k == 3);
    CHECK(config.templates_dir == templates);
    CHECK(config.seed == 7);
    CHECK(config.cars_weights.answer == 0.4);
    CHECK_NOTHROW(config.validate());
    std::remove(path.c_str());
}

TEST_CASE("config file rejects unknown keys and bad JSON") {
    const std::string path = temp_path("cr_config_bad.json");
    {
        std::ofstream out(path);
        out << R"({"tau_sea": 0.5})";
    }
    CHECK_THROWS_AS(load_config(path), ConfigError);
    {
        std::ofstream out(path);
        out << "{nope";
    }
    CHECK_THROWS_AS(load_config(path), ConfigError);
    CHECK_THROWS_AS(load_config(temp_path("cr_config_missing.json")), ConfigError);
    std::remove(path.c_str());
}

TEST_CASE("ask answers from an indexed corpus with conflict handling") {
    const Pipeline pipeline(mock_config());
    std::vector<Document> corpus{
        {"c1", "The daily vitamin d dose for adults is 400 IU. The daily vitamin d dose for "
               "adults was settled long ago.",
         "personal-blog", Date::parse("2008-03-01"), std::nullopt},
        {"c2", "Current guidance puts the daily vitamin d dose for adults at 600 IU. This "
               "reflects the latest review.",
         "national-health-agency", Date::parse("2023-05-10"), std::nullopt},
        {"c3", "Unrelated notes about gardening in the spring months.", "hobby-forum",
         std::nullopt, std::nullopt},
    };
    const InvertedIndex index = InvertedIndex::build(corpus);

    const AskResult result =
        pipeline.ask("What is the daily vitamin d dose for adults?", index);
    CHECK(result.retrieved.size() == 3);
    CHECK(result.report.pairs_examined == 3);
    REQUIRE_FALSE(result.report.findings.empty());
    CHECK(result.report.findings[0].conflict_type == ConflictType::Factual);
    CHECK(result.answer.answer.find("600 IU") != std::string::npos);
    CHECK(result.formatted_answer.find("CONFLICTS:") != std::string::npos);
    CHECK_FALSE(result.answer.conflict_annotations.empty());

    SUBCASE("single retrieved document falls back to standard generation") {
        PipelineConfig config = mock_config();
        config.retrieval.k = 1;
        const Pipeline narrow(config);
        const AskResult one = narrow.ask("What is the daily vitamin d dose for adults?", index);
        CHECK(one.report.pairs_examined == 0);
        CHECK(one.report.findings.empty());
        CHECK(one.answer.conflict_annotations.empty());
    }
    SUBCASE("baseline mode bypasses detection") {
        const AskResult baseline = pipeline.ask("What is the daily vitamin d dose for adults?",
                                                index, PipelineMode::StandardRag);
        CHECK(baseline.report.pairs_examined == 0);
        CHECK(baseline.ledger.stage2_calls == 0);
        CHECK(baseline.formatted_answer.find("CONFLICTS:") == std::string::npos);
    }
    SUBCASE("parametric check runs when enabled") {
        PipelineConfig config = mock_config();
        config.parametric = true;
        const Pipeline with_parametric(config);
        const AskResult checked =
            with_parametric.ask("What is the daily vitamin d dose for adults?", index);
        REQUIRE(checked.report.parametric.has_value());
        CHECK(checked.report.parametric->closed_book_answer == "unknown");
        CHECK_FALSE(checked.report.parametric->conflicting);  // closed book abstained
    }
}

TEST_CASE("run_record maps findings back to dataset coordinates") {
    const Pipeline pipeline(mock_config());
    DatasetRecord record;
    record.query.id = "remap";
    record.query.text = "What is the dose of zinc?";
    record.query.gold_answer = "25 mg";
    record.query.gold_conflicts =
        std::vector<GoldConflict>{{DocumentPair{1, 2}, ConflictType::Factual}};
    record.documents = {
        {"a", "General information about minerals and nutrition overall.", "encyclopedia",
         std::nullopt, std::nullopt},
        {"b", "The dose of zinc is 10 mg.", "old-leaflet", Date::parse("2007-01-01"),
         std::nullopt},
        {"c", "The dose of zinc is 25 mg. The dose of zinc was raised recently.",
         "national-institute", Date::parse("2023-01-01"), std::nullopt},
    };
    EvalOptions options;
    const RunRecord run = pipeline.run_record(record, options);
    REQUIRE(run.report.findings.size() == 1);
    CHECK(run.report.findings[0].pair == DocumentPair{1, 2});  // dataset coordinates
    CHECK(run.scores.at("detection_f1") == 1.0);
    CHECK(run.scores.at("correctness") == 1.0);
}

TEST_CASE("end-to-end: conflict-aware beats standard RAG on the rigged fixture") {
    const std::vector<DatasetRecord> dataset = fixtures::rigged_dataset();
    REQUIRE(dataset.size() == 20);
    const Pipeline pipeline(mock_config());

    EvalOptions aware;
    const EvalResult aware_result = pipeline.evaluate(dataset, aware);

    EvalOptions standard;
    standard.mode = PipelineMode::StandardRag;
    const EvalResult standard_result = pipeline.evaluate(dataset, standard);

    CHECK(aware_result.summary.failed_queries == 0);
    CHECK(standard_result.summary.failed_queries == 0);
    // The conflict-aware pipeline must strictly beat plain concatenation.
    CHECK(aware_result.summary.correctness > standard_result.summary.correctness);
    CHECK(aware_result.summary.correctness >= 0.95);
    CHECK(standard_result.summary.correctness <= 0.6);

    REQUIRE(aware_result.summary.detection.has_value());
    CHECK(aware_result.summary.detection->f1 == doctest::Approx(1.0));
    REQUIRE(standard_result.summary.detection.has_value());
    CHECK(standard_result.summary.detection->f1 == 0.0);  // no detector ran

    CHECK(aware_result.summary.cars_score > standard_result.summary.cars_score);
    CHECK(aware_result.summary.transparency_rating > standard_result.summary.transparency_rating);

    SUBCASE("strip-annotations leaves correctness unchanged under the format-neutral judge") {
        EvalOptions stripped;
        stripped.strip_annotations = true;
        const EvalResult stripped_result = pipeline.evaluate(dataset, stripped);
        CHECK(stripped_result.summary.correctness ==
              doctest::Approx(aware_result.summary.correctness));
        for (std::size_t i = 0; i < stripped_result.records.size(); ++i) {
            if (aware_result.records[i].scores.count("correctness") == 0) continue;
            CHECK(stripped_result.records[i].scores.at("correctness") ==
                  aware_result.records[i].scores.at("correctness"));
        }
    }
    SUBCASE("rerank-top1 generates from a single document") {
        EvalOptions rerank;
        rerank.mode = PipelineMode::RerankTop1;
        const EvalResult rerank_result = pipeline.evaluate(dataset, rerank);
        CHECK(rerank_result.summary.failed_queries == 0);
        for (const RunRecord& run : rerank_result.records) {
            CHECK(run.report.pairs_examined == 0);
        }
    }
    SUBCASE("bootstrap of a run against itself is insignificant") {
        std::vector<double> scores;
        for (const RunRecord& run : aware_result.records) {
            scores.push_back(run.scores.at("correctness"));
        }
        CHECK(paired_bootstrap(scores, scores, 2000, 3) == doctest::Approx(1.0).epsilon(0.02));
    }
    SUBCASE("worker pool output matches the sequential run") {
        PipelineConfig parallel_config = mock_config();
        parallel_config.workers = 4;
        const Pipeline parallel(parallel_config);
        const EvalResult parallel_result = parallel.evaluate(dataset, aware);
        REQUIRE(parallel_result.records.size() == aware_result.records.size());
        for (std::size_t i = 0; i < parallel_result.records.size(); ++i) {
            CHECK(parallel_result.records[i].query_id == aware_result.records[i].query_id);
            CHECK(parallel_result.records[i].scores == aware_result.records[i].scores);
        }
        CHECK(parallel_result.summary.correctness == aware_result.summary.correctness);
    }
}

TEST_CASE("evaluation records failures and keeps going") {
    const Pipeline pipeline(mock_config());
    std::vector<DatasetRecord> dataset = fixtures::rigged_dataset();
    dataset.resize(3);
    DatasetRecord broken;
    broken.query.id = "broken";
    broken.query.text = "anything?";
    // No documents at all: run_record must fail this query only.
    dataset.insert(dataset.begin() + 1, broken);

    const EvalResult result = pipeline.evaluate(dataset, EvalOptions{});
    CHECK(result.summary.failed_queries == 1);
    CHECK(result.records[1].formatted_answer.rfind("ERROR:", 0) == 0);
    CHECK(result.records[0].scores.count("correctness") == 1);
    CHECK(result.records[2].scores.count("correctness") == 1);
}

TEST_CASE("run files from evaluation round-trip") {
    const Pipeline pipeline(mock_config());
    std::vector<DatasetRecord> dataset = fixtures::rigged_dataset();
    dataset.resize(4);
    const EvalResult result = pipeline.evaluate(dataset, EvalOptions{});

    const std::string path = temp_path("cr_eval_run.jsonl");
    save_run_file(path, result.records);
    const std::vector<RunRecord> loaded = load_run_file(path);
    REQUIRE(loaded.size() == result.records.size());
    for (std::size_t i = 0; i < loaded.size(); ++i) {
        CHECK(loaded[i].query_id == result.records[i].query_id);
        CHECK(loaded[i].scores == result.records[i].scores);
        CHECK(loaded[i].report.findings.size() == result.records[i].report.findings.size());
    }
    std::remove(path.c_str());
}
