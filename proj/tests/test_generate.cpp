#include <doctest.h>

#include <string>

#include "conflictrag/generate.hpp"
#include "conflictrag/prompts.hpp"
#include "conflictrag/providers.hpp"

using namespace conflictrag;

namespace {

PromptLibrary test_prompts() {
    return PromptLibrary::load(std::string(CONFLICTRAG_SOURCE_DIR) + "/templates");
}

Query make_query(const std::string& text) {
    Query query;
    query.id = "q";
    query.text = text;
    return query;
}

ResolvedContext plain_context(const std::vector<Document>& documents) {
    ResolvedContext context;
    for (std::size_t i = 0; i < documents.size(); ++i) {
        context.documents.push_back({documents[i], static_cast<int>(i), std::nullopt});
    }
    return context;
}

ResolvedContext conflict_context(const std::vector<Document>& documents) {
    ResolvedContext context = plain_context(documents);
    context.documents[0].role = RoleTag::PrimarySource;
    for (std::size_t i = 1; i < context.documents.size(); ++i) {
        context.documents[i].role = RoleTag::Superseded;
    }
    StrategyRecord strategy;
    strategy.conflict_type = ConflictType::Factual;
    strategy.note = "entropy-TOPSIS ranking applied";
    context.strategies.push_back(strategy);
    return context;
}

ConflictReport factual_report() {
    ConflictReport report;
    report.pairs_examined = 1;
    report.findings.push_back({DocumentPair{0, 1}, ConflictType::Factual, 0.95,
                               DetectionStage::Stage2});
    return report;
}

}  // namespace

TEST_CASE("empty report falls back to the standard template byte-for-byte") {
    const PromptLibrary prompts = test_prompts();
    const std::vector<Document> documents{
        {"a", "alpha text", "s1", std::nullopt, std::nullopt},
        {"b", "beta text", "s2", std::nullopt, std::nullopt},
    };
    const Query query = make_query("what is alpha?");
    const ChatRequest request = build_generation_prompt(query, plain_context(documents),
                                                        ConflictReport{}, prompts);

    const std::string expected = prompts.render(
        "generate_standard",
        {{"query", query.text}, {"documents", render_documents_plain(documents)}});
    CHECK(request.user_prompt == expected);
    CHECK(request.user_prompt.find("conflict") == std::string::npos);
    CHECK(request.temperature == 0.3);
}

TEST_CASE("conflict-aware prompt carries roles, sources and the conflict summary") {
    const PromptLibrary prompts = test_prompts();
    const std::vector<Document> documents{
        {"a", "dose is 600", "agency", Date::parse("2021-01-01"), std::nullopt},
        {"b", "dose is 400", "blog", std::nullopt, std::nullopt},
    };
    const Query query = make_query("what dose?");
    const ChatRequest request = build_generation_prompt(query, conflict_context(documents),
                                                        factual_report(), prompts);
    CHECK(request.user_prompt.find("(primary_source)") != std::string::npos);
    CHECK(request.user_prompt.find("(superseded)") != std::string::npos);
    CHECK(request.user_prompt.find("source: agency; date: 2021-01-01") != std::string::npos);
    CHECK(request.user_prompt.find("factual conflict between doc 0 (agency) and doc 1 (blog)") !=
          std::string::npos);
    CHECK(request.user_prompt.find("strategy (factual)") != std::string::npos);
}

TEST_CASE("temporal findings instruct prioritizing the latest source") {
    const PromptLibrary prompts = test_prompts();
    const std::vector<Document> documents{
        {"a", "new rule", "s1", Date::parse("2021-01-01"), std::nullopt},
        {"b", "old rule", "s2", Date::parse("2011-01-01"), std::nullopt},
    };
    ResolvedContext context = conflict_context(documents);
    context.strategies[0].conflict_type = ConflictType::Temporal;
    context.strategies[0].note = "latest source prioritized; older documents kept to show temporal evolution";
    ConflictReport report;
    report.pairs_examined = 1;
    report.findings.push_back({DocumentPair{0, 1}, ConflictType::Temporal, 0.95,
                               DetectionStage::Stage2});
    const ChatRequest request =
        build_generation_prompt(make_query("which rule?"), context, report, prompts);
    CHECK(request.user_prompt.find("latest source prioritized") != std::string::npos);
}

TEST_CASE("prompt budget truncates superseded documents from the back") {
    const PromptLibrary prompts = test_prompts();
    // 5 documents of ~200 tokens each fit a generous budget untouched.
    std::vector<Document> documents;
    std::string body;
    for (int w = 0; w < 200; ++w) body += "word ";
    for (int d = 0; d < 5; ++d) {
        documents.push_back({"d" + std::to_string(d), body + "tail" + std::to_string(d),
                             "s" + std::to_string(d), std::nullopt, std::nullopt});
    }
    const Query query = make_query("what?");

    GenerationOptions roomy;
    roomy.token_budget = 8000;
    const ChatRequest within = build_generation_prompt(query, conflict_context(documents),
                                                       factual_report(), prompts, roomy);
    CHECK(within.system_prompt.size() + within.user_prompt.size() <= 8000u * 4u);
    CHECK(within.user_prompt.find("[truncated]") == std::string::npos);

    GenerationOptions tight;
    tight.token_budget = 700;  // forces tail truncation
    const ChatRequest trimmed = build_generation_prompt(query, conflict_context(documents),
                                                        factual_report(), prompts, tight);
    CHECK(trimmed.system_prompt.size() + trimmed.user_prompt.size() <= 700u * 4u);
    CHECK(trimmed.user_prompt.find("[truncated]") != std::string::npos);
    // The primary document is never truncated.
    CHECK(trimmed.user_prompt.find(body + "tail0") != std::string::npos);
}

TEST_CASE("generate_answer parses a fully structured reply") {
    const std::vector<Document> documents{
        {"a", "dose is 600", "agency", std::nullopt, std::nullopt},
        {"b", "dose is 400", "blog", std::nullopt, std::nullopt},
    };
    const ResolvedContext context = conflict_context(documents);
    ScriptedChatProvider chat;
    chat.set_default_response(
        "ANSWER: 600 IU daily.\n"
        "CONFLICTS:\n- the blog claims 400 IU\n"
        "SOURCES:\n- agency: states 600 IU\n- blog: states 400 IU\n"
        "CONFIDENCE: Moderate - sources disagree");
    const AnnotatedAnswer answer =
        generate_answer(ChatRequest{}, factual_report(), context, chat);
    CHECK(answer.answer == "600 IU daily.");
    REQUIRE(answer.conflict_annotations.size() == 1);
    CHECK(answer.conflict_annotations[0] == "the blog claims 400 IU");
    REQUIRE(answer.source_attribution.size() == 2);
    CHECK(answer.source_attribution[0].source == "agency");
    CHECK(answer.source_attribution[0].claim == "states 600 IU");
    CHECK(answer.confidence == ConfidenceLevel::Moderate);
    CHECK(answer.confidence_reason == "sources disagree");
}

TEST_CASE("missing sections are synthesized from the report") {
    const std::vector<Document> documents{
        {"a", "dose is 600", "agency", std::nullopt, std::nullopt},
        {"b", "dose is 400", "blog", std::nullopt, std::nullopt},
    };
    const ResolvedContext context = conflict_context(documents);

    SUBCASE("plain reply with a non-empty report") {
        ScriptedChatProvider chat;
        chat.set_default_response("600 IU daily.");
        const AnnotatedAnswer answer =
            generate_answer(ChatRequest{}, factual_report(), context, chat);
        CHECK(answer.answer == "600 IU daily.");
        CHECK_FALSE(answer.conflict_annotations.empty());  // synthesized from findings
        CHECK(answer.confidence == ConfidenceLevel::Moderate);
        REQUIRE(answer.source_attribution.size() == 1);
        CHECK(answer.source_attribution[0].source == "agency");  // primary source
        CHECK_FALSE(answer.source_attribution[0].claim.has_value());
    }
    SUBCASE("plain reply with an empty report") {
        ScriptedChatProvider chat;
        chat.set_default_response("It is 600 IU.");
        const AnnotatedAnswer answer =
            generate_answer(ChatRequest{}, ConflictReport{}, context, chat);
        CHECK(answer.conflict_annotations.empty());
        CHECK(answer.confidence == ConfidenceLevel::High);
    }
}

TEST_CASE("attribution entries naming unknown sources are dropped") {
    const std::vector<Document> documents{
        {"a", "dose is 600", "agency", std::nullopt, std::nullopt},
    };
    const ResolvedContext context = conflict_context(documents);
    ScriptedChatProvider chat;
    chat.set_default_response(
        "ANSWER: 600 IU.\nCONFLICTS:\n- none\nSOURCES:\n- agency: fine\n- wikipedia: not an input\n"
        "CONFIDENCE: High - solid");
    const AnnotatedAnswer answer =
        generate_answer(ChatRequest{}, factual_report(), context, chat);
    REQUIRE(answer.source_attribution.size() == 1);
    CHECK(answer.source_attribution[0].source == "agency");
}

TEST_CASE("format_answer renders the four parts and strips on demand") {
    AnnotatedAnswer answer;
    answer.answer = "600 IU.";
    answer.conflict_annotations = {"blog disagrees"};
    answer.source_attribution = {{std::string("states 600"), "agency"}};
    answer.confidence = ConfidenceLevel::Moderate;
    answer.confidence_reason = "conflicting sources";

    const std::string full = format_answer(answer, false);
    CHECK(full.find("ANSWER: 600 IU.") != std::string::npos);
    CHECK(full.find("CONFLICTS:") != std::string::npos);
    CHECK(full.find("- blog disagrees") != std::string::npos);
    CHECK(full.find("SOURCES:") != std::string::npos);
    CHECK(full.find("CONFIDENCE: Moderate - conflicting sources") != std::string::npos);

    const std::string stripped = format_answer(answer, true);
    CHECK(stripped == "ANSWER: 600 IU.");
}

TEST_CASE("non-empty report always yields non-empty annotations") {
    const std::vector<Document> documents{
        {"a", "dose is 600", "agency", std::nullopt, std::nullopt},
        {"b", "dose is 400", "blog", std::nullopt, std::nullopt},
    };
    const ResolvedContext context = conflict_context(documents);
    for (const char* reply : {"just an answer", "ANSWER: x\nCONFIDENCE: High - y"}) {
        ScriptedChatProvider chat;
        chat.set_default_response(reply);
        const AnnotatedAnswer answer =
            generate_answer(ChatRequest{}, factual_report(), context, chat);
        CHECK_FALSE(answer.conflict_annotations.empty());
    }
}
