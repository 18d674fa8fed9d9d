#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "conflictrag/errors.hpp"
#include "conflictrag/providers.hpp"
#include "conflictrag/retrieval.hpp"
#include "conflictrag/util.hpp"

#include "oracles.hpp"

using namespace conflictrag;

namespace {

Document doc(const std::string& id, const std::string& text) {
    return Document{id, text, "src-" + id, std::nullopt, std::nullopt};
}

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("index build: counts, lengths, postings") {
    const InvertedIndex index =
        InvertedIndex::build({doc("a", "The cat sat on the mat"), doc("b", "dogs chase cats")});
    CHECK(index.document_count() == 2);
    // 6 and 3 tokens -> mean 4.5
    CHECK(index.average_document_length() == doctest::Approx(4.5));

    const std::vector<Posting>* the = index.postings("the");
    REQUIRE(the != nullptr);
    REQUIRE(the->size() == 1);  // lowercased "The"/"the" both in doc a
    CHECK((*the)[0].doc == 0);
    CHECK((*the)[0].tf == 2);

    const std::vector<Posting>* dogs = index.postings("dogs");
    REQUIRE(dogs != nullptr);
    CHECK(dogs->size() == 1);
    CHECK(index.postings("zebra") == nullptr);

    CHECK_THROWS_AS(InvertedIndex::build({}), ValidationError);
    CHECK_THROWS_AS(InvertedIndex::build({doc("a", "x"), doc("a", "y")}), ValidationError);
}

TEST_CASE("rebuilding over the same corpus gives an identical index") {
    const std::vector<Document> corpus{doc("a", "alpha beta"), doc("b", "beta gamma")};
    CHECK(InvertedIndex::build(corpus) == InvertedIndex::build(corpus));
}

TEST_CASE("bm25: single-doc identity score equals the IDF") {
    // tf=1 and len=avglen collapse the tf factor to 1, so score = IDF =
    // ln(1 + (1 - 1 + 0.5) / 1.5) = ln(4/3).
    const InvertedIndex index = InvertedIndex::build({doc("a", "quantum")});
    const std::vector<std::string> terms{"quantum"};
    CHECK(bm25_score(index, terms, "a") == doctest::Approx(std::log(4.0 / 3.0)).epsilon(1e-12));
}

TEST_CASE("bm25: absent terms contribute zero") {
    const InvertedIndex index = InvertedIndex::build({doc("a", "alpha beta"), doc("b", "gamma")});
    const std::vector<std::string> terms{"delta"};
    CHECK(bm25_score(index, terms, "a") == 0.0);
    CHECK_THROWS_AS(bm25_score(index, terms, "nope"), ValidationError);
}

TEST_CASE("bm25: 3-doc toy corpus matches the arithmetic oracle") {
    const InvertedIndex index = InvertedIndex::build({
        doc("a", "vitamin d dose guidance vitamin"),
        doc("b", "vitamin supplements in winter"),
        doc("c", "unrelated gardening tips and tricks"),
    });
    const std::vector<std::string> terms{"vitamin", "dose"};
    const RetrievalConfig config;

    // doc a: len 5; "vitamin" df=2 tf=2; "dose" df=1 tf=1. avg len = (5+4+5)/3.
    const double expected_a = oracles::naive_bm25(3, 14.0 / 3.0, 5.0, {{2, 2}, {1, 1}},
                                                  config.bm25_k1, config.bm25_b);
    CHECK(bm25_score(index, terms, "a") == doctest::Approx(expected_a).epsilon(1e-9));

    const double expected_b =
        oracles::naive_bm25(3, 14.0 / 3.0, 4.0, {{2, 1}}, config.bm25_k1, config.bm25_b);
    CHECK(bm25_score(index, terms, "b") == doctest::Approx(expected_b).epsilon(1e-9));
    CHECK(bm25_score(index, terms, "c") == 0.0);

    // Scores are non-negative with the ln(1 + .) IDF.
    for (const char* id : {"a", "b", "c"}) {
        CHECK(bm25_score(index, terms, id) >= 0.0);
    }
}

TEST_CASE("adding an irrelevant document never changes existing tfs") {
    const std::vector<Document> corpus{doc("a", "alpha beta alpha"), doc("b", "beta gamma")};
    const InvertedIndex before = InvertedIndex::build(corpus);
    std::vector<Document> grown = corpus;
    grown.push_back(doc("c", "entirely different words"));
    const InvertedIndex after = InvertedIndex::build(grown);
    for (const char* term : {"alpha", "beta", "gamma"}) {
        const auto* postings_before = before.postings(term);
        const auto* postings_after = after.postings(term);
        REQUIRE(postings_before != nullptr);
        REQUIRE(postings_after != nullptr);
        CHECK(*postings_before == *postings_after);
    }
}

TEST_CASE("rrf fusion matches the formula oracle on the (A,B,C)/(C,B,A) case") {
    // Lists (A,B,C) and (C,B,A) at k0=60. By the RRF formula the consistent
    // middle document B scores 2/62 while A and C each score 1/61 + 1/63,
    // which is strictly larger (convexity of 1/x), so A and C outrank B.
    const std::vector<std::vector<int>> lists{{0, 1, 2}, {2, 1, 0}};
    const std::vector<double> scores = rrf_fuse(lists, 3, 60);
    const std::vector<double> expected = oracles::naive_rrf(lists, 3, 60);
    for (int d = 0; d < 3; ++d) {
        CHECK(scores[static_cast<std::size_t>(d)] ==
              doctest::Approx(expected[static_cast<std::size_t>(d)]).epsilon(1e-12));
    }
    CHECK(scores[0] == doctest::Approx(1.0 / 61.0 + 1.0 / 63.0).epsilon(1e-12));
    CHECK(scores[1] == doctest::Approx(2.0 / 62.0).epsilon(1e-12));
    CHECK(scores[0] > scores[1]);
    CHECK(scores[2] == scores[0]);
}

TEST_CASE("document ranked first by both lists wins the fusion") {
    const std::vector<std::vector<int>> lists{{1, 0, 2}, {1, 2, 0}};
    const std::vector<double> scores = rrf_fuse(lists, 3, 60);
    CHECK(scores[1] > scores[0]);
    CHECK(scores[1] > scores[2]);
}

TEST_CASE("hybrid retrieval basics") {
    MockEmbeddingProvider embedder;
    const InvertedIndex index = InvertedIndex::build({
        doc("a", "vitamin d dose for adults"),
        doc("b", "vitamin c and colds"),
        doc("c", "gardening in march"),
    });
    const auto embeddings = embed_corpus(index, embedder);

    SUBCASE("returns min(k, corpus size) without duplicates") {
        RetrievalConfig config;
        config.k = 5;
        const auto results =
            hybrid_retrieve("vitamin d dose", index, embedder, embeddings, config);
        CHECK(results.size() == 3);
        CHECK(results[0].doc.id == "a");  // lexical dominance carries the fusion
        std::set<std::string> ids;
        for (const auto& r : results) ids.insert(r.doc.id);
        CHECK(ids.size() == results.size());
    }
    SUBCASE("top-j prefix is stable as k grows") {
        RetrievalConfig config;
        config.k = 1;
        const auto top1 = hybrid_retrieve("vitamin d dose", index, embedder, embeddings, config);
        config.k = 2;
        const auto top2 = hybrid_retrieve("vitamin d dose", index, embedder, embeddings, config);
        config.k = 3;
        const auto top3 = hybrid_retrieve("vitamin d dose", index, embedder, embeddings, config);
        CHECK(top1[0].doc.id == top2[0].doc.id);
        CHECK(top2[0].doc.id == top3[0].doc.id);
        CHECK(top2[1].doc.id == top3[1].doc.id);
    }
    SUBCASE("empty tokenized query degrades to dense-only") {
        RetrievalConfig config;
        config.k = 2;
        const auto results = hybrid_retrieve("!!! ???", index, embedder, embeddings, config);
        CHECK(results.size() == 2);
        for (const auto& r : results) CHECK(r.lexical_rank == 0);
    }
    SUBCASE("embedding count must match the corpus") {
        RetrievalConfig config;
        std::vector<EmbeddingVector> wrong(embeddings.begin(), embeddings.begin() + 2);
        CHECK_THROWS_AS(hybrid_retrieve("q", index, embedder, wrong, config), ValidationError);
    }
}

TEST_CASE("index round-trips through its file exactly") {
    std::vector<Document> corpus{
        doc("a", "alpha beta gamma"),
        doc("b", "beta beta delta"),
    };
    corpus[0].date = Date::parse("2021-07-01");
    corpus[0].authority_hint = 0.75;
    const InvertedIndex index = InvertedIndex::build(corpus);

    const std::string path = temp_path("cr_index_roundtrip.json");
    index.save(path);
    const InvertedIndex loaded = InvertedIndex::load(path);
    CHECK(loaded == index);

    // Saving again reproduces the identical file bytes.
    const std::string path2 = temp_path("cr_index_roundtrip2.json");
    loaded.save(path2);
    std::ifstream f1(path), f2(path2);
    const std::string bytes1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    const std::string bytes2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(bytes1 == bytes2);

    std::remove(path.c_str());
    std::remove(path2.c_str());
    CHECK_THROWS_AS(InvertedIndex::load(temp_path("cr_index_missing.json")), IoError);
}

TEST_CASE("tokenization is lowercase alphanumeric") {
    const auto tokens = tokenize("The CAT, sat-on 2 mats!");
    CHECK(tokens == std::vector<std::string>{"the", "cat", "sat", "on", "2", "mats"});
    CHECK(tokenize("...").empty());
}
