#include "conflictrag/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "conflictrag/errors.hpp"
#include "conflictrag/json_io.hpp"
#include "conflictrag/util.hpp"

namespace conflictrag {

void RetrievalConfig::validate() const {
    if (k < 1) throw ValidationError("retrieval k must be >= 1");
    if (bm25_k1 <= 0.0) throw ValidationError("bm25 k1 must be > 0");
    if (bm25_b < 0.0 || bm25_b > 1.0) throw ValidationError("bm25 b must be in [0,1]");
    if (rrf_k0 < 1) throw ValidationError("rrf k0 must be >= 1");
}

InvertedIndex InvertedIndex::build(std::vector<Document> corpus) {
    if (corpus.empty()) {
        throw ValidationError("cannot build an index over an empty corpus");
    }
    InvertedIndex index;
    for (std::size_t ordinal = 0; ordinal < corpus.size(); ++ordinal) {
        const Document& doc = corpus[ordinal];
        doc.validate();
        if (!index.id_to_ordinal_.emplace(doc.id, static_cast<int>(ordinal)).second) {
            throw ValidationError("duplicate document id '" + doc.id + "' in corpus");
        }
        const auto tokens = tokenize(doc.text);
        index.lengths_.push_back(static_cast<int>(tokens.size()));
        std::map<std::string, int> frequencies;
        for (const auto& token : tokens) ++frequencies[token];
        for (const auto& [term, tf] : frequencies) {
            index.postings_[term].push_back(Posting{static_cast<int>(ordinal), tf});
        }
    }
    index.documents_ = std::move(corpus);
    // Postings stay sorted by ordinal because documents are visited in order.
    return index;
}

double InvertedIndex::average_document_length() const {
    const long total = std::accumulate(lengths_.begin(), lengths_.end(), 0L);
    return static_cast<double>(total) / static_cast<double>(lengths_.size());
}

const std::vector<Posting>* InvertedIndex::postings(const std::string& term) const {
    auto it = postings_.find(term);
    return it == postings_.end() ? nullptr : &it->second;
}

int InvertedIndex::ordinal_of(const std::string& doc_id) const {
    auto it = id_to_ordinal_.find(doc_id);
    if (it == id_to_ordinal_.end()) {
        throw ValidationError("unknown document id '" + doc_id + "'");
    }
    return it->second;
}

void InvertedIndex::save(const std::string& path) const {
    nlohmann::json j;
    j["format"] = "conflictrag-index";
    j["version"] = 1;
    nlohmann::json docs = nlohmann::json::array();
    for (const Document& doc : documents_) docs.push_back(to_json(doc));
    j["documents"] = docs;
    nlohmann::json postings = nlohmann::json::object();
    for (const auto& [term, list] : postings_) {
        nlohmann::json entries = nlohmann::json::array();
        for (const Posting& posting : list) entries.push_back({posting.doc, posting.tf});
        postings[term] = entries;
    }
    j["postings"] = postings;

    std::ofstream out(path);
    if (!out) throw IoError("cannot write index file '" + path + "'");
    out << j.dump() << "\n";
}

InvertedIndex InvertedIndex::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open index file '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError("index file '" + path + "' is not valid JSON: " + e.what());
    }
    if (j.value("format", std::string{}) != "conflictrag-index" || j.value("version", 0) != 1) {
        throw ParseError("unrecognized index file format in '" + path + "'");
    }
    std::vector<Document> corpus;
    for (const auto& entry : j.at("documents")) corpus.push_back(document_from_json(entry));
    InvertedIndex index = build(std::move(corpus));

    // Postings are rebuilt from the stored documents; verify the file agrees
    // so silent corruption is caught.
    std::map<std::string, std::vector<Posting>> from_file;
    for (const auto& [term, entries] : j.at("postings").items()) {
        std::vector<Posting>& list = from_file[term];
        for (const auto& entry : entries) {
            list.push_back(Posting{entry[0].get<int>(), entry[1].get<int>()});
        }
    }
    if (from_file != index.postings_) {
        throw ValidationError("index file '" + path + "' postings disagree with its documents");
    }
    return index;
}

bool operator==(const InvertedIndex& a, const InvertedIndex& b) {
    auto doc_eq = [](const Document& x, const Document& y) {
        return x.id == y.id && x.text == y.text && x.source == y.source && x.date == y.date &&
               x.authority_hint == y.authority_hint;
    };
    return a.postings_ == b.postings_ && a.lengths_ == b.lengths_ &&
           a.documents_.size() == b.documents_.size() &&
           std::equal(a.documents_.begin(), a.documents_.end(), b.documents_.begin(), doc_eq);
}

double bm25_score(const InvertedIndex& index, std::span<const std::string> query_terms,
                  const std::string& doc_id, const RetrievalConfig& config) {
    config.validate();
    const int ordinal = index.ordinal_of(doc_id);
    const double n_docs = static_cast<double>(index.document_count());
    const double doc_len = static_cast<double>(index.document_lengths()[static_cast<std::size_t>(ordinal)]);
    const double avg_len = index.average_document_length();

    double score = 0.0;
    for (const std::string& term : query_terms) {
        const std::vector<Posting>* postings = index.postings(term);
        if (postings == nullptr) continue;
        const auto it = std::lower_bound(postings->begin(), postings->end(), ordinal,
                                         [](const Posting& p, int doc) { return p.doc < doc; });
        if (it == postings->end() || it->doc != ordinal) continue;
        const double df = static_cast<double>(postings->size());
        const double tf = static_cast<double>(it->tf);
        const double idf = std::log(1.0 + (n_docs - df + 0.5) / (df + 0.5));
        score += idf * tf * (config.bm25_k1 + 1.0) /
                 (tf + config.bm25_k1 *
                           (1.0 - config.bm25_b + config.bm25_b * doc_len / avg_len));
    }
    return score;
}

std::vector<double> rrf_fuse(std::span<const std::vector<int>> rank_lists, int doc_count, int k0) {
    std::vector<double> scores(static_cast<std::size_t>(doc_count), 0.0);
    for (const std::vector<int>& list : rank_lists) {
        for (std::size_t position = 0; position < list.size(); ++position) {
            const int doc = list[position];
            if (doc < 0 || doc >= doc_count) {
                throw ValidationError("rank list references document " + std::to_string(doc) +
                                      " outside the corpus");
            }
            scores[static_cast<std::size_t>(doc)] +=
                1.0 / (static_cast<double>(k0) + static_cast<double>(position) + 1.0);
        }
    }
    return scores;
}

std::vector<EmbeddingVector> embed_corpus(const InvertedIndex& index,
                                          EmbeddingProvider& embedder) {
    std::vector<EmbeddingVector> embeddings;
    embeddings.reserve(index.documents().size());
    for (const Document& doc : index.documents()) {
        embeddings.push_back(embedder.embed(doc.text));
    }
    return embeddings;
}

std::vector<RetrievedDocument> hybrid_retrieve(const std::string& query_text,
                                               const InvertedIndex& index,
                                               EmbeddingProvider& embedder,
                                               std::span<const EmbeddingVector> corpus_embeddings,
                                               const RetrievalConfig& config) {
    config.validate();
    if (corpus_embeddings.size() != static_cast<std::size_t>(index.document_count())) {
        throw ValidationError("corpus embedding count does not match the index");
    }
    const int n = index.document_count();
    const auto query_terms = tokenize(query_text);

    // Lexical list: documents with a positive BM25 score, best first.
    std::vector<std::pair<double, int>> lexical_scored;
    if (query_terms.empty()) {
        log_warning("query tokenizes to nothing; falling back to dense-only ranking");
    } else {
        for (int d = 0; d < n; ++d) {
            const double score =
                bm25_score(index, query_terms, index.documents()[static_cast<std::size_t>(d)].id,
                           config);
            if (score > 0.0) lexical_scored.push_back({score, d});
        }
        std::stable_sort(lexical_scored.begin(), lexical_scored.end(),
                         [](const auto& a, const auto& b) {
                             if (a.first != b.first) return a.first > b.first;
                             return a.second < b.second;
                         });
    }
    std::vector<int> lexical_list;
    std::vector<int> lexical_rank(static_cast<std::size_t>(n), 0);
    for (std::size_t r = 0; r < lexical_scored.size(); ++r) {
        lexical_list.push_back(lexical_scored[r].second);
        lexical_rank[static_cast<std::size_t>(lexical_scored[r].second)] = static_cast<int>(r) + 1;
    }

    // Dense list: cosine similarity against the query embedding, all docs.
    const EmbeddingVector query_embedding = embedder.embed(query_text);
    std::vector<std::pair<double, int>> dense_scored;
    for (int d = 0; d < n; ++d) {
        dense_scored.push_back(
            {cosine_similarity(query_embedding, corpus_embeddings[static_cast<std::size_t>(d)]), d});
    }
    std::stable_sort(dense_scored.begin(), dense_scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    std::vector<int> dense_list;
    std::vector<int> dense_rank(static_cast<std::size_t>(n), 0);
    for (std::size_t r = 0; r < dense_scored.size(); ++r) {
        dense_list.push_back(dense_scored[r].second);
        dense_rank[static_cast<std::size_t>(dense_scored[r].second)] = static_cast<int>(r) + 1;
    }

    const std::vector<std::vector<int>> lists =
        lexical_list.empty() ? std::vector<std::vector<int>>{dense_list}
                             : std::vector<std::vector<int>>{lexical_list, dense_list};
    const std::vector<double> fused = rrf_fuse(lists, n, config.rrf_k0);

    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        if (fused[static_cast<std::size_t>(a)] != fused[static_cast<std::size_t>(b)]) {
            return fused[static_cast<std::size_t>(a)] > fused[static_cast<std::size_t>(b)];
        }
        const int ra = lexical_rank[static_cast<std::size_t>(a)];
        const int rb = lexical_rank[static_cast<std::size_t>(b)];
        if (ra != rb) {
            if (ra == 0) return false;  // absent from the lexical list loses the tie
            if (rb == 0) return true;
            return ra < rb;
        }
        return index.documents()[static_cast<std::size_t>(a)].id <
               index.documents()[static_cast<std::size_t>(b)].id;
    });

    std::vector<RetrievedDocument> results;
    const int take = std::min(config.k, n);
    for (int r = 0; r < take; ++r) {
        const int d = order[static_cast<std::size_t>(r)];
        RetrievedDocument retrieved;
        retrieved.doc = index.documents()[static_cast<std::size_t>(d)];
        retrieved.index = d;
        retrieved.fused_score = fused[static_cast<std::size_t>(d)];
        retrieved.lexical_rank = lexical_rank[static_cast<std::size_t>(d)];
        retrieved.dense_rank = dense_rank[static_cast<std::size_t>(d)];
        results.push_back(std::move(retrieved));
    }
    return results;
}

}  // namespace conflictrag
