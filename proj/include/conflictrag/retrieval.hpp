#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "conflictrag/providers.hpp"
#include "conflictrag/types.hpp"

namespace conflictrag {

struct Posting {
    int doc = 0;  // ordinal into the corpus
    int tf = 0;

    friend bool operator==(const Posting& a, const Posting& b) {
        return a.doc == b.doc && a.tf == b.tf;
    }
};

struct RetrievalConfig {
    int k = 5;
    double bm25_k1 = 1.2;
    double bm25_b = 0.75;
    int rrf_k0 = 60;

    void validate() const;
};

/// BM25 inverted index over a document corpus. Immutable after build; the
/// corpus documents are stored so the index file is self-contained.
class InvertedIndex {
public:
    static InvertedIndex build(std::vector<Document> corpus);  // throws on empty corpus

    int document_count() const { return static_cast<int>(documents_.size()); }
    double average_document_length() const;
    const std::vector<Document>& documents() const { return documents_; }
    const std::vector<int>& document_lengths() const { return lengths_; }
    const std::vector<Posting>* postings(const std::string& term) const;
    int ordinal_of(const std::string& doc_id) const;  // throws on unknown id

    void save(const std::string& path) const;
    static InvertedIndex load(const std::string& path);

    friend bool operator==(const InvertedIndex& a, const InvertedIndex& b);

private:
    std::map<std::string, std::vector<Posting>> postings_;
    std::vector<int> lengths_;
    std::vector<Document> documents_;
    std::map<std::string, int> id_to_ordinal_;
};

/// Okapi BM25 with IDF = ln(1 + (N - df + 0.5) / (df + 0.5)).
double bm25_score(const InvertedIndex& index, std::span<const std::string> query_terms,
                  const std::string& doc_id, const RetrievalConfig& config = {});

/// Reciprocal-rank fusion: each doc scores sum over lists of 1/(k0 + rank)
/// with rank starting at 1. Docs absent from a list get no contribution from
/// it. rank_lists hold doc ordinals, best first.
std::vector<double> rrf_fuse(std::span<const std::vector<int>> rank_lists, int doc_count,
                             int k0);

struct RetrievedDocument {
    Document doc;
    int index = 0;  // ordinal in the corpus
    double fused_score = 0.0;
    int lexical_rank = 0;  // 1-based; 0 when absent from the BM25 list
    int dense_rank = 0;    // 1-based
};

/// Hybrid BM25 + dense retrieval with reciprocal-rank fusion. Fused ties
/// break by lexical rank then doc id. An empty tokenized query degrades to
/// dense-only ranking with a warning. Returns min(k, corpus size) documents.
std::vector<RetrievedDocument> hybrid_retrieve(const std::string& query_text,
                                               const InvertedIndex& index,
                                               EmbeddingProvider& embedder,
                                               std::span<const EmbeddingVector> corpus_embeddings,
                                               const RetrievalConfig& config = {});

/// Embeds every corpus document (by its text) for the dense leg.
std::vector<EmbeddingVector> embed_corpus(const InvertedIndex& index,
                                          EmbeddingProvider& embedder);

}  // namespace conflictrag
