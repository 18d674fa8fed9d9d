#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "conflictrag/prompts.hpp"
#include "conflictrag/providers.hpp"
#include "conflictrag/types.hpp"

namespace conflictrag {

inline constexpr int kCriteriaCount = 5;
inline constexpr std::array<const char*, kCriteriaCount> kCriteriaNames = {
    "authority", "recency", "relevance", "specificity", "consistency"};

/// m x n decision matrix with entries in [0,1]. The pipeline always uses the
/// five named criteria; the numeric operations accept any column count.
class CriteriaMatrix {
public:
    CriteriaMatrix(int rows, int cols);
    static CriteriaMatrix from_rows(const std::vector<std::vector<double>>& rows);

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    double at(int i, int j) const { return data_[static_cast<std::size_t>(i) * cols_ + j]; }
    void set(int i, int j, double value);  // validates [0,1]

private:
    int rows_;
    int cols_;
    std::vector<double> data_;
};

struct CriteriaWeights {
    std::vector<double> values;  // non-negative, sums to 1

    void validate() const;
};

/// Entropy weight method: p_ij = x_ij / sum_i x_ij,
/// E_j = -(1/ln m) * sum_i p_ij ln p_ij (0 ln 0 := 0),
/// w_j = (1 - E_j) / sum_k (1 - E_k).
/// Degenerate cases: one row or all E_j = 1 give equal weights; an all-zero
/// column is treated as non-informative (E_j := 1).
CriteriaWeights entropy_weights(const CriteriaMatrix& matrix);

struct TopsisRanking {
    std::vector<double> closeness;  // C*_i in [0,1]
    std::vector<int> order;         // descending closeness; ties keep lower index first
};

/// TOPSIS over the weighted matrix v_ij = w_j * x_ij (scores are already in
/// [0,1], so no vector normalization). All criteria are benefit criteria.
/// Rows identical to both ideals get closeness 0.5; a single row gets 1.
TopsisRanking topsis_rank(const CriteriaMatrix& matrix, const CriteriaWeights& weights);

/// Fraction of trials in which a multiplicative weight perturbation in
/// [1-f, 1+f] (renormalized) changes the top-ranked row. Deterministic for a
/// fixed seed.
double sensitivity(const CriteriaMatrix& matrix, const CriteriaWeights& weights,
                   double perturbation, int trials, std::uint64_t seed);

enum class RoleTag { PrimarySource, Superseded, Perspective };

std::string to_string(RoleTag tag);

struct ResolvedDocument {
    Document doc;
    int original_index = 0;                // position in the input document list
    std::optional<RoleTag> role;           // empty for documents outside any conflict
};

struct StrategyRecord {
    ConflictType conflict_type = ConflictType::NoConflict;
    std::vector<int> document_indices;  // original indices, resolved order
    std::string note;
};

/// The reordered context handed to generation. Contains every input document
/// exactly once.
struct ResolvedContext {
    std::vector<ResolvedDocument> documents;
    std::vector<StrategyRecord> strategies;
    std::vector<std::string> notes;
};

struct ResolveOptions {
    bool ignore_consistency = false;  // zero the consistency column before weighting
    std::optional<std::string> matrix_dump_path;  // append decision matrices as CSV
};

/// One criteria-scoring prompt per document. Out-of-range scores are clamped
/// with a warning; unparseable replies default the whole row to 0.5.
CriteriaMatrix extract_criteria(const Query& query, std::span<const Document> documents,
                                ChatProvider& chat, const PromptLibrary& prompts,
                                double temperature = 0.0);

using DateExtractor = std::function<std::optional<Date>(const Document&)>;

/// Builds a DateExtractor that asks the chat provider for an ISO date.
DateExtractor llm_date_extractor(ChatProvider& chat);

struct TemporalResolution {
    std::vector<ResolvedDocument> ordered;  // newest first; undated last
    std::string note;
};

/// Recency ordering; ties keep retrieval order, undated documents go last
/// (after attempting extraction when an extractor is supplied).
TemporalResolution resolve_temporal(std::span<const Document> documents,
                                    std::span<const int> original_indices,
                                    const DateExtractor& extract_date);

struct OpinionResolution {
    std::vector<ResolvedDocument> ordered;  // input order, all tagged Perspective
    std::string note;                       // viewpoints grouped by source
};

OpinionResolution resolve_opinion(std::span<const Document> documents,
                                  std::span<const int> original_indices);

/// Type-adaptive resolution over a detection report. Conflict groups are
/// ordered factual > temporal > opinion, followed by unconflicted documents
/// in retrieval order. Provider failures degrade to retrieval order with a
/// note; they never abort.
ResolvedContext resolve(const Query& query, std::span<const Document> documents,
                        const ConflictReport& report, ChatProvider& chat,
                        const PromptLibrary& prompts, const ResolveOptions& options = {});

}  // namespace conflictrag
