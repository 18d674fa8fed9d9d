#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

namespace conflictrag {

/// ISO-8601 calendar date. Validated on construction.
struct Date {
    int year = 0;
    int month = 0;
    int day = 0;

    static Date parse(const std::string& iso);            // throws ParseError
    static std::optional<Date> try_parse(const std::string& iso);
    std::string to_string() const;                         // YYYY-MM-DD

    friend bool operator==(const Date& a, const Date& b) {
        return std::tie(a.year, a.month, a.day) == std::tie(b.year, b.month, b.day);
    }
    friend bool operator<(const Date& a, const Date& b) {
        return std::tie(a.year, a.month, a.day) < std::tie(b.year, b.month, b.day);
    }
};

/// A retrieved passage. Identity within a query is positional; the string id
/// exists for reporting only.
struct Document {
    std::string id;
    std::string text;
    std::string source;
    std::optional<Date> date;
    std::optional<double> authority_hint;  // in [0,1] when present

    void validate() const;  // throws ValidationError
};

enum class ConflictType { NoConflict, Factual, Temporal, Opinion };

std::string to_string(ConflictType type);
/// Case-insensitive; accepts "none" and "no-conflict" for NoConflict.
ConflictType conflict_type_from_string(const std::string& name);

/// Unordered document pair, stored with index_a < index_b.
struct DocumentPair {
    int index_a = 0;
    int index_b = 0;

    static DocumentPair make(int a, int b);  // throws ValidationError unless 0 <= a < b

    friend bool operator==(const DocumentPair& x, const DocumentPair& y) {
        return x.index_a == y.index_a && x.index_b == y.index_b;
    }
    friend bool operator<(const DocumentPair& x, const DocumentPair& y) {
        return std::tie(x.index_a, x.index_b) < std::tie(y.index_a, y.index_b);
    }
};

struct GoldConflict {
    DocumentPair pair;
    ConflictType conflict_type = ConflictType::Factual;  // never NoConflict

    void validate(int document_count) const;
};

struct Query {
    std::string id;
    std::string text;
    std::optional<std::string> gold_answer;
    std::optional<std::vector<GoldConflict>> gold_conflicts;

    void validate() const;
};

enum class DetectionStage { Stage1, Stage2 };

std::string to_string(DetectionStage stage);

struct ConflictFinding {
    DocumentPair pair;
    ConflictType conflict_type = ConflictType::NoConflict;
    double confidence = 0.0;  // in [0,1]
    DetectionStage stage = DetectionStage::Stage1;
};

/// Closed-book vs open-book comparison outcome.
struct ParametricVerdict {
    std::string closed_book_answer;
    std::string open_book_answer;
    bool conflicting = false;
    std::string resolution_note;  // non-empty when conflicting
};

/// Output of detection over one query's documents. Findings hold only
/// conflicting pairs; pairs_examined = C(K,2).
struct ConflictReport {
    std::vector<ConflictFinding> findings;
    int pairs_examined = 0;
    int stage2_calls = 0;
    std::optional<ParametricVerdict> parametric;

    bool has_conflicts() const { return !findings.empty(); }
};

/// All unordered pairs over [0, document_count) in lexicographic order.
std::vector<DocumentPair> enumerate_pairs(int document_count);

}  // namespace conflictrag
