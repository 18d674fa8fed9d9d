#include "conflictrag/types.hpp"

#include <array>
#include <cstdio>

#include "conflictrag/errors.hpp"
#include "conflictrag/util.hpp"

namespace conflictrag {

namespace {

bool is_leap_year(int year) {
    return (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
}

int days_in_month(int year, int month) {
    static constexpr std::array<int, 12> kDays = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    if (month == 2 && is_leap_year(year)) return 29;
    return kDays[static_cast<std::size_t>(month - 1)];
}

}  // namespace

Date Date::parse(const std::string& iso) {
    auto parsed = try_parse(iso);
    if (!parsed) {
        throw ParseError("invalid ISO-8601 date: '" + iso + "'");
    }
    return *parsed;
}

std::optional<Date> Date::try_parse(const std::string& iso) {
    if (iso.size() != 10 || iso[4] != '-' || iso[7] != '-') return std::nullopt;
    for (std::size_t i : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u}) {
        if (iso[i] < '0' || iso[i] > '9') return std::nullopt;
    }
    Date d;
    d.year = std::stoi(iso.substr(0, 4));
    d.month = std::stoi(iso.substr(5, 2));
    d.day = std::stoi(iso.substr(8, 2));
    if (d.month < 1 || d.month > 12) return std::nullopt;
    if (d.day < 1 || d.day > days_in_month(d.year, d.month)) return std::nullopt;
    return d;
}

std::string Date::to_string() const {
    char buffer[16];
    std::snprintf(buffer, sizeof(buffer), "%04d-%02d-%02d", year, month, day);
    return buffer;
}

void Document::validate() const {
    if (trim(text).empty()) {
        throw ValidationError("document '" + id + "' has empty text");
    }
    if (authority_hint && (*authority_hint < 0.0 || *authority_hint > 1.0)) {
        throw ValidationError("document '" + id + "' authority_hint outside [0,1]");
    }
}

std::string to_string(ConflictType type) {
    switch (type) {
        case ConflictType::NoConflict: return "none";
        case ConflictType::Factual: return "factual";
        case ConflictType::Temporal: return "temporal";
        case ConflictType::Opinion: return "opinion";
    }
    return "none";
}

ConflictType conflict_type_from_string(const std::string& name) {
    const std::string lowered = to_lower(trim(name));
    if (lowered == "factual") return ConflictType::Factual;
    if (lowered == "temporal") return ConflictType::Temporal;
    if (lowered == "opinion") return ConflictType::Opinion;
    if (lowered == "none" || lowered == "no-conflict" || lowered == "no_conflict" ||
        lowered == "noconflict") {
        return ConflictType::NoConflict;
    }
    throw ParseError("unknown conflict type: '" + name + "'");
}

DocumentPair DocumentPair::make(int a, int b) {
    if (a < 0 || b < 0 || a >= b) {
        throw ValidationError("document pair requires 0 <= a < b, got (" + std::to_string(a) +
                              ", " + std::to_string(b) + ")");
    }
    return DocumentPair{a, b};
}

void GoldConflict::validate(int document_count) const {
    if (conflict_type == ConflictType::NoConflict) {
        throw ValidationError("gold conflict labeled as no-conflict");
    }
    if (pair.index_a < 0 || pair.index_b <= pair.index_a || pair.index_b >= document_count) {
        throw ValidationError("gold conflict pair (" + std::to_string(pair.index_a) + ", " +
                              std::to_string(pair.index_b) + ") out of range for " +
                              std::to_string(document_count) + " documents");
    }
}

void Query::validate() const {
    if (trim(text).empty()) {
        throw ValidationError("query '" + id + "' has empty text");
    }
}

std::string to_string(DetectionStage stage) {
    return stage == DetectionStage::Stage1 ? "stage1" : "stage2";
}

std::vector<DocumentPair> enumerate_pairs(int document_count) {
    std::vector<DocumentPair> pairs;
    if (document_count < 2) return pairs;
    pairs.reserve(static_cast<std::size_t>(document_count) *
                  static_cast<std::size_t>(document_count - 1) / 2);
    for (int a = 0; a < document_count; ++a) {
        for (int b = a + 1; b < document_count; ++b) {
            pairs.push_back(DocumentPair{a, b});
        }
    }
    return pairs;
}

}  // namespace conflictrag
