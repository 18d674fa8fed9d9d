#include "conflictrag/json_io.hpp"

#include "conflictrag/errors.hpp"

namespace conflictrag {

using nlohmann::json;

json to_json(const Document& doc) {
    json j;
    j["id"] = doc.id;
    j["text"] = doc.text;
    j["source"] = doc.source;
    if (doc.date) j["date"] = doc.date->to_string();
    if (doc.authority_hint) j["authority_hint"] = *doc.authority_hint;
    return j;
}

Document document_from_json(const json& j) {
    if (!j.is_object()) throw ParseError("document entry is not an object");
    Document doc;
    if (!j.contains("id") || !j["id"].is_string()) throw ParseError("document missing \"id\"");
    if (!j.contains("text") || !j["text"].is_string()) throw ParseError("document missing \"text\"");
    doc.id = j["id"].get<std::string>();
    doc.text = j["text"].get<std::string>();
    doc.source = j.value("source", std::string{});
    if (j.contains("date") && !j["date"].is_null()) {
        doc.date = Date::parse(j["date"].get<std::string>());
    }
    if (j.contains("authority_hint") && !j["authority_hint"].is_null()) {
        doc.authority_hint = j["authority_hint"].get<double>();
    }
    doc.validate();
    return doc;
}

json to_json(const Query& query) {
    json j;
    j["id"] = query.id;
    j["question"] = query.text;
    if (query.gold_answer) j["gold_answer"] = *query.gold_answer;
    if (query.gold_conflicts) {
        json golds = json::array();
        for (const auto& gold : *query.gold_conflicts) {
            golds.push_back({{"pair", {gold.pair.index_a, gold.pair.index_b}},
                             {"type", to_string(gold.conflict_type)}});
        }
        j["gold_conflicts"] = golds;
    }
    return j;
}

Query query_from_json(const json& j) {
    Query query;
    if (!j.contains("question") || !j["question"].is_string()) {
        throw ParseError("record missing \"question\"");
    }
    query.id = j.value("id", std::string{});
    query.text = j["question"].get<std::string>();
    if (j.contains("gold_answer") && !j["gold_answer"].is_null()) {
        query.gold_answer = j["gold_answer"].get<std::string>();
    }
    if (j.contains("gold_conflicts") && !j["gold_conflicts"].is_null()) {
        std::vector<GoldConflict> golds;
        for (const auto& entry : j["gold_conflicts"]) {
            if (!entry.contains("pair") || !entry["pair"].is_array() || entry["pair"].size() != 2) {
                throw ParseError("gold conflict missing \"pair\" [a, b]");
            }
            GoldConflict gold;
            gold.pair = DocumentPair::make(entry["pair"][0].get<int>(), entry["pair"][1].get<int>());
            gold.conflict_type = conflict_type_from_string(entry.value("type", std::string{"factual"}));
            if (gold.conflict_type == ConflictType::NoConflict) {
                throw ParseError("gold conflict typed as none");
            }
            golds.push_back(gold);
        }
        query.gold_conflicts = std::move(golds);
    }
    query.validate();
    return query;
}

json to_json(const ConflictFinding& finding) {
    return json{{"pair", {finding.pair.index_a, finding.pair.index_b}},
                {"type", to_string(finding.conflict_type)},
                {"confidence", finding.confidence},
                {"stage", to_string(finding.stage)}};
}

ConflictFinding finding_from_json(const json& j) {
    ConflictFinding finding;
    finding.pair = DocumentPair::make(j.at("pair")[0].get<int>(), j.at("pair")[1].get<int>());
    finding.conflict_type = conflict_type_from_string(j.at("type").get<std::string>());
    finding.confidence = j.at("confidence").get<double>();
    finding.stage = j.value("stage", std::string{"stage1"}) == "stage2" ? DetectionStage::Stage2
                                                                        : DetectionStage::Stage1;
    return finding;
}

json to_json(const ParametricVerdict& verdict) {
    return json{{"closed_book_answer", verdict.closed_book_answer},
                {"open_book_answer", verdict.open_book_answer},
                {"conflicting", verdict.conflicting},
                {"resolution_note", verdict.resolution_note}};
}

ParametricVerdict parametric_from_json(const json& j) {
    ParametricVerdict verdict;
    verdict.closed_book_answer = j.value("closed_book_answer", std::string{});
    verdict.open_book_answer = j.value("open_book_answer", std::string{});
    verdict.conflicting = j.value("conflicting", false);
    verdict.resolution_note = j.value("resolution_note", std::string{});
    return verdict;
}

json to_json(const ConflictReport& report) {
    json findings = json::array();
    for (const auto& finding : report.findings) findings.push_back(to_json(finding));
    json j{{"findings", findings},
           {"pairs_examined", report.pairs_examined},
           {"stage2_calls", report.stage2_calls}};
    if (report.parametric) j["parametric"] = to_json(*report.parametric);
    return j;
}

ConflictReport report_from_json(const json& j) {
    ConflictReport report;
    for (const auto& entry : j.value("findings", json::array())) {
        report.findings.push_back(finding_from_json(entry));
    }
    report.pairs_examined = j.value("pairs_examined", 0);
    report.stage2_calls = j.value("stage2_calls", 0);
    if (j.contains("parametric") && !j["parametric"].is_null()) {
        report.parametric = parametric_from_json(j["parametric"]);
    }
    return report;
}

}  // namespace conflictrag
