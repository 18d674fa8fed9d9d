#include "conflictrag/dataset.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

#include "conflictrag/errors.hpp"
#include "conflictrag/json_io.hpp"
#include "conflictrag/util.hpp"

namespace conflictrag {

using nlohmann::json;

namespace {

DatasetRecord record_from_json(const json& j) {
    DatasetRecord record;
    record.query = query_from_json(j);
    if (!j.contains("documents") || !j["documents"].is_array()) {
        throw ParseError("record missing \"documents\" array");
    }
    std::set<std::string> seen_ids;
    for (const auto& entry : j["documents"]) {
        Document doc = document_from_json(entry);
        if (!seen_ids.insert(doc.id).second) {
            throw ValidationError("duplicate document id '" + doc.id + "' within record");
        }
        record.documents.push_back(std::move(doc));
    }
    if (record.query.gold_conflicts) {
        for (const auto& gold : *record.query.gold_conflicts) {
            gold.validate(static_cast<int>(record.documents.size()));
        }
    }
    return record;
}

json record_to_json(const DatasetRecord& record) {
    json j = to_json(record.query);
    json docs = json::array();
    for (const auto& doc : record.documents) docs.push_back(to_json(doc));
    j["documents"] = docs;
    return j;
}

template <typename Fn>
auto for_each_line(const std::string& path, Fn&& fn) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open '" + path + "'");
    }
    std::string line;
    int line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (trim(line).empty()) continue;
        try {
            fn(json::parse(line), line_number);
        } catch (const json::parse_error& e) {
            throw ParseError(path + ":" + std::to_string(line_number) + ": invalid JSON: " + e.what());
        } catch (const Error& e) {
            throw ParseError(path + ":" + std::to_string(line_number) + ": " + e.what());
        }
    }
}

}  // namespace

std::vector<DatasetRecord> load_dataset(const std::string& path) {
    std::vector<DatasetRecord> records;
    for_each_line(path, [&](const json& j, int) { records.push_back(record_from_json(j)); });
    return records;
}

void save_dataset(const std::string& path, const std::vector<DatasetRecord>& records) {
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write '" + path + "'");
    }
    for (const auto& record : records) {
        out << record_to_json(record).dump() << "\n";
    }
}

std::vector<Document> load_corpus(const std::string& path) {
    std::vector<Document> documents;
    std::set<std::string> seen_ids;
    for_each_line(path, [&](const json& j, int) {
        Document doc = document_from_json(j);
        if (!seen_ids.insert(doc.id).second) {
            throw ValidationError("duplicate document id '" + doc.id + "' in corpus");
        }
        documents.push_back(std::move(doc));
    });
    return documents;
}

}  // namespace conflictrag
