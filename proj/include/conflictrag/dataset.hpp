#pragma once

#include <string>
#include <vector>

#include "conflictrag/types.hpp"

namespace conflictrag {

/// One benchmark entry: a question plus its retrieved document pool.
struct DatasetRecord {
    Query query;
    std::vector<Document> documents;
};

/// Reads a line-delimited dataset (one JSON object per line, see README for
/// the schema). Every record is validated; parse and validation errors carry
/// the 1-based line number.
std::vector<DatasetRecord> load_dataset(const std::string& path);

/// Inverse of load_dataset. load_dataset(save_dataset(x)) == x.
void save_dataset(const std::string& path, const std::vector<DatasetRecord>& records);

/// Line-delimited document corpus (one Document object per line).
std::vector<Document> load_corpus(const std::string& path);

}  // namespace conflictrag
