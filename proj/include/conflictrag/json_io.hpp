#pragma once

#include <json.hpp>

#include "conflictrag/types.hpp"

// JSON conversions shared by the dataset loader, the index file, and the
// evaluation run file.

namespace conflictrag {

nlohmann::json to_json(const Document& doc);
Document document_from_json(const nlohmann::json& j);

nlohmann::json to_json(const Query& query);
Query query_from_json(const nlohmann::json& j);

nlohmann::json to_json(const ConflictFinding& finding);
ConflictFinding finding_from_json(const nlohmann::json& j);

nlohmann::json to_json(const ConflictReport& report);
ConflictReport report_from_json(const nlohmann::json& j);

nlohmann::json to_json(const ParametricVerdict& verdict);
ParametricVerdict parametric_from_json(const nlohmann::json& j);

}  // namespace conflictrag
