#pragma once

#include <map>
#include <span>
#include <string>

#include "conflictrag/types.hpp"

namespace conflictrag {

/// Prompt templates loaded from a directory of .txt files with {placeholder}
/// substitution. Only exact known placeholders are replaced, so literal JSON
/// braces in templates are safe.
class PromptLibrary {
public:
    static PromptLibrary load(const std::string& directory);

    /// Renders template `name` (file "<name>.txt") with the given variables.
    std::string render(const std::string& name,
                       const std::map<std::string, std::string>& variables) const;

    bool has(const std::string& name) const { return templates_.count(name) > 0; }
    const std::string& raw(const std::string& name) const;

private:
    std::map<std::string, std::string> templates_;
};

/// "source: S; date: D" header plus the passage text. Shared by every prompt
/// that shows a single document.
std::string render_document_block(const Document& doc);

/// Numbered list of documents without role tags (standard prompts).
std::string render_documents_plain(std::span<const Document> docs);

}  // namespace conflictrag
