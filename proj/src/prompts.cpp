#include "conflictrag/prompts.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "conflictrag/errors.hpp"

namespace conflictrag {

namespace fs = std::filesystem;

PromptLibrary PromptLibrary::load(const std::string& directory) {
    if (!fs::is_directory(directory)) {
        throw ConfigError("template directory '" + directory + "' does not exist");
    }
    PromptLibrary library;
    for (const auto& entry : fs::directory_iterator(directory)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".txt") continue;
        std::ifstream in(entry.path());
        std::ostringstream content;
        content << in.rdbuf();
        library.templates_[entry.path().stem().string()] = content.str();
    }
    if (library.templates_.empty()) {
        throw ConfigError("template directory '" + directory + "' contains no .txt templates");
    }
    return library;
}

const std::string& PromptLibrary::raw(const std::string& name) const {
    auto it = templates_.find(name);
    if (it == templates_.end()) {
        throw ConfigError("unknown prompt template '" + name + "'");
    }
    return it->second;
}

std::string PromptLibrary::render(const std::string& name,
                                  const std::map<std::string, std::string>& variables) const {
    std::string text = raw(name);
    for (const auto& [key, value] : variables) {
        const std::string placeholder = "{" + key + "}";
        std::size_t pos = 0;
        while ((pos = text.find(placeholder, pos)) != std::string::npos) {
            text.replace(pos, placeholder.size(), value);
            pos += value.size();
        }
    }
    return text;
}

std::string render_document_block(const Document& doc) {
    std::string block = "source: " + doc.source + "; date: " +
                        (doc.date ? doc.date->to_string() : std::string{"unknown"});
    block += "\n";
    block += doc.text;
    return block;
}

std::string render_documents_plain(std::span<const Document> docs) {
    std::ostringstream out;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        if (i > 0) out << "\n\n";
        out << "[" << (i + 1) << "] " << render_document_block(docs[i]);
    }
    return out.str();
}

}  // namespace conflictrag
