#include "conflictrag/generate.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>

#include "conflictrag/errors.hpp"
#include "conflictrag/util.hpp"

namespace conflictrag {

namespace {

const std::string kGenerationSystemPrompt =
    "You answer questions from retrieved documents, honestly reporting conflicts and sources.";

std::string render_resolved_documents(const ResolvedContext& resolved,
                                      const std::vector<std::string>& overridden_texts) {
    std::ostringstream out;
    for (std::size_t i = 0; i < resolved.documents.size(); ++i) {
        const ResolvedDocument& entry = resolved.documents[i];
        if (i > 0) out << "\n\n";
        out << "[" << (i + 1) << "] ";
        if (entry.role) out << "(" << to_string(*entry.role) << ") ";
        out << "source: " << entry.doc.source << "; date: "
            << (entry.doc.date ? entry.doc.date->to_string() : std::string{"unknown"}) << "\n"
            << overridden_texts[i];
    }
    return out.str();
}

std::string section_between(const std::string& text, const std::string& header,
                            const std::vector<std::string>& terminators) {
    const auto start = text.find(header);
    if (start == std::string::npos) return {};
    std::size_t body_start = start + header.size();
    std::size_t end = text.size();
    for (const std::string& terminator : terminators) {
        const auto pos = text.find(terminator, body_start);
        if (pos != std::string::npos && pos < end) end = pos;
    }
    return trim(text.substr(body_start, end - body_start));
}

std::vector<std::string> bullet_lines(const std::string& block) {
    std::vector<std::string> lines;
    std::istringstream stream(block);
    std::string line;
    while (std::getline(stream, line)) {
        std::string cleaned = trim(line);
        if (cleaned.rfind("- ", 0) == 0) cleaned = trim(cleaned.substr(2));
        if (!cleaned.empty() && cleaned != "none") lines.push_back(cleaned);
    }
    return lines;
}

}  // namespace

std::string to_string(ConfidenceLevel level) {
    switch (level) {
        case ConfidenceLevel::High: return "High";
        case ConfidenceLevel::Moderate: return "Moderate";
        case ConfidenceLevel::Low: return "Low";
    }
    return "Moderate";
}

std::vector<std::string> summarize_conflicts(const ConflictReport& report,
                                             const ResolvedContext& resolved) {
    std::vector<std::string> lines;
    auto source_of = [&](int original_index) -> std::string {
        for (const ResolvedDocument& entry : resolved.documents) {
            if (entry.original_index == original_index) return entry.doc.source;
        }
        return "unknown";
    };
    for (const ConflictFinding& finding : report.findings) {
        char buffer[64];
        std::snprintf(buffer, sizeof(buffer), "%.2f", finding.confidence);
        std::ostringstream line;
        line << to_string(finding.conflict_type) << " conflict between doc "
             << finding.pair.index_a << " (" << source_of(finding.pair.index_a) << ") and doc "
             << finding.pair.index_b << " (" << source_of(finding.pair.index_b) << ") [confidence "
             << buffer << ", " << to_string(finding.stage) << "]";
        lines.push_back(line.str());
    }
    if (!report.findings.empty()) {
        for (const StrategyRecord& strategy : resolved.strategies) {
            lines.push_back("strategy (" + to_string(strategy.conflict_type) + "): " + strategy.note);
        }
    }
    if (report.parametric && report.parametric->conflicting) {
        lines.push_back("parametric-contextual conflict: " + report.parametric->resolution_note);
    }
    return lines;
}

ChatRequest build_generation_prompt(const Query& query, const ResolvedContext& resolved,
                                    const ConflictReport& report, const PromptLibrary& prompts,
                                    const GenerationOptions& options) {
    if (resolved.documents.empty()) {
        throw ValidationError("generation requires at least one resolved document");
    }

    std::vector<std::string> texts;
    texts.reserve(resolved.documents.size());
    for (const ResolvedDocument& entry : resolved.documents) texts.push_back(entry.doc.text);

    auto render = [&]() -> ChatRequest {
        ChatRequest request;
        request.system_prompt = kGenerationSystemPrompt;
        request.temperature = options.temperature;
        if (!report.has_conflicts()) {
            // Standard generation fallback: plain documents, standard template.
            std::vector<Document> docs;
            for (std::size_t i = 0; i < resolved.documents.size(); ++i) {
                Document doc = resolved.documents[i].doc;
                doc.text = texts[i];
                docs.push_back(std::move(doc));
            }
            request.user_prompt = prompts.render(
                "generate_standard",
                {{"query", query.text}, {"documents", render_documents_plain(docs)}});
            return request;
        }
        const std::vector<std::string> conflict_lines = summarize_conflicts(report, resolved);
        std::ostringstream conflicts;
        if (conflict_lines.empty()) {
            conflicts << "(none)";
        } else {
            for (std::size_t i = 0; i < conflict_lines.size(); ++i) {
                if (i > 0) conflicts << "\n";
                conflicts << "- " << conflict_lines[i];
            }
        }
        request.user_prompt = prompts.render(
            "generate_conflict_aware",
            {{"query", query.text},
             {"documents", render_resolved_documents(resolved, texts)},
             {"conflicts", conflicts.str()}});
        return request;
    };

    ChatRequest request = render();
    const std::size_t budget_chars = static_cast<std::size_t>(options.token_budget) * 4;
    if (request.system_prompt.size() + request.user_prompt.size() > budget_chars) {
        // Trim superseded documents from the back until the prompt fits.
        for (std::size_t i = resolved.documents.size(); i-- > 0;) {
            if (resolved.documents[i].role != RoleTag::Superseded) continue;
            const std::size_t over = request.system_prompt.size() + request.user_prompt.size() -
                                     budget_chars;
            if (texts[i].size() > over) {
                texts[i] = trim(texts[i].substr(0, texts[i].size() - over)) + " [truncated]";
            } else {
                texts[i] = "[truncated]";
            }
            request = render();
            if (request.system_prompt.size() + request.user_prompt.size() <= budget_chars) break;
        }
        if (request.system_prompt.size() + request.user_prompt.size() > budget_chars) {
            log_warning("generation prompt still exceeds the token budget after truncating "
                        "superseded documents");
        }
    }
    return request;
}

AnnotatedAnswer generate_answer(const ChatRequest& request, const ConflictReport& report,
                                const ResolvedContext& resolved, ChatProvider& chat) {
    const std::string reply = chat.chat(request);

    std::set<std::string> known_sources;
    for (const ResolvedDocument& entry : resolved.documents) known_sources.insert(entry.doc.source);
    std::string primary_source;
    for (const ResolvedDocument& entry : resolved.documents) {
        if (entry.role == RoleTag::PrimarySource) {
            primary_source = entry.doc.source;
            break;
        }
    }
    if (primary_source.empty() && !resolved.documents.empty()) {
        primary_source = resolved.documents.front().doc.source;
    }

    AnnotatedAnswer answer;
    const bool structured = reply.find("ANSWER:") != std::string::npos;
    if (!structured) {
        if (!trim(reply).empty() && reply.find("CONFLICTS:") == std::string::npos) {
            // Plain reply (standard generation or a format miss): keep it as
            // the answer and synthesize the remaining parts.
            answer.answer = trim(reply);
        } else {
            log_warning("generator reply had no parseable sections; using the raw reply");
            answer.answer = trim(reply);
        }
    } else {
        answer.answer = section_between(reply, "ANSWER:",
                                        {"\nCONFLICTS:", "\nSOURCES:", "\nCONFIDENCE:"});
        for (const std::string& line :
             bullet_lines(section_between(reply, "CONFLICTS:", {"\nSOURCES:", "\nCONFIDENCE:"}))) {
            answer.conflict_annotations.push_back(line);
        }
        for (const std::string& line :
             bullet_lines(section_between(reply, "SOURCES:", {"\nCONFIDENCE:"}))) {
            const auto colon = line.find(':');
            SourceAttribution attribution;
            if (colon == std::string::npos) {
                attribution.source = trim(line);
            } else {
                attribution.source = trim(line.substr(0, colon));
                attribution.claim = trim(line.substr(colon + 1));
            }
            if (known_sources.count(attribution.source) == 0) {
                log_warning("dropping attribution to unknown source '" + attribution.source + "'");
                continue;
            }
            answer.source_attribution.push_back(std::move(attribution));
        }
        const std::string confidence_line = section_between(reply, "CONFIDENCE:", {});
        const std::string lowered = to_lower(confidence_line);
        if (lowered.rfind("high", 0) == 0) {
            answer.confidence = ConfidenceLevel::High;
        } else if (lowered.rfind("low", 0) == 0) {
            answer.confidence = ConfidenceLevel::Low;
        } else if (lowered.rfind("moderate", 0) == 0) {
            answer.confidence = ConfidenceLevel::Moderate;
        }
        const auto dash = confidence_line.find('-');
        if (dash != std::string::npos) {
            answer.confidence_reason = trim(confidence_line.substr(dash + 1));
        }
    }

    // Synthesize whatever the reply did not provide.
    if (answer.conflict_annotations.empty() && report.has_conflicts()) {
        answer.conflict_annotations = summarize_conflicts(report, resolved);
    }
    if (answer.source_attribution.empty() && !primary_source.empty()) {
        answer.source_attribution.push_back(SourceAttribution{std::nullopt, primary_source});
    }
    if (!structured || answer.confidence_reason.empty()) {
        if (report.has_conflicts()) {
            answer.confidence = structured ? answer.confidence : ConfidenceLevel::Moderate;
            if (answer.confidence_reason.empty()) {
                answer.confidence_reason = "conflicting sources were detected and resolved";
            }
        } else {
            answer.confidence = structured ? answer.confidence : ConfidenceLevel::High;
            if (answer.confidence_reason.empty()) {
                answer.confidence_reason = "sources agree";
            }
        }
    }
    return answer;
}

std::string format_answer(const AnnotatedAnswer& answer, bool strip_annotations) {
    std::ostringstream out;
    out << "ANSWER: " << answer.answer;
    if (strip_annotations) return out.str();
    out << "\nCONFLICTS:\n";
    if (answer.conflict_annotations.empty()) {
        out << "- none\n";
    } else {
        for (const std::string& line : answer.conflict_annotations) out << "- " << line << "\n";
    }
    out << "SOURCES:\n";
    for (const SourceAttribution& attribution : answer.source_attribution) {
        out << "- " << attribution.source << ": "
            << (attribution.claim ? *attribution.claim : std::string{"whole answer"}) << "\n";
    }
    out << "CONFIDENCE: " << to_string(answer.confidence) << " - " << answer.confidence_reason;
    return out.str();
}

}  // namespace conflictrag
