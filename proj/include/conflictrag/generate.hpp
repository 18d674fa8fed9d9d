#pragma once

#include <optional>
#include <string>
#include <vector>

#include "conflictrag/prompts.hpp"
#include "conflictrag/providers.hpp"
#include "conflictrag/resolve.hpp"
#include "conflictrag/types.hpp"

namespace conflictrag {

enum class ConfidenceLevel { High, Moderate, Low };

std::string to_string(ConfidenceLevel level);

struct SourceAttribution {
    std::optional<std::string> claim;  // empty = whole answer
    std::string source;
};

/// The four-part output: answer, conflict annotations, source attribution,
/// confidence qualifier.
struct AnnotatedAnswer {
    std::string answer;
    std::vector<std::string> conflict_annotations;
    std::vector<SourceAttribution> source_attribution;
    ConfidenceLevel confidence = ConfidenceLevel::Moderate;
    std::string confidence_reason;
};

struct GenerationOptions {
    double temperature = 0.3;
    int token_budget = 8000;  // prompt budget at 4 chars per token
};

/// Human-readable conflict summary lines fed to the prompt and reused as
/// synthesized annotations.
std::vector<std::string> summarize_conflicts(const ConflictReport& report,
                                             const ResolvedContext& resolved);

/// Conflict-aware prompt over the resolved order; an empty report falls back
/// to the standard template. Prompts over budget are trimmed by truncating
/// superseded documents from the back.
ChatRequest build_generation_prompt(const Query& query, const ResolvedContext& resolved,
                                    const ConflictReport& report, const PromptLibrary& prompts,
                                    const GenerationOptions& options = {});

/// Calls the generator and parses the sentinel-delimited sections. Missing
/// sections are synthesized: annotations from the report, attribution to the
/// primary source, qualifier Moderate when conflicts exist and High
/// otherwise. Attribution entries naming unknown sources are dropped.
AnnotatedAnswer generate_answer(const ChatRequest& request, const ConflictReport& report,
                                const ResolvedContext& resolved, ChatProvider& chat);

/// Renders the four sections; strip_annotations emits only the ANSWER line
/// (the format-bias ablation mode).
std::string format_answer(const AnnotatedAnswer& answer, bool strip_annotations = false);

}  // namespace conflictrag
