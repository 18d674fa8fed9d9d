#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include <json.hpp>

#include "conflictrag/providers.hpp"
#include "conflictrag/util.hpp"

// Rule-based offline stand-in for the chat backend. Each prompt family is
// recognized by markers from the shipped templates; replies are computed from
// the text in the prompt so fixtures can rig outcomes deterministically.

namespace conflictrag {

namespace {

std::string slice_between(const std::string& text, const std::string& after,
                          const std::string& before) {
    auto start = text.find(after);
    if (start == std::string::npos) return {};
    start += after.size();
    auto end = before.empty() ? std::string::npos : text.find(before, start);
    return trim(text.substr(start, end == std::string::npos ? std::string::npos : end - start));
}

std::string line_after(const std::string& text, const std::string& marker) {
    auto start = text.find(marker);
    if (start == std::string::npos) return {};
    start += marker.size();
    auto end = text.find('\n', start);
    return trim(text.substr(start, end == std::string::npos ? std::string::npos : end - start));
}

// A rendered document block is "source: S; date: D" on the first line, text after.
std::string block_body(const std::string& block) {
    auto newline = block.find('\n');
    if (newline == std::string::npos) return block;
    return trim(block.substr(newline + 1));
}

std::string block_source(const std::string& block) {
    // The source sits on the block's header line, possibly after "[k] (role) ".
    auto start = block.find("source: ");
    if (start == std::string::npos) return {};
    start += 8;
    auto end = block.find_first_of(";\n", start);
    return trim(block.substr(start, end == std::string::npos ? std::string::npos : end - start));
}

std::set<int> find_years(const std::string& text) {
    std::set<int> years;
    for (std::size_t i = 0; i + 4 <= text.size(); ++i) {
        if ((i == 0 || !std::isdigit(static_cast<unsigned char>(text[i - 1]))) &&
            std::isdigit(static_cast<unsigned char>(text[i])) &&
            (i + 4 == text.size() || !std::isdigit(static_cast<unsigned char>(text[i + 4])))) {
            int value = std::stoi(text.substr(i, 4));
            if (value >= 1900 && value <= 2099) years.insert(value);
        }
    }
    return years;
}

std::set<std::string> find_numbers(const std::string& text, const std::set<int>& exclude_years) {
    std::set<std::string> numbers;
    std::string current;
    auto flush = [&] {
        if (current.empty()) return;
        bool is_year = current.size() == 4 &&
                       exclude_years.count(std::stoi(current)) > 0;
        if (!is_year) numbers.insert(current);
        current.clear();
    };
    for (char c : text) {
        if (std::isdigit(static_cast<unsigned char>(c)) || (c == '.' && !current.empty())) {
            current.push_back(c);
        } else {
            flush();
        }
    }
    flush();
    return numbers;
}

bool has_opinion_cue(const std::string& text) {
    static const std::vector<std::string> kCues = {
        "believe", "argue",  "opinion", "critics", "proponents",
        "in my view", "should", "contend", "feel that"};
    const std::string lowered = to_lower(text);
    return std::any_of(kCues.begin(), kCues.end(), [&](const std::string& cue) {
        return lowered.find(cue) != std::string::npos;
    });
}

double token_jaccard(const std::string& a, const std::string& b) {
    auto ta = tokenize(a);
    auto tb = tokenize(b);
    std::set<std::string> sa(ta.begin(), ta.end());
    std::set<std::string> sb(tb.begin(), tb.end());
    if (sa.empty() && sb.empty()) return 1.0;
    std::size_t common = 0;
    for (const auto& t : sa) common += sb.count(t);
    return static_cast<double>(common) / static_cast<double>(sa.size() + sb.size() - common);
}

std::string first_sentence(const std::string& text) {
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] == '.' && (i + 1 == text.size() ||
                               std::isspace(static_cast<unsigned char>(text[i + 1])))) {
            return trim(text.substr(0, i + 1));
        }
    }
    return trim(text);
}

std::string verdict_json(bool is_conflict, const std::string& type, const std::string& why) {
    nlohmann::json j{{"is_conflict", is_conflict}, {"type", type}, {"rationale", why}};
    return j.dump();
}

std::string judge_pair(const std::string& prompt) {
    const std::string block_a = slice_between(prompt, "Document A:\n", "\nDocument B:");
    const std::string block_b = slice_between(prompt, "Document B:\n", "\nDecide whether");
    const std::string body_a = block_body(block_a);
    const std::string body_b = block_body(block_b);

    if (has_opinion_cue(body_a) && has_opinion_cue(body_b)) {
        return verdict_json(true, "opinion", "both passages take subjective positions");
    }
    const double jaccard = token_jaccard(body_a, body_b);
    const auto years_a = find_years(body_a);
    const auto years_b = find_years(body_b);
    if (!years_a.empty() && !years_b.empty() && *years_a.rbegin() != *years_b.rbegin() &&
        jaccard >= 0.2) {
        return verdict_json(true, "temporal", "passages refer to different time periods");
    }
    std::set<int> all_years = years_a;
    all_years.insert(years_b.begin(), years_b.end());
    const auto numbers_a = find_numbers(body_a, all_years);
    const auto numbers_b = find_numbers(body_b, all_years);
    if (!numbers_a.empty() && !numbers_b.empty() && numbers_a != numbers_b && jaccard >= 0.2) {
        return verdict_json(true, "factual", "passages state different figures");
    }
    return verdict_json(false, "none", "no contradiction found");
}

std::string compare_answers(const std::string& prompt) {
    const std::string a = line_after(prompt, "Answer 1 (model knowledge):");
    const std::string b = line_after(prompt, "Answer 2 (document-grounded):");
    const std::string la = to_lower(a);
    const std::string lb = to_lower(b);
    if (la.empty() || lb.empty() || la == "unknown" || lb == "unknown") {
        return verdict_json(false, "none", "one side abstained");
    }
    auto ta = tokenize(a);
    auto tb = tokenize(b);
    if (std::set<std::string>(ta.begin(), ta.end()) == std::set<std::string>(tb.begin(), tb.end())) {
        return verdict_json(false, "none", "answers agree");
    }
    return verdict_json(true, "factual", "answers disagree on substance");
}

// Splits the rendered documents section into per-document blocks ("[k] ...").
std::vector<std::string> document_blocks(const std::string& prompt) {
    const std::string section = slice_between(prompt, "Documents:\n", "\n\nDetected conflicts:");
    std::vector<std::string> blocks;
    std::size_t pos = 0;
    while (pos < section.size()) {
        if (section[pos] == '[') {
            auto next = section.find("\n[", pos);
            blocks.push_back(trim(section.substr(pos, next == std::string::npos ? std::string::npos
                                                                                : next - pos)));
            if (next == std::string::npos) break;
            pos = next + 1;
        } else {
            ++pos;
        }
    }
    return blocks;
}

std::string answer_from_block(const std::string& block) {
    // Everything after the "[k] (role) source: ...; date: ..." header line.
    return first_sentence(block_body(block));
}

std::string generate_conflict_aware(const std::string& prompt) {
    auto blocks = document_blocks(prompt);
    std::string chosen = blocks.empty() ? std::string{} : blocks.front();
    for (const auto& block : blocks) {
        if (block.find("(primary_source)") != std::string::npos) {
            chosen = block;
            break;
        }
    }
    const std::string conflicts = slice_between(prompt, "Detected conflicts:\n", "\n\nReply in");

    std::ostringstream out;
    out << "ANSWER: " << answer_from_block(chosen) << "\n";
    out << "CONFLICTS:\n";
    if (conflicts.empty() || conflicts == "(none)") {
        out << "- none\n";
    } else {
        std::istringstream lines(conflicts);
        std::string line;
        while (std::getline(lines, line)) {
            if (!trim(line).empty()) out << line << "\n";
        }
    }
    out << "SOURCES:\n";
    out << "- " << block_source(chosen) << ": supports the answer\n";
    for (const auto& block : blocks) {
        if (block.find("(perspective)") != std::string::npos &&
            block_source(block) != block_source(chosen)) {
            out << "- " << block_source(block) << ": alternative perspective\n";
        }
    }
    const bool any_conflict = !conflicts.empty() && conflicts != "(none)";
    out << "CONFIDENCE: " << (any_conflict ? "Moderate - conflicting sources were reconciled"
                                           : "High - sources agree");
    return out.str();
}

std::string generate_plain(const std::string& prompt) {
    const std::string section = slice_between(prompt, "Documents:\n", "\n\nAnswer:");
    auto newline = section.find('\n');
    if (newline == std::string::npos) return "unknown";
    // First block: "[1] source: ...\ntext..."
    auto next_block = section.find("\n[", newline);
    std::string body = section.substr(newline + 1, next_block == std::string::npos
                                                       ? std::string::npos
                                                       : next_block - newline - 1);
    std::string answer = first_sentence(trim(body));
    return answer.empty() ? "unknown" : answer;
}

std::string judge_answer(const std::string& prompt) {
    const std::string gold = line_after(prompt, "Gold answer:");
    std::string candidate = slice_between(prompt, "Candidate answer:\n", "\nReply with");
    if (auto pos = candidate.find("ANSWER:"); pos != std::string::npos) {
        auto end = candidate.find('\n', pos);
        candidate = candidate.substr(pos + 7, end == std::string::npos ? std::string::npos
                                                                       : end - pos - 7);
    }
    auto gold_tokens = tokenize(gold);
    auto candidate_tokens = tokenize(candidate);
    std::set<std::string> have(candidate_tokens.begin(), candidate_tokens.end());
    bool correct = !gold_tokens.empty();
    for (const auto& token : gold_tokens) {
        if (have.count(token) == 0) {
            correct = false;
            break;
        }
    }
    nlohmann::json j{{"correct", correct},
                     {"rationale", correct ? "gold answer tokens covered" : "gold answer tokens missing"}};
    return j.dump();
}

std::string rate_quality_reply(const std::string& prompt) {
    const bool transparency = to_lower(prompt).find("rate the transparency") != std::string::npos;
    if (transparency) {
        return prompt.find("CONFLICTS:") != std::string::npos ? "5" : "2";
    }
    const std::string conflicts = slice_between(prompt, "Detected conflicts:\n", "\nReply with");
    return (conflicts.empty() || conflicts == "(none)") ? "3" : "4";
}

std::string extract_date_reply(const std::string& prompt) {
    const std::string doc = slice_between(prompt, "Document:\n", "\nReply with");
    for (std::size_t i = 0; i + 10 <= doc.size(); ++i) {
        auto candidate = doc.substr(i, 10);
        if (Date::try_parse(candidate)) {
            return nlohmann::json{{"date", candidate}}.dump();
        }
    }
    return nlohmann::json{{"date", "unknown"}}.dump();
}

}  // namespace

HeuristicChatProvider::HeuristicChatProvider(std::uint64_t seed, std::string model_id)
    : seed_(seed), model_id_(std::move(model_id)) {}

std::string HeuristicChatProvider::chat(const ChatRequest& request) {
    const std::string& prompt = request.user_prompt;

    if (prompt.find("Document A:") != std::string::npos &&
        prompt.find("Document B:") != std::string::npos) {
        return judge_pair(prompt);
    }
    if (prompt.find("Answer 1 (model knowledge):") != std::string::npos) {
        return compare_answers(prompt);
    }
    if (prompt.find("\"authority\"") != std::string::npos &&
        prompt.find("\"specificity\"") != std::string::npos) {
        const std::string q = line_after(prompt, "Question:");
        const std::string block = slice_between(prompt, "Document:\n", "\nReply with");
        const std::string body = block_body(block);
        const std::string source = to_lower(block_source(block));
        const std::string date_field = line_after("\n" + block, "; date: ");

        double authority = 0.3;
        for (const char* cue : {"gov", "agency", "journal", "official", "encyclopedia",
                                "university", "institute", "ministry"}) {
            if (source.find(cue) != std::string::npos) authority = 0.9;
        }
        if (authority < 0.9) {
            for (const char* cue : {"news", "times", "daily", "post"}) {
                if (source.find(cue) != std::string::npos) authority = 0.55;
            }
        }
        double recency = 0.2;
        if (auto date = Date::try_parse(date_field)) {
            recency = std::clamp((date->year - 2000) / 25.0, 0.05, 1.0);
        }
        auto q_tokens = tokenize(q);
        std::set<std::string> q_set(q_tokens.begin(), q_tokens.end());
        auto d_tokens = tokenize(body);
        std::set<std::string> d_set(d_tokens.begin(), d_tokens.end());
        std::size_t common = 0;
        for (const auto& t : q_set) common += d_set.count(t);
        double relevance = q_set.empty() ? 0.5
                                         : std::clamp(static_cast<double>(common) /
                                                          static_cast<double>(q_set.size()),
                                                      0.05, 1.0);
        double specificity =
            std::min(1.0, 0.2 + 0.15 * static_cast<double>(find_numbers(body, {}).size()));
        double consistency = 0.5;

        if (request.temperature > 0.0) {
            std::lock_guard<std::mutex> lock(mutex_);
            Rng rng(seed_ ^ (0x9e3779b97f4a7c15ULL + jitter_counter_++));
            // Uniform +-0.069 has std ~0.04, matching the sampling-noise scale
            // this mock emulates.
            for (double* score : {&authority, &recency, &relevance, &specificity, &consistency}) {
                *score = std::clamp(*score + rng.next_range(-0.069, 0.069), 0.0, 1.0);
            }
        }
        nlohmann::json j{{"authority", authority},
                         {"recency", recency},
                         {"relevance", relevance},
                         {"specificity", specificity},
                         {"consistency", consistency}};
        return j.dump();
    }
    if (prompt.find("Gold answer:") != std::string::npos) {
        return judge_answer(prompt);
    }
    if (to_lower(prompt).find("scale from 1 to 5") != std::string::npos) {
        return rate_quality_reply(prompt);
    }
    if (prompt.find("publication or reference date") != std::string::npos) {
        return extract_date_reply(prompt);
    }
    if (prompt.find("from your own knowledge only") != std::string::npos) {
        return "unknown";
    }
    if (prompt.find("Detected conflicts:") != std::string::npos) {
        return generate_conflict_aware(prompt);
    }
    if (prompt.find("Documents:") != std::string::npos) {
        return generate_plain(prompt);
    }
    return "unknown";
}

}  // namespace conflictrag
