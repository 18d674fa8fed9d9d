#include "conflictrag/resolve.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "conflictrag/errors.hpp"
#include "conflictrag/util.hpp"

namespace conflictrag {

CriteriaMatrix::CriteriaMatrix(int rows, int cols) : rows_(rows), cols_(cols) {
    if (rows < 1 || cols < 1) {
        throw ValidationError("criteria matrix must have at least one row and column");
    }
    data_.assign(static_cast<std::size_t>(rows) * cols, 0.0);
}

CriteriaMatrix CriteriaMatrix::from_rows(const std::vector<std::vector<double>>& rows) {
    if (rows.empty() || rows.front().empty()) {
        throw ValidationError("criteria matrix must have at least one row and column");
    }
    CriteriaMatrix matrix(static_cast<int>(rows.size()), static_cast<int>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != rows.front().size()) {
            throw ValidationError("ragged criteria matrix");
        }
        for (std::size_t j = 0; j < rows[i].size(); ++j) {
            matrix.set(static_cast<int>(i), static_cast<int>(j), rows[i][j]);
        }
    }
    return matrix;
}

void CriteriaMatrix::set(int i, int j, double value) {
    if (!std::isfinite(value) || value < 0.0 || value > 1.0) {
        throw ValidationError("criteria score must be in [0,1]");
    }
    data_[static_cast<std::size_t>(i) * cols_ + j] = value;
}

void CriteriaWeights::validate() const {
    double sum = 0.0;
    for (double w : values) {
        if (!std::isfinite(w) || w < 0.0) {
            throw ValidationError("criteria weights must be non-negative");
        }
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
        throw ValidationError("criteria weights must sum to 1");
    }
}

CriteriaWeights entropy_weights(const CriteriaMatrix& matrix) {
    const int m = matrix.rows();
    const int n = matrix.cols();
    CriteriaWeights weights;
    weights.values.assign(static_cast<std::size_t>(n), 1.0 / n);
    if (m < 2) {
        return weights;  // a single alternative carries no dispersion signal
    }

    std::vector<double> entropy(static_cast<std::size_t>(n), 1.0);
    for (int j = 0; j < n; ++j) {
        double column_sum = 0.0;
        for (int i = 0; i < m; ++i) column_sum += matrix.at(i, j);
        if (column_sum <= 0.0) {
            continue;  // all-zero column is non-informative: E_j stays 1
        }
        double h = 0.0;
        for (int i = 0; i < m; ++i) {
            const double p = matrix.at(i, j) / column_sum;
            if (p > 0.0) h -= p * std::log(p);
        }
        entropy[static_cast<std::size_t>(j)] = h / std::log(static_cast<double>(m));
    }

    double divergence_sum = 0.0;
    for (int j = 0; j < n; ++j) divergence_sum += 1.0 - entropy[static_cast<std::size_t>(j)];
    if (divergence_sum <= 0.0) {
        return weights;  // every column uniform: fall back to equal weights
    }
    for (int j = 0; j < n; ++j) {
        weights.values[static_cast<std::size_t>(j)] =
            (1.0 - entropy[static_cast<std::size_t>(j)]) / divergence_sum;
    }
    return weights;
}

TopsisRanking topsis_rank(const CriteriaMatrix& matrix, const CriteriaWeights& weights) {
    weights.validate();
    if (static_cast<int>(weights.values.size()) != matrix.cols()) {
        throw ValidationError("weight count does not match criteria count");
    }
    const int m = matrix.rows();
    const int n = matrix.cols();

    // Weighted matrix and per-column ideal / anti-ideal values.
    std::vector<double> ideal(static_cast<std::size_t>(n), -1.0);
    std::vector<double> anti(static_cast<std::size_t>(n), 2.0);
    std::vector<double> weighted(static_cast<std::size_t>(m) * n, 0.0);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            const double v = weights.values[static_cast<std::size_t>(j)] * matrix.at(i, j);
            weighted[static_cast<std::size_t>(i) * n + j] = v;
            ideal[static_cast<std::size_t>(j)] = std::max(ideal[static_cast<std::size_t>(j)], v);
            anti[static_cast<std::size_t>(j)] = std::min(anti[static_cast<std::size_t>(j)], v);
        }
    }

    TopsisRanking ranking;
    ranking.closeness.assign(static_cast<std::size_t>(m), 0.0);
    for (int i = 0; i < m; ++i) {
        double d_plus = 0.0, d_minus = 0.0;
        for (int j = 0; j < n; ++j) {
            const double v = weighted[static_cast<std::size_t>(i) * n + j];
            d_plus += (v - ideal[static_cast<std::size_t>(j)]) * (v - ideal[static_cast<std::size_t>(j)]);
            d_minus += (v - anti[static_cast<std::size_t>(j)]) * (v - anti[static_cast<std::size_t>(j)]);
        }
        d_plus = std::sqrt(d_plus);
        d_minus = std::sqrt(d_minus);
        ranking.closeness[static_cast<std::size_t>(i)] =
            (d_plus + d_minus) == 0.0 ? 0.5 : d_minus / (d_plus + d_minus);
    }
    if (m == 1) {
        ranking.closeness[0] = 1.0;
    }

    ranking.order.resize(static_cast<std::size_t>(m));
    std::iota(ranking.order.begin(), ranking.order.end(), 0);
    std::stable_sort(ranking.order.begin(), ranking.order.end(), [&](int a, int b) {
        return ranking.closeness[static_cast<std::size_t>(a)] >
               ranking.closeness[static_cast<std::size_t>(b)];
    });
    return ranking;
}

double sensitivity(const CriteriaMatrix& matrix, const CriteriaWeights& weights,
                   double perturbation, int trials, std::uint64_t seed) {
    if (perturbation < 0.0 || perturbation >= 1.0) {
        throw ValidationError("perturbation fraction must be in [0,1)");
    }
    if (trials <= 0) {
        throw ValidationError("sensitivity requires at least one trial");
    }
    const int baseline_top = topsis_rank(matrix, weights).order.front();

    Rng rng(seed);
    int changes = 0;
    for (int t = 0; t < trials; ++t) {
        CriteriaWeights perturbed;
        perturbed.values.resize(weights.values.size());
        double sum = 0.0;
        for (std::size_t j = 0; j < weights.values.size(); ++j) {
            perturbed.values[j] =
                weights.values[j] * rng.next_range(1.0 - perturbation, 1.0 + perturbation);
            sum += perturbed.values[j];
        }
        if (sum <= 0.0) {
            perturbed = weights;
            sum = 1.0;
        }
        for (double& w : perturbed.values) w /= sum;
        if (topsis_rank(matrix, perturbed).order.front() != baseline_top) {
            ++changes;
        }
    }
    return static_cast<double>(changes) / static_cast<double>(trials);
}

std::string to_string(RoleTag tag) {
    switch (tag) {
        case RoleTag::PrimarySource: return "primary_source";
        case RoleTag::Superseded: return "superseded";
        case RoleTag::Perspective: return "perspective";
    }
    return "primary_source";
}

CriteriaMatrix extract_criteria(const Query& query, std::span<const Document> documents,
                                ChatProvider& chat, const PromptLibrary& prompts,
                                double temperature) {
    if (documents.empty()) {
        throw ValidationError("criteria extraction requires at least one document");
    }
    CriteriaMatrix matrix(static_cast<int>(documents.size()), kCriteriaCount);
    for (std::size_t i = 0; i < documents.size(); ++i) {
        ChatRequest request;
        request.system_prompt = "You score documents for credibility. Reply with JSON only.";
        request.user_prompt =
            prompts.render("criteria_score", {{"query", query.text},
                                              {"document", render_document_block(documents[i])}});
        request.temperature = temperature;
        const std::string reply = chat.chat(request);

        bool parsed = false;
        auto j = nlohmann::json::parse(reply, nullptr, /*allow_exceptions=*/false);
        if (!j.is_object()) {
            // Tolerate prose around the object.
            const auto start = reply.find('{');
            const auto end = reply.rfind('}');
            if (start != std::string::npos && end != std::string::npos && end > start) {
                j = nlohmann::json::parse(reply.substr(start, end - start + 1), nullptr, false);
            }
        }
        if (j.is_object()) {
            parsed = true;
            for (int c = 0; c < kCriteriaCount; ++c) {
                const char* name = kCriteriaNames[static_cast<std::size_t>(c)];
                if (!j.contains(name) || !j[name].is_number()) {
                    parsed = false;
                    break;
                }
            }
        }
        if (!parsed) {
            log_warning("criteria scores unparseable for document '" + documents[i].id +
                        "'; defaulting the row to 0.5");
            for (int c = 0; c < kCriteriaCount; ++c) matrix.set(static_cast<int>(i), c, 0.5);
            continue;
        }
        for (int c = 0; c < kCriteriaCount; ++c) {
            double score = j[kCriteriaNames[static_cast<std::size_t>(c)]].get<double>();
            if (score < 0.0 || score > 1.0) {
                log_warning("criteria score " + std::string(kCriteriaNames[static_cast<std::size_t>(c)]) +
                            "=" + std::to_string(score) + " clamped to [0,1] for document '" +
                            documents[i].id + "'");
                score = std::clamp(score, 0.0, 1.0);
            }
            matrix.set(static_cast<int>(i), c, score);
        }
    }
    return matrix;
}

DateExtractor llm_date_extractor(ChatProvider& chat) {
    return [&chat](const Document& doc) -> std::optional<Date> {
        ChatRequest request;
        request.system_prompt = "You extract dates from documents. Reply with JSON only.";
        request.user_prompt =
            "Extract the publication or reference date of the document below.\n\nDocument:\n" +
            render_document_block(doc) +
            "\nReply with a single JSON object: {\"date\": \"YYYY-MM-DD\"} or {\"date\": \"unknown\"}";
        request.temperature = 0.0;
        try {
            const std::string reply = chat.chat(request);
            const auto j = nlohmann::json::parse(reply, nullptr, /*allow_exceptions=*/false);
            if (j.is_object() && j.contains("date") && j["date"].is_string()) {
                return Date::try_parse(j["date"].get<std::string>());
            }
        } catch (const Error&) {
            // Extraction is best-effort; fall through to "no date".
        }
        return std::nullopt;
    };
}

TemporalResolution resolve_temporal(std::span<const Document> documents,
                                    std::span<const int> original_indices,
                                    const DateExtractor& extract_date) {
    if (documents.size() != original_indices.size()) {
        throw ValidationError("temporal resolution index list mismatch");
    }
    struct Entry {
        std::size_t position;
        std::optional<Date> date;
    };
    std::vector<Entry> entries;
    for (std::size_t i = 0; i < documents.size(); ++i) {
        std::optional<Date> date = documents[i].date;
        if (!date && extract_date) {
            date = extract_date(documents[i]);
        }
        entries.push_back({i, date});
    }
    // Newest first; undated last; ties keep retrieval order.
    std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
        if (a.date && b.date) return *b.date < *a.date;
        return a.date.has_value() && !b.date.has_value();
    });

    TemporalResolution resolution;
    const bool any_dated = std::any_of(entries.begin(), entries.end(),
                                       [](const Entry& e) { return e.date.has_value(); });
    for (std::size_t rank = 0; rank < entries.size(); ++rank) {
        const Entry& entry = entries[rank];
        ResolvedDocument resolved;
        resolved.doc = documents[entry.position];
        resolved.original_index = original_indices[entry.position];
        resolved.role = (any_dated && rank == 0) ? RoleTag::PrimarySource : RoleTag::Superseded;
        resolution.ordered.push_back(std::move(resolved));
    }
    if (any_dated) {
        resolution.note = "latest source prioritized; older documents kept to show temporal evolution";
    } else {
        resolution.note = "recency undeterminable; original order kept";
        for (auto& resolved : resolution.ordered) resolved.role = RoleTag::Superseded;
        if (!resolution.ordered.empty()) resolution.ordered.front().role = RoleTag::PrimarySource;
    }
    return resolution;
}

OpinionResolution resolve_opinion(std::span<const Document> documents,
                                  std::span<const int> original_indices) {
    if (documents.size() != original_indices.size()) {
        throw ValidationError("opinion resolution index list mismatch");
    }
    OpinionResolution resolution;
    // Viewpoints grouped by source, preserving first-seen order.
    std::vector<std::pair<std::string, std::vector<int>>> by_source;
    for (std::size_t i = 0; i < documents.size(); ++i) {
        ResolvedDocument resolved;
        resolved.doc = documents[i];
        resolved.original_index = original_indices[i];
        resolved.role = RoleTag::Perspective;
        resolution.ordered.push_back(std::move(resolved));

        auto it = std::find_if(by_source.begin(), by_source.end(),
                               [&](const auto& entry) { return entry.first == documents[i].source; });
        if (it == by_source.end()) {
            by_source.push_back({documents[i].source, {original_indices[i]}});
        } else {
            it->second.push_back(original_indices[i]);
        }
    }
    std::ostringstream note;
    note << "multi-perspective synthesis; viewpoints: ";
    for (std::size_t s = 0; s < by_source.size(); ++s) {
        if (s > 0) note << "; ";
        note << by_source[s].first << " (doc";
        if (by_source[s].second.size() > 1) note << "s";
        for (std::size_t d = 0; d < by_source[s].second.size(); ++d) {
            note << (d == 0 ? " " : ", ") << by_source[s].second[d];
        }
        note << ")";
    }
    resolution.note = note.str();
    return resolution;
}

namespace {

void dump_matrix_csv(const std::string& path, const std::string& query_id,
                     const CriteriaMatrix& matrix, std::span<const int> indices) {
    std::ofstream out(path, std::ios::app);
    if (!out) {
        log_warning("cannot append decision matrix to '" + path + "'");
        return;
    }
    out << "query,document";
    for (const char* name : kCriteriaNames) out << "," << name;
    out << "\n";
    for (int i = 0; i < matrix.rows(); ++i) {
        out << query_id << "," << indices[static_cast<std::size_t>(i)];
        for (int j = 0; j < matrix.cols(); ++j) out << "," << matrix.at(i, j);
        out << "\n";
    }
}

}  // namespace

ResolvedContext resolve(const Query& query, std::span<const Document> documents,
                        const ConflictReport& report, ChatProvider& chat,
                        const PromptLibrary& prompts, const ResolveOptions& options) {
    ResolvedContext context;

    // Group conflicting documents by type; a document joins only its
    // highest-priority group (factual > temporal > opinion).
    std::set<int> assigned;
    auto collect = [&](ConflictType type) {
        std::vector<int> indices;
        for (const ConflictFinding& finding : report.findings) {
            if (finding.conflict_type != type) continue;
            for (int idx : {finding.pair.index_a, finding.pair.index_b}) {
                if (idx < 0 || idx >= static_cast<int>(documents.size())) {
                    throw ValidationError("conflict finding references document " +
                                          std::to_string(idx) + " outside the context");
                }
                if (assigned.insert(idx).second) {
                    indices.push_back(idx);
                }
            }
        }
        std::sort(indices.begin(), indices.end());
        return indices;
    };

    const std::vector<int> factual_docs = collect(ConflictType::Factual);
    const std::vector<int> temporal_docs = collect(ConflictType::Temporal);
    const std::vector<int> opinion_docs = collect(ConflictType::Opinion);

    auto subset = [&](const std::vector<int>& indices) {
        std::vector<Document> docs;
        for (int idx : indices) docs.push_back(documents[static_cast<std::size_t>(idx)]);
        return docs;
    };

    if (!factual_docs.empty()) {
        const std::vector<Document> docs = subset(factual_docs);
        StrategyRecord record;
        record.conflict_type = ConflictType::Factual;
        bool degraded = false;
        try {
            CriteriaMatrix matrix = extract_criteria(query, docs, chat, prompts);
            if (options.ignore_consistency) {
                for (int i = 0; i < matrix.rows(); ++i) matrix.set(i, kCriteriaCount - 1, 0.0);
            }
            if (options.matrix_dump_path) {
                dump_matrix_csv(*options.matrix_dump_path, query.id, matrix, factual_docs);
            }
            const CriteriaWeights weights = entropy_weights(matrix);
            const TopsisRanking ranking = topsis_rank(matrix, weights);
            for (std::size_t rank = 0; rank < ranking.order.size(); ++rank) {
                const int local = ranking.order[rank];
                ResolvedDocument resolved;
                resolved.doc = docs[static_cast<std::size_t>(local)];
                resolved.original_index = factual_docs[static_cast<std::size_t>(local)];
                resolved.role = rank == 0 ? RoleTag::PrimarySource : RoleTag::Superseded;
                context.documents.push_back(std::move(resolved));
                record.document_indices.push_back(factual_docs[static_cast<std::size_t>(local)]);
            }
            std::ostringstream note;
            note << "entropy-TOPSIS ranking applied; primary source: "
                 << docs[static_cast<std::size_t>(ranking.order.front())].source << " (closeness "
                 << std::fixed << std::setprecision(3)
                 << ranking.closeness[static_cast<std::size_t>(ranking.order.front())] << ")";
            record.note = note.str();
        } catch (const Error& e) {
            degraded = true;
            log_warning(std::string("criteria extraction failed (") + e.what() +
                        "); keeping retrieval order for the factual group");
        }
        if (degraded) {
            record.document_indices = factual_docs;
            record.note = "criteria extraction failed; retrieval order kept";
            for (std::size_t i = 0; i < factual_docs.size(); ++i) {
                ResolvedDocument resolved;
                resolved.doc = docs[i];
                resolved.original_index = factual_docs[i];
                resolved.role = i == 0 ? RoleTag::PrimarySource : RoleTag::Superseded;
                context.documents.push_back(std::move(resolved));
            }
        }
        context.notes.push_back(record.note);
        context.strategies.push_back(std::move(record));
    }

    if (!temporal_docs.empty()) {
        TemporalResolution temporal =
            resolve_temporal(subset(temporal_docs), temporal_docs, llm_date_extractor(chat));
        StrategyRecord record;
        record.conflict_type = ConflictType::Temporal;
        for (auto& resolved : temporal.ordered) {
            record.document_indices.push_back(resolved.original_index);
            context.documents.push_back(std::move(resolved));
        }
        record.note = temporal.note;
        context.notes.push_back(record.note);
        context.strategies.push_back(std::move(record));
    }

    if (!opinion_docs.empty()) {
        OpinionResolution opinion = resolve_opinion(subset(opinion_docs), opinion_docs);
        StrategyRecord record;
        record.conflict_type = ConflictType::Opinion;
        for (auto& resolved : opinion.ordered) {
            record.document_indices.push_back(resolved.original_index);
            context.documents.push_back(std::move(resolved));
        }
        record.note = opinion.note;
        context.notes.push_back(record.note);
        context.strategies.push_back(std::move(record));
    }

    // Unconflicted documents keep retrieval order after the resolved groups.
    for (std::size_t i = 0; i < documents.size(); ++i) {
        if (assigned.count(static_cast<int>(i)) > 0) continue;
        ResolvedDocument resolved;
        resolved.doc = documents[i];
        resolved.original_index = static_cast<int>(i);
        context.documents.push_back(std::move(resolved));
    }
    return context;
}

}  // namespace conflictrag
