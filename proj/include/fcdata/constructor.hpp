#pragma once

// Data collection and construction: ingest online queries, drop near
// duplicates, generate reference calls with a few-shot prompt, and triage the
// online model's calls against them. Agreements are merged; disagreements go
// to an append-only annotation file for expert review.

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fcdata/corpus.hpp"
#include "fcdata/gateway.hpp"
#include "fcdata/json_extract.hpp"
#include "fcdata/semantics.hpp"
#include "fcdata/templates.hpp"

namespace fcdata {

inline constexpr std::size_t kFewShotCount = 5;

struct IncomingQuery {
    std::string query;
    std::vector<ToolCall> online_answer;
    std::vector<ToolSpec> toolset;
    std::string timestamp;  // opaque; carried through for audit
};

inline json to_json(const IncomingQuery& q) {
    json j{{"query", q.query}, {"online_answer", to_json(q.online_answer)}, {"toolset", to_json(q.toolset)}};
    if (!q.timestamp.empty()) j["timestamp"] = q.timestamp;
    return j;
}

/// Accepts "online_answer"/"answers" and "toolset"/"tools".
inline IncomingQuery incoming_from_json(const json& j) {
    if (!j.is_object()) throw Error(ErrorCode::MalformedJson, "incoming query must be a JSON object");
    auto pick = [&](const char* a, const char* b) -> const json& {
        if (auto it = j.find(a); it != j.end()) return *it;
        return detail::require(j, b, "");
    };
    IncomingQuery q;
    q.query = detail::require_string(j, "query", "");
    q.online_answer = parse_tool_calls(pick("online_answer", "answers"), "online_answer");
    q.toolset = parse_toolset(pick("toolset", "tools"), "toolset");
    if (auto t = j.find("timestamp"); t != j.end() && !t->is_null()) q.timestamp = t->is_string() ? t->get<std::string>() : t->dump();
    for (const auto& c : q.online_answer) {
        if (!find_tool(q.toolset, c.name)) {
            throw Error(ErrorCode::UnknownToolInAnswer, "online_answer names '" + c.name + "' which is not in toolset");
        }
    }
    return q;
}

inline std::vector<IncomingQuery> parse_incoming(std::string_view text) {
    std::vector<IncomingQuery> out;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        ++line_no;
        const auto line = trim(text.substr(start, end - start));
        if (!line.empty()) {
            try {
                out.push_back(incoming_from_json(detail::parse_json_text(line, "incoming query")));
            } catch (const Error& e) {
                throw Error(e.code(), "line " + std::to_string(line_no) + ": " + e.what());
            }
        }
        start = end + 1;
    }
    return out;
}

inline std::vector<IncomingQuery> load_incoming(const std::string& path) { return parse_incoming(read_text(path)); }

inline std::string serialize_incoming(const std::vector<IncomingQuery>& qs) {
    std::string out;
    for (const auto& q : qs) out += to_json(q).dump() + "\n";
    return out;
}

// ---------------------------------------------------------------------------
// Ingest

struct IngestDrop {
    std::size_t index = 0;  // position in the incoming batch
    std::string query;
    std::string matched;    // buffer sample id, or "batch:<index>"
    double similarity = 0;
};

inline json to_json(const IngestDrop& d) {
    return json{{"index", d.index}, {"query", d.query}, {"matched", d.matched}, {"similarity", d.similarity}};
}

struct IngestResult {
    std::vector<IncomingQuery> candidates;
    std::vector<std::size_t> candidate_index;  // batch position of each candidate
    std::vector<IngestDrop> dropped;
};

/// Near-duplicate check against the buffer and against earlier candidates of
/// the same batch; first occurrence wins.
inline IngestResult ingest(const std::vector<IncomingQuery>& queries, const Buffer& buffer, EmbeddingBackend& embedder,
                           double threshold = kDefaultDedupThreshold) {
    detail::require_embeddings(buffer);
    IngestResult out;
    if (queries.empty()) return out;
    std::vector<std::string> texts;
    texts.reserve(queries.size());
    for (const auto& q : queries) texts.push_back(q.query);
    const auto vecs = embed_batch(texts, embedder);

    std::vector<std::size_t> kept;
    for (std::size_t i = 0; i < queries.size(); ++i) {
        std::optional<IngestDrop> drop;
        auto hits = find_near_duplicates(vecs[i], buffer, threshold);
        if (!hits.empty()) drop = IngestDrop{i, queries[i].query, hits.front().id, hits.front().similarity};
        for (auto j : kept) {
            const double sim = cosine(vecs[i], vecs[j]);
            if (sim >= threshold && (!drop || sim > drop->similarity)) {
                drop = IngestDrop{i, queries[i].query, "batch:" + std::to_string(j), sim};
            }
        }
        if (drop) {
            out.dropped.push_back(std::move(*drop));
        } else {
            kept.push_back(i);
            out.candidates.push_back(queries[i]);
            out.candidate_index.push_back(i);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Reference generation

inline std::string render_fewshot_prompt(const std::string& query, const std::vector<Sample>& shots,
                                         const std::vector<ToolSpec>& toolset, const TemplateSet& templates) {
    if (shots.empty()) throw Error(ErrorCode::EmptyBuffer, "no few-shot examples available");
    std::string examples;
    for (std::size_t i = 0; i < shots.size(); ++i) {
        if (i) examples += "\n\n";
        examples += "Example " + std::to_string(i + 1) + ":\n";
        examples += "- User query: " + shots[i].query + "\n";
        examples += "- Toolset: " + to_json(shots[i].tools).dump() + "\n";
        examples += "- Correct tool calls: " + to_json(shots[i].answers).dump();
    }
    if (shots.size() < kFewShotCount) {
        examples += "\n\n(Note: only " + std::to_string(shots.size()) +
                    " example(s) are available; the buffer holds fewer than five samples.)";
    }
    return render_template(templates.fewshot_generator, {{"FEW_SHOT_EXAMPLES", examples},
                                                         {"CURRENT_QUERY", query},
                                                         {"CURRENT_TOOLSET", to_json(toolset).dump()}});
}

/// First JSON array of a generator response, parsed as a call list.
inline std::vector<ToolCall> parse_reference_response(std::string_view raw) {
    auto arr = extract_first_json_array(raw);
    if (!arr) throw Error(ErrorCode::UnparseableResponse, "response contains no JSON array");
    try {
        return parse_tool_calls(*arr, "reference");
    } catch (const Error& e) {
        throw Error(ErrorCode::UnparseableResponse, e.what());
    }
}

struct ConstructConfig {
    double dedup_threshold = kDefaultDedupThreshold;
    std::size_t shots = kFewShotCount;
    std::size_t parallelism = 1;
    double temperature = 0.0;
    int max_tokens = 1024;
};

inline ChatRequest fewshot_request(const std::string& query, const Embedding& query_embedding, const Buffer& buffer,
                                   const std::vector<ToolSpec>& toolset, const TemplateSet& templates,
                                   const ConstructConfig& cfg) {
    ChatRequest req;
    req.user = render_fewshot_prompt(query, top_k_similar(query_embedding, buffer, cfg.shots), toolset, templates);
    req.temperature = cfg.temperature;
    req.max_tokens = cfg.max_tokens;
    return req;
}

/// `buffer` must carry embeddings.
inline std::vector<ToolCall> reference_calls(const std::string& query, const Buffer& buffer,
                                             const std::vector<ToolSpec>& toolset, ChatBackend& backend,
                                             EmbeddingBackend& embedder, const TemplateSet& templates,
                                             const ConstructConfig& cfg = {}) {
    const std::vector<std::string> text{query};
    const auto q = embed_batch(text, embedder).front();
    return parse_reference_response(backend.complete(fewshot_request(query, q, buffer, toolset, templates, cfg)));
}

// ---------------------------------------------------------------------------
// Consistency

namespace detail {

inline bool same_call(const ToolCall& a, const ToolCall& b) {
    if (a.name != b.name || a.arguments.size() != b.arguments.size()) return false;
    for (const auto& [k, v] : a.arguments) {
        auto it = b.arguments.find(k);
        if (it == b.arguments.end() || !values_match(v, it->second)) return false;
    }
    return true;
}

}  // namespace detail

/// Order-insensitive structural equality: a perfect matching of calls with the
/// same name, the same key set and matching values.
inline bool consistent(const std::vector<ToolCall>& a, const std::vector<ToolCall>& b) {
    if (a.size() != b.size()) return false;
    const std::size_t n = a.size();
    std::vector<std::vector<std::size_t>> edges(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (detail::same_call(a[i], b[j])) edges[i].push_back(j);
        }
    }
    std::vector<std::optional<std::size_t>> owner(n);
    std::function<bool(std::size_t, std::vector<bool>&)> augment = [&](std::size_t i, std::vector<bool>& seen) {
        for (auto j : edges[i]) {
            if (seen[j]) continue;
            seen[j] = true;
            if (!owner[j] || augment(*owner[j], seen)) {
                owner[j] = i;
                return true;
            }
        }
        return false;
    };
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<bool> seen(n, false);
        if (!augment(i, seen)) return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// Triage

enum class TriageStatus { Merged, Exported, Dropped, Parked };

inline std::string_view to_string(TriageStatus s) noexcept {
    switch (s) {
        case TriageStatus::Merged: return "merged";
        case TriageStatus::Exported: return "exported";
        case TriageStatus::Dropped: return "dropped";
        case TriageStatus::Parked: return "parked";
    }
    return "parked";
}

struct AnnotationRow {
    std::string query;
    std::vector<ToolCall> online_calls;
    std::vector<ToolCall> reference_calls;
    std::vector<ToolSpec> tools;
    std::string status = "pending";  // experts set "approved" or "rejected"
    std::optional<std::vector<ToolCall>> approved_calls;
    std::string note;
};

inline json to_json(const AnnotationRow& r) {
    json j{{"query", r.query},
           {"online_calls", to_json(r.online_calls)},
           {"reference_calls", to_json(r.reference_calls)},
           {"tools", to_json(r.tools)},
           {"status", r.status}};
    if (r.approved_calls) j["approved_calls"] = to_json(*r.approved_calls);
    if (!r.note.empty()) j["note"] = r.note;
    return j;
}

struct TriageEntry {
    std::string query;
    TriageStatus status = TriageStatus::Parked;
    std::string evidence;
};

inline json to_json(const TriageEntry& e) {
    return json{{"query", e.query}, {"status", std::string(to_string(e.status))}, {"evidence", e.evidence}};
}

struct TriageResult {
    Buffer delta;                        // origin = online
    std::vector<AnnotationRow> exports;
    std::vector<IncomingQuery> parked;   // retry queue
    std::vector<TriageEntry> log;        // one entry per candidate, input order
};

/// `buffer` must carry embeddings. Backend failures and unparseable responses
/// park the candidate; nothing inconsistent is ever merged.
inline TriageResult triage(const std::vector<IncomingQuery>& candidates, const Buffer& buffer, ChatBackend& generator,
                           EmbeddingBackend& embedder, const TemplateSet& templates, const ConstructConfig& cfg = {}) {
    detail::require_embeddings(buffer);
    TriageResult out;
    if (candidates.empty()) return out;
    std::vector<std::string> texts;
    for (const auto& c : candidates) texts.push_back(c.query);
    const auto vecs = embed_batch(texts, embedder);
    std::vector<ChatRequest> reqs;
    reqs.reserve(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        reqs.push_back(fewshot_request(candidates[i].query, vecs[i], buffer, candidates[i].toolset, templates, cfg));
    }
    const auto completions = complete_many(generator, reqs, cfg.parallelism);

    std::vector<Sample> merged;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const auto& c = candidates[i];
        TriageEntry entry{c.query, TriageStatus::Parked, ""};
        if (!completions[i].ok()) {
            entry.evidence = completions[i].message;
            out.parked.push_back(c);
            out.log.push_back(std::move(entry));
            continue;
        }
        std::vector<ToolCall> ref;
        try {
            ref = parse_reference_response(completions[i].text);
        } catch (const Error& e) {
            entry.evidence = e.what();
            out.parked.push_back(c);
            out.log.push_back(std::move(entry));
            continue;
        }
        AnnotationRow row{c.query, c.online_answer, ref, c.toolset, "pending", std::nullopt, ""};
        if (consistent(c.online_answer, ref)) {
            Sample s = make_sample(c.query, c.online_answer, c.toolset, Origin::Online);
            auto issues = validate_sample(s);
            if (issues.empty()) {
                entry.status = TriageStatus::Merged;
                entry.evidence = "reference agrees";
                merged.push_back(std::move(s));
                out.log.push_back(std::move(entry));
                continue;
            }
            row.note = "calls agree but fail validation: " + issues.front().code + " at " + issues.front().path;
        } else {
            row.note = "reference disagrees with the online calls";
        }
        entry.status = TriageStatus::Exported;
        entry.evidence = row.note;
        out.exports.push_back(std::move(row));
        out.log.push_back(std::move(entry));
    }
    out.delta = Buffer(std::move(merged));
    return out;
}

// ---------------------------------------------------------------------------
// Annotation files

inline std::string serialize_annotations(const std::vector<AnnotationRow>& rows) {
    std::string out;
    for (const auto& r : rows) out += to_json(r).dump() + "\n";
    return out;
}

struct AnnotationRejection {
    std::size_t line = 0;
    std::string query;
    std::string reason;
};

inline json to_json(const AnnotationRejection& r) {
    return json{{"line", r.line}, {"query", r.query}, {"reason", r.reason}};
}

struct ImportResult {
    Buffer delta;  // origin = online
    std::vector<AnnotationRejection> rejected;
    std::size_t skipped = 0;  // rows not approved
};

/// Imports rows with status "approved", using "approved_calls" when present
/// and the reference calls otherwise. Structurally broken rows raise
/// MalformedAnnotationRow; rows that fail corpus validation are rejected.
inline ImportResult import_annotations(std::string_view text) {
    ImportResult out;
    std::vector<Sample> accepted;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        ++line_no;
        const auto line = trim(text.substr(start, end - start));
        start = end + 1;
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        auto malformed = [&](const std::string& why) {
            return Error(ErrorCode::MalformedAnnotationRow, "line " + std::to_string(line_no) + ": " + why);
        };
        if (j.is_discarded() || !j.is_object()) throw malformed("not a JSON object");
        if (!j.contains("query") || !j["query"].is_string()) throw malformed("missing query");
        if (!j.contains("tools")) throw malformed("missing tools");
        if (!j.contains("status") || !j["status"].is_string()) throw malformed("missing status");
        const std::string query = j["query"].get<std::string>();
        if (j["status"].get<std::string>() != "approved") {
            ++out.skipped;
            continue;
        }
        const char* key = j.contains("approved_calls") ? "approved_calls" : "reference_calls";
        if (!j.contains(key)) throw malformed("approved row carries no calls");
        try {
            Sample s = make_sample(query, parse_tool_calls(j[key], key), parse_toolset(j["tools"]), Origin::Online);
            auto issues = validate_sample(s);
            if (!issues.empty()) {
                out.rejected.push_back({line_no, query, issues.front().code + " at " + issues.front().path});
                continue;
            }
            accepted.push_back(std::move(s));
        } catch (const Error& e) {
            out.rejected.push_back({line_no, query, e.what()});
        }
    }
    out.delta = Buffer(std::move(accepted));
    return out;
}

}  // namespace fcdata
