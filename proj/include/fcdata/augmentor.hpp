#pragma once

// Multi-round distribution-aware repair of blind spots. Each round renders the
// counterfactual-generation prompt with the current entropy state, asks the
// generator for candidates, and keeps only candidates that pass schema,
// diversity, stability and consistency gates. Rounds for one blind spot run
// sequentially; distinct blind spots are repaired independently against the
// same snapshot and merged once in assemble().

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "fcdata/corpus.hpp"
#include "fcdata/diversity.hpp"
#include "fcdata/gateway.hpp"
#include "fcdata/json_extract.hpp"
#include "fcdata/parallel.hpp"
#include "fcdata/semantics.hpp"
#include "fcdata/templates.hpp"

namespace fcdata {

struct AugConfig {
    std::size_t max_rounds = 5;
    std::size_t candidates_per_round = 5;
    std::size_t reps = 5;
    DetectConfig detect;
    double dedup_threshold = kDefaultDedupThreshold;
    double generator_temperature = 0.8;
    double checker_temperature = 0.0;
    int max_tokens = 2048;
    std::size_t parallelism = 1;  // blind spots repaired concurrently
};

struct AugBackends {
    ChatBackend& generator;
    ChatBackend& checker;
    EmbeddingBackend& embedder;
    const TemplateSet& templates;
};

struct AugCandidate {
    std::string new_query;
    std::string new_value;  // normalized
    std::vector<ToolCall> new_tool_call;
    std::string step_rationale;
    std::size_t round = 0;
};

inline json to_json(const AugCandidate& c) {
    return json{{"new_query", c.new_query},
                {"new_value", c.new_value},
                {"new_tool_call", to_json(c.new_tool_call)},
                {"step_rationale", c.step_rationale},
                {"round", c.round}};
}

// ---------------------------------------------------------------------------
// Entropy state of one blind spot

struct DistributionSnapshot {
    ValueHistogram global;
    ValueHistogram local;
    double h_global = 0;
    double h_local = 0;
    double ratio = 0;
};

inline double entropy_ratio(double h_local, double h_global) { return h_global > 0 ? h_local / h_global : 0.0; }

inline DistributionSnapshot snapshot(const ParamDistribution& dist, std::size_t cluster) {
    DistributionSnapshot s;
    s.global = dist.global;
    if (auto it = dist.local.find(cluster); it != dist.local.end()) s.local = it->second;
    s.h_global = entropy(s.global);
    s.h_local = entropy(s.local);
    s.ratio = entropy_ratio(s.h_local, s.h_global);
    return s;
}

inline ParamDistribution target_distribution(const Buffer& buffer, const Clustering& clustering, const BlindSpot& spot) {
    auto all = collect_distributions(buffer, clustering);
    auto it = all.find({spot.tool, spot.parameter});
    if (it == all.end()) {
        throw Error(ErrorCode::UnknownParameter, "no toolset declares " + spot.tool_param());
    }
    return it->second;
}

// ---------------------------------------------------------------------------
// Round bookkeeping

struct CandidateVerdict {
    enum class Status { Accepted, Rejected, Parked };
    Status status = Status::Rejected;
    std::string reason;  // schema | duplicate | target-mismatch | no-diversity-gain | stability | collateral | semantic
    std::string detail;

    static CandidateVerdict accepted() { return {Status::Accepted, "", ""}; }
    static CandidateVerdict rejected(std::string reason, std::string detail = {}) {
        return {Status::Rejected, std::move(reason), std::move(detail)};
    }
    static CandidateVerdict parked(std::string detail) {
        return {Status::Parked, "checker-unavailable", std::move(detail)};
    }
    bool is_accepted() const noexcept { return status == Status::Accepted; }
};

inline std::string_view to_string(CandidateVerdict::Status s) noexcept {
    switch (s) {
        case CandidateVerdict::Status::Accepted: return "accepted";
        case CandidateVerdict::Status::Rejected: return "rejected";
        case CandidateVerdict::Status::Parked: return "parked";
    }
    return "rejected";
}

struct CandidateOutcome {
    AugCandidate candidate;
    CandidateVerdict verdict;
};

struct RoundState {
    std::size_t round = 0;
    double h_global_before = 0, h_global_after = 0;
    double h_cluster_before = 0, h_cluster_after = 0;
    double ratio_before = 0, ratio_after = 0;
    std::size_t accepted = 0;
    std::size_t rejected = 0;
    std::size_t parked = 0;
    std::vector<std::string> generated_values;
    std::vector<CandidateOutcome> outcomes;
    std::vector<std::string> parse_drops;
    std::optional<std::string> failure;  // round produced nothing usable
};

inline json to_json(const RoundState& r) {
    json outcomes = json::array();
    for (const auto& o : r.outcomes) {
        json j = to_json(o.candidate);
        j["status"] = std::string(to_string(o.verdict.status));
        if (!o.verdict.reason.empty()) j["reason"] = o.verdict.reason;
        if (!o.verdict.detail.empty()) j["detail"] = o.verdict.detail;
        outcomes.push_back(std::move(j));
    }
    json j{{"round", r.round},
           {"h_global_before", r.h_global_before},
           {"h_global_after", r.h_global_after},
           {"h_cluster_before", r.h_cluster_before},
           {"h_cluster_after", r.h_cluster_after},
           {"ratio_before", r.ratio_before},
           {"ratio_after", r.ratio_after},
           {"accepted", r.accepted},
           {"rejected", r.rejected},
           {"parked", r.parked},
           {"generated_values", r.generated_values},
           {"outcomes", std::move(outcomes)},
           {"parse_drops", r.parse_drops}};
    if (r.failure) j["failure"] = *r.failure;
    return j;
}

struct AugmentationReport {
    BlindSpot blind_spot;
    std::vector<RoundState> rounds;
    bool resolved = false;
    double final_ratio = 0;
    std::vector<Sample> new_samples;        // origin = augmented
    std::vector<AugCandidate> parked;       // awaiting a checker retry
};

inline json to_json(const AugmentationReport& r) {
    json rounds = json::array();
    for (const auto& s : r.rounds) rounds.push_back(to_json(s));
    json samples = json::array();
    for (const auto& s : r.new_samples) samples.push_back(sample_to_json(s));
    json parked = json::array();
    for (const auto& c : r.parked) parked.push_back(to_json(c));
    return json{{"blind_spot", to_json(r.blind_spot)},
                {"rounds", std::move(rounds)},
                {"resolved", r.resolved},
                {"final_ratio", r.final_ratio},
                {"new_samples", std::move(samples)},
                {"parked", std::move(parked)}};
}

/// Restores what assemble() needs: the spot and its accepted samples.
inline AugmentationReport report_from_json(const json& j) {
    AugmentationReport r;
    try {
        r.blind_spot = blind_spot_from_json(j.at("blind_spot"));
        r.resolved = j.value("resolved", false);
        r.final_ratio = j.value("final_ratio", 0.0);
        for (const auto& s : j.at("new_samples")) r.new_samples.push_back(sample_from_json(s));
    } catch (const json::exception& e) {
        throw Error(ErrorCode::MalformedJson, std::string("augmentation report: ") + e.what());
    }
    return r;
}

// ---------------------------------------------------------------------------
// Prompt rendering

struct AugPromptInput {
    const BlindSpot& spot;
    std::size_t step = 1;
    const DistributionSnapshot& initial;
    const DistributionSnapshot& current;
    const std::vector<RoundState>& history;
    const std::vector<Sample>& reps;
    const Sample& original;
    const std::vector<ToolSpec>& toolset;
    double tau_b = 0.15;
    std::map<ToolParam, ValueHistogram> stable;  // global histograms of the non-target parameters
};

/// "v1: 5 (62.5%), v2: 3 (37.5%)", most frequent first.
inline std::string describe_distribution(const ValueHistogram& h) {
    if (h.total == 0) return "(no values)";
    std::vector<std::pair<std::string, std::size_t>> rows(h.counts.begin(), h.counts.end());
    std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    std::string out;
    for (const auto& [v, c] : rows) {
        if (!out.empty()) out += ", ";
        out += fmt::format("{}: {} ({:.1f}%)", v, c, 100.0 * static_cast<double>(c) / static_cast<double>(h.total));
    }
    return out;
}

inline std::string describe_history(const std::vector<RoundState>& history) {
    if (history.empty()) return "No prior rounds; this is the first round.";
    std::string out;
    for (const auto& r : history) {
        if (!out.empty()) out += " ";
        std::string values;
        for (const auto& v : r.generated_values) values += (values.empty() ? "" : ", ") + v;
        out += fmt::format("Round {}: generated [{}]; accepted {}, rejected {}; entropy ratio {:.4f} -> {:.4f}.",
                           r.round, values, r.accepted, r.rejected, r.ratio_before, r.ratio_after);
        if (r.failure) out += " (round failed: " + *r.failure + ")";
    }
    return out;
}

inline std::string describe_stable(const std::map<ToolParam, ValueHistogram>& stable) {
    if (stable.empty()) return "- (no other parameters)";
    std::string out;
    for (const auto& [tp, h] : stable) {
        std::vector<std::pair<std::string, std::size_t>> rows(h.counts.begin(), h.counts.end());
        std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
        std::string values;
        std::size_t shown = 0;
        for (const auto& [v, _] : rows) {
            if (shown++ == 20) {
                values += ", ...";
                break;
            }
            values += (values.empty() ? "" : ", ") + v;
        }
        if (!out.empty()) out += "\n";
        out += fmt::format("- `{}.{}`: existing values [{}]", tp.first, tp.second, values);
    }
    return out;
}

inline std::string render_aug_prompt(const AugPromptInput& in, std::string_view tmpl) {
    if (in.reps.empty()) throw Error(ErrorCode::MissingPlaceholderData, "no representative queries");
    if (in.step < 1) throw Error(ErrorCode::MissingPlaceholderData, "round numbering starts at 1");
    std::string reps;
    for (std::size_t i = 0; i < in.reps.size(); ++i) reps += fmt::format("{}{}. {}", i ? "\n" : "", i + 1, in.reps[i].query);
    const std::string instruction = fmt::format(
        "Use only the tools defined below. Diversify parameter `{}` of tool `{}` and keep every call valid "
        "against its definition.\nTools: {}",
        in.spot.parameter, in.spot.tool, to_json(in.toolset).dump());

    const auto& i = in.initial;
    const auto& c = in.current;
    const std::map<std::string, std::string> bindings{
        {"step", std::to_string(in.step)},
        {"step-1", std::to_string(in.step - 1)},
        {"tool_param", in.spot.tool_param()},
        {"tool_param.split('.')[-1]", in.spot.parameter},
        {"initial_state['global_entropy']:.4f", fmt::format("{:.4f}", i.h_global)},
        {"initial_state['local_entropy']:.4f", fmt::format("{:.4f}", i.h_local)},
        {"initial_state['entropy_ratio']:.4f", fmt::format("{:.4f}", i.ratio)},
        {"current_state['global_entropy']:.4f", fmt::format("{:.4f}", c.h_global)},
        {"current_state['local_entropy']:.4f", fmt::format("{:.4f}", c.h_local)},
        {"current_state['entropy_ratio']:.4f", fmt::format("{:.4f}", c.ratio)},
        {"current_state['global_entropy'] - initial_state['global_entropy']:+.4f",
         fmt::format("{:+.4f}", c.h_global - i.h_global)},
        {"current_state['local_entropy'] - initial_state['local_entropy']:+.4f",
         fmt::format("{:+.4f}", c.h_local - i.h_local)},
        {"current_state['entropy_ratio'] - initial_state['entropy_ratio']:+.4f",
         fmt::format("{:+.4f}", c.ratio - i.ratio)},
        {"blind_entropy_ration_threshold", render_number(in.tau_b)},
        {"history_desc", describe_history(in.history)},
        {"initial_global_dist_desc", describe_distribution(i.global)},
        {"initial_local_dist_desc", describe_distribution(i.local)},
        {"current_global_dist_desc", describe_distribution(c.global)},
        {"current_local_dist_desc", describe_distribution(c.local)},
        {"instruction", instruction},
        {"input_text", reps},
        {"user_query", in.original.query},
        {"tool_call", to_json(in.original.answers).dump()},
        {"stable_params_desc", describe_stable(in.stable)},
    };
    return render_template(tmpl, bindings);
}

// ---------------------------------------------------------------------------
// Response parsing

struct AugParseResult {
    std::vector<AugCandidate> candidates;
    std::vector<std::string> drops;  // one reason per malformed element
};

/// Reads the first JSON array in `raw`. Malformed elements are dropped with a
/// reason; a response without any JSON array raises NoJsonFound.
inline AugParseResult parse_aug_response(std::string_view raw, const std::string& parameter, std::size_t round = 0) {
    auto arr = extract_first_json_array(raw);
    if (!arr) throw Error(ErrorCode::NoJsonFound, "generator response contains no JSON array");
    const std::string value_key = "new_value_for_" + parameter;
    AugParseResult out;
    for (std::size_t i = 0; i < arr->size(); ++i) {
        const json& e = (*arr)[i];
        const std::string where = "element " + std::to_string(i);
        if (!e.is_object()) {
            out.drops.push_back(where + ": not an object");
            continue;
        }
        auto q = e.find("new_query");
        if (q == e.end() || !q->is_string() || trim(q->get<std::string>()).empty()) {
            out.drops.push_back(where + ": missing new_query");
            continue;
        }
        auto v = e.find(value_key);
        if (v == e.end()) {
            out.drops.push_back(where + ": missing " + value_key);
            continue;
        }
        auto tc = e.find("new_tool_call");
        if (tc == e.end()) {
            out.drops.push_back(where + ": missing new_tool_call");
            continue;
        }
        auto why = e.find("step_rationale");
        if (why == e.end() || !why->is_string()) {
            out.drops.push_back(where + ": missing step_rationale");
            continue;
        }
        AugCandidate c;
        try {
            c.new_value = normalize_value(value_from_json(*v, value_key));
            json calls = *tc;
            if (calls.is_string()) calls = json::parse(calls.get<std::string>());
            if (calls.is_object()) calls = json::array({calls});
            c.new_tool_call = parse_tool_calls(calls, "new_tool_call");
        } catch (const std::exception& ex) {
            out.drops.push_back(where + ": " + ex.what());
            continue;
        }
        c.new_query = std::string(trim(q->get<std::string>()));
        c.step_rationale = why->get<std::string>();
        c.round = round;
        out.candidates.push_back(std::move(c));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Candidate validation

/// Working view of the blind spot while a round is being validated.
struct CandidateContext {
    const BlindSpot& spot;
    const std::vector<ToolSpec>& toolset;
    const ParamDistribution& target;                            // includes already-accepted candidates
    const std::map<ToolParam, ValueHistogram>& global_values;  // every parameter's global histogram
    const std::set<std::string>& known_ids;
    const std::set<std::string>& known_queries;
    DetectConfig detect;
};

namespace detail {

inline std::set<std::size_t> collapsed_clusters(const ParamDistribution& d, const ValueHistogram& global,
                                                const DetectConfig& cfg) {
    std::set<std::size_t> out;
    const double hg = entropy(global);
    if (!(hg > cfg.tau_g)) return out;
    for (const auto& [k, h] : d.local) {
        auto sup = d.support.find(k);
        if (sup == d.support.end() || sup->second < cfg.min_support) continue;
        if (entropy(h) / hg < cfg.tau_b) out.insert(k);
    }
    return out;
}

inline std::vector<std::string> target_values(const AugCandidate& c, const BlindSpot& spot) {
    std::vector<std::string> values;
    for (const auto& call : c.new_tool_call) {
        if (call.name != spot.tool) continue;
        if (auto it = call.arguments.find(spot.parameter); it != call.arguments.end()) {
            values.push_back(normalize_value(it->second));
        }
    }
    return values;
}

}  // namespace detail

/// Local gates, in order: schema, duplicate, target, diversity gain, stability
/// of the other parameters, no collateral blind spots.
inline CandidateVerdict check_candidate_locally(const AugCandidate& c, const CandidateContext& ctx) {
    if (c.new_tool_call.empty()) return CandidateVerdict::rejected("schema", "new_tool_call is empty");
    for (std::size_t i = 0; i < c.new_tool_call.size(); ++i) {
        const auto& call = c.new_tool_call[i];
        const ToolSpec* spec = find_tool(ctx.toolset, call.name);
        if (!spec) return CandidateVerdict::rejected("schema", "unknown tool '" + call.name + "'");
        auto report = validate_call(call, *spec, "new_tool_call[" + std::to_string(i) + "]");
        if (!report.empty()) return CandidateVerdict::rejected("schema", report.front().code + " at " + report.front().path);
    }
    if (ctx.known_queries.contains(c.new_query) ||
        ctx.known_ids.contains(compute_sample_id(c.new_query, c.new_tool_call))) {
        return CandidateVerdict::rejected("duplicate", "query already present");
    }

    const auto values = detail::target_values(c, ctx.spot);
    if (std::find(values.begin(), values.end(), c.new_value) == values.end()) {
        return CandidateVerdict::rejected("target-mismatch",
                                          "new_tool_call does not set " + ctx.spot.tool_param() + " to " + c.new_value);
    }

    ValueHistogram local;
    if (auto it = ctx.target.local.find(ctx.spot.cluster); it != ctx.target.local.end()) local = it->second;
    ValueHistogram local_after = local;
    ValueHistogram global_after = ctx.target.global;
    for (const auto& v : values) {
        local_after.add(v);
        global_after.add(v);
    }
    const double h_before = entropy(local);
    const double h_after = entropy(local_after);
    const double ratio_before = entropy_ratio(h_before, entropy(ctx.target.global));
    const double ratio_after = entropy_ratio(h_after, entropy(global_after));
    if (!(h_after > h_before) || !(ratio_after > ratio_before)) {
        return CandidateVerdict::rejected("no-diversity-gain",
                                          fmt::format("entropy ratio {:.4f} -> {:.4f}", ratio_before, ratio_after));
    }

    for (const auto& call : c.new_tool_call) {
        for (const auto& [k, v] : call.arguments) {
            if (call.name == ctx.spot.tool && k == ctx.spot.parameter) continue;
            auto it = ctx.global_values.find({call.name, k});
            const auto norm = normalize_value(v);
            if (it == ctx.global_values.end() || it->second.count(norm) == 0) {
                return CandidateVerdict::rejected("stability", call.name + "." + k + " = " + norm + " is unseen");
            }
        }
    }

    ParamDistribution after = ctx.target;
    after.global = global_after;
    after.local[ctx.spot.cluster] = local_after;
    auto before_set = detail::collapsed_clusters(ctx.target, ctx.target.global, ctx.detect);
    auto after_set = detail::collapsed_clusters(after, global_after, ctx.detect);
    for (auto k : after_set) {
        if (k != ctx.spot.cluster && !before_set.contains(k)) {
            return CandidateVerdict::rejected("collateral", "cluster " + std::to_string(k) + " would collapse");
        }
    }
    return CandidateVerdict::accepted();
}

/// Semantic gate: renders the consistency-checker prompt and requires the
/// parsed result to be "Consistent". Transport failures park the candidate.
inline CandidateVerdict check_consistency(const AugCandidate& c, const std::vector<ToolSpec>& toolset,
                                          ChatBackend& checker, const TemplateSet& templates,
                                          double temperature = 0.0) {
    ChatRequest req;
    req.user = render_template(templates.consistency_checker, {{"query", c.new_query},
                                                              {"tools", to_json(toolset).dump()},
                                                              {"tool_call", to_json(c.new_tool_call).dump()}});
    req.temperature = temperature;
    std::string raw;
    try {
        raw = checker.complete(req);
    } catch (const std::exception& e) {
        return CandidateVerdict::parked(e.what());
    }
    auto arr = extract_first_json_array(raw);
    if (!arr || arr->empty() || !(*arr)[0].is_object()) {
        return CandidateVerdict::rejected("semantic", "unparseable checker response");
    }
    const auto result = (*arr)[0].value("result", std::string{});
    if (trim(result) != "Consistent") return CandidateVerdict::rejected("semantic", "checker said " + result);
    return CandidateVerdict::accepted();
}

inline CandidateVerdict validate_candidate(const AugCandidate& c, const CandidateContext& ctx, ChatBackend& checker,
                                           const TemplateSet& templates, double checker_temperature = 0.0) {
    auto local = check_candidate_locally(c, ctx);
    if (!local.is_accepted()) return local;
    return check_consistency(c, ctx.toolset, checker, templates, checker_temperature);
}

// ---------------------------------------------------------------------------
// Rounds

struct RoundResult {
    RoundState state;
    std::vector<Sample> accepted;
    std::vector<AugCandidate> parked;
};

namespace detail {

inline std::map<ToolParam, ValueHistogram> global_histograms(const Buffer& buffer) {
    std::map<ToolParam, ValueHistogram> out;
    for (const auto& s : buffer) {
        for (const auto& call : s.answers) {
            for (const auto& [k, v] : call.arguments) out[{call.name, k}].add(normalize_value(v));
        }
    }
    return out;
}

inline bool calls_parameter(const Sample& s, const BlindSpot& spot) {
    return std::any_of(s.answers.begin(), s.answers.end(), [&](const ToolCall& c) {
        return c.name == spot.tool && c.arguments.contains(spot.parameter);
    });
}

}  // namespace detail

/// One generation round. `buffer` must carry embeddings; accepted samples are
/// returned with embeddings and are not merged here.
inline RoundResult run_round(const BlindSpot& spot, const Buffer& buffer, const Clustering& clustering,
                             const AugBackends& backends, const AugConfig& cfg, std::size_t step,
                             const DistributionSnapshot& initial, const std::vector<RoundState>& history) {
    ParamDistribution dist = target_distribution(buffer, clustering, spot);
    const DistributionSnapshot before = snapshot(dist, spot.cluster);

    RoundResult result;
    RoundState& st = result.state;
    st.round = step;
    st.h_global_before = st.h_global_after = before.h_global;
    st.h_cluster_before = st.h_cluster_after = before.h_local;
    st.ratio_before = st.ratio_after = before.ratio;

    const auto reps = representatives(spot.cluster, clustering, buffer, cfg.reps);
    const Sample* original = nullptr;
    for (const auto& r : reps) {
        if (detail::calls_parameter(r, spot)) {
            original = &r;
            break;
        }
    }
    if (!original) {
        for (const auto& s : buffer) {
            auto c = clustering.cluster_of(s.id);
            if (c && *c == spot.cluster && detail::calls_parameter(s, spot)) {
                original = &s;
                break;
            }
        }
    }
    if (!original) original = &reps.front();
    const std::vector<ToolSpec>& toolset = original->tools;

    const auto globals = detail::global_histograms(buffer);
    std::map<ToolParam, ValueHistogram> stable;
    if (const ToolSpec* t = find_tool(toolset, spot.tool)) {
        for (const auto& [p, _] : t->parameters) {
            if (p == spot.parameter) continue;
            auto it = globals.find({spot.tool, p});
            stable[{spot.tool, p}] = it == globals.end() ? ValueHistogram{} : it->second;
        }
    }

    ChatRequest req;
    req.system = fmt::format("Return a JSON list with exactly {} objects.", cfg.candidates_per_round);
    req.user = render_aug_prompt(
        AugPromptInput{spot, step, initial, before, history, reps, *original, toolset, cfg.detect.tau_b, stable},
        backends.templates.counterfactual_generation);
    req.temperature = cfg.generator_temperature;
    req.max_tokens = cfg.max_tokens;
    const std::string raw = backends.generator.complete(req);

    AugParseResult parsed;
    try {
        parsed = parse_aug_response(raw, spot.parameter, step);
    } catch (const Error& e) {
        st.failure = e.what();
        return result;
    }
    st.parse_drops = parsed.drops;
    if (parsed.candidates.size() > cfg.candidates_per_round) parsed.candidates.resize(cfg.candidates_per_round);

    std::set<std::string> ids;
    std::set<std::string> queries;
    for (const auto& s : buffer) {
        ids.insert(s.id);
        queries.insert(s.query);
    }
    for (auto& cand : parsed.candidates) {
        st.generated_values.push_back(cand.new_value);
        const CandidateContext ctx{spot, toolset, dist, globals, ids, queries, cfg.detect};
        auto verdict = validate_candidate(cand, ctx, backends.checker, backends.templates, cfg.checker_temperature);
        switch (verdict.status) {
            case CandidateVerdict::Status::Accepted: {
                ++st.accepted;
                Sample s = make_sample(cand.new_query, cand.new_tool_call, toolset, Origin::Augmented);
                ids.insert(s.id);
                queries.insert(s.query);
                for (const auto& v : detail::target_values(cand, spot)) {
                    dist.global.add(v);
                    dist.local[spot.cluster].add(v);
                }
                ++dist.support[spot.cluster];
                result.accepted.push_back(std::move(s));
                break;
            }
            case CandidateVerdict::Status::Rejected: ++st.rejected; break;
            case CandidateVerdict::Status::Parked:
                ++st.parked;
                result.parked.push_back(cand);
                break;
        }
        result.state.outcomes.push_back({std::move(cand), std::move(verdict)});
    }

    if (!result.accepted.empty()) {
        std::vector<std::string> texts;
        for (const auto& s : result.accepted) texts.push_back(s.query);
        auto vecs = embed_batch(texts, backends.embedder);
        for (std::size_t i = 0; i < vecs.size(); ++i) result.accepted[i].embedding = std::move(vecs[i]);
    }

    const DistributionSnapshot after = snapshot(dist, spot.cluster);
    st.h_global_after = after.h_global;
    st.h_cluster_after = after.h_local;
    st.ratio_after = after.ratio;
    return result;
}

/// Repeats rounds until the cluster's entropy ratio reaches tau_b or
/// max_rounds is spent. Round failures are recorded, never thrown. The input
/// buffer is untouched; accepted samples are returned in the report.
inline AugmentationReport augment_blind_spot(const BlindSpot& spot, const Buffer& buffer, const Clustering& clustering,
                                             const AugBackends& backends, const AugConfig& cfg) {
    AugmentationReport report;
    report.blind_spot = spot;
    Buffer working;
    Clustering clusters = clustering;
    DistributionSnapshot initial;
    try {
        working = with_embeddings(buffer, backends.embedder);
        initial = snapshot(target_distribution(working, clusters, spot), spot.cluster);
    } catch (const std::exception& e) {
        RoundState failed;
        failed.round = 1;
        failed.failure = e.what();
        report.rounds.push_back(std::move(failed));
        return report;
    }

    double ratio = initial.ratio;
    for (std::size_t step = 1; step <= cfg.max_rounds && ratio < cfg.detect.tau_b; ++step) {
        RoundResult rr;
        try {
            rr = run_round(spot, working, clusters, backends, cfg, step, initial, report.rounds);
        } catch (const std::exception& e) {
            rr.state.round = step;
            rr.state.ratio_before = rr.state.ratio_after = ratio;
            auto cur = snapshot(target_distribution(working, clusters, spot), spot.cluster);
            rr.state.h_global_before = rr.state.h_global_after = cur.h_global;
            rr.state.h_cluster_before = rr.state.h_cluster_after = cur.h_local;
            rr.state.failure = e.what();
        }
        if (!rr.accepted.empty()) {
            for (const auto& s : rr.accepted) clusters.assignment[s.id] = spot.cluster;
            std::vector<Sample> next(working.begin(), working.end());
            next.insert(next.end(), rr.accepted.begin(), rr.accepted.end());
            working = Buffer(std::move(next));
            report.new_samples.insert(report.new_samples.end(), rr.accepted.begin(), rr.accepted.end());
        }
        report.parked.insert(report.parked.end(), rr.parked.begin(), rr.parked.end());
        ratio = rr.state.ratio_after;
        report.rounds.push_back(std::move(rr.state));
    }
    report.final_ratio = ratio;
    report.resolved = ratio >= cfg.detect.tau_b;
    return report;
}

/// Repairs each spot against the same snapshot, `cfg.parallelism` at a time.
inline std::vector<AugmentationReport> augment_all(const std::vector<BlindSpot>& spots, const Buffer& buffer,
                                                   const Clustering& clustering, const AugBackends& backends,
                                                   const AugConfig& cfg) {
    const Buffer embedded = with_embeddings(buffer, backends.embedder);
    std::vector<AugmentationReport> reports(spots.size());
    bounded_for_each(spots.size(), cfg.parallelism, [&](std::size_t i) {
        reports[i] = augment_blind_spot(spots[i], embedded, clustering, backends, cfg);
    });
    return reports;
}

/// Clustering plus the source-cluster assignment of every accepted sample.
inline Clustering extend_clustering(Clustering clustering, const std::vector<AugmentationReport>& reports) {
    for (const auto& r : reports) {
        for (const auto& s : r.new_samples) clustering.assignment.emplace(s.id, r.blind_spot.cluster);
    }
    return clustering;
}

// ---------------------------------------------------------------------------
// Assembly

struct AssemblyDrop {
    std::string id;
    std::string query;
    std::string reason;  // duplicate-id | near-duplicate
    std::string matched_id;
    double similarity = 0;
};

struct AssembleResult {
    Buffer buffer;
    std::vector<AssemblyDrop> dropped;
};

inline json to_json(const AssemblyDrop& d) {
    return json{{"id", d.id}, {"query", d.query}, {"reason", d.reason}, {"matched_id", d.matched_id},
                {"similarity", d.similarity}};
}

/// Merges every report's accepted samples (id-level dedup) and then drops
/// augmented queries that are near-duplicates of anything already kept.
/// Original samples are never removed or modified.
inline AssembleResult assemble(const Buffer& buffer, const std::vector<AugmentationReport>& reports,
                               EmbeddingBackend& embedder, double threshold = kDefaultDedupThreshold) {
    AssembleResult out;
    std::vector<Sample> incoming;
    for (const auto& r : reports) incoming.insert(incoming.end(), r.new_samples.begin(), r.new_samples.end());
    if (incoming.empty()) {
        out.buffer = buffer;
        return out;
    }
    std::set<std::string> seen;
    for (const auto& s : buffer) seen.insert(s.id);
    for (const auto& s : incoming) {
        if (!seen.insert(s.id).second) out.dropped.push_back({s.id, s.query, "duplicate-id", s.id, 1.0});
    }
    const Buffer embedded = with_embeddings(merge(buffer, Buffer(incoming)), embedder);

    std::vector<Sample> kept;
    std::vector<Sample> accepted;
    for (const auto& s : embedded) {
        if (buffer.contains(s.id)) kept.push_back(s);
    }
    for (const auto& s : embedded) {
        if (buffer.contains(s.id)) continue;
        const Sample* match = nullptr;
        double best = -2;
        auto consider = [&](const Sample& other) {
            const double sim = cosine(*s.embedding, *other.embedding);
            if (sim >= threshold && sim > best) {
                best = sim;
                match = &other;
            }
        };
        for (const auto& o : kept) consider(o);
        for (const auto& o : accepted) consider(o);
        if (match) {
            out.dropped.push_back({s.id, s.query, "near-duplicate", match->id, best});
        } else {
            accepted.push_back(s);
        }
    }
    kept.insert(kept.end(), accepted.begin(), accepted.end());
    out.buffer = Buffer(std::move(kept));
    return out;
}

}  // namespace fcdata
