#pragma once

// Pipeline stages as file-to-file commands. Each command reads explicit
// inputs, writes new output files (never the inputs) and returns a JSON
// summary plus an exit status: 0 success, 1 validation failure, 2 backend
// failure.

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fcdata/augmentor.hpp"
#include "fcdata/config.hpp"
#include "fcdata/constructor.hpp"
#include "fcdata/diversity.hpp"
#include "fcdata/scoring.hpp"
#include "fcdata/semantics.hpp"

namespace fcdata {

enum ExitStatus : int { kExitOk = 0, kExitValidation = 1, kExitBackend = 2 };

inline int exit_status_for(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::BackendUnavailable:
        case ErrorCode::AuthMissing:
        case ErrorCode::ScriptExhausted:
        case ErrorCode::CheckerUnavailable: return kExitBackend;
        default: return kExitValidation;
    }
}

inline json error_json(const Error& e) {
    return json{{"error", std::string(to_string(e.code()))}, {"message", e.what()}};
}

struct CommandResult {
    int status = kExitOk;
    json summary = json::object();
};

namespace detail {

inline void require_distinct(const std::string& in, const std::string& out) {
    if (in.empty() || out.empty()) return;
    std::error_code ec;
    if (std::filesystem::exists(out) && std::filesystem::equivalent(in, out, ec)) {
        throw Error(ErrorCode::InvalidArgument, "refusing to overwrite input " + in);
    }
}

inline void require_path(const std::string& p, const char* what) {
    if (p.empty()) throw Error(ErrorCode::InvalidArgument, std::string("no path given for ") + what);
}

inline void ensure_parent(const std::string& path) {
    const auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
}

inline void write_json(const std::string& path, const json& j) {
    ensure_parent(path);
    write_text(path, j.dump(2) + "\n");
}

inline void write_file(const std::string& path, std::string_view text) {
    ensure_parent(path);
    write_text(path, text);
}

inline json read_json_file(const std::string& path) {
    json j = json::parse(read_text(path), nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::MalformedJson, path + " is not valid JSON");
    return j;
}

inline std::vector<json> read_jsonl(const std::string& path) {
    std::vector<json> rows;
    std::size_t n = 0;
    for (const auto& line : read_lines(path)) {
        ++n;
        if (trim(line).empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) throw Error(ErrorCode::MalformedJson, path + ":" + std::to_string(n) + ": invalid JSON");
        rows.push_back(std::move(j));
    }
    return rows;
}

inline Clustering load_clustering(const std::string& path) {
    json j = read_json_file(path);
    return clustering_from_json(j.contains("clustering") ? j["clustering"] : j);
}

inline std::vector<BlindSpot> load_blind_spots(const std::string& path) {
    json j = read_json_file(path);
    const json& arr = j.is_array() ? j : j.at("blind_spots");
    std::vector<BlindSpot> out;
    for (const auto& b : arr) out.push_back(blind_spot_from_json(b));
    return out;
}

inline std::map<std::string, std::string> load_plans(const std::string& path) {
    std::map<std::string, std::string> plans;
    for (const auto& row : read_jsonl(path)) {
        if (!row.contains("id") || !row.contains("plan")) throw Error(ErrorCode::MalformedJson, path + ": plan rows need id and plan");
        plans[row["id"].get<std::string>()] = row["plan"].get<std::string>();
    }
    return plans;
}

/// Accepts a bare call list, or an object carrying "answers" or "calls".
inline std::vector<ToolCall> calls_from_row(const json& row, const std::string& where) {
    if (row.is_array() || row.is_string()) return parse_tool_calls(row, where);
    if (row.is_object()) {
        if (row.contains("answers")) return parse_tool_calls(row["answers"], where + ".answers");
        if (row.contains("calls")) return parse_tool_calls(row["calls"], where + ".calls");
    }
    throw Error(ErrorCode::MalformedJson, where + ": expected a call list or an object with answers/calls");
}

}  // namespace detail

// ---------------------------------------------------------------------------

struct IngestArgs {
    std::string buffer, incoming, candidates_out, report_out;
    std::optional<double> threshold;
};

inline CommandResult cmd_ingest(const PipelineConfig& cfg, const IngestArgs& a) {
    detail::require_path(a.candidates_out, "candidates output");
    detail::require_distinct(a.incoming, a.candidates_out);
    ConfiguredEmbedder embedder(cfg);
    const Buffer buffer = with_embeddings(load_corpus(a.buffer), embedder);
    const auto incoming = load_incoming(a.incoming);
    const auto res = ingest(incoming, buffer, embedder, a.threshold.value_or(cfg.dedup_threshold));
    detail::write_file(a.candidates_out, serialize_incoming(res.candidates));
    CommandResult r;
    json dropped = json::array();
    for (const auto& d : res.dropped) dropped.push_back(to_json(d));
    r.summary = {{"incoming", incoming.size()}, {"candidates", res.candidates.size()},
                 {"dropped", res.dropped.size()}, {"dropped_queries", dropped}};
    if (!a.report_out.empty()) detail::write_json(a.report_out, r.summary);
    embedder.flush();
    return r;
}

struct ConstructArgs {
    std::string buffer, incoming, corpus_out, export_path, report_out, retry_out;
    std::optional<double> threshold;
    std::optional<BackendConfig> backend;  // overrides the constructor role
};

inline CommandResult cmd_construct(const PipelineConfig& cfg, const ConstructArgs& a) {
    detail::require_path(a.corpus_out, "corpus output");
    detail::require_path(a.export_path, "annotation export");
    detail::require_distinct(a.buffer, a.corpus_out);
    ConfiguredEmbedder embedder(cfg);
    const Buffer raw = load_corpus(a.buffer);
    const Buffer buffer = with_embeddings(raw, embedder);
    const auto incoming = load_incoming(a.incoming);
    ConstructConfig cc = cfg.construction;
    cc.dedup_threshold = a.threshold.value_or(cfg.dedup_threshold);
    const auto ing = ingest(incoming, buffer, embedder, cc.dedup_threshold);

    auto backend = make_chat_backend(a.backend ? *a.backend : cfg.backend("constructor"));
    const auto tri = triage(ing.candidates, buffer, *backend, embedder, cfg.templates(), cc);

    save_corpus(a.corpus_out, merge(raw, tri.delta));
    detail::write_file(a.export_path, serialize_annotations(tri.exports));
    if (!a.retry_out.empty()) detail::write_file(a.retry_out, serialize_incoming(tri.parked));

    CommandResult r;
    json log = json::array();
    for (const auto& e : tri.log) log.push_back(to_json(e));
    r.summary = {{"incoming", incoming.size()},
                 {"dropped", ing.dropped.size()},
                 {"merged", tri.delta.size()},
                 {"exported", tri.exports.size()},
                 {"parked", tri.parked.size()},
                 {"corpus_size", raw.size() + tri.delta.size()},
                 {"triage", log}};
    if (!a.report_out.empty()) detail::write_json(a.report_out, r.summary);
    embedder.flush();
    if (!tri.parked.empty()) r.status = kExitBackend;
    return r;
}

struct ClusterArgs {
    std::string corpus, out;
    std::optional<std::size_t> k;
    std::optional<std::uint64_t> seed;
};

inline CommandResult cmd_cluster(const PipelineConfig& cfg, const ClusterArgs& a) {
    detail::require_path(a.out, "clustering output");
    ConfiguredEmbedder embedder(cfg);
    const Buffer buffer = with_embeddings(load_corpus(a.corpus), embedder);
    if (buffer.empty()) throw Error(ErrorCode::EmptyInput, "corpus is empty");
    const std::size_t k = a.k ? *a.k : (cfg.k ? *cfg.k : default_k(buffer.size()));
    const Clustering c = cluster_buffer(buffer, k, a.seed.value_or(cfg.seed));
    std::vector<std::size_t> sizes(c.k, 0);
    for (const auto& [_, l] : c.assignment) ++sizes[l];
    detail::write_json(a.out, to_json(c));
    embedder.flush();
    CommandResult r;
    r.summary = {{"k", c.k}, {"seed", c.seed}, {"samples", buffer.size()}, {"sizes", sizes}};
    return r;
}

struct DetectArgs {
    std::string corpus, clustering, out;
    std::optional<double> tau_g, tau_b;
    std::optional<std::size_t> min_support;
};

inline DetectConfig detect_config(const PipelineConfig& cfg, const DetectArgs& a) {
    DetectConfig d = cfg.detect;
    if (a.tau_g) d.tau_g = *a.tau_g;
    if (a.tau_b) d.tau_b = *a.tau_b;
    if (a.min_support) d.min_support = *a.min_support;
    d.validate();
    return d;
}

inline json hist_json(const ValueHistogram& h) { return json{{"counts", h.counts}, {"total", h.total}}; }

inline CommandResult cmd_detect(const PipelineConfig& cfg, const DetectArgs& a) {
    detail::require_path(a.out, "detection report");
    const DetectConfig d = detect_config(cfg, a);
    const Buffer buffer = load_corpus(a.corpus);
    const Clustering clustering = detail::load_clustering(a.clustering);
    const auto spots = detect_blind_spots(buffer, clustering, d);
    const auto dists = collect_distributions(buffer, clustering);
    json arr = json::array();
    for (const auto& s : spots) {
        json j = to_json(s);
        const auto& dist = dists.at({s.tool, s.parameter});
        j["global_histogram"] = hist_json(dist.global);
        j["cluster_histogram"] = hist_json(dist.local.at(s.cluster));
        arr.push_back(std::move(j));
    }
    CommandResult r;
    r.summary = {{"tau_g", d.tau_g}, {"tau_b", d.tau_b}, {"min_support", d.min_support},
                 {"count", spots.size()}, {"blind_spots", arr}};
    detail::write_json(a.out, r.summary);
    return r;
}

struct AugmentArgs {
    std::string corpus, clustering, spots, reports_out, corpus_out, parked_out;
    std::optional<std::size_t> max_rounds, candidates_per_round, reps;
    std::optional<BackendConfig> generator, checker;
};

inline CommandResult cmd_augment(const PipelineConfig& cfg, const AugmentArgs& a) {
    detail::require_path(a.reports_out, "augmentation reports");
    detail::require_path(a.corpus_out, "corpus output");
    detail::require_distinct(a.corpus, a.corpus_out);
    AugConfig ac = cfg.augmentation;
    if (a.max_rounds) ac.max_rounds = *a.max_rounds;
    if (a.candidates_per_round) ac.candidates_per_round = *a.candidates_per_round;
    if (a.reps) ac.reps = *a.reps;

    const Buffer buffer = load_corpus(a.corpus);
    const Clustering clustering = detail::load_clustering(a.clustering);
    const auto spots = detail::load_blind_spots(a.spots);
    ConfiguredEmbedder embedder(cfg);
    auto generator = make_chat_backend(a.generator ? *a.generator : cfg.backend("generator"));
    auto checker = make_chat_backend(a.checker ? *a.checker : cfg.backend("checker"));
    const TemplateSet templates = cfg.templates();
    const AugBackends backends{*generator, *checker, embedder, templates};

    const auto reports = augment_all(spots, buffer, clustering, backends, ac);
    const auto assembled = assemble(buffer, reports, embedder, ac.dedup_threshold);

    json rep = json::array();
    json parked = json::array();
    std::size_t resolved = 0, accepted = 0, failed_rounds = 0;
    for (const auto& r : reports) {
        rep.push_back(to_json(r));
        resolved += r.resolved ? 1 : 0;
        accepted += r.new_samples.size();
        for (const auto& c : r.parked) {
            json p = to_json(c);
            p["blind_spot"] = to_json(r.blind_spot);
            parked.push_back(std::move(p));
        }
        for (const auto& s : r.rounds) failed_rounds += s.failure ? 1 : 0;
    }
    json dropped = json::array();
    for (const auto& d : assembled.dropped) dropped.push_back(to_json(d));
    detail::write_json(a.reports_out, json{{"reports", rep}, {"assembly_drops", dropped}});
    save_corpus(a.corpus_out, assembled.buffer);
    if (!a.parked_out.empty()) {
        std::string lines;
        for (const auto& p : parked) lines += p.dump() + "\n";
        detail::write_file(a.parked_out, lines);
    }
    embedder.flush();

    const Clustering extended = extend_clustering(clustering, reports);
    CommandResult r;
    r.summary = {{"blind_spots", spots.size()},
                 {"resolved", resolved},
                 {"accepted", accepted},
                 {"assembled_added", assembled.buffer.size() - buffer.size()},
                 {"assembly_drops", assembled.dropped.size()},
                 {"parked", parked.size()},
                 {"failed_rounds", failed_rounds},
                 {"blind_spots_after", blind_spot_count(assembled.buffer, extended, ac.detect)}};
    return r;
}

struct AssembleArgs {
    std::string corpus;
    std::vector<std::string> reports;
    std::string corpus_out;
    std::optional<double> threshold;
};

inline CommandResult cmd_assemble(const PipelineConfig& cfg, const AssembleArgs& a) {
    detail::require_path(a.corpus_out, "corpus output");
    detail::require_distinct(a.corpus, a.corpus_out);
    std::vector<AugmentationReport> reports;
    for (const auto& path : a.reports) {
        json j = detail::read_json_file(path);
        const json& arr = j.is_array() ? j : j.at("reports");
        for (const auto& r : arr) reports.push_back(report_from_json(r));
    }
    CommandResult r;
    std::size_t incoming = 0;
    for (const auto& rep : reports) incoming += rep.new_samples.size();
    if (incoming == 0) {
        // nothing to merge: copy the input verbatim
        const Buffer check = load_corpus(a.corpus);
        detail::write_file(a.corpus_out, read_text(a.corpus));
        r.summary = {{"reports", reports.size()}, {"added", 0}, {"dropped", 0}, {"corpus_size", check.size()}};
        return r;
    }
    ConfiguredEmbedder embedder(cfg);
    const Buffer buffer = load_corpus(a.corpus);
    const auto out = assemble(buffer, reports, embedder, a.threshold.value_or(cfg.dedup_threshold));
    save_corpus(a.corpus_out, out.buffer);
    embedder.flush();
    json dropped = json::array();
    for (const auto& d : out.dropped) dropped.push_back(to_json(d));
    r.summary = {{"reports", reports.size()},
                 {"added", out.buffer.size() - buffer.size()},
                 {"dropped", out.dropped.size()},
                 {"drops", dropped},
                 {"corpus_size", out.buffer.size()}};
    return r;
}

struct ScoreArgs {
    std::string in, out;
    std::optional<RewardCombine> combine;
};

/// Input rows: {raw, mode, reference}. Output rows: RewardBreakdown.
inline CommandResult cmd_score(const PipelineConfig& cfg, const ScoreArgs& a) {
    detail::require_path(a.out, "score output");
    const RewardCombine combine = a.combine.value_or(cfg.reward_combine);
    std::string out;
    std::size_t n = 0;
    double total = 0;
    for (const auto& row : detail::read_jsonl(a.in)) {
        const std::string where = "row " + std::to_string(n + 1);
        if (!row.is_object() || !row.contains("raw") || !row["raw"].is_string()) {
            throw Error(ErrorCode::MalformedJson, where + ": missing raw");
        }
        const OutputMode mode = output_mode_from_string(row.value("mode", std::string("direct")));
        if (!row.contains("reference")) throw Error(ErrorCode::MalformedJson, where + ": missing reference");
        const auto ref = detail::calls_from_row(row["reference"], where + ".reference");
        const auto b = reward(row["raw"].get<std::string>(), mode, ref, combine);
        out += to_json(b).dump() + "\n";
        total += b.total;
        ++n;
    }
    detail::write_file(a.out, out);
    CommandResult r;
    r.summary = {{"rows", n}, {"mean_total", n ? total / static_cast<double>(n) : 0.0}};
    return r;
}

struct EvaluateArgs {
    std::string predictions, references, out;
};

inline CommandResult cmd_evaluate(const PipelineConfig&, const EvaluateArgs& a) {
    detail::require_path(a.out, "evaluation report");
    std::vector<std::vector<ToolCall>> preds, refs;
    std::size_t n = 0;
    for (const auto& row : detail::read_jsonl(a.predictions)) preds.push_back(detail::calls_from_row(row, "prediction " + std::to_string(++n)));
    n = 0;
    for (const auto& row : detail::read_jsonl(a.references)) refs.push_back(detail::calls_from_row(row, "reference " + std::to_string(++n)));
    const auto report = selection_f1(preds, refs);
    detail::write_json(a.out, to_json(report));
    CommandResult r;
    r.summary = {{"rows", preds.size()}, {"macro_f1", report.macro_f1}, {"micro_f1", report.micro_f1}};
    return r;
}

enum class SftModes { Reasoning, Direct, Both };

inline SftModes sft_modes_from_string(std::string_view s) {
    if (s == "reasoning") return SftModes::Reasoning;
    if (s == "direct") return SftModes::Direct;
    if (s == "both") return SftModes::Both;
    throw Error(ErrorCode::InvalidArgument, "mode must be reasoning, direct or both");
}

struct ExportSftArgs {
    std::string corpus, plans, out;
    SftModes modes = SftModes::Both;
    bool strict = false;
};

inline CommandResult cmd_export_sft(const PipelineConfig& cfg, const ExportSftArgs& a) {
    detail::require_path(a.out, "SFT output");
    const Buffer buffer = load_corpus(a.corpus);
    const std::string plans_path = a.plans.empty() ? cfg.plans_path : a.plans;
    std::map<std::string, std::string> plans;
    if (!plans_path.empty() && std::filesystem::exists(plans_path)) plans = detail::load_plans(plans_path);
    const TemplateSet templates = cfg.templates();
    std::string out;
    std::size_t records = 0, skipped = 0, format_ok = 0;
    json missing = json::array();
    for (const auto& s : buffer) {
        std::vector<OutputMode> modes;
        if (a.modes != SftModes::Direct) modes.push_back(OutputMode::Reasoning);
        if (a.modes != SftModes::Reasoning) modes.push_back(OutputMode::Direct);
        for (auto m : modes) {
            std::optional<std::string> plan;
            if (auto it = plans.find(s.id); it != plans.end()) plan = it->second;
            if (m == OutputMode::Reasoning && !plan) {
                if (a.strict) throw Error(ErrorCode::MissingPlan, "no plan for sample " + s.id);
                ++skipped;
                missing.push_back(s.id);
                continue;
            }
            const auto rec = assemble_sft_record(s, m, plan, templates);
            format_ok += format_reward(rec.target, m) == 1 ? 1 : 0;
            out += to_json(rec).dump() + "\n";
            ++records;
        }
    }
    detail::write_file(a.out, out);
    CommandResult r;
    r.summary = {{"samples", buffer.size()}, {"records", records}, {"format_valid", format_ok},
                 {"skipped_missing_plan", skipped}, {"missing_plan_ids", missing}};
    return r;
}

struct GridArgs {
    std::string corpus, clustering, out;
    std::optional<std::size_t> min_support;
};

inline CommandResult cmd_grid(const PipelineConfig& cfg, const GridArgs& a) {
    detail::require_path(a.out, "grid report");
    const Buffer buffer = load_corpus(a.corpus);
    const Clustering clustering = detail::load_clustering(a.clustering);
    json cells = json::array();
    for (double tg : tau_g_grid()) {
        for (double tb : tau_b_grid()) {
            DetectConfig d{tg, tb, a.min_support.value_or(cfg.detect.min_support)};
            cells.push_back({{"tau_g", tg}, {"tau_b", tb}, {"count", blind_spot_count(buffer, clustering, d)}});
        }
    }
    CommandResult r;
    r.summary = {{"tau_g_grid", tau_g_grid()}, {"tau_b_grid", tau_b_grid()}, {"cells", cells}};
    detail::write_json(a.out, r.summary);
    return r;
}

struct ImportArgs {
    std::string corpus, annotations, corpus_out, report_out;
};

inline CommandResult cmd_import_annotations(const PipelineConfig&, const ImportArgs& a) {
    detail::require_path(a.corpus_out, "corpus output");
    detail::require_distinct(a.corpus, a.corpus_out);
    const Buffer buffer = load_corpus(a.corpus);
    const auto res = import_annotations(read_text(a.annotations));
    const Buffer merged = merge(buffer, res.delta);
    save_corpus(a.corpus_out, merged);
    json rejected = json::array();
    for (const auto& x : res.rejected) rejected.push_back(to_json(x));
    CommandResult r;
    r.summary = {{"imported", res.delta.size()}, {"rejected", rejected}, {"skipped", res.skipped},
                 {"corpus_size", merged.size()}};
    if (!a.report_out.empty()) detail::write_json(a.report_out, r.summary);
    if (!res.rejected.empty()) r.status = kExitValidation;
    return r;
}

// ---------------------------------------------------------------------------
// Whole pipeline

/// Runs construct -> cluster -> detect -> augment -> export-sft with every
/// artifact under `out_dir`. Returns the per-stage summaries.
inline json run_pipeline(const PipelineConfig& cfg, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    auto p = [&](const char* name) { return (out_dir / name).string(); };
    json stages = json::object();
    auto record = [&](const char* stage, const CommandResult& r) {
        stages[stage] = r.summary;
        if (r.status != kExitOk) throw Error(ErrorCode::InvalidArgument, std::string(stage) + " exited with " + std::to_string(r.status));
    };
    record("ingest", cmd_ingest(cfg, {cfg.buffer_path, cfg.incoming_path, p("candidates.jsonl"), p("ingest.json"), {}}));
    record("construct", cmd_construct(cfg, {cfg.buffer_path, cfg.incoming_path, p("constructed.jsonl"),
                                            p("annotations.jsonl"), p("construct.json"), p("retry.jsonl"), {}, {}}));
    record("cluster", cmd_cluster(cfg, {p("constructed.jsonl"), p("clustering.json"), {}, {}}));
    record("detect", cmd_detect(cfg, {p("constructed.jsonl"), p("clustering.json"), p("blind_spots.json"), {}, {}, {}}));
    record("augment", cmd_augment(cfg, {p("constructed.jsonl"), p("clustering.json"), p("blind_spots.json"),
                                        p("augment.json"), p("augmented.jsonl"), p("parked.jsonl"), {}, {}, {}, {}, {}}));
    record("assemble", cmd_assemble(cfg, {p("constructed.jsonl"), {p("augment.json")}, p("final.jsonl"), {}}));
    record("export_sft", cmd_export_sft(cfg, {p("final.jsonl"), cfg.plans_path, p("sft.jsonl"), SftModes::Both, false}));
    detail::write_json(p("pipeline.json"), stages);
    return stages;
}

}  // namespace fcdata
