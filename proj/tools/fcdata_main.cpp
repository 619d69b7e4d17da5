// fcdata: operator entry point for the data pipeline stages.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "fcdata/commands.hpp"

namespace {

using namespace fcdata;

struct Globals {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string log_level = "info";
};

PipelineConfig load_config(const Globals& g) {
    std::string path = g.config;
    if (path.empty()) {
        if (const char* env = std::getenv(kConfigEnvVar)) path = env;
    }
    PipelineConfig cfg = path.empty() ? PipelineConfig{} : PipelineConfig::load(path);
    if (g.seed) cfg.seed = *g.seed;
    return cfg;
}

std::optional<BackendConfig> backend_file(const std::string& path) {
    if (path.empty()) return std::nullopt;
    json j = json::parse(read_text(path), nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::InvalidConfig, path + " is not valid JSON");
    return BackendConfig::from_json(j, std::filesystem::path(path).parent_path());
}

std::string or_default(const std::string& flag, const std::string& fallback, const char* what) {
    if (!flag.empty()) return flag;
    if (fallback.empty()) throw Error(ErrorCode::InvalidArgument, std::string("--") + what + " is required");
    return fallback;
}

std::string out_path(const std::string& flag, const std::string& exports_dir, const char* name) {
    if (!flag.empty()) return flag;
    if (exports_dir.empty()) throw Error(ErrorCode::InvalidArgument, std::string("no output path for ") + name);
    return (std::filesystem::path(exports_dir) / name).string();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Function-calling data pipeline: ingest, construct, cluster, detect, augment, assemble, score, "
                 "evaluate, export-sft, grid"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--config", g.config, "Pipeline config (JSON); defaults to $FCDATA_CONFIG");
    app.add_option("--seed", g.seed, "Clustering seed override");
    app.add_option("--log-level", g.log_level, "trace, debug, info, warn, error, off")
        ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

    std::function<CommandResult(const PipelineConfig&)> run;

    // ingest
    IngestArgs ingest_a;
    auto* ingest_cmd = app.add_subcommand("ingest", "Drop near-duplicate online queries");
    ingest_cmd->add_option("--buffer", ingest_a.buffer, "Corpus JSONL");
    ingest_cmd->add_option("--incoming", ingest_a.incoming, "Incoming queries JSONL");
    ingest_cmd->add_option("--out", ingest_a.candidates_out, "Candidate queries JSONL");
    ingest_cmd->add_option("--report", ingest_a.report_out, "Ingest report JSON");
    ingest_cmd->add_option("--dedup-threshold", ingest_a.threshold, "Cosine threshold");
    ingest_cmd->callback([&] {
        run = [&](const PipelineConfig& cfg) {
            ingest_a.buffer = or_default(ingest_a.buffer, cfg.buffer_path, "buffer");
            ingest_a.incoming = or_default(ingest_a.incoming, cfg.incoming_path, "incoming");
            ingest_a.candidates_out = out_path(ingest_a.candidates_out, cfg.exports_dir, "candidates.jsonl");
            return cmd_ingest(cfg, ingest_a);
        };
    });

    // construct
    ConstructArgs construct_a;
    std::string construct_backend;
    auto* construct_cmd = app.add_subcommand("construct", "Ingest, generate reference calls and triage");
    construct_cmd->add_option("--buffer", construct_a.buffer, "Corpus JSONL");
    construct_cmd->add_option("--incoming", construct_a.incoming, "Incoming queries JSONL");
    construct_cmd->add_option("--out", construct_a.corpus_out, "Output corpus JSONL");
    construct_cmd->add_option("--export-path", construct_a.export_path, "Annotation export JSONL");
    construct_cmd->add_option("--report", construct_a.report_out, "Triage report JSON");
    construct_cmd->add_option("--retry-out", construct_a.retry_out, "Retry queue JSONL for parked queries");
    construct_cmd->add_option("--dedup-threshold", construct_a.threshold, "Cosine threshold");
    construct_cmd->add_option("--backend", construct_backend, "Backend config JSON overriding the constructor role");
    construct_cmd->callback([&] {
        run = [&](const PipelineConfig& cfg) {
            construct_a.buffer = or_default(construct_a.buffer, cfg.buffer_path, "buffer");
            construct_a.incoming = or_default(construct_a.incoming, cfg.incoming_path, "incoming");
            construct_a.corpus_out = out_path(construct_a.corpus_out, cfg.exports_dir, "constructed.jsonl");
            construct_a.export_path = out_path(construct_a.export_path, cfg.exports_dir, "annotations.jsonl");
            if (construct_a.retry_out.empty() && !cfg.exports_dir.empty()) {
                construct_a.retry_out = out_path("", cfg.exports_dir, "retry.jsonl");
            }
            construct_a.backend = backend_file(construct_backend);
            return cmd_construct(cfg, construct_a);
        };
    });

    // cluster
    ClusterArgs cluster_a;
    auto* cluster_cmd = app.add_subcommand("cluster", "K-means over query embeddings");
    cluster_cmd->add_option("--corpus", cluster_a.corpus, "Corpus JSONL")->required();
    cluster_cmd->add_option("--out", cluster_a.out, "Clustering JSON")->required();
    cluster_cmd->add_option("--k", cluster_a.k, "Cluster count (default: config, then auto)");
    cluster_cmd->callback([&] {
        run = [&](const PipelineConfig& cfg) {
            cluster_a.seed = g.seed;
            return cmd_cluster(cfg, cluster_a);
        };
    });

    // detect
    DetectArgs detect_a;
    auto* detect_cmd = app.add_subcommand("detect", "Report blind-spot parameters");
    detect_cmd->add_option("--corpus", detect_a.corpus, "Corpus JSONL")->required();
    detect_cmd->add_option("--clusters", detect_a.clustering, "Clustering JSON")->required();
    detect_cmd->add_option("--out", detect_a.out, "Blind-spot report JSON")->required();
    detect_cmd->add_option("--tau-g", detect_a.tau_g, "Global entropy threshold (bits)");
    detect_cmd->add_option("--tau-b", detect_a.tau_b, "Entropy ratio threshold");
    detect_cmd->add_option("--min-support", detect_a.min_support, "Minimum samples per cluster");
    detect_cmd->callback([&] { run = [&](const PipelineConfig& cfg) { return cmd_detect(cfg, detect_a); }; });

    // augment
    AugmentArgs augment_a;
    std::string generator_backend, checker_backend;
    auto* augment_cmd = app.add_subcommand("augment", "Repair blind spots with multi-round generation");
    augment_cmd->add_option("--corpus", augment_a.corpus, "Corpus JSONL")->required();
    augment_cmd->add_option("--clusters", augment_a.clustering, "Clustering JSON")->required();
    augment_cmd->add_option("--spots", augment_a.spots, "Blind-spot report JSON")->required();
    augment_cmd->add_option("--reports-out", augment_a.reports_out, "Augmentation reports JSON")->required();
    augment_cmd->add_option("--out", augment_a.corpus_out, "Merged corpus JSONL")->required();
    augment_cmd->add_option("--parked-out", augment_a.parked_out, "Parked candidates JSONL");
    augment_cmd->add_option("--max-rounds", augment_a.max_rounds, "Rounds per blind spot");
    augment_cmd->add_option("--candidates-per-round", augment_a.candidates_per_round, "Candidates requested per round");
    augment_cmd->add_option("--reps", augment_a.reps, "Representative queries per prompt");
    augment_cmd->add_option("--generator-backend", generator_backend, "Backend config JSON for the generator");
    augment_cmd->add_option("--checker-backend", checker_backend, "Backend config JSON for the checker");
    augment_cmd->callback([&] {
        run = [&](const PipelineConfig& cfg) {
            augment_a.generator = backend_file(generator_backend);
            augment_a.checker = backend_file(checker_backend);
            return cmd_augment(cfg, augment_a);
        };
    });

    // assemble
    AssembleArgs assemble_a;
    auto* assemble_cmd = app.add_subcommand("assemble", "Merge augmentation reports into a corpus");
    assemble_cmd->add_option("--corpus", assemble_a.corpus, "Corpus JSONL")->required();
    assemble_cmd->add_option("--reports", assemble_a.reports, "Augmentation report JSON files");
    assemble_cmd->add_option("--out", assemble_a.corpus_out, "Output corpus JSONL")->required();
    assemble_cmd->add_option("--dedup-threshold", assemble_a.threshold, "Cosine threshold");
    assemble_cmd->callback([&] { run = [&](const PipelineConfig& cfg) { return cmd_assemble(cfg, assemble_a); }; });

    // score
    ScoreArgs score_a;
    std::string combine;
    auto* score_cmd = app.add_subcommand("score", "Reward breakdowns for model outputs");
    score_cmd->add_option("--in", score_a.in, "JSONL of {raw, mode, reference}")->required();
    score_cmd->add_option("--out", score_a.out, "RewardBreakdown JSONL")->required();
    score_cmd->add_option("--combine", combine, "gated or additive")->check(CLI::IsMember({"gated", "additive"}));
    score_cmd->callback([&] {
        run = [&](const PipelineConfig& cfg) {
            if (!combine.empty()) score_a.combine = reward_combine_from_string(combine);
            return cmd_score(cfg, score_a);
        };
    });

    // evaluate
    EvaluateArgs eval_a;
    auto* eval_cmd = app.add_subcommand("evaluate", "Tool-selection F1 with confusion matrix");
    eval_cmd->add_option("--predictions", eval_a.predictions, "Prediction JSONL")->required();
    eval_cmd->add_option("--references", eval_a.references, "Reference JSONL")->required();
    eval_cmd->add_option("--out", eval_a.out, "EvalReport JSON")->required();
    eval_cmd->callback([&] { run = [&](const PipelineConfig& cfg) { return cmd_evaluate(cfg, eval_a); }; });

    // export-sft
    ExportSftArgs sft_a;
    std::string sft_mode = "both";
    auto* sft_cmd = app.add_subcommand("export-sft", "Training records with isolated system prompts");
    sft_cmd->add_option("--corpus", sft_a.corpus, "Corpus JSONL")->required();
    sft_cmd->add_option("--plans", sft_a.plans, "Plans JSONL of {id, plan}");
    sft_cmd->add_option("--out", sft_a.out, "SFT JSONL")->required();
    sft_cmd->add_option("--mode", sft_mode, "reasoning, direct or both")
        ->check(CLI::IsMember({"reasoning", "direct", "both"}));
    sft_cmd->add_flag("--strict", sft_a.strict, "Fail when a reasoning record has no plan");
    sft_cmd->callback([&] {
        run = [&](const PipelineConfig& cfg) {
            sft_a.modes = sft_modes_from_string(sft_mode);
            return cmd_export_sft(cfg, sft_a);
        };
    });

    // grid
    GridArgs grid_a;
    auto* grid_cmd = app.add_subcommand("grid", "Blind-spot counts over the threshold grid");
    grid_cmd->add_option("--corpus", grid_a.corpus, "Corpus JSONL")->required();
    grid_cmd->add_option("--clusters", grid_a.clustering, "Clustering JSON")->required();
    grid_cmd->add_option("--out", grid_a.out, "Grid report JSON")->required();
    grid_cmd->add_option("--min-support", grid_a.min_support, "Minimum samples per cluster");
    grid_cmd->callback([&] { run = [&](const PipelineConfig& cfg) { return cmd_grid(cfg, grid_a); }; });

    // import-annotations
    ImportArgs import_a;
    auto* import_cmd = app.add_subcommand("import-annotations", "Merge expert-approved annotation rows");
    import_cmd->add_option("--corpus", import_a.corpus, "Corpus JSONL")->required();
    import_cmd->add_option("--annotations", import_a.annotations, "Annotation JSONL")->required();
    import_cmd->add_option("--out", import_a.corpus_out, "Output corpus JSONL")->required();
    import_cmd->add_option("--report", import_a.report_out, "Import report JSON");
    import_cmd->callback([&] { run = [&](const PipelineConfig& cfg) { return cmd_import_annotations(cfg, import_a); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : kExitValidation;
    }

    auto logger = spdlog::stderr_color_mt("fcdata");
    logger->set_level(spdlog::level::from_str(g.log_level));
    logger->set_pattern("[%l] %v");

    const std::string name = app.get_subcommands().front()->get_name();
    try {
        const PipelineConfig cfg = load_config(g);
        const CommandResult r = run(cfg);
        std::cout << r.summary.dump() << "\n";
        if (r.status == kExitOk) {
            logger->info("{} finished", name);
        } else {
            logger->warn("{} finished with exit status {}", name, r.status);
        }
        return r.status;
    } catch (const Error& e) {
        std::cerr << error_json(e).dump() << "\n";
        logger->error("{} failed: {}", name, e.what());
        return exit_status_for(e.code());
    } catch (const std::exception& e) {
        std::cerr << json{{"error", "Internal"}, {"message", e.what()}}.dump() << "\n";
        logger->error("{} failed: {}", name, e.what());
        return kExitValidation;
    }
}
