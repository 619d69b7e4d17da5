#pragma once

// Pipeline configuration: a JSON file naming paths, thresholds, clustering,
// augmentation settings and one backend per model role. Relative paths
// resolve against the directory holding the config file.

#include <cstdlib>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include "fcdata/augmentor.hpp"
#include "fcdata/constructor.hpp"
#include "fcdata/diversity.hpp"
#include "fcdata/gateway.hpp"
#include "fcdata/scoring.hpp"
#include "fcdata/semantics.hpp"
#include "fcdata/templates.hpp"

namespace fcdata {

inline constexpr const char* kConfigEnvVar = "FCDATA_CONFIG";

struct EmbeddingConfig {
    BackendKind kind = BackendKind::Mock;
    MockEmbeddingOptions mock;
    BackendConfig http;  // kind == Http
};

struct PipelineConfig {
    std::filesystem::path base_dir;

    // paths (empty when unset)
    std::string buffer_path;
    std::string incoming_path;
    std::string exports_dir;
    std::string templates_dir;
    std::string embedding_cache;
    std::string plans_path;

    double dedup_threshold = kDefaultDedupThreshold;
    DetectConfig detect;

    std::optional<std::size_t> k;  // nullopt: default_k(N)
    std::uint64_t seed = 42;

    AugConfig augmentation;
    ConstructConfig construction;
    RewardCombine reward_combine = RewardCombine::Gated;

    EmbeddingConfig embedding;
    std::map<std::string, BackendConfig> backends;  // constructor, generator, checker

    static const std::vector<std::string>& roles() {
        static const std::vector<std::string> r{"constructor", "generator", "checker"};
        return r;
    }

    void validate() const {
        detect.validate();
        if (!(dedup_threshold > 0 && dedup_threshold <= 1)) {
            throw Error(ErrorCode::InvalidConfig, "dedup threshold must lie in (0, 1]");
        }
        if (k && *k == 0) throw Error(ErrorCode::InvalidConfig, "clustering.k must be positive");
        if (augmentation.max_rounds == 0 || augmentation.candidates_per_round == 0 || augmentation.reps == 0) {
            throw Error(ErrorCode::InvalidConfig, "augmentation counts must be positive");
        }
        if (!templates_dir.empty() && !std::filesystem::is_directory(templates_dir)) {
            throw Error(ErrorCode::InvalidConfig, "templates directory '" + templates_dir + "' does not exist");
        }
        for (const auto& [role, b] : backends) {
            b.validate();
            if (b.kind == BackendKind::Mock && !std::filesystem::exists(b.script)) {
                throw Error(ErrorCode::InvalidConfig, role + " mock script '" + b.script + "' does not exist");
            }
        }
    }

    const BackendConfig& backend(const std::string& role) const {
        auto it = backends.find(role);
        if (it == backends.end()) throw Error(ErrorCode::InvalidConfig, "no backend configured for role '" + role + "'");
        return it->second;
    }

    std::filesystem::path resolve(const std::string& p) const {
        std::filesystem::path path(p);
        return path.is_relative() && !base_dir.empty() ? base_dir / path : path;
    }

    TemplateSet templates() const {
        return templates_dir.empty() ? TemplateSet{} : TemplateSet::load(templates_dir);
    }

    static PipelineConfig from_json(const json& j, const std::filesystem::path& base_dir = {}) {
        if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "config must be a JSON object");
        PipelineConfig c;
        c.base_dir = base_dir;
        try {
            auto path_of = [&](const json& obj, const char* key) -> std::string {
                auto it = obj.find(key);
                if (it == obj.end() || it->is_null()) return {};
                return c.resolve(it->get<std::string>()).string();
            };
            if (auto p = j.find("paths"); p != j.end()) {
                c.buffer_path = path_of(*p, "buffer");
                c.incoming_path = path_of(*p, "incoming");
                c.exports_dir = path_of(*p, "exports");
                c.templates_dir = path_of(*p, "templates");
                c.embedding_cache = path_of(*p, "embedding_cache");
                c.plans_path = path_of(*p, "plans");
            }
            if (auto t = j.find("thresholds"); t != j.end()) {
                c.dedup_threshold = t->value("dedup", c.dedup_threshold);
                c.detect.tau_g = t->value("tau_g", c.detect.tau_g);
                c.detect.tau_b = t->value("tau_b", c.detect.tau_b);
                c.detect.min_support = t->value("min_support", c.detect.min_support);
            }
            if (auto cl = j.find("clustering"); cl != j.end()) {
                if (auto k = cl->find("k"); k != cl->end()) {
                    if (k->is_string()) {
                        if (k->get<std::string>() != "auto") throw Error(ErrorCode::InvalidConfig, "clustering.k must be a count or \"auto\"");
                    } else {
                        c.k = k->get<std::size_t>();
                    }
                }
                c.seed = cl->value("seed", c.seed);
            }
            if (auto a = j.find("augmentation"); a != j.end()) {
                auto& ac = c.augmentation;
                ac.max_rounds = a->value("max_rounds", ac.max_rounds);
                ac.candidates_per_round = a->value("candidates_per_round", ac.candidates_per_round);
                ac.reps = a->value("reps", ac.reps);
                ac.parallelism = a->value("parallelism", ac.parallelism);
                ac.generator_temperature = a->value("generator_temperature", ac.generator_temperature);
                ac.checker_temperature = a->value("checker_temperature", ac.checker_temperature);
                ac.max_tokens = a->value("max_tokens", ac.max_tokens);
            }
            if (auto k = j.find("construction"); k != j.end()) {
                c.construction.shots = k->value("shots", c.construction.shots);
                c.construction.parallelism = k->value("parallelism", c.construction.parallelism);
                c.construction.temperature = k->value("temperature", c.construction.temperature);
                c.construction.max_tokens = k->value("max_tokens", c.construction.max_tokens);
            }
            if (auto r = j.find("reward"); r != j.end()) {
                c.reward_combine = reward_combine_from_string(r->value("combine", std::string("gated")));
            }
            if (auto b = j.find("backends"); b != j.end()) {
                for (const auto& [role, bj] : b->items()) {
                    if (role == "embedding") {
                        const std::string kind = bj.value("kind", "mock");
                        if (kind == "mock") {
                            c.embedding.kind = BackendKind::Mock;
                            c.embedding.mock = MockEmbeddingOptions::from_json(bj);
                        } else if (kind == "http") {
                            c.embedding.kind = BackendKind::Http;
                            c.embedding.http = BackendConfig::from_json(bj, base_dir);
                        } else {
                            throw Error(ErrorCode::InvalidConfig, "unknown embedding backend kind '" + kind + "'");
                        }
                    } else {
                        c.backends[role] = BackendConfig::from_json(bj, base_dir);
                    }
                }
            }
        } catch (const json::exception& e) {
            throw Error(ErrorCode::InvalidConfig, std::string("config: ") + e.what());
        }
        c.augmentation.detect = c.detect;
        c.augmentation.dedup_threshold = c.dedup_threshold;
        c.construction.dedup_threshold = c.dedup_threshold;
        c.validate();
        return c;
    }

    static PipelineConfig load(const std::filesystem::path& path) {
        const std::string text = read_text(path.string());
        json j = json::parse(text, nullptr, false);
        if (j.is_discarded()) throw Error(ErrorCode::InvalidConfig, path.string() + " is not valid JSON");
        return from_json(j, path.parent_path());
    }
};

/// Embedding backend for a config, wrapped in the on-disk cache when one is
/// configured. Keeps the cache alive alongside the backend.
class ConfiguredEmbedder : public EmbeddingBackend {
public:
    explicit ConfiguredEmbedder(const PipelineConfig& cfg) : cache_path_(cfg.embedding_cache) {
        if (cfg.embedding.kind == BackendKind::Mock) {
            inner_ = std::make_unique<MockEmbeddingBackend>(cfg.embedding.mock);
        } else {
            inner_ = std::make_unique<HttpEmbeddingBackend>(cfg.embedding.http);
        }
        if (!cache_path_.empty()) {
            cache_ = std::make_unique<EmbeddingCache>();
            if (std::filesystem::exists(cache_path_)) cache_->load(cache_path_);
            cached_ = std::make_unique<CachedEmbeddingBackend>(*inner_, *cache_);
        }
    }

    std::vector<Embedding> embed(std::span<const std::string> texts) override {
        return cached_ ? cached_->embed(texts) : inner_->embed(texts);
    }

    void flush() const {
        if (cache_) cache_->save(cache_path_);
    }

private:
    std::string cache_path_;
    std::unique_ptr<EmbeddingBackend> inner_;
    std::unique_ptr<EmbeddingCache> cache_;
    std::unique_ptr<CachedEmbeddingBackend> cached_;
};

}  // namespace fcdata
