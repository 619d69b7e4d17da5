#pragma once

// Parameter-value distribution analysis: global and per-cluster Shannon
// entropy of each (tool, parameter) and detection of collapsed clusters
// ("blind spots").

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "fcdata/corpus.hpp"
#include "fcdata/semantics.hpp"

namespace fcdata {

struct ValueHistogram {
    std::map<std::string, std::size_t> counts;
    std::size_t total = 0;

    void add(const std::string& value, std::size_t n = 1) {
        if (n == 0) return;
        counts[value] += n;
        total += n;
    }

    std::size_t distinct() const noexcept { return counts.size(); }

    std::size_t count(const std::string& value) const {
        auto it = counts.find(value);
        return it == counts.end() ? 0 : it->second;
    }

    bool operator==(const ValueHistogram&) const = default;
};

/// Shannon entropy in bits; 0 for an empty histogram.
inline double entropy(const ValueHistogram& h) {
    if (h.total == 0) return 0.0;
    const double n = static_cast<double>(h.total);
    double e = 0;
    for (const auto& [_, c] : h.counts) {
        const double p = static_cast<double>(c) / n;
        e -= p * std::log2(p);
    }
    return std::max(0.0, e);
}

using ToolParam = std::pair<std::string, std::string>;

/// Every (tool, parameter) declared by any toolset in the buffer, sorted.
inline std::vector<ToolParam> declared_parameters(const Buffer& buffer) {
    std::set<ToolParam> seen;
    for (const auto& s : buffer) {
        for (const auto& t : s.tools) {
            for (const auto& [p, _] : t.parameters) seen.emplace(t.name, p);
        }
    }
    return {seen.begin(), seen.end()};
}

namespace detail {

inline bool in_scope(const Sample& s, std::optional<std::size_t> cluster, const Clustering* clustering) {
    if (!cluster) return true;
    auto c = clustering->cluster_of(s.id);
    return c && *c == *cluster;
}

}  // namespace detail

/// Normalized values of `parameter` across every call of `tool` in scope.
/// `cluster == nullopt` means the whole buffer.
inline ValueHistogram value_histogram(const Buffer& buffer, const std::string& tool, const std::string& parameter,
                                      std::optional<std::size_t> cluster = std::nullopt,
                                      const Clustering* clustering = nullptr) {
    if (cluster && !clustering) throw Error(ErrorCode::InvalidArgument, "cluster scope needs a clustering");
    bool tool_known = false;
    bool param_known = false;
    for (const auto& s : buffer) {
        if (const ToolSpec* t = s.tool(tool)) {
            tool_known = true;
            param_known = param_known || t->parameters.contains(parameter);
        }
    }
    if (!tool_known) throw Error(ErrorCode::UnknownTool, "no toolset declares '" + tool + "'");
    if (!param_known) throw Error(ErrorCode::UnknownParameter, "'" + tool + "' declares no '" + parameter + "'");

    ValueHistogram h;
    for (const auto& s : buffer) {
        if (!detail::in_scope(s, cluster, clustering)) continue;
        for (const auto& call : s.answers) {
            if (call.name != tool) continue;
            if (auto it = call.arguments.find(parameter); it != call.arguments.end()) h.add(normalize_value(it->second));
        }
    }
    return h;
}

struct BlindSpot {
    std::string tool;
    std::string parameter;
    std::size_t cluster = 0;
    double h_global = 0;
    double h_cluster = 0;
    double ratio = 0;
    std::size_t support = 0;

    std::string tool_param() const { return tool + "." + parameter; }
    auto locus() const { return std::tie(tool, parameter, cluster); }
};

inline json to_json(const BlindSpot& b) {
    return json{{"tool", b.tool},           {"parameter", b.parameter}, {"cluster", b.cluster},
                {"h_global", b.h_global},   {"h_cluster", b.h_cluster}, {"ratio", b.ratio},
                {"support", b.support}};
}

inline BlindSpot blind_spot_from_json(const json& j) {
    try {
        BlindSpot b;
        b.tool = j.at("tool").get<std::string>();
        b.parameter = j.at("parameter").get<std::string>();
        b.cluster = j.at("cluster").get<std::size_t>();
        b.h_global = j.value("h_global", 0.0);
        b.h_cluster = j.value("h_cluster", 0.0);
        b.ratio = j.value("ratio", 0.0);
        b.support = j.value("support", std::size_t{0});
        return b;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::MalformedJson, std::string("blind spot: ") + e.what());
    }
}

struct DetectConfig {
    double tau_g = 2.0;
    double tau_b = 0.15;
    std::size_t min_support = 3;

    void validate() const {
        if (!(tau_g > 0)) throw Error(ErrorCode::InvalidArgument, "tau_g must be > 0");
        if (!(tau_b > 0 && tau_b < 1)) throw Error(ErrorCode::InvalidArgument, "tau_b must lie in (0, 1)");
    }
};

/// Global and per-cluster histograms plus per-cluster sample support for one
/// (tool, parameter).
struct ParamDistribution {
    ValueHistogram global;
    std::map<std::size_t, ValueHistogram> local;
    std::map<std::size_t, std::size_t> support;
};

inline std::map<ToolParam, ParamDistribution> collect_distributions(const Buffer& buffer,
                                                                    const Clustering& clustering) {
    std::map<ToolParam, ParamDistribution> out;
    for (const auto& tp : declared_parameters(buffer)) out[tp];
    for (const auto& s : buffer) {
        const auto cluster = clustering.cluster_of(s.id);
        std::set<ToolParam> present;
        for (const auto& call : s.answers) {
            for (const auto& [k, v] : call.arguments) {
                ToolParam tp{call.name, k};
                auto it = out.find(tp);
                if (it == out.end()) continue;
                const auto norm = normalize_value(v);
                it->second.global.add(norm);
                if (cluster) {
                    it->second.local[*cluster].add(norm);
                    present.insert(tp);
                }
            }
        }
        for (const auto& tp : present) ++out[tp].support[*cluster];
    }
    return out;
}

/// Loci where a parameter is globally diverse (H_G > tau_g) but one cluster's
/// entropy ratio H_k / H_G falls strictly below tau_b with at least
/// min_support samples. Worst ratio first.
inline std::vector<BlindSpot> detect_blind_spots(const Buffer& buffer, const Clustering& clustering,
                                                 const DetectConfig& cfg = {}) {
    cfg.validate();
    std::vector<BlindSpot> spots;
    for (const auto& [tp, dist] : collect_distributions(buffer, clustering)) {
        const double hg = entropy(dist.global);
        if (!(hg > cfg.tau_g)) continue;  // checked first, so hg > 0 below
        for (const auto& [cluster, hist] : dist.local) {
            auto sup = dist.support.find(cluster);
            const std::size_t support = sup == dist.support.end() ? 0 : sup->second;
            if (support < cfg.min_support) continue;
            const double hk = entropy(hist);
            const double ratio = hk / hg;
            if (ratio < cfg.tau_b) spots.push_back({tp.first, tp.second, cluster, hg, hk, ratio, support});
        }
    }
    std::sort(spots.begin(), spots.end(), [](const BlindSpot& a, const BlindSpot& b) {
        if (a.ratio != b.ratio) return a.ratio < b.ratio;
        return a.locus() < b.locus();
    });
    return spots;
}

inline std::size_t blind_spot_count(const Buffer& buffer, const Clustering& clustering, const DetectConfig& cfg = {}) {
    return detect_blind_spots(buffer, clustering, cfg).size();
}

inline const std::vector<double>& tau_g_grid() {
    static const std::vector<double> grid{1.0, 1.5, 2.0, 2.5, 3.0};
    return grid;
}

inline const std::vector<double>& tau_b_grid() {
    static const std::vector<double> grid{0.05, 0.1, 0.15, 0.2, 0.25};
    return grid;
}

}  // namespace fcdata
