#pragma once

// Rule-based rewards for tool-call outputs, the tool-selection confusion
// matrix metric, GRPO advantage math, and SFT record assembly under the two
// isolated system prompts.

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fcdata/corpus.hpp"
#include "fcdata/templates.hpp"

namespace fcdata {

enum class OutputMode { Reasoning, Direct };

inline constexpr std::string_view to_string(OutputMode m) noexcept {
    return m == OutputMode::Reasoning ? "reasoning" : "direct";
}

inline OutputMode output_mode_from_string(std::string_view s) {
    if (s == "reasoning") return OutputMode::Reasoning;
    if (s == "direct") return OutputMode::Direct;
    throw Error(ErrorCode::InvalidArgument, "unknown output mode '" + std::string(s) + "'");
}

namespace detail {

inline double f1_from_counts(double hit, double generated, double reference) {
    if (generated == 0 && reference == 0) return 1.0;
    if (generated == 0 || reference == 0) return 0.0;
    const double p = hit / generated;
    const double r = hit / reference;
    return p + r == 0 ? 0.0 : 2 * p * r / (p + r);
}

/// For each reference call, the index of its paired generated call: the first
/// still-unpaired generated call with the same name, scanning references in order.
inline std::vector<std::optional<std::size_t>> pair_by_name(const std::vector<ToolCall>& gen,
                                                            const std::vector<ToolCall>& ref) {
    std::vector<bool> used(gen.size(), false);
    std::vector<std::optional<std::size_t>> pairs(ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) {
        for (std::size_t j = 0; j < gen.size(); ++j) {
            if (!used[j] && gen[j].name == ref[i].name) {
                used[j] = true;
                pairs[i] = j;
                break;
            }
        }
    }
    return pairs;
}

}  // namespace detail

/// Multiset F1 over tool names.
inline double f1_tool(const std::vector<ToolCall>& gen, const std::vector<ToolCall>& ref) {
    std::map<std::string_view, std::size_t> counts;
    for (const auto& c : ref) ++counts[c.name];
    std::size_t hit = 0;
    for (const auto& c : gen) {
        auto it = counts.find(c.name);
        if (it != counts.end() && it->second > 0) {
            --it->second;
            ++hit;
        }
    }
    return detail::f1_from_counts(static_cast<double>(hit), static_cast<double>(gen.size()),
                                  static_cast<double>(ref.size()));
}

/// Mean over reference calls of the key-set F1 against the paired generated call.
inline double f1_param(const std::vector<ToolCall>& gen, const std::vector<ToolCall>& ref) {
    if (ref.empty()) return gen.empty() ? 1.0 : 0.0;
    const auto pairs = detail::pair_by_name(gen, ref);
    double sum = 0;
    for (std::size_t i = 0; i < ref.size(); ++i) {
        if (!pairs[i]) continue;
        const auto& g = gen[*pairs[i]].arguments;
        const auto& r = ref[i].arguments;
        std::size_t hit = 0;
        for (const auto& [k, _] : g) hit += r.contains(k) ? 1 : 0;
        sum += detail::f1_from_counts(static_cast<double>(hit), static_cast<double>(g.size()),
                                      static_cast<double>(r.size()));
    }
    return sum / static_cast<double>(ref.size());
}

/// Fraction of all reference parameter keys whose paired value matches exactly.
inline double em_value(const std::vector<ToolCall>& gen, const std::vector<ToolCall>& ref) {
    const auto pairs = detail::pair_by_name(gen, ref);
    std::size_t total = 0;
    std::size_t hit = 0;
    for (std::size_t i = 0; i < ref.size(); ++i) {
        total += ref[i].arguments.size();
        if (!pairs[i]) continue;
        const auto& g = gen[*pairs[i]].arguments;
        for (const auto& [k, v] : ref[i].arguments) {
            auto it = g.find(k);
            if (it != g.end() && values_match(it->second, v)) ++hit;
        }
    }
    return total == 0 ? 1.0 : static_cast<double>(hit) / static_cast<double>(total);
}

// ---------------------------------------------------------------------------
// Output format

inline constexpr std::string_view kPlanOpen = "<plan>";
inline constexpr std::string_view kPlanClose = "</plan>";
inline constexpr std::string_view kCallOpen = "<tool_call>";
inline constexpr std::string_view kCallClose = "</tool_call>";

namespace detail {

inline std::optional<std::vector<ToolCall>> parse_call_body(std::string_view body) {
    auto j = json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.is_array()) return std::nullopt;
    try {
        return parse_tool_calls(j, "tool_call");
    } catch (const Error&) {
        return std::nullopt;
    }
}

// A lone `<tool_call>...</tool_call>` block spanning all of `text`.
inline std::optional<std::vector<ToolCall>> parse_call_block(std::string_view text) {
    if (!text.starts_with(kCallOpen) || !text.ends_with(kCallClose)) return std::nullopt;
    auto body = text.substr(kCallOpen.size(), text.size() - kCallOpen.size() - kCallClose.size());
    if (body.find(kCallOpen) != std::string_view::npos || body.find(kCallClose) != std::string_view::npos) {
        return std::nullopt;
    }
    return parse_call_body(body);
}

}  // namespace detail

/// 1 iff `raw` has exactly the tag layout for `mode` and the tool_call body is
/// a JSON array of {name, arguments} objects.
inline int format_reward(std::string_view raw, OutputMode mode) {
    auto text = trim(raw);
    if (mode == OutputMode::Reasoning) {
        if (!text.starts_with(kPlanOpen)) return 0;
        const auto close = text.find(kPlanClose);
        if (close == std::string_view::npos) return 0;
        const auto plan = text.substr(kPlanOpen.size(), close - kPlanOpen.size());
        if (plan.find(kPlanOpen) != std::string_view::npos || plan.find(kCallOpen) != std::string_view::npos) return 0;
        text = trim(text.substr(close + kPlanClose.size()));
    }
    return detail::parse_call_block(text) ? 1 : 0;
}

/// Calls from the first tool_call block anywhere in `raw`, if it parses.
inline std::optional<std::vector<ToolCall>> extract_tool_calls(std::string_view raw) {
    const auto open = raw.find(kCallOpen);
    if (open == std::string_view::npos) return std::nullopt;
    const auto body_start = open + kCallOpen.size();
    const auto close = raw.find(kCallClose, body_start);
    if (close == std::string_view::npos) return std::nullopt;
    return detail::parse_call_body(raw.substr(body_start, close - body_start));
}

// ---------------------------------------------------------------------------
// Reward

enum class RewardCombine {
    Gated,     // total = 0 when format = 0, else 1 + correctness
    Additive,  // total = format + correctness
};

inline RewardCombine reward_combine_from_string(std::string_view s) {
    if (s == "gated") return RewardCombine::Gated;
    if (s == "additive") return RewardCombine::Additive;
    throw Error(ErrorCode::InvalidArgument, "unknown reward combination '" + std::string(s) + "'");
}

struct RewardBreakdown {
    int format = 0;
    double f1_tool = 0;
    double f1_param = 0;
    double em = 0;
    double correctness = 0;
    double total = 0;
};

inline RewardBreakdown reward(std::string_view raw, OutputMode mode, const std::vector<ToolCall>& ref,
                              RewardCombine combine = RewardCombine::Gated) {
    RewardBreakdown r;
    r.format = format_reward(raw, mode);
    const auto gen = extract_tool_calls(raw).value_or(std::vector<ToolCall>{});
    r.f1_tool = f1_tool(gen, ref);
    r.f1_param = f1_param(gen, ref);
    r.em = em_value(gen, ref);
    r.correctness = r.f1_tool + r.f1_param + r.em;
    if (combine == RewardCombine::Gated) {
        r.total = r.format == 0 ? 0.0 : 1.0 + r.correctness;
    } else {
        r.total = r.format + r.correctness;
    }
    return r;
}

inline json to_json(const RewardBreakdown& r) {
    return json{{"format", r.format}, {"f1_tool", r.f1_tool},         {"f1_param", r.f1_param},
                {"em", r.em},         {"correctness", r.correctness}, {"total", r.total}};
}

// ---------------------------------------------------------------------------
// GRPO

/// Group-normalized advantages with population standard deviation. A group
/// with (numerically) zero spread yields all-zero advantages.
inline std::vector<double> grpo_advantages(std::span<const double> rewards) {
    if (rewards.empty()) throw Error(ErrorCode::EmptyGroup, "advantages need at least one reward");
    const double n = static_cast<double>(rewards.size());
    const double mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / n;
    double var = 0;
    for (double r : rewards) var += (r - mean) * (r - mean);
    const double sd = std::sqrt(var / n);
    std::vector<double> adv(rewards.size(), 0.0);
    if (sd < 1e-12) return adv;
    for (std::size_t i = 0; i < rewards.size(); ++i) adv[i] = (rewards[i] - mean) / sd;
    return adv;
}

/// Clipped surrogate min(ratio*A, clip(ratio, 1-eps, 1+eps)*A).
inline double grpo_surrogate(double ratio, double advantage, double epsilon) {
    if (!(ratio > 0)) throw Error(ErrorCode::InvalidArgument, "probability ratio must be positive");
    const double clipped = std::clamp(ratio, 1.0 - epsilon, 1.0 + epsilon);
    return std::min(ratio * advantage, clipped * advantage);
}

// ---------------------------------------------------------------------------
// Tool-selection evaluation

inline const std::string kNoCallClass = "<no-call>";

struct ClassScore {
    std::string name;
    std::size_t support = 0;  // reference occurrences (row sum)
    std::size_t predicted = 0;  // column sum
    double precision = 0;
    double recall = 0;
    double f1 = 0;
};

struct EvalReport {
    std::vector<std::string> classes;  // tool names sorted, then kNoCallClass
    std::vector<std::vector<std::size_t>> confusion;  // rows: reference, columns: prediction
    std::vector<ClassScore> per_class;
    double macro_f1 = 0;
    double micro_f1 = 0;
};

inline EvalReport selection_f1(const std::vector<std::vector<ToolCall>>& predictions,
                               const std::vector<std::vector<ToolCall>>& references) {
    if (predictions.size() != references.size()) {
        throw Error(ErrorCode::LengthMismatch, std::to_string(predictions.size()) + " predictions vs " +
                                                   std::to_string(references.size()) + " references");
    }
    std::vector<std::pair<std::string, std::string>> cells;  // (reference, predicted)
    for (std::size_t n = 0; n < references.size(); ++n) {
        const auto& ref = references[n];
        const auto& pred = predictions[n];
        if (ref.empty() && pred.empty()) {
            cells.emplace_back(kNoCallClass, kNoCallClass);
            continue;
        }
        std::vector<bool> ref_used(ref.size(), false);
        std::vector<bool> pred_used(pred.size(), false);
        for (std::size_t i = 0; i < ref.size(); ++i) {
            for (std::size_t j = 0; j < pred.size(); ++j) {
                if (!pred_used[j] && pred[j].name == ref[i].name) {
                    pred_used[j] = ref_used[i] = true;
                    cells.emplace_back(ref[i].name, pred[j].name);
                    break;
                }
            }
        }
        std::vector<std::string> ref_left;
        std::vector<std::string> pred_left;
        for (std::size_t i = 0; i < ref.size(); ++i) {
            if (!ref_used[i]) ref_left.push_back(ref[i].name);
        }
        for (std::size_t j = 0; j < pred.size(); ++j) {
            if (!pred_used[j]) pred_left.push_back(pred[j].name);
        }
        const std::size_t width = std::max(ref_left.size(), pred_left.size());
        for (std::size_t k = 0; k < width; ++k) {
            cells.emplace_back(k < ref_left.size() ? ref_left[k] : kNoCallClass,
                               k < pred_left.size() ? pred_left[k] : kNoCallClass);
        }
    }

    EvalReport report;
    std::set<std::string> names;
    for (const auto& [r, p] : cells) {
        if (r != kNoCallClass) names.insert(r);
        if (p != kNoCallClass) names.insert(p);
    }
    report.classes.assign(names.begin(), names.end());
    report.classes.push_back(kNoCallClass);
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < report.classes.size(); ++i) index[report.classes[i]] = i;

    const std::size_t c = report.classes.size();
    report.confusion.assign(c, std::vector<std::size_t>(c, 0));
    for (const auto& [r, p] : cells) ++report.confusion[index[r]][index[p]];

    std::size_t diag = 0;
    double macro_sum = 0;
    std::size_t macro_n = 0;
    for (std::size_t i = 0; i < c; ++i) {
        ClassScore s;
        s.name = report.classes[i];
        for (std::size_t j = 0; j < c; ++j) {
            s.support += report.confusion[i][j];
            s.predicted += report.confusion[j][i];
        }
        const double tp = static_cast<double>(report.confusion[i][i]);
        diag += report.confusion[i][i];
        s.precision = s.predicted ? tp / static_cast<double>(s.predicted) : 0.0;
        s.recall = s.support ? tp / static_cast<double>(s.support) : 0.0;
        s.f1 = s.precision + s.recall > 0 ? 2 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
        if (s.support > 0) {
            macro_sum += s.f1;
            ++macro_n;
        }
        report.per_class.push_back(std::move(s));
    }
    report.macro_f1 = macro_n ? macro_sum / static_cast<double>(macro_n) : 0.0;
    report.micro_f1 = cells.empty() ? 0.0 : static_cast<double>(diag) / static_cast<double>(cells.size());
    return report;
}

inline json to_json(const EvalReport& r) {
    json per = json::array();
    for (const auto& s : r.per_class) {
        per.push_back({{"class", s.name},
                       {"support", s.support},
                       {"predicted", s.predicted},
                       {"precision", s.precision},
                       {"recall", s.recall},
                       {"f1", s.f1}});
    }
    return json{{"classes", r.classes},
                {"confusion", r.confusion},
                {"per_class", std::move(per)},
                {"macro_f1", r.macro_f1},
                {"micro_f1", r.micro_f1}};
}

// ---------------------------------------------------------------------------
// SFT records

struct SftRecord {
    std::string sample_id;
    OutputMode mode = OutputMode::Direct;
    std::string system;
    std::string user;
    std::string target;
};

inline json to_json(const SftRecord& r) {
    return json{{"id", r.sample_id},
                {"mode", std::string(to_string(r.mode))},
                {"system", r.system},
                {"user", r.user},
                {"target", r.target}};
}

inline std::string tool_call_block(const std::vector<ToolCall>& calls) {
    return std::string(kCallOpen) + to_json(calls).dump() + std::string(kCallClose);
}

inline SftRecord assemble_sft_record(const Sample& s, OutputMode mode, const std::optional<std::string>& plan,
                                     const TemplateSet& templates = {}) {
    SftRecord rec;
    rec.sample_id = s.id;
    rec.mode = mode;
    const auto& tmpl = mode == OutputMode::Reasoning ? templates.system_reasoning : templates.system_direct;
    rec.system = render_template(tmpl, {{"TOOLS", to_json(s.tools).dump(2)}});
    rec.user = s.query;
    if (mode == OutputMode::Reasoning) {
        if (!plan || trim(*plan).empty()) throw Error(ErrorCode::MissingPlan, "reasoning record for " + s.id);
        if (plan->find(kPlanClose) != std::string::npos || plan->find(kCallOpen) != std::string::npos) {
            throw Error(ErrorCode::InvalidArgument, "plan text for " + s.id + " contains reserved tags");
        }
        rec.target = std::string(kPlanOpen) + *plan + std::string(kPlanClose) + tool_call_block(s.answers);
    } else {
        rec.target = tool_call_block(s.answers);
    }
    return rec;
}

}  // namespace fcdata
