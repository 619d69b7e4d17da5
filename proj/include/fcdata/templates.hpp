#pragma once

// Placeholder rendering for the prompt templates. Two placeholder spellings
// occur in the bundled prompts: `{{NAME}}` and `{expression}`, where the
// expression text (including any format suffix such as `:.4f`) is the lookup
// key. A brace pair only counts as a placeholder when its body starts with an
// identifier character and contains no quote or newline, so literal JSON
// examples inside the prompts are left alone.

#include <cctype>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "fcdata/corpus.hpp"
#include "fcdata/default_templates.hpp"
#include "fcdata/error.hpp"

namespace fcdata {

struct Placeholder {
    std::string key;
    std::size_t pos = 0;
    std::size_t len = 0;
};

inline std::vector<Placeholder> find_placeholders(std::string_view text) {
    auto ident_start = [](char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; };
    std::vector<Placeholder> found;
    std::size_t i = 0;
    while ((i = text.find('{', i)) != std::string_view::npos) {
        const bool doubled = i + 1 < text.size() && text[i + 1] == '{';
        const std::size_t body = i + (doubled ? 2 : 1);
        if (body >= text.size() || !ident_start(text[body])) {
            ++i;
            continue;
        }
        std::size_t j = body;
        while (j < text.size() && text[j] != '}' && text[j] != '{' && text[j] != '"' && text[j] != '\n') ++j;
        if (j >= text.size() || text[j] != '}') {
            ++i;
            continue;
        }
        std::size_t end = j + 1;
        if (doubled) {
            if (end >= text.size() || text[end] != '}') {
                ++i;
                continue;
            }
            ++end;
        }
        found.push_back({std::string(text.substr(body, j - body)), i, end - i});
        i = end;
    }
    return found;
}

inline std::set<std::string> placeholder_keys(std::string_view text) {
    std::set<std::string> keys;
    for (const auto& p : find_placeholders(text)) keys.insert(p.key);
    return keys;
}

/// Single-pass substitution; bound values are inserted verbatim and never
/// re-scanned. Every placeholder must have a binding.
inline std::string render_template(std::string_view tmpl, const std::map<std::string, std::string>& bindings) {
    const auto holes = find_placeholders(tmpl);
    std::string missing;
    for (const auto& h : holes) {
        if (!bindings.contains(h.key) && missing.find("'" + h.key + "'") == std::string::npos) {
            missing += (missing.empty() ? "'" : ", '") + h.key + "'";
        }
    }
    if (!missing.empty()) throw Error(ErrorCode::MissingPlaceholderData, "no value for " + missing);

    std::string out;
    out.reserve(tmpl.size() * 2);
    std::size_t cursor = 0;
    for (const auto& h : holes) {
        out.append(tmpl.substr(cursor, h.pos - cursor));
        out.append(bindings.at(h.key));
        cursor = h.pos + h.len;
    }
    out.append(tmpl.substr(cursor));
    return out;
}

struct TemplateSet {
    std::string consistency_checker{default_templates::kConsistencyChecker};
    std::string fewshot_generator{default_templates::kFewShotGenerator};
    std::string counterfactual_generation{default_templates::kCounterfactualGeneration};
    std::string system_reasoning{default_templates::kSystemReasoning};
    std::string system_direct{default_templates::kSystemDirect};

    /// Bundled defaults, overridden by any `<name>.txt` found in `dir`.
    static TemplateSet load(const std::filesystem::path& dir) {
        TemplateSet set;
        auto override_from = [&](const char* name, std::string& slot) {
            const auto path = dir / (std::string(name) + ".txt");
            if (std::filesystem::exists(path)) slot = read_text(path.string());
        };
        override_from("consistency_checker", set.consistency_checker);
        override_from("fewshot_generator", set.fewshot_generator);
        override_from("counterfactual_generation", set.counterfactual_generation);
        override_from("system_reasoning", set.system_reasoning);
        override_from("system_direct", set.system_direct);
        return set;
    }
};

/// Section headings each rendered prompt must retain.
inline const std::map<std::string, std::vector<std::string>>& required_sections() {
    static const std::map<std::string, std::vector<std::string>> sections{
        {"consistency_checker",
         {"## Role:", "## You will receive:", "## Your task:", "## Output format requirements:", "## Rules:"}},
        {"fewshot_generator",
         {"## Role:", "## Input:", "## Your task:", "## Output requirements:", "## Expected JSON format:",
          "### Few-shot Examples:", "### Current Query:", "### Current Toolset:"}},
        {"counterfactual_generation",
         {"# Role:", "# Multi-Round Generation Context (Step", "## Initial State (Before Generation):",
          "## Current State (After", "# Parameter Value Distributions:", "## Initial Distributions:",
          "## Current Distributions:", "# Instructions", "# History", "# Original Example:",
          "# Stable Parameter Context:", "# Task for Round", "# JSON Output Format:"}},
        {"system_reasoning", {"## Role:", "## Tools:", "## Requirement:", "## Output format:", "<plan>"}},
        {"system_direct", {"## Role:", "## Tools:", "## Requirement:", "## Output format:", "<tool_call>"}},
    };
    return sections;
}

inline std::vector<std::string> missing_sections(const std::string& template_name, std::string_view rendered) {
    std::vector<std::string> missing;
    for (const auto& s : required_sections().at(template_name)) {
        if (rendered.find(s) == std::string_view::npos) missing.push_back(s);
    }
    return missing;
}

}  // namespace fcdata
