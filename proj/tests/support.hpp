#pragma once

// Builders and random generators shared by the unit and acceptance suites.

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "fcdata/corpus.hpp"

namespace testing_support {

using namespace fcdata;

inline ToolCall call(std::string name, std::map<std::string, Value> args = {}) {
    return ToolCall{std::move(name), std::move(args)};
}

inline ParamSpec param(ValueKind kind, bool required = false, std::vector<std::string> allowed = {}) {
    ParamSpec p;
    p.kind = kind;
    p.required = required;
    p.allowed = std::move(allowed);
    return p;
}

inline ToolSpec tool(std::string name, std::map<std::string, ParamSpec> params, std::string description = "") {
    return ToolSpec{std::move(name), std::move(description), std::move(params)};
}

/// A small toolset with one string parameter per entry of `params`.
inline ToolSpec string_tool(std::string name, const std::vector<std::string>& params) {
    ToolSpec t{std::move(name), "", {}};
    for (const auto& p : params) t.parameters[p] = param(ValueKind::String);
    return t;
}

/// Scratch directory removed on destruction.
struct TempDir {
    std::filesystem::path path;

    explicit TempDir(const std::string& tag) {
        static std::mt19937_64 rng{std::random_device{}()};
        path = std::filesystem::temp_directory_path() / ("fcdata-" + tag + "-" + std::to_string(rng()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::string file(const std::string& name) const { return (path / name).string(); }
};

// ---------------------------------------------------------------------------
// Random generators

/// Random call lists for reward checks: up to 4 calls over tools A..C, up to
/// 3 keys from {p,q,r}, values drawn from a 5-symbol alphabet that mixes
/// strings and numbers.
inline Value random_value(std::mt19937_64& rng) {
    switch (std::uniform_int_distribution<int>(0, 4)(rng)) {
        case 0: return std::string("a");
        case 1: return std::string("b");
        case 2: return std::string("7");
        case 3: return std::int64_t{7};
        default: return 2.5;
    }
}

inline std::vector<ToolCall> random_calls(std::mt19937_64& rng) {
    static const std::vector<std::string> names{"A", "B", "C"};
    static const std::vector<std::string> keys{"p", "q", "r"};
    std::vector<ToolCall> out;
    const int n = std::uniform_int_distribution<int>(0, 4)(rng);
    for (int i = 0; i < n; ++i) {
        ToolCall c;
        c.name = names[std::uniform_int_distribution<std::size_t>(0, names.size() - 1)(rng)];
        for (const auto& k : keys) {
            if (std::bernoulli_distribution(0.6)(rng)) c.arguments[k] = random_value(rng);
        }
        while (c.arguments.size() > 3) c.arguments.erase(c.arguments.begin());
        out.push_back(std::move(c));
    }
    return out;
}

inline std::string random_word(std::mt19937_64& rng, std::size_t max_len = 8) {
    static const std::string alphabet = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789 _-\"\\/";
    const std::size_t len = std::uniform_int_distribution<std::size_t>(1, max_len)(rng);
    std::string s;
    for (std::size_t i = 0; i < len; ++i) {
        s += alphabet[std::uniform_int_distribution<std::size_t>(0, alphabet.size() - 1)(rng)];
    }
    if (rng() % 7 == 0) s += "\u00e9t\u00e9";
    return s;
}

/// Random valid sample: 1-3 tools with mixed parameter kinds and 0-3 answers
/// whose arguments respect the declared kinds.
inline Sample random_sample(std::mt19937_64& rng) {
    std::vector<ToolSpec> tools;
    const int nt = std::uniform_int_distribution<int>(1, 3)(rng);
    for (int t = 0; t < nt; ++t) {
        ToolSpec spec;
        spec.name = "tool_" + std::to_string(t) + "_" + std::to_string(rng() % 1000);
        spec.description = random_word(rng, 20);
        const int np = std::uniform_int_distribution<int>(0, 4)(rng);
        for (int p = 0; p < np; ++p) {
            ParamSpec ps;
            switch (std::uniform_int_distribution<int>(0, 4)(rng)) {
                case 0: ps.kind = ValueKind::String; break;
                case 1: ps.kind = ValueKind::Integer; break;
                case 2: ps.kind = ValueKind::Float; break;
                case 3: ps.kind = ValueKind::Boolean; break;
                default:
                    ps.kind = ValueKind::Enum;
                    ps.allowed = {"x", "y", "z"};
            }
            ps.required = std::bernoulli_distribution(0.5)(rng);
            ps.description = random_word(rng, 12);
            spec.parameters["p" + std::to_string(p)] = ps;
        }
        tools.push_back(std::move(spec));
    }
    std::vector<ToolCall> answers;
    const int na = std::uniform_int_distribution<int>(0, 3)(rng);
    for (int a = 0; a < na; ++a) {
        const auto& spec = tools[std::uniform_int_distribution<std::size_t>(0, tools.size() - 1)(rng)];
        ToolCall c{spec.name, {}};
        for (const auto& [k, ps] : spec.parameters) {
            if (!ps.required && std::bernoulli_distribution(0.5)(rng)) continue;
            switch (ps.kind) {
                case ValueKind::String: c.arguments[k] = random_word(rng); break;
                case ValueKind::Integer: c.arguments[k] = std::int64_t(rng() % 100000) - 500; break;
                case ValueKind::Float: c.arguments[k] = std::uniform_real_distribution<double>(-1e3, 1e3)(rng); break;
                case ValueKind::Boolean: c.arguments[k] = std::bernoulli_distribution(0.5)(rng); break;
                case ValueKind::Enum: c.arguments[k] = ps.allowed[rng() % ps.allowed.size()]; break;
            }
        }
        answers.push_back(std::move(c));
    }
    const Origin origins[] = {Origin::Seed, Origin::Online, Origin::Augmented};
    return make_sample(random_word(rng, 40), std::move(answers), std::move(tools), origins[rng() % 3]);
}

/// The xLAM convention: answers and tools stored as JSON-encoded strings.
inline std::string encode_xlam(const Sample& s) {
    json j{{"query", s.query},
           {"answers", to_json(s.answers).dump()},
           {"tools", to_json(s.tools).dump()},
           {"origin", std::string(to_string(s.origin))}};
    return j.dump();
}

}  // namespace testing_support
