#pragma once

// Data model for xLAM-style <query, answers, tools> records: parsing,
// canonical serialization, schema validation of calls, and id-keyed merging.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "fcdata/digest.hpp"
#include "fcdata/error.hpp"

namespace fcdata {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Scalar argument values

using Value = std::variant<std::string, std::int64_t, double, bool>;

inline std::string_view trim(std::string_view s) noexcept {
    constexpr std::string_view ws = " \t\r\n\f\v";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

/// Integral doubles inside the exactly-representable range print without a
/// fraction ("7.0" -> "7"); everything else uses the shortest round-trip form.
inline std::string render_number(double v) {
    if (std::isfinite(v) && std::trunc(v) == v && std::fabs(v) < 9007199254740992.0) {
        return std::to_string(static_cast<std::int64_t>(v));
    }
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc{}) return std::to_string(v);
    return std::string(buf, ptr);
}

inline bool is_number(const Value& v) noexcept {
    return std::holds_alternative<std::int64_t>(v) || std::holds_alternative<double>(v);
}

inline double as_double(const Value& v) {
    if (auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
    return std::get<double>(v);
}

/// Parses a whole (trimmed) string as a finite number.
inline std::optional<double> parse_number(std::string_view s) {
    s = trim(s);
    if (s.empty()) return std::nullopt;
    if (s.front() == '+') s.remove_prefix(1);
    double out = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(out)) return std::nullopt;
    return out;
}

/// Canonical symbol for counting distinct values: strings trimmed with case
/// preserved, JSON numbers rendered canonically, booleans as true/false.
inline std::string normalize_value(const Value& v) {
    return std::visit(
        [](const auto& x) -> std::string {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, std::string>) {
                return std::string(trim(x));
            } else if constexpr (std::is_same_v<T, bool>) {
                return x ? "true" : "false";
            } else if constexpr (std::is_same_v<T, std::int64_t>) {
                return std::to_string(x);
            } else {
                return render_number(x);
            }
        },
        v);
}

/// Exact-match semantics for argument values. Strings compare case-sensitively
/// after trimming; when either side is a JSON number both sides are compared
/// numerically, so "7" matches 7.0.
inline bool values_match(const Value& a, const Value& b) {
    if (is_number(a) || is_number(b)) {
        auto num = [](const Value& v) -> std::optional<double> {
            if (is_number(v)) return as_double(v);
            if (auto* s = std::get_if<std::string>(&v)) return parse_number(*s);
            return std::nullopt;
        };
        const auto x = num(a);
        const auto y = num(b);
        return x && y && *x == *y;
    }
    if (auto* sa = std::get_if<std::string>(&a)) {
        auto* sb = std::get_if<std::string>(&b);
        return sb && trim(*sa) == trim(*sb);
    }
    auto* ba = std::get_if<bool>(&a);
    auto* bb = std::get_if<bool>(&b);
    return ba && bb && *ba == *bb;
}

inline json value_to_json(const Value& v) {
    return std::visit([](const auto& x) { return json(x); }, v);
}

inline Value value_from_json(const json& j, const std::string& path) {
    switch (j.type()) {
        case json::value_t::string: return j.get<std::string>();
        case json::value_t::boolean: return j.get<bool>();
        case json::value_t::number_integer: return j.get<std::int64_t>();
        case json::value_t::number_unsigned: {
            const auto u = j.get<std::uint64_t>();
            if (u > static_cast<std::uint64_t>(INT64_MAX)) return static_cast<double>(u);
            return static_cast<std::int64_t>(u);
        }
        case json::value_t::number_float: return j.get<double>();
        default:
            throw Error(ErrorCode::NonScalarArgument, path + " holds a " + j.type_name() + ", expected a scalar");
    }
}

// ---------------------------------------------------------------------------
// Tool schemas and invocations

enum class ValueKind { String, Integer, Float, Boolean, Enum };

inline constexpr std::string_view to_string(ValueKind k) noexcept {
    switch (k) {
        case ValueKind::String: return "string";
        case ValueKind::Integer: return "integer";
        case ValueKind::Float: return "float";
        case ValueKind::Boolean: return "boolean";
        case ValueKind::Enum: return "enum";
    }
    return "string";
}

struct ParamSpec {
    ValueKind kind = ValueKind::String;
    bool required = false;
    std::vector<std::string> allowed;  // non-empty only for ValueKind::Enum
    std::string description;

    bool operator==(const ParamSpec&) const = default;
};

struct ToolSpec {
    std::string name;
    std::string description;
    std::map<std::string, ParamSpec> parameters;

    bool operator==(const ToolSpec&) const = default;
};

struct ToolCall {
    std::string name;
    std::map<std::string, Value> arguments;

    bool operator==(const ToolCall&) const = default;
};

enum class Origin { Seed, Online, Augmented };

inline constexpr std::string_view to_string(Origin o) noexcept {
    switch (o) {
        case Origin::Seed: return "seed";
        case Origin::Online: return "online";
        case Origin::Augmented: return "augmented";
    }
    return "seed";
}

inline Origin origin_from_string(std::string_view s) {
    if (s == "seed") return Origin::Seed;
    if (s == "online") return Origin::Online;
    if (s == "augmented") return Origin::Augmented;
    throw Error(ErrorCode::MalformedJson, "unknown origin '" + std::string(s) + "'");
}

struct Embedding {
    std::vector<double> values;

    std::size_t dim() const noexcept { return values.size(); }
    bool operator==(const Embedding&) const = default;
};

// ---------------------------------------------------------------------------
// JSON conversion

namespace detail {

inline json parse_json_text(std::string_view text, const std::string& what) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::MalformedJson, what + ": " + e.what());
    }
}

// xLAM exports store answers/tools either inline or as a JSON-encoded string.
inline json unwrap_encoded(const json& j, const std::string& what) {
    if (j.is_string()) return parse_json_text(j.get_ref<const std::string&>(), what);
    return j;
}

inline const json& require(const json& obj, const char* key, const std::string& path) {
    auto it = obj.find(key);
    if (it == obj.end()) throw Error(ErrorCode::MissingField, path.empty() ? key : path + "." + key);
    return *it;
}

inline std::string require_string(const json& obj, const char* key, const std::string& path) {
    const json& v = require(obj, key, path);
    if (!v.is_string()) throw Error(ErrorCode::MalformedJson, path + "." + key + " must be a string");
    return v.get<std::string>();
}

inline std::optional<std::pair<ValueKind, bool>> kind_from_type_name(std::string type) {
    bool optional_hint = false;
    if (auto pos = type.find(", optional"); pos != std::string::npos) {
        optional_hint = true;
        type.erase(pos);
    } else if (type.starts_with("Optional[") && type.ends_with("]")) {
        optional_hint = true;
        type = type.substr(9, type.size() - 10);
    }
    std::transform(type.begin(), type.end(), type.begin(), [](unsigned char c) { return std::tolower(c); });
    type = std::string(trim(type));
    ValueKind k;
    if (type == "string" || type == "str") k = ValueKind::String;
    else if (type == "integer" || type == "int") k = ValueKind::Integer;
    else if (type == "number" || type == "float" || type == "double") k = ValueKind::Float;
    else if (type == "boolean" || type == "bool") k = ValueKind::Boolean;
    else if (type == "enum") k = ValueKind::Enum;
    else return std::nullopt;
    return std::pair{k, optional_hint};
}

inline ParamSpec parse_param_spec(const json& j, bool required_default, const std::string& path) {
    if (!j.is_object()) throw Error(ErrorCode::MalformedJson, path + " must be an object");
    ParamSpec p;
    bool optional_hint = false;
    if (auto t = j.find("type"); t != j.end()) {
        if (!t->is_string()) throw Error(ErrorCode::UnsupportedType, path + ".type must be a string");
        auto kind = kind_from_type_name(t->get<std::string>());
        if (!kind) throw Error(ErrorCode::UnsupportedType, path + ".type '" + t->get<std::string>() + "' is not a scalar kind");
        p.kind = kind->first;
        optional_hint = kind->second;
    }
    if (auto e = j.find("enum"); e != j.end()) {
        if (!e->is_array() || e->empty()) throw Error(ErrorCode::MalformedJson, path + ".enum must be a non-empty array");
        for (const auto& v : *e) {
            if (!v.is_string()) throw Error(ErrorCode::UnsupportedType, path + ".enum values must be strings");
            p.allowed.push_back(v.get<std::string>());
        }
        if (p.kind != ValueKind::String && p.kind != ValueKind::Enum) {
            throw Error(ErrorCode::UnsupportedType, path + ": enum values require a string kind");
        }
        p.kind = ValueKind::Enum;
    } else if (p.kind == ValueKind::Enum) {
        throw Error(ErrorCode::MissingField, path + ".enum");
    }
    if (auto d = j.find("description"); d != j.end() && d->is_string()) p.description = d->get<std::string>();
    if (auto r = j.find("required"); r != j.end() && r->is_boolean()) {
        p.required = r->get<bool>();
    } else {
        p.required = required_default && !optional_hint && !j.contains("default");
    }
    return p;
}

}  // namespace detail

inline json to_json(const ToolCall& c) {
    json args = json::object();
    for (const auto& [k, v] : c.arguments) args[k] = value_to_json(v);
    return json{{"name", c.name}, {"arguments", std::move(args)}};
}

inline json to_json(const std::vector<ToolCall>& calls) {
    json arr = json::array();
    for (const auto& c : calls) arr.push_back(to_json(c));
    return arr;
}

inline json to_json(const ParamSpec& p) {
    json j{{"type", std::string(to_string(p.kind))}, {"required", p.required}};
    if (!p.allowed.empty()) j["enum"] = p.allowed;
    if (!p.description.empty()) j["description"] = p.description;
    return j;
}

inline json to_json(const ToolSpec& t) {
    json params = json::object();
    for (const auto& [k, p] : t.parameters) params[k] = to_json(p);
    return json{{"name", t.name}, {"description", t.description}, {"parameters", std::move(params)}};
}

inline json to_json(const std::vector<ToolSpec>& tools) {
    json arr = json::array();
    for (const auto& t : tools) arr.push_back(to_json(t));
    return arr;
}

inline ToolCall parse_tool_call(const json& j, const std::string& path) {
    if (!j.is_object()) throw Error(ErrorCode::MalformedJson, path + " must be an object");
    ToolCall c;
    c.name = detail::require_string(j, "name", path);
    if (c.name.empty()) throw Error(ErrorCode::MalformedJson, path + ".name is empty");
    const json args = detail::unwrap_encoded(detail::require(j, "arguments", path), path + ".arguments");
    if (!args.is_object()) throw Error(ErrorCode::MalformedJson, path + ".arguments must be an object");
    for (const auto& [k, v] : args.items()) {
        c.arguments.emplace(k, value_from_json(v, path + ".arguments." + k));
    }
    return c;
}

/// Accepts an inline array or a JSON-encoded string holding one.
inline std::vector<ToolCall> parse_tool_calls(const json& j, const std::string& path = "answers") {
    const json arr = detail::unwrap_encoded(j, path);
    if (!arr.is_array()) throw Error(ErrorCode::MalformedJson, path + " must be an array");
    std::vector<ToolCall> calls;
    calls.reserve(arr.size());
    for (std::size_t i = 0; i < arr.size(); ++i) {
        calls.push_back(parse_tool_call(arr[i], path + "[" + std::to_string(i) + "]"));
    }
    return calls;
}

/// Understands both the xLAM shape ({param: {type: "str, optional", default}})
/// and the JSON-schema shape ({type: object, properties, required: [...]}).
inline ToolSpec parse_tool_spec(const json& j, const std::string& path) {
    if (!j.is_object()) throw Error(ErrorCode::MalformedJson, path + " must be an object");
    ToolSpec t;
    t.name = detail::require_string(j, "name", path);
    if (t.name.empty()) throw Error(ErrorCode::MalformedJson, path + ".name is empty");
    if (auto d = j.find("description"); d != j.end() && d->is_string()) t.description = d->get<std::string>();
    auto pit = j.find("parameters");
    if (pit == j.end() || pit->is_null()) return t;
    const json params = detail::unwrap_encoded(*pit, path + ".parameters");
    if (!params.is_object()) throw Error(ErrorCode::MalformedJson, path + ".parameters must be an object");
    if (params.contains("properties")) {
        std::vector<std::string> required;
        if (auto r = params.find("required"); r != params.end() && r->is_array()) {
            for (const auto& v : *r) {
                if (v.is_string()) required.push_back(v.get<std::string>());
            }
        }
        const json& props = params["properties"];
        if (!props.is_object()) throw Error(ErrorCode::MalformedJson, path + ".parameters.properties must be an object");
        for (const auto& [name, spec] : props.items()) {
            json spec_copy = spec;
            if (spec_copy.is_object() && !spec_copy.contains("required")) {
                spec_copy["required"] = std::find(required.begin(), required.end(), name) != required.end();
            }
            t.parameters.emplace(name, detail::parse_param_spec(spec_copy, false, path + ".parameters." + name));
        }
    } else {
        for (const auto& [name, spec] : params.items()) {
            t.parameters.emplace(name, detail::parse_param_spec(spec, true, path + ".parameters." + name));
        }
    }
    return t;
}

inline std::vector<ToolSpec> parse_toolset(const json& j, const std::string& path = "tools") {
    const json arr = detail::unwrap_encoded(j, path);
    if (!arr.is_array()) throw Error(ErrorCode::MalformedJson, path + " must be an array");
    std::vector<ToolSpec> tools;
    for (std::size_t i = 0; i < arr.size(); ++i) {
        ToolSpec t = parse_tool_spec(arr[i], path + "[" + std::to_string(i) + "]");
        for (const auto& other : tools) {
            if (other.name == t.name) throw Error(ErrorCode::MalformedJson, path + ": duplicate tool name '" + t.name + "'");
        }
        tools.push_back(std::move(t));
    }
    return tools;
}

inline const ToolSpec* find_tool(const std::vector<ToolSpec>& tools, std::string_view name) noexcept {
    for (const auto& t : tools) {
        if (t.name == name) return &t;
    }
    return nullptr;
}

// ---------------------------------------------------------------------------
// Samples

struct Sample {
    std::string id;
    std::string query;
    std::vector<ToolCall> answers;
    std::vector<ToolSpec> tools;
    Origin origin = Origin::Seed;
    std::optional<Embedding> embedding;  // never serialized; see EmbeddingCache

    const ToolSpec* tool(std::string_view name) const noexcept { return find_tool(tools, name); }

    /// Equality over the serialized fields; embeddings are a derived cache.
    bool operator==(const Sample& o) const {
        return id == o.id && query == o.query && answers == o.answers && tools == o.tools && origin == o.origin;
    }
};

/// Content digest of (query, answers). Keys are sorted, so the id does not
/// depend on the key order of the source text or on the toolset.
inline std::string compute_sample_id(std::string_view query, const std::vector<ToolCall>& answers) {
    json j{{"query", query}, {"answers", to_json(answers)}};
    return sha256_hex(j.dump());
}

inline Sample make_sample(std::string query, std::vector<ToolCall> answers, std::vector<ToolSpec> tools,
                          Origin origin = Origin::Seed) {
    for (std::size_t i = 0; i < answers.size(); ++i) {
        if (!find_tool(tools, answers[i].name)) {
            throw Error(ErrorCode::UnknownToolInAnswer,
                        "answers[" + std::to_string(i) + "] names '" + answers[i].name + "' which is not in tools");
        }
    }
    for (std::size_t i = 0; i < tools.size(); ++i) {
        for (std::size_t j = i + 1; j < tools.size(); ++j) {
            if (tools[i].name == tools[j].name) {
                throw Error(ErrorCode::MalformedJson, "duplicate tool name '" + tools[i].name + "'");
            }
        }
    }
    Sample s;
    s.id = compute_sample_id(query, answers);
    s.query = std::move(query);
    s.answers = std::move(answers);
    s.tools = std::move(tools);
    s.origin = origin;
    return s;
}

inline Sample sample_from_json(const json& j) {
    if (!j.is_object()) throw Error(ErrorCode::MalformedJson, "record must be a JSON object");
    std::string query = detail::require_string(j, "query", "");
    auto answers = parse_tool_calls(detail::require(j, "answers", ""), "answers");
    auto tools = parse_toolset(detail::require(j, "tools", ""), "tools");
    Origin origin = Origin::Seed;
    if (auto o = j.find("origin"); o != j.end()) {
        if (!o->is_string()) throw Error(ErrorCode::MalformedJson, "origin must be a string");
        origin = origin_from_string(o->get<std::string>());
    }
    return make_sample(std::move(query), std::move(answers), std::move(tools), origin);
}

/// Parses one JSONL record. A supplied "id" field is ignored and recomputed.
inline Sample parse_sample(std::string_view text) {
    return sample_from_json(detail::parse_json_text(text, "sample"));
}

inline json sample_to_json(const Sample& s) {
    return json{{"id", s.id},
                {"query", s.query},
                {"answers", to_json(s.answers)},
                {"tools", to_json(s.tools)},
                {"origin", std::string(to_string(s.origin))}};
}

/// Canonical form: sorted keys, no insignificant whitespace, inline arrays.
inline std::string serialize_sample(const Sample& s) { return sample_to_json(s).dump(); }

// ---------------------------------------------------------------------------
// Call validation

struct ValidationIssue {
    std::string code;  // MissingRequired | UndeclaredParameter | KindMismatch | EnumViolation | ...
    std::string path;
    std::string message;

    bool operator==(const ValidationIssue&) const = default;
};

using ValidationReport = std::vector<ValidationIssue>;

inline json to_json(const ValidationReport& report) {
    json arr = json::array();
    for (const auto& i : report) arr.push_back({{"code", i.code}, {"path", i.path}, {"message", i.message}});
    return arr;
}

namespace detail {

inline bool kind_accepts(const ParamSpec& spec, const Value& v) {
    switch (spec.kind) {
        case ValueKind::String: return std::holds_alternative<std::string>(v);
        case ValueKind::Enum: return std::holds_alternative<std::string>(v);
        case ValueKind::Boolean: return std::holds_alternative<bool>(v);
        case ValueKind::Float: return is_number(v);
        case ValueKind::Integer:
            if (std::holds_alternative<std::int64_t>(v)) return true;
            if (auto* d = std::get_if<double>(&v)) return std::isfinite(*d) && std::trunc(*d) == *d;
            return false;
    }
    return false;
}

inline std::string describe(const Value& v) {
    return std::visit(
        [](const auto& x) -> std::string {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, std::string>) return "string \"" + x + "\"";
            else if constexpr (std::is_same_v<T, bool>) return std::string("boolean ") + (x ? "true" : "false");
            else if constexpr (std::is_same_v<T, std::int64_t>) return "integer " + std::to_string(x);
            else return "float " + render_number(x);
        },
        v);
}

}  // namespace detail

inline ValidationReport validate_call(const ToolCall& call, const ToolSpec& spec, const std::string& prefix = "") {
    if (call.name != spec.name) {
        throw Error(ErrorCode::NameMismatch, "call '" + call.name + "' checked against spec '" + spec.name + "'");
    }
    const std::string base = prefix.empty() ? "arguments" : prefix + ".arguments";
    ValidationReport report;
    for (const auto& [name, p] : spec.parameters) {
        if (p.required && !call.arguments.contains(name)) {
            report.push_back({"MissingRequired", base + "." + name, "required parameter '" + name + "' is missing"});
        }
    }
    for (const auto& [name, value] : call.arguments) {
        const std::string path = base + "." + name;
        auto it = spec.parameters.find(name);
        if (it == spec.parameters.end()) {
            report.push_back({"UndeclaredParameter", path, "'" + spec.name + "' declares no parameter '" + name + "'"});
            continue;
        }
        const ParamSpec& p = it->second;
        if (!detail::kind_accepts(p, value)) {
            report.push_back({"KindMismatch", path,
                              "expected " + std::string(to_string(p.kind)) + ", got " + detail::describe(value)});
            continue;
        }
        if (p.kind == ValueKind::Enum) {
            const auto& s = std::get<std::string>(value);
            if (std::find(p.allowed.begin(), p.allowed.end(), s) == p.allowed.end()) {
                report.push_back({"EnumViolation", path, "\"" + s + "\" is not an allowed value"});
            }
        }
    }
    return report;
}

/// Validates every answer against the sample's own toolset.
inline ValidationReport validate_sample(const Sample& s) {
    ValidationReport report;
    for (std::size_t i = 0; i < s.answers.size(); ++i) {
        const std::string path = "answers[" + std::to_string(i) + "]";
        const ToolSpec* spec = s.tool(s.answers[i].name);
        if (!spec) {
            report.push_back({"UnknownTool", path, "tool '" + s.answers[i].name + "' is not in tools"});
            continue;
        }
        auto r = validate_call(s.answers[i], *spec, path);
        report.insert(report.end(), r.begin(), r.end());
    }
    if (compute_sample_id(s.query, s.answers) != s.id) {
        report.push_back({"IdMismatch", "id", "id does not match the content digest"});
    }
    return report;
}

// ---------------------------------------------------------------------------
// Buffer

/// Deduplicated corpus. Construction keeps the first sample for each id.
class Buffer {
public:
    Buffer() = default;

    explicit Buffer(std::vector<Sample> samples) {
        samples_.reserve(samples.size());
        for (auto& s : samples) {
            if (index_.contains(s.id)) continue;
            index_.emplace(s.id, samples_.size());
            samples_.push_back(std::move(s));
        }
    }

    const std::vector<Sample>& samples() const noexcept { return samples_; }
    std::size_t size() const noexcept { return samples_.size(); }
    bool empty() const noexcept { return samples_.empty(); }
    auto begin() const noexcept { return samples_.begin(); }
    auto end() const noexcept { return samples_.end(); }
    const Sample& operator[](std::size_t i) const { return samples_[i]; }

    bool contains(const std::string& id) const { return index_.contains(id); }

    const Sample* find(const std::string& id) const {
        auto it = index_.find(id);
        return it == index_.end() ? nullptr : &samples_[it->second];
    }

    std::optional<std::size_t> position(const std::string& id) const {
        auto it = index_.find(id);
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

private:
    std::vector<Sample> samples_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// Union keyed by id; on collision the left operand's copy wins.
inline Buffer merge(const Buffer& a, const Buffer& b) {
    std::vector<Sample> all;
    all.reserve(a.size() + b.size());
    all.insert(all.end(), a.begin(), a.end());
    for (const auto& s : b) {
        if (!a.contains(s.id)) all.push_back(s);
    }
    return Buffer(std::move(all));
}

// ---------------------------------------------------------------------------
// JSONL files

inline std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(std::move(line));
    }
    return lines;
}

/// Creates missing parent directories.
inline void write_text(const std::string& path, std::string_view text) {
    if (const auto parent = std::filesystem::path(path).parent_path(); !parent.empty()) {
        std::error_code ec;
        std::filesystem::create_directories(parent, ec);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw Error(ErrorCode::Io, "write failed for " + path);
}

inline std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Parses JSONL text; blank lines are skipped and errors carry the line number.
inline Buffer parse_corpus(std::string_view text) {
    std::vector<Sample> samples;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        ++line_no;
        auto line = trim(text.substr(start, end - start));
        if (!line.empty()) {
            try {
                samples.push_back(parse_sample(line));
            } catch (const Error& e) {
                throw Error(e.code(), "line " + std::to_string(line_no) + ": " + e.what());
            }
        }
        start = end + 1;
    }
    return Buffer(std::move(samples));
}

inline std::string serialize_corpus(const Buffer& buffer) {
    std::string out;
    for (const auto& s : buffer) {
        out += serialize_sample(s);
        out += '\n';
    }
    return out;
}

inline Buffer load_corpus(const std::string& path) { return parse_corpus(read_text(path)); }

inline void save_corpus(const std::string& path, const Buffer& buffer) { write_text(path, serialize_corpus(buffer)); }

}  // namespace fcdata
