#pragma once

#include <optional>
#include <string_view>

#include <nlohmann/json.hpp>

namespace fcdata {

namespace detail {

// Index one past the bracket that closes text[open], honouring JSON strings.
inline std::optional<std::size_t> matching_close(std::string_view text, std::size_t open) {
    const char opener = text[open];
    const char closer = opener == '[' ? ']' : '}';
    int depth = 0;
    bool in_string = false;
    for (std::size_t i = open; i < text.size(); ++i) {
        const char c = text[i];
        if (in_string) {
            if (c == '\\') ++i;
            else if (c == '"') in_string = false;
            continue;
        }
        if (c == '"') in_string = true;
        else if (c == '[' || c == '{') ++depth;
        else if (c == ']' || c == '}') {
            if (--depth == 0) return c == closer ? std::optional<std::size_t>(i + 1) : std::nullopt;
        }
    }
    return std::nullopt;
}

}  // namespace detail

/// Returns the first substring of `text` that parses as a JSON array.
/// Surrounding prose and markdown fences are ignored.
inline std::optional<nlohmann::json> extract_first_json_array(std::string_view text) {
    for (std::size_t pos = text.find('['); pos != std::string_view::npos; pos = text.find('[', pos + 1)) {
        auto end = detail::matching_close(text, pos);
        if (!end) continue;
        auto parsed = nlohmann::json::parse(text.substr(pos, *end - pos), nullptr, /*allow_exceptions=*/false);
        if (!parsed.is_discarded() && parsed.is_array()) return parsed;
    }
    return std::nullopt;
}

}  // namespace fcdata
