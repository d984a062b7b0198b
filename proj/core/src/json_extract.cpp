#include "oncue/json_extract.hpp"

#include <optional>

#include <nlohmann/json.hpp>

#include "oncue/errors.hpp"

namespace oncue {

namespace {

// First balanced {...} span, honoring string literals and escape sequences.
std::optional<std::string> first_balanced_object(const std::string& text) {
    std::size_t start = text.find('{');
    while (start != std::string::npos) {
        int depth = 0;
        bool in_string = false;
        bool escaped = false;
        for (std::size_t i = start; i < text.size(); ++i) {
            char c = text[i];
            if (in_string) {
                if (escaped) {
                    escaped = false;
                } else if (c == '\\') {
                    escaped = true;
                } else if (c == '"') {
                    in_string = false;
                }
                continue;
            }
            if (c == '"') {
                in_string = true;
            } else if (c == '{') {
                ++depth;
            } else if (c == '}') {
                --depth;
                if (depth == 0) return text.substr(start, i - start + 1);
            }
        }
        // Unbalanced from this opener; try the next one.
        start = text.find('{', start + 1);
    }
    return std::nullopt;
}

bool parses_as_object(const std::string& candidate) {
    auto parsed = nlohmann::json::parse(candidate, nullptr, false);
    return !parsed.is_discarded() && parsed.is_object();
}

}  // namespace

std::string repair_json_text(const std::string& text) {
    // Pass 1: drop ``` fences (with or without a language tag).
    std::string defenced;
    defenced.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) {
        if (text.compare(i, 3, "```") == 0) {
            i += 3;
            while (i < text.size() && text[i] != '\n' && text[i] != '{' &&
                   text[i] != '`') {
                ++i;  // skip the language tag
            }
            continue;
        }
        defenced.push_back(text[i]);
        ++i;
    }
    // Pass 2: remove commas that directly precede a closing bracket.
    std::string out;
    out.reserve(defenced.size());
    bool in_string = false;
    bool escaped = false;
    for (std::size_t k = 0; k < defenced.size(); ++k) {
        char c = defenced[k];
        if (in_string) {
            out.push_back(c);
            if (escaped) {
                escaped = false;
            } else if (c == '\\') {
                escaped = true;
            } else if (c == '"') {
                in_string = false;
            }
            continue;
        }
        if (c == '"') {
            in_string = true;
            out.push_back(c);
            continue;
        }
        if (c == ',') {
            std::size_t j = k + 1;
            while (j < defenced.size() &&
                   (defenced[j] == ' ' || defenced[j] == '\t' ||
                    defenced[j] == '\n' || defenced[j] == '\r')) {
                ++j;
            }
            if (j < defenced.size() && (defenced[j] == '}' || defenced[j] == ']')) {
                continue;  // trailing comma: drop it
            }
        }
        out.push_back(c);
    }
    return out;
}

std::string extract_json(const std::string& raw) {
    if (auto candidate = first_balanced_object(raw)) {
        if (parses_as_object(*candidate)) return *candidate;
    }
    const std::string repaired = repair_json_text(raw);
    if (auto candidate = first_balanced_object(repaired)) {
        if (parses_as_object(*candidate)) return *candidate;
    }
    throw SchemaError("no parseable JSON object in reply", raw);
}

}  // namespace oncue
