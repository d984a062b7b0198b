#ifndef ONCUE_JSON_EXTRACT_HPP
#define ONCUE_JSON_EXTRACT_HPP

#include <string>

namespace oncue {

// Pulls the first balanced top-level JSON object out of arbitrary reply text,
// brace-matching with full awareness of string literals and escapes. If the
// candidate does not parse, one repair pass runs (code fences stripped,
// trailing commas removed) and extraction is retried; after that a
// SchemaError carrying the raw text is thrown. Never crashes on arbitrary
// bytes. The returned string is guaranteed to parse as a JSON object.
std::string extract_json(const std::string& raw);

// The repair pass by itself (exposed for tests): strips ``` fences and
// removes trailing commas outside string literals.
std::string repair_json_text(const std::string& text);

}  // namespace oncue

#endif  // ONCUE_JSON_EXTRACT_HPP
