#ifndef ONCUE_ERRORS_HPP
#define ONCUE_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace oncue {

// Root of every exception thrown by this library.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// A file or record could not be parsed. `line` is 1-based for line-oriented
// inputs and 0 when no line applies.
struct ParseError : Error {
    explicit ParseError(const std::string& msg, std::size_t line_no = 0)
        : Error(line_no ? "line " + std::to_string(line_no) + ": " + msg : msg),
          line(line_no) {}
    std::size_t line = 0;
};

// Adjacent clips leave a gap or overlap on the time axis.
struct ContiguityError : Error {
    using Error::Error;
};

// A query lies outside the stream's covered interval, or an index is out of
// bounds.
struct OutOfRangeError : Error {
    using Error::Error;
};

// A size precondition was violated (pool target larger than input, clip too
// short for its aggregation budget, ...).
struct SizeError : Error {
    using Error::Error;
};

// A request is inconsistent with the token layout it refers to.
struct LayoutError : Error {
    using Error::Error;
};

// Spatial grid dimensions are not divisible by the merge factor, or the grid
// is otherwise malformed.
struct GridError : Error {
    using Error::Error;
};

// Matrix dimensions do not match what an operation requires.
struct ShapeError : Error {
    using Error::Error;
};

// A NaN or infinity surfaced where only finite values are legal.
struct NonFiniteError : Error {
    using Error::Error;
};

// The reasoner backend failed (network, timeout, non-retryable status) after
// its bounded retries.
struct BackendError : Error {
    using Error::Error;
};

// A backend reply did not contain a parseable object of the expected shape.
// Carries the offending raw reply for diagnosis.
struct SchemaError : Error {
    explicit SchemaError(const std::string& msg, std::string raw = {})
        : Error(msg), raw_text(std::move(raw)) {}
    std::string raw_text;
};

// The scripted test backend was asked for a response it does not hold.
struct ScriptExhausted : Error {
    using Error::Error;
};

// A backend answered a sub-question that is not part of the episode.
struct IndexError : Error {
    using Error::Error;
};

// A reflection report contradicts the no-evidence-no-change rule.
struct MergeError : Error {
    using Error::Error;
};

// A configuration value is missing or invalid.
struct ConfigError : Error {
    using Error::Error;
};

// The stream ran out of clips while the episode was still unresolved.
struct StreamEnded : Error {
    using Error::Error;
};

}  // namespace oncue

#endif  // ONCUE_ERRORS_HPP
