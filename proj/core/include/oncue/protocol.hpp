#ifndef ONCUE_PROTOCOL_HPP
#define ONCUE_PROTOCOL_HPP

#include <string>
#include <vector>

#include "oncue/backend.hpp"

namespace oncue {

// Constants pinned by the decision protocol. The 0.85 progress threshold and
// the 0.50 low bar are part of the protocol; drop depth and low-persistence
// window are configurable (see ReflectionConfig).
inline constexpr double kAnswerThreshold = 0.85;   // c >= this counts toward rho
inline constexpr double kLowConfidenceBar = 0.50;  // "still low-confidence"
inline constexpr int kMaxCaptionRequirements = 5;  // "Max 5 points"
inline constexpr int kMaxCaptionWords = 500;       // "Limit to 500 words max"
inline constexpr int kCaptionHistoryCap = 8;       // part-5 context bound

enum class SubQuestionType {
    object,
    attribute,
    person,
    action,
    scene,
    event,
    temporal_change,
    spatial_relation,
    causal_relation,
    count,
    other,
};

// Accepts both the spaced ("temporal change") and underscored
// ("temporal_change") spellings; throws SchemaError otherwise.
SubQuestionType sub_question_type_from(const std::string& s);
std::string to_string(SubQuestionType t);  // canonical underscored form

struct CaptionInstructions {
    std::string question;
    std::vector<std::string> requirements;  // 1..5 entries
};

struct SubQuestion {
    SubQuestionType type = SubQuestionType::other;
    std::string question;
};

struct SubQuestionSet {
    std::vector<SubQuestion> items;  // K >= 1
};

struct ClipCaption {
    int clip_index = 0;
    std::string clip_timestamp;  // "h:mm:ss-h:mm:ss"
    std::string caption;
};

struct SubAnswer {
    SubQuestionType type = SubQuestionType::other;
    std::string question;
    std::string value = "?";
    double confidence = 0.0;  // "?" forces exactly 0.0
};

struct SubAnswerState {
    std::vector<SubAnswer> items;
    // Backend-reported progress; advisory telemetry only, never used for the
    // stopping rule.
    int estimated_progress_advisory = 0;

    // Fraction of sub-questions with confidence >= 0.85. This is the only
    // progress the stopping rule trusts.
    double rho() const;
    std::vector<double> confidences() const;

    static SubAnswerState initial(const SubQuestionSet& subqs);
};

enum class MergeStatus { upgraded, downgraded, unchanged, newly_added };
MergeStatus merge_status_from(const std::string& s);
std::string to_string(MergeStatus s);

struct ReflectionEntry {
    std::string question;  // attribute_status key
    std::string value;
    double confidence = 0.0;
    MergeStatus status = MergeStatus::unchanged;
    std::string note;
};

struct ReflectionReport {
    std::vector<std::string> causal_chain;
    std::vector<ReflectionEntry> entries;  // document order
    int estimated_progress = 0;
};

// --- timestamps ------------------------------------------------------------

// "h:mm:ss" with unpadded hours, e.g. 466s -> "0:07:46". Seconds floor.
std::string format_timestamp(double seconds);
// "h:mm:ss-h:mm:ss" window for a clip.
std::string format_clip_window(double t_start, double t_end);
// Inverse of format_timestamp; throws ParseError on malformed input.
double parse_timestamp(const std::string& text);

// --- templates and rendering ------------------------------------------------

// The canonical template text; byte-identical to assets/prompts/<id>.txt.
const std::string& template_text(TemplateId id);

// Slot fillers. Each returns the template with its <|...|> slots (and
// {timestamp} for part-3) substituted; everything else is untouched.
std::string render_part1(const std::string& question);
std::string render_part2(const std::string& question);
std::string render_part3(const std::vector<std::string>& requirements,
                         const std::string& clip_window,
                         const std::string& video_payload);
std::string render_part4(const std::string& question, const SubAnswerState& prior,
                         const std::string& caption);
std::string render_part5(const std::string& question, const SubAnswerState& state,
                         const std::vector<ClipCaption>& history);
std::string render_final(const std::string& question, const SubAnswerState& state);

// Canonical JSON renderings used inside prompts (2-space indent, insertion
// order preserved). state_json follows the part-4 output schema with the
// locally computed progress percentage.
std::string state_json(const SubAnswerState& state);
std::string requirements_json(const std::vector<std::string>& requirements);
// "Clip {i} [{window}]: {caption}" lines.
std::string caption_history_text(const std::vector<ClipCaption>& history);

// --- reply parsing -----------------------------------------------------------
// All parsers run extract_json (with its repair pass) on the raw reply and
// throw SchemaError on schema violations.

CaptionInstructions parse_part1(const std::string& raw, const std::string& question);
SubQuestionSet parse_part2(const std::string& raw);
// Validates the "h:mm:ss-h:mm:ss" stamp against the requested window and the
// 500-word cap.
ClipCaption parse_part3(const std::string& raw, double t_start, double t_end,
                        int clip_index);
// Builds the next state from prior + reported items. Items are matched by
// question text; unknown questions throw IndexError; unmentioned questions
// keep their prior entry. "?" forces confidence 0.0. binary_gate quantizes
// confidences to {0, 1} at threshold 0.85.
SubAnswerState parse_part4(const std::string& raw, const SubAnswerState& prior,
                           bool binary_gate);
ReflectionReport parse_part5(const std::string& raw);
std::string parse_final(const std::string& raw);

// --- reflection ---------------------------------------------------------------

struct ReflectionConfig {
    double theta_drop = 0.3;  // trigger on a per-item drop deeper than this
    int w_low = 2;            // answered-but-low persistence window
};

// True iff, on the most recent consecutive pair, some item's confidence
// dropped by more than theta_drop, or some item has been answered (value not
// "?") with confidence <= 0.50 in each of the last w_low states. States must
// share item order. Missing ("?") items never satisfy the low clause.
bool reflection_trigger(const std::vector<SubAnswerState>& history,
                        const ReflectionConfig& cfg);

// Applies a reflection report. "unchanged" entries must echo the prior value
// and confidence (MergeError otherwise) and the prior entry is kept bit-exact.
// upgraded/downgraded overwrite value+confidence; newly_added appends a new
// sub-answer and must not collide with an existing question. Unknown
// questions for upgrade/downgrade throw MergeError.
SubAnswerState merge_reflection(const SubAnswerState& prior,
                                const ReflectionReport& report, bool binary_gate);

}  // namespace oncue

#endif  // ONCUE_PROTOCOL_HPP
