#include "oncue/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "oncue/errors.hpp"
#include "oncue/json_extract.hpp"

namespace oncue {

namespace {

using ojson = nlohmann::ordered_json;

// Embedded copies of assets/prompts/*.txt; a test pins byte equality.
const std::string kPart1Template = R"TPL(<TASK DEFINITION>
Your task is to analyze the user's question and define EXACT observation requirements for video captioning from the video in order to help answer it.
Think carefully: What aspects of the video should a caption focus on to make answering this question possible?

<INSTRUCTIONS>
From the given question, generate a list of observation requirements:
Each requirement should describe an important dimension that a future caption must pay attention to.
Some CRITICAL FOCUS: 1. Quantification: Require exact counts when applicable 2. Directionality: Specify spatial relationships, positions and movement vectors 3. Object-anchored
4. Disambiguation of Confusable Concepts: If options include visually similar or easily confused concepts (e.g., "table" vs "counter", "cabinet" vs "shelf"), ensure captions distinguish them clearly through spatial context, object functions, or visual appearance.

For example: exact count of objects in someplace or the number of people, actions and their order, hand movements or object manipulation, specific visual details, interactions, gestures, spatial relationships, direction, distance, any sounds or spoken content

Such as: "exact count of apples placed in basket", "direction of sword thrust relative to opponent", "distance between white car and pedestrian when braking", "rotation angle of wrench during tightening"
<INSTRUCTIONS>

<CONSTRAINTS>
Only generate points that are visually observable. Do not speculate. Focus on fine-grained but relevant aspects. Max 5 points. Return your result in this JSON format:
{
"question": [<|Question|>],
"caption requirements": [
    "<|quantifiable requirement 1|>",
    "<|space observation requirement 2|>",
    "<|other observation point 3|>",
    ...,
]
}
<CONSTRAINTS>

<TASK DEFINITION>
)TPL";

const std::string kPart2Template = R"TPL(<TASK DEFINITION>
Your ONLY goal in this step is to read the user's main question below. Break it down into a set of precise, concrete sub-questions. Each sub-question should focus on a specific, observable aspect of the video (e.g., object, person, action, spatial relation, etc.). These sub-questions represent the key elements that must be visually or aurally verified in the video to answer the main question.

<CONSTRAINTS>
- Only include attributes that are explicitly required or clearly implied by the question.
- Do NOT use background knowledge, commonsense, or speculate.
- Do NOT include any explanations or commentary.
- Output must be in valid JSON, under the top-level key "required_attributes".
- Do not include trailing commas.
Return your result in this JSON format:
{"question": [<|Question|>], "required subquestions": [{"type": <|type|>, "description": <|Required Subquestion description|>]}
<CONSTRAINTS>

<TASK DEFINITION>
)TPL";

const std::string kPart3Template = R"TPL(<TASK DEFINITION>
Watch the current video clip and generate a descriptive caption, you must focus your caption on the following key observation points:
<|Caption Requirements List|>
<|Video|>

<INSTRUCTIONS>
1. Base your caption only on what is clearly visible. Limit to 500 words max.
2. Be specific and concrete: describe actions, hand use, counts, object states, etc.
3. Use short, factual sentences. No speculation, no vague summaries.
4. Precision first if required: "three apples" NOT "some fruits", "thrusting downward at 45° angle" NOT "attacking", "2.3m left of tree" NOT "near tree", etc.

<CONSTRAINTS>
Return the caption in valid JSON format:
{
  "clip_timestamp": "{timestamp}",
  "caption": "detailed caption that fulfills the requirements"
}
<CONSTRAINTS>
)TPL";

const std::string kPart4Template = R"TPL(<TASK DEFINITION>
Your task is to:
1. Read the main user question and the list of required subquestions (from Part-1).
2. Read the caption of the current video clip.
3. For each subquestion, determine whether the caption provides enough information to answer it:
    - If yes: provide an appropriate answer ('value') and a confidence score between 0 and 1.
    - If no or uncertain: set "value": "?" and "confidence": 0.0.

<INPUT>
Main Question:
<|Question|>
Required Subquestions (from Part-2 or latest output from Part-4):
<|Required Subquestions|>
Caption of the current clip:
<|Past caption|>

<OUTPUT FORMAT>
Return one top-level JSON object with the key "subquestion_status".
Each item must include:
- "type": one of ["object", "attribute", "person", "action", "scene", "event", "temporal change", "spatial relation", "causal relation", "count", "other"]
- "question": the original subquestion (from Part-1)
- "value": the answer extracted from the caption (or "?" if not found)
- "confidence": a float between 0 and 1

Also include an overall "estimated_progress" field (e.g., percentage of subquestions with confidence >= 0.85).

<OUTPUT TEMPLATE>

{
  "subquestion_status": [
    {
      "type": "<attribute_type>",
      "question": "<subquestion_text>",
      "value": "<answer_or_?>",
      "confidence": 0.xx
    },
    ...
  ],
  "estimated_progress": <int from 0 to 100>
}

<CONSTRAINTS>
- Only rely on what is explicitly visible or audible in the current caption.
- Do NOT use prior background knowledge or context.
- Do NOT speculate or fabricate.
- Ensure output is valid JSON (no trailing commas).
- If nothing is observed, return all values as "?" with "confidence": 0.0.
)TPL";

const std::string kPart5Template = R"TPL(<TASK DEFINITION>
1. Cross-clip causal reasoning
- Analyze each new clip caption for direct evidence related to each attribute.
- Build an explicit, ordered chain only for attributes with relevant evidence. Use arrow notation: "Clip X -> [supports/contradicts/provides evidence for] [attribute] because [exact caption text]". If a clip provides no relevant evidence for any attribute, state: "Clip X -> No relevant evidence for current attributes".
2. Evidence relevance check
- For each attribute, explicitly check whether the captions contain relevant information. Mark attributes as "relevant evidence found" or "no relevant evidence".
3. Update the attribute list
- Preserve original values and confidences for attributes without relevant evidence. Modify attributes only where direct, explicit evidence is found; quote the exact caption text that supports the change.

<INPUT>
Question:
<|Question|>
Latest reasoning state (attribute list + confidences):
<|Past CoT State|>
Past clip captions when confidence changes (chronological order):
<|Clip_Captions|>

<OUTPUT FORMAT>
Return exactly one JSON object (no extra prose).
{
  "causal_chain": [
    "Clip X -> [reasoning or 'No relevant evidence']"
  ],
  "attribute_status": {
    "<Attribute-Type>": {
      "value": "<value>",
      "confidence": 0.xx,
      "status": "upgraded | downgraded | unchanged | newly_added",
      "note": "old 0.yy -> new 0.xx, [exact caption evidence] | unchanged - no evidence"
    }
  },
  "estimated_progress": "<percentage with confidence > 0.5>"
}

<CONSTRAINTS>
Remember: NO EVIDENCE = NO CHANGE.
- No evidence => status "unchanged", original confidence preserved.
- Quote the exact caption text in notes when updating.
)TPL";

const std::string kFinalTemplate = R"TPL(<TASK DEFINITION>
Every required subquestion for the main question is resolved. Compose the final answer from the resolved values.

<INPUT>
Main Question:
<|Question|>
Resolved subquestion state:
<|Subanswer State|>

<CONSTRAINTS>
Use only the resolved values above. Answer the main question directly and concisely. Return your result in this JSON format:
{
  "final_answer": "<answer to the main question>"
}
)TPL";

// One left-to-right pass; substituted text is never rescanned, so slot
// markers inside values cannot cascade.
std::string render_with_slots(
    const std::string& tpl,
    const std::vector<std::pair<std::string, std::string>>& slots) {
    std::string out;
    out.reserve(tpl.size());
    std::size_t pos = 0;
    while (pos < tpl.size()) {
        std::size_t best = std::string::npos;
        const std::pair<std::string, std::string>* hit = nullptr;
        for (const auto& slot : slots) {
            const std::size_t at = tpl.find(slot.first, pos);
            if (at < best) {
                best = at;
                hit = &slot;
            }
        }
        if (!hit || best == std::string::npos) {
            out.append(tpl, pos, std::string::npos);
            break;
        }
        out.append(tpl, pos, best - pos);
        out.append(hit->second);
        pos = best + hit->first.size();
    }
    return out;
}

ojson parse_reply(const std::string& raw) {
    const std::string body = extract_json(raw);
    ojson doc = ojson::parse(body, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
        throw SchemaError("reply is not a JSON object", raw);
    }
    return doc;
}

const ojson* find_key(const ojson& doc, std::initializer_list<const char*> names) {
    for (const char* name : names) {
        auto it = doc.find(name);
        if (it != doc.end()) return &*it;
    }
    return nullptr;
}

std::string require_string(const ojson& v, const char* what, const std::string& raw) {
    if (!v.is_string()) throw SchemaError(std::string(what) + " must be a string", raw);
    return v.get<std::string>();
}

double require_confidence(const ojson& v, const std::string& raw) {
    if (!v.is_number()) throw SchemaError("confidence must be a number", raw);
    const double c = v.get<double>();
    if (!(c >= 0.0 && c <= 1.0)) {
        throw SchemaError("confidence must lie in [0, 1]", raw);
    }
    return c;
}

int require_progress(const ojson& v, const std::string& raw) {
    double p = 0.0;
    if (v.is_number()) {
        p = v.get<double>();
    } else if (v.is_string()) {
        try {
            p = std::stod(v.get<std::string>());
        } catch (const std::exception&) {
            throw SchemaError("estimated_progress is not numeric", raw);
        }
    } else {
        throw SchemaError("estimated_progress is not numeric", raw);
    }
    if (p < 0.0 || p > 100.0) {
        throw SchemaError("estimated_progress outside [0, 100]", raw);
    }
    return static_cast<int>(std::llround(p));
}

void check_question_mark_rule(const std::string& value, double confidence,
                              const std::string& raw) {
    if (value == "?" && confidence != 0.0) {
        throw SchemaError("value \"?\" requires confidence 0.0", raw);
    }
}

double quantize_confidence(double c) {
    return c >= kAnswerThreshold ? 1.0 : 0.0;
}

int word_count(const std::string& text) {
    std::istringstream in(text);
    std::string word;
    int n = 0;
    while (in >> word) ++n;
    return n;
}

}  // namespace

SubQuestionType sub_question_type_from(const std::string& s) {
    static const std::map<std::string, SubQuestionType> table = {
        {"object", SubQuestionType::object},
        {"attribute", SubQuestionType::attribute},
        {"person", SubQuestionType::person},
        {"action", SubQuestionType::action},
        {"scene", SubQuestionType::scene},
        {"event", SubQuestionType::event},
        {"temporal change", SubQuestionType::temporal_change},
        {"temporal_change", SubQuestionType::temporal_change},
        {"spatial relation", SubQuestionType::spatial_relation},
        {"spatial_relation", SubQuestionType::spatial_relation},
        {"causal relation", SubQuestionType::causal_relation},
        {"causal_relation", SubQuestionType::causal_relation},
        {"count", SubQuestionType::count},
        {"other", SubQuestionType::other},
    };
    auto it = table.find(s);
    if (it == table.end()) {
        throw SchemaError("unknown sub-question type: " + s, s);
    }
    return it->second;
}

std::string to_string(SubQuestionType t) {
    switch (t) {
        case SubQuestionType::object: return "object";
        case SubQuestionType::attribute: return "attribute";
        case SubQuestionType::person: return "person";
        case SubQuestionType::action: return "action";
        case SubQuestionType::scene: return "scene";
        case SubQuestionType::event: return "event";
        case SubQuestionType::temporal_change: return "temporal_change";
        case SubQuestionType::spatial_relation: return "spatial_relation";
        case SubQuestionType::causal_relation: return "causal_relation";
        case SubQuestionType::count: return "count";
        case SubQuestionType::other: return "other";
    }
    return "other";
}

MergeStatus merge_status_from(const std::string& s) {
    if (s == "upgraded") return MergeStatus::upgraded;
    if (s == "downgraded") return MergeStatus::downgraded;
    if (s == "unchanged") return MergeStatus::unchanged;
    if (s == "newly_added") return MergeStatus::newly_added;
    throw SchemaError("unknown merge status: " + s, s);
}

std::string to_string(MergeStatus s) {
    switch (s) {
        case MergeStatus::upgraded: return "upgraded";
        case MergeStatus::downgraded: return "downgraded";
        case MergeStatus::unchanged: return "unchanged";
        case MergeStatus::newly_added: return "newly_added";
    }
    return "unchanged";
}

double SubAnswerState::rho() const {
    if (items.empty()) return 0.0;
    std::size_t resolved = 0;
    for (const auto& item : items) {
        if (item.confidence >= kAnswerThreshold) ++resolved;
    }
    return static_cast<double>(resolved) / static_cast<double>(items.size());
}

std::vector<double> SubAnswerState::confidences() const {
    std::vector<double> out;
    out.reserve(items.size());
    for (const auto& item : items) out.push_back(item.confidence);
    return out;
}

SubAnswerState SubAnswerState::initial(const SubQuestionSet& subqs) {
    SubAnswerState state;
    state.items.reserve(subqs.items.size());
    for (const auto& q : subqs.items) {
        state.items.push_back(SubAnswer{q.type, q.question, "?", 0.0});
    }
    return state;
}

std::string format_timestamp(double seconds) {
    if (!(seconds >= 0.0) || !std::isfinite(seconds)) {
        throw OutOfRangeError("timestamp must be a finite non-negative time");
    }
    const long long total = static_cast<long long>(std::floor(seconds));
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%lld:%02lld:%02lld", total / 3600,
                  (total % 3600) / 60, total % 60);
    return buf;
}

std::string format_clip_window(double t_start, double t_end) {
    return format_timestamp(t_start) + "-" + format_timestamp(t_end);
}

double parse_timestamp(const std::string& text) {
    long long h = 0, m = 0, s = 0;
    char tail = 0;
    const int got = std::sscanf(text.c_str(), "%lld:%2lld:%2lld%c", &h, &m, &s, &tail);
    if (got != 3 || h < 0 || m < 0 || m > 59 || s < 0 || s > 59 ||
        text != format_timestamp(static_cast<double>(h * 3600 + m * 60 + s))) {
        throw ParseError("malformed h:mm:ss timestamp: " + text);
    }
    return static_cast<double>(h * 3600 + m * 60 + s);
}

const std::string& template_text(TemplateId id) {
    switch (id) {
        case TemplateId::part1: return kPart1Template;
        case TemplateId::part2: return kPart2Template;
        case TemplateId::part3: return kPart3Template;
        case TemplateId::part4: return kPart4Template;
        case TemplateId::part5: return kPart5Template;
        case TemplateId::final_answer: return kFinalTemplate;
    }
    return kFinalTemplate;
}

std::string render_part1(const std::string& question) {
    return render_with_slots(kPart1Template, {{"<|Question|>", question}});
}

std::string render_part2(const std::string& question) {
    return render_with_slots(kPart2Template, {{"<|Question|>", question}});
}

std::string render_part3(const std::vector<std::string>& requirements,
                         const std::string& clip_window,
                         const std::string& video_payload) {
    return render_with_slots(
        kPart3Template,
        {{"<|Caption Requirements List|>", requirements_json(requirements)},
         {"<|Video|>", video_payload},
         {"{timestamp}", clip_window}});
}

std::string render_part4(const std::string& question, const SubAnswerState& prior,
                         const std::string& caption) {
    return render_with_slots(kPart4Template,
                             {{"<|Question|>", question},
                              {"<|Required Subquestions|>", state_json(prior)},
                              {"<|Past caption|>", caption}});
}

std::string render_part5(const std::string& question, const SubAnswerState& state,
                         const std::vector<ClipCaption>& history) {
    return render_with_slots(
        kPart5Template,
        {{"<|Question|>", question},
         {"<|Past CoT State|>", state_json(state)},
         {"<|Clip_Captions|>", caption_history_text(history)}});
}

std::string render_final(const std::string& question, const SubAnswerState& state) {
    return render_with_slots(kFinalTemplate,
                             {{"<|Question|>", question},
                              {"<|Subanswer State|>", state_json(state)}});
}

std::string state_json(const SubAnswerState& state) {
    ojson items = ojson::array();
    for (const auto& item : state.items) {
        ojson entry;
        entry["type"] = to_string(item.type);
        entry["question"] = item.question;
        entry["value"] = item.value;
        entry["confidence"] = item.confidence;
        items.push_back(std::move(entry));
    }
    ojson doc;
    doc["subquestion_status"] = std::move(items);
    doc["estimated_progress"] = static_cast<int>(std::llround(100.0 * state.rho()));
    return doc.dump(2);
}

std::string requirements_json(const std::vector<std::string>& requirements) {
    return ojson(requirements).dump(2);
}

std::string caption_history_text(const std::vector<ClipCaption>& history) {
    if (history.empty()) return "(none)";
    std::string out;
    for (std::size_t i = 0; i < history.size(); ++i) {
        if (i) out.push_back('\n');
        out += "Clip " + std::to_string(history[i].clip_index) + " [" +
               history[i].clip_timestamp + "]: " + history[i].caption;
    }
    return out;
}

CaptionInstructions parse_part1(const std::string& raw, const std::string& question) {
    const ojson doc = parse_reply(raw);
    const ojson* list = find_key(doc, {"caption_requirements", "caption requirements"});
    if (!list || !list->is_array()) {
        throw SchemaError("part-1 reply needs a caption_requirements array", raw);
    }
    CaptionInstructions out;
    out.question = question;
    for (const auto& item : *list) {
        const std::string req = require_string(item, "caption requirement", raw);
        if (req.empty()) throw SchemaError("empty caption requirement", raw);
        out.requirements.push_back(req);
    }
    if (out.requirements.empty() ||
        out.requirements.size() > static_cast<std::size_t>(kMaxCaptionRequirements)) {
        throw SchemaError("caption requirements must number 1 to 5", raw);
    }
    return out;
}

SubQuestionSet parse_part2(const std::string& raw) {
    const ojson doc = parse_reply(raw);
    const ojson* list = find_key(
        doc, {"required_subquestions", "required subquestions", "required_attributes"});
    if (!list || !list->is_array()) {
        throw SchemaError("part-2 reply needs a required_subquestions array", raw);
    }
    SubQuestionSet out;
    for (const auto& item : *list) {
        if (!item.is_object() || !item.contains("type")) {
            throw SchemaError("sub-question entry needs a type", raw);
        }
        const ojson* text = find_key(item, {"question", "description"});
        if (!text) throw SchemaError("sub-question entry needs question text", raw);
        SubQuestion q;
        try {
            q.type = sub_question_type_from(
                require_string(item.at("type"), "sub-question type", raw));
        } catch (const SchemaError& e) {
            throw SchemaError(e.what(), raw);
        }
        q.question = require_string(*text, "sub-question text", raw);
        if (q.question.empty()) throw SchemaError("empty sub-question text", raw);
        out.items.push_back(std::move(q));
    }
    if (out.items.empty()) throw SchemaError("sub-question set must not be empty", raw);
    return out;
}

ClipCaption parse_part3(const std::string& raw, double t_start, double t_end,
                        int clip_index) {
    const ojson doc = parse_reply(raw);
    if (!doc.contains("clip_timestamp") || !doc.contains("caption")) {
        throw SchemaError("part-3 reply needs clip_timestamp and caption", raw);
    }
    ClipCaption out;
    out.clip_index = clip_index;
    out.clip_timestamp = require_string(doc.at("clip_timestamp"), "clip_timestamp", raw);
    out.caption = require_string(doc.at("caption"), "caption", raw);
    const std::string expected = format_clip_window(t_start, t_end);
    if (out.clip_timestamp != expected) {
        throw SchemaError("clip_timestamp \"" + out.clip_timestamp +
                              "\" does not match the clip window " + expected,
                          raw);
    }
    if (out.caption.empty()) throw SchemaError("empty caption", raw);
    if (word_count(out.caption) > kMaxCaptionWords) {
        throw SchemaError("caption exceeds the 500-word cap", raw);
    }
    return out;
}

SubAnswerState parse_part4(const std::string& raw, const SubAnswerState& prior,
                           bool binary_gate) {
    const ojson doc = parse_reply(raw);
    if (!doc.contains("subquestion_status") || !doc.at("subquestion_status").is_array()) {
        throw SchemaError("part-4 reply needs a subquestion_status array", raw);
    }
    SubAnswerState next = prior;
    for (const auto& item : doc.at("subquestion_status")) {
        if (!item.is_object() || !item.contains("question") ||
            !item.contains("value") || !item.contains("confidence")) {
            throw SchemaError("subquestion_status entry needs question/value/confidence",
                              raw);
        }
        if (item.contains("type")) {
            try {
                sub_question_type_from(
                    require_string(item.at("type"), "sub-question type", raw));
            } catch (const SchemaError& e) {
                throw SchemaError(e.what(), raw);
            }
        }
        const std::string question =
            require_string(item.at("question"), "question", raw);
        const std::string value = require_string(item.at("value"), "value", raw);
        const double confidence = require_confidence(item.at("confidence"), raw);
        check_question_mark_rule(value, confidence, raw);
        auto slot = std::find_if(next.items.begin(), next.items.end(),
                                 [&](const SubAnswer& s) { return s.question == question; });
        if (slot == next.items.end()) {
            throw IndexError("part-4 update for unknown sub-question: " + question);
        }
        slot->value = value;
        slot->confidence = binary_gate ? quantize_confidence(confidence) : confidence;
    }
    const ojson* progress = find_key(doc, {"estimated_progress"});
    if (!progress) throw SchemaError("part-4 reply needs estimated_progress", raw);
    next.estimated_progress_advisory = require_progress(*progress, raw);
    return next;
}

ReflectionReport parse_part5(const std::string& raw) {
    const ojson doc = parse_reply(raw);
    if (!doc.contains("causal_chain") || !doc.at("causal_chain").is_array()) {
        throw SchemaError("part-5 reply needs a causal_chain array", raw);
    }
    if (!doc.contains("attribute_status") || !doc.at("attribute_status").is_object()) {
        throw SchemaError("part-5 reply needs an attribute_status object", raw);
    }
    ReflectionReport out;
    for (const auto& link : doc.at("causal_chain")) {
        out.causal_chain.push_back(require_string(link, "causal_chain entry", raw));
    }
    for (const auto& [question, body] : doc.at("attribute_status").items()) {
        if (!body.is_object() || !body.contains("value") ||
            !body.contains("confidence") || !body.contains("status")) {
            throw SchemaError("attribute_status entry needs value/confidence/status", raw);
        }
        ReflectionEntry entry;
        entry.question = question;
        entry.value = require_string(body.at("value"), "value", raw);
        entry.confidence = require_confidence(body.at("confidence"), raw);
        try {
            entry.status =
                merge_status_from(require_string(body.at("status"), "status", raw));
        } catch (const SchemaError& e) {
            throw SchemaError(e.what(), raw);
        }
        if (body.contains("note")) {
            entry.note = require_string(body.at("note"), "note", raw);
        }
        check_question_mark_rule(entry.value, entry.confidence, raw);
        out.entries.push_back(std::move(entry));
    }
    const ojson* progress = find_key(doc, {"estimated_progress"});
    if (!progress) throw SchemaError("part-5 reply needs estimated_progress", raw);
    out.estimated_progress = require_progress(*progress, raw);
    return out;
}

std::string parse_final(const std::string& raw) {
    const ojson doc = parse_reply(raw);
    if (!doc.contains("final_answer")) {
        throw SchemaError("final reply needs final_answer", raw);
    }
    const std::string answer = require_string(doc.at("final_answer"), "final_answer", raw);
    if (answer.empty()) throw SchemaError("empty final_answer", raw);
    return answer;
}

bool reflection_trigger(const std::vector<SubAnswerState>& history,
                        const ReflectionConfig& cfg) {
    if (cfg.w_low < 1) throw ConfigError("w_low must be >= 1");
    if (!(cfg.theta_drop > 0.0)) throw ConfigError("theta_drop must be positive");
    if (history.empty()) throw SizeError("reflection trigger needs at least one state");
    const std::size_t n = history.size();

    // Sharp drop on the most recent consecutive pair. Earlier drops were
    // already acted on when they arrived; re-firing on them would reflect on
    // every later clip even when nothing new happened.
    if (n >= 2) {
        const auto& prev = history[n - 2].items;
        const auto& cur = history[n - 1].items;
        const std::size_t shared = std::min(prev.size(), cur.size());
        for (std::size_t i = 0; i < shared; ++i) {
            if (prev[i].confidence - cur[i].confidence > cfg.theta_drop) return true;
        }
    }

    // Answered-but-low persistence. "?" entries are missing, not low.
    if (n >= static_cast<std::size_t>(cfg.w_low)) {
        const std::size_t k = history[n - 1].items.size();
        for (std::size_t s = 0; s < k; ++s) {
            bool persistent = true;
            for (std::size_t back = n - static_cast<std::size_t>(cfg.w_low); back < n;
                 ++back) {
                if (s >= history[back].items.size()) {
                    persistent = false;
                    break;
                }
                const auto& item = history[back].items[s];
                if (item.value == "?" || item.confidence > kLowConfidenceBar) {
                    persistent = false;
                    break;
                }
            }
            if (persistent) return true;
        }
    }
    return false;
}

SubAnswerState merge_reflection(const SubAnswerState& prior,
                                const ReflectionReport& report, bool binary_gate) {
    SubAnswerState next = prior;
    for (const auto& entry : report.entries) {
        auto slot = std::find_if(
            next.items.begin(), next.items.end(),
            [&](const SubAnswer& s) { return s.question == entry.question; });
        const bool known = slot != next.items.end();
        switch (entry.status) {
            case MergeStatus::unchanged:
                if (!known) {
                    throw MergeError("unchanged entry for unknown sub-question: " +
                                     entry.question);
                }
                if (entry.value != slot->value || entry.confidence != slot->confidence) {
                    throw MergeError("unchanged entry does not match the prior state: " +
                                     entry.question);
                }
                break;  // prior entry kept bit-exact
            case MergeStatus::upgraded:
            case MergeStatus::downgraded:
                if (!known) {
                    throw MergeError("update for unknown sub-question: " + entry.question);
                }
                slot->value = entry.value;
                slot->confidence = binary_gate ? quantize_confidence(entry.confidence)
                                               : entry.confidence;
                break;
            case MergeStatus::newly_added:
                if (known) {
                    throw MergeError("newly_added duplicates existing sub-question: " +
                                     entry.question);
                }
                next.items.push_back(SubAnswer{
                    SubQuestionType::other, entry.question, entry.value,
                    binary_gate ? quantize_confidence(entry.confidence)
                                : entry.confidence});
                break;
        }
    }
    next.estimated_progress_advisory = report.estimated_progress;
    return next;
}

}  // namespace oncue
