#include "oncue/layout.hpp"

#include <string>

#include "json.hpp"

#include "oncue/errors.hpp"

namespace oncue {

using nlohmann::json;

SequenceLayout build_layout(std::size_t text_pre_len,
                            const std::vector<std::size_t>& clip_token_counts,
                            const AggregationSchedule& schedule,
                            std::size_t text_post_len) {
    schedule.validate();

    SequenceLayout layout;
    layout.text_pre_len = text_pre_len;
    layout.text_post_len = text_post_len;
    layout.n_clips = static_cast<int>(clip_token_counts.size());
    layout.tokens_per_frame = static_cast<std::size_t>(schedule.tokens_per_frame);
    layout.level_sizes = schedule.level_sizes();

    std::size_t pos = 0;
    if (text_pre_len > 0)
        layout.segments.push_back(
            {SegmentKind::text_pre, 0, 0, pos, text_pre_len});
    pos += text_pre_len;

    const std::size_t tpf = layout.tokens_per_frame;
    for (int i = 1; i <= layout.n_clips; ++i) {
        const std::size_t n_v = clip_token_counts[i - 1];
        if (n_v < static_cast<std::size_t>(3 * schedule.n_vc))
            throw SizeError("clip " + std::to_string(i) + " has " +
                            std::to_string(n_v) + " tokens, fewer than 3*n_vc=" +
                            std::to_string(3 * schedule.n_vc));
        if (n_v < tpf || n_v % tpf != 0)
            throw SizeError("clip " + std::to_string(i) + " token count " +
                            std::to_string(n_v) +
                            " is not a positive multiple of tokens_per_frame=" +
                            std::to_string(tpf));

        SequenceLayout::ClipSpan span;
        span.visual_offset = pos;
        span.visual_len = n_v;
        span.first_frame_begin = pos;
        span.first_frame_end = pos + tpf;
        layout.segments.push_back({SegmentKind::visual, i, 0, pos, n_v});
        pos += n_v;

        for (int j = 1; j <= 3; ++j) {
            const std::size_t len =
                static_cast<std::size_t>(schedule.level_size(j));
            span.agg_offset[j - 1] = pos;
            span.agg_len[j - 1] = len;
            layout.segments.push_back({SegmentKind::agg, i, j, pos, len});
            pos += len;
        }
        layout.clips.push_back(span);
    }

    layout.text_post_offset = pos;
    if (text_post_len > 0)
        layout.segments.push_back(
            {SegmentKind::text_post, 0, 0, pos, text_post_len});
    pos += text_post_len;

    layout.total = pos;
    return layout;
}

std::string SequenceLayout::to_json_string() const {
    json j;
    j["total"] = total;
    j["n_clips"] = n_clips;
    j["tokens_per_frame"] = tokens_per_frame;
    j["level_sizes"] = level_sizes;
    json segs = json::array();
    for (const Segment& s : segments) {
        json e;
        switch (s.kind) {
            case SegmentKind::text_pre: e["kind"] = "text_pre"; break;
            case SegmentKind::visual: e["kind"] = "visual"; break;
            case SegmentKind::agg: e["kind"] = "agg"; break;
            case SegmentKind::text_post: e["kind"] = "text_post"; break;
        }
        if (s.kind == SegmentKind::visual || s.kind == SegmentKind::agg)
            e["clip"] = s.clip;
        if (s.kind == SegmentKind::agg) e["level"] = s.level;
        if (s.kind == SegmentKind::visual) {
            const ClipSpan& span = clips[s.clip - 1];
            e["first_frame"] =
                json::array({span.first_frame_begin, span.first_frame_end});
        }
        e["offset"] = s.offset;
        e["length"] = s.length;
        segs.push_back(std::move(e));
    }
    j["segments"] = std::move(segs);
    return j.dump(2);
}

}  // namespace oncue
