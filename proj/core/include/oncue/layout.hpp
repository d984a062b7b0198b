#ifndef ONCUE_LAYOUT_HPP
#define ONCUE_LAYOUT_HPP

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "oncue/schedule.hpp"

namespace oncue {

enum class SegmentKind { text_pre, visual, agg, text_post };

struct Segment {
    SegmentKind kind = SegmentKind::text_pre;
    int clip = 0;   // 1-based; visual and agg segments only
    int level = 0;  // 1..3; agg segments only
    std::size_t offset = 0;
    std::size_t length = 0;

    std::size_t end() const { return offset + length; }
    friend bool operator==(const Segment&, const Segment&) = default;
};

// Token layout of one interleaved sequence:
//   [text_pre][clip1 visual][clip1 L1][clip1 L2][clip1 L3][clip2 ...][text_post]
struct SequenceLayout {
    std::vector<Segment> segments;
    std::size_t total = 0;
    int n_clips = 0;
    std::size_t text_pre_len = 0;
    std::size_t text_post_len = 0;
    std::size_t text_post_offset = 0;
    std::size_t tokens_per_frame = 0;
    std::array<int, 3> level_sizes{};

    // Per-clip spans, indexed by clip-1.
    struct ClipSpan {
        std::size_t visual_offset = 0;
        std::size_t visual_len = 0;
        // First-frame anchor: the clip's first tokens_per_frame visual tokens.
        std::size_t first_frame_begin = 0;
        std::size_t first_frame_end = 0;
        std::array<std::size_t, 3> agg_offset{};
        std::array<std::size_t, 3> agg_len{};
        friend bool operator==(const ClipSpan&, const ClipSpan&) = default;
    };
    std::vector<ClipSpan> clips;

    const ClipSpan& clip(int index_1based) const { return clips[index_1based - 1]; }
    bool is_text(std::size_t pos) const {
        return pos < text_pre_len ||
               (pos >= text_post_offset && pos < text_post_offset + text_post_len);
    }

    std::string to_json_string() const;

    friend bool operator==(const SequenceLayout&, const SequenceLayout&) = default;
};

// Builds the interleaved layout. clip_token_counts[i] is clip i+1's raw visual
// token count; each must be >= 3*n_vc, >= tokens_per_frame, and a whole number
// of frames. Throws SizeError.
SequenceLayout build_layout(std::size_t text_pre_len,
                            const std::vector<std::size_t>& clip_token_counts,
                            const AggregationSchedule& schedule,
                            std::size_t text_post_len);

}  // namespace oncue

#endif  // ONCUE_LAYOUT_HPP
