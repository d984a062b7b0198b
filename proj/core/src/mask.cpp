#include "oncue/mask.hpp"

#include <algorithm>
#include <string>

#include "json.hpp"

#include "oncue/errors.hpp"

namespace oncue {

using nlohmann::json;

namespace {

// Marks [begin, end) of row r visible, clipped to causality (c <= r).
void mark_causal(AttentionMask& m, std::size_t r, std::size_t begin,
                 std::size_t end) {
    const std::size_t stop = std::min(end, r + 1);
    for (std::size_t c = begin; c < stop; ++c) m.set(r, c);
}

}  // namespace

AttentionMask build_mask(const SequenceLayout& layout,
                         const std::vector<int>& active_levels,
                         const MaskRules& rules) {
    if (active_levels.size() != static_cast<std::size_t>(layout.n_clips))
        throw LayoutError("active_levels has " +
                          std::to_string(active_levels.size()) +
                          " entries for " + std::to_string(layout.n_clips) +
                          " clips");
    if (rules.max_levels < 1 || rules.max_levels > 3)
        throw LayoutError("max_levels must be in 1..3");

    AttentionMask mask;
    mask.n = layout.total;
    mask.bits.assign(mask.n * mask.n, false);
    mask.active_levels.resize(active_levels.size());
    for (std::size_t i = 0; i < active_levels.size(); ++i) {
        if (active_levels[i] < 0 || active_levels[i] > 3)
            throw LayoutError("active level " +
                              std::to_string(active_levels[i]) +
                              " outside 0..3 for clip " + std::to_string(i + 1));
        mask.active_levels[i] = std::min(active_levels[i], rules.max_levels);
    }
    mask.band = mask.active_levels.empty()
                    ? 0
                    : *std::max_element(mask.active_levels.begin(),
                                        mask.active_levels.end());

    const auto& clips = layout.clips;

    // Highest-active-level aggregation span of a clip, or an empty span.
    auto summary_span = [&](int clip_1based) -> std::pair<std::size_t, std::size_t> {
        const int lvl = mask.active_levels[clip_1based - 1];
        if (lvl == 0) return {0, 0};
        const auto& span = clips[clip_1based - 1];
        return {span.agg_offset[lvl - 1],
                span.agg_offset[lvl - 1] + span.agg_len[lvl - 1]};
    };

    // Rule (c): one text row.
    auto fill_text_row = [&](std::size_t r) {
        mark_causal(mask, r, 0, layout.text_pre_len);
        mark_causal(mask, r, layout.text_post_offset,
                    layout.text_post_offset + layout.text_post_len);
        for (int i = 1; i <= layout.n_clips; ++i) {
            const auto [sb, se] = summary_span(i);
            mark_causal(mask, r, sb, se);
            if (rules.first_frame_anchor)
                mark_causal(mask, r, clips[i - 1].first_frame_begin,
                            clips[i - 1].first_frame_end);
        }
        mask.set(r, r);
    };

    for (std::size_t r = 0; r < layout.text_pre_len; ++r) fill_text_row(r);
    for (std::size_t r = layout.text_post_offset;
         r < layout.text_post_offset + layout.text_post_len; ++r)
        fill_text_row(r);

    for (int i = 1; i <= layout.n_clips; ++i) {
        const auto& span = clips[i - 1];

        // Rule (a): raw visual rows of clip i.
        for (std::size_t r = span.visual_offset;
             r < span.visual_offset + span.visual_len; ++r) {
            mark_causal(mask, r, 0, layout.text_pre_len);
            mark_causal(mask, r, span.visual_offset,
                        span.visual_offset + span.visual_len);
            for (int prev = 1; prev < i; ++prev) {
                if (rules.first_frame_anchor)
                    mark_causal(mask, r, clips[prev - 1].first_frame_begin,
                                clips[prev - 1].first_frame_end);
                if (rules.raw_sees_prev_summary) {
                    const auto [sb, se] = summary_span(prev);
                    mark_causal(mask, r, sb, se);
                }
            }
            mask.set(r, r);
        }

        // Rule (b): aggregation rows of clip i, active levels only.
        for (int j = 1; j <= mask.active_levels[i - 1]; ++j) {
            const std::size_t begin = span.agg_offset[j - 1];
            const std::size_t end = begin + span.agg_len[j - 1];
            for (std::size_t r = begin; r < end; ++r) {
                mark_causal(mask, r, 0, layout.text_pre_len);
                if (j == 1) {
                    mark_causal(mask, r, span.visual_offset,
                                span.visual_offset + span.visual_len);
                } else {
                    mark_causal(mask, r, span.agg_offset[j - 2],
                                span.agg_offset[j - 2] + span.agg_len[j - 2]);
                }
                if (rules.same_level_self_context) mark_causal(mask, r, begin, end);
                for (int prev = 1; prev <= i; ++prev) {
                    if (rules.first_frame_anchor)
                        mark_causal(mask, r, clips[prev - 1].first_frame_begin,
                                    clips[prev - 1].first_frame_end);
                    if (prev < i) {
                        const auto [sb, se] = summary_span(prev);
                        mark_causal(mask, r, sb, se);
                    }
                }
                mask.set(r, r);
            }
        }
    }

    // Rule (e): inactive aggregation positions contribute no columns either.
    // Rows were never filled above; clear their columns now.
    for (int i = 1; i <= layout.n_clips; ++i) {
        const auto& span = clips[i - 1];
        for (int j = mask.active_levels[i - 1] + 1; j <= 3; ++j) {
            const std::size_t begin = span.agg_offset[j - 1];
            const std::size_t end = begin + span.agg_len[j - 1];
            for (std::size_t r = 0; r < mask.n; ++r)
                for (std::size_t c = begin; c < end; ++c) mask.set(r, c, false);
        }
    }

    return mask;
}

AttentionMask build_band_mask(const SequenceLayout& layout, int band,
                              const MaskRules& rules) {
    if (band < 1 || band > 3) throw LayoutError("band must be in 1..3");
    std::vector<int> levels(static_cast<std::size_t>(layout.n_clips), band);
    return build_mask(layout, levels, rules);
}

std::string AttentionMask::to_json_string() const {
    json j;
    j["n"] = n;
    j["band"] = band;
    j["active_levels"] = active_levels;
    json rows = json::array();
    for (std::size_t r = 0; r < n; ++r) {
        json ranges = json::array();
        std::size_t c = 0;
        while (c < n) {
            if (at(r, c)) {
                std::size_t begin = c;
                while (c < n && at(r, c)) ++c;
                ranges.push_back(json::array({begin, c}));
            } else {
                ++c;
            }
        }
        rows.push_back(std::move(ranges));
    }
    j["rows"] = std::move(rows);
    return j.dump(2);
}

}  // namespace oncue
