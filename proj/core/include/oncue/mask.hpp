#ifndef ONCUE_MASK_HPP
#define ONCUE_MASK_HPP

#include <cstddef>
#include <string>
#include <vector>

#include "oncue/layout.hpp"

namespace oncue {

// Visibility rules for the structured sparse mask. Each switch corresponds to
// one documented resolution of the attention diagram so ablations can flip it.
struct MaskRules {
    // Keep every clip's first-frame token span visible to later tokens.
    bool first_frame_anchor = true;
    // Raw visual tokens of clip i see the summary tokens of earlier clips.
    bool raw_sees_prev_summary = true;
    // Aggregation tokens see earlier same-level tokens of their own clip.
    bool same_level_self_context = true;
    // Cap on usable aggregation levels (the --levels ablation): 1..3.
    int max_levels = 3;

    friend bool operator==(const MaskRules&, const MaskRules&) = default;
};

// Boolean attention mask over one sequence layout. Row r may attend to column
// c iff at(r, c). Inactive positions (aggregation levels not yet inserted)
// have all-false rows and columns.
struct AttentionMask {
    std::size_t n = 0;
    int band = 0;                    // highest active level across clips
    std::vector<int> active_levels;  // per clip, after the max_levels cap
    std::vector<bool> bits;          // row-major n*n

    bool at(std::size_t r, std::size_t c) const { return bits[r * n + c]; }
    void set(std::size_t r, std::size_t c, bool v = true) { bits[r * n + c] = v; }

    // Row-indexed visible-column ranges, the golden-dump format.
    std::string to_json_string() const;

    friend bool operator==(const AttentionMask&, const AttentionMask&) = default;
};

// Rules, with every set intersected with strict causality (c <= r) and with
// column activity; M[r][r] holds for every active row:
//  (a) raw visual tokens of clip i see: text_pre, their own clip causally,
//      first-frame spans of clips < i, and the highest-active-level
//      aggregation tokens of clips < i;
//  (b) level-j aggregation tokens of clip i see: text_pre, level j-1 of
//      clip i (level 0 = the clip's raw tokens), earlier same-level tokens of
//      clip i, first-frame spans of clips <= i, and the highest-active-level
//      aggregation tokens of clips < i;
//  (c) text tokens see: text causally, the highest-active-level aggregation
//      tokens of every clip, and first-frame spans of every clip;
//  (d) nothing flows back from aggregation tokens to raw tokens of the same
//      clip, or from text to visual positions;
//  (e) positions of not-yet-inserted levels are excluded as rows and columns.
//
// active_levels[i] is clip i+1's highest inserted level (0..3); it is capped
// by rules.max_levels. Throws LayoutError when active_levels disagrees with
// the layout.
AttentionMask build_mask(const SequenceLayout& layout,
                         const std::vector<int>& active_levels,
                         const MaskRules& rules);

// Convenience: the uniform per-band mask used by the decoder, where every
// clip's active level equals the band's level count.
AttentionMask build_band_mask(const SequenceLayout& layout, int band,
                              const MaskRules& rules);

}  // namespace oncue

#endif  // ONCUE_MASK_HPP
