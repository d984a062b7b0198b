#ifndef ONCUE_POSITION_HPP
#define ONCUE_POSITION_HPP

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "oncue/layout.hpp"
#include "oncue/schedule.hpp"

namespace oncue {

// 3D (temporal, height, width) position ids over the extended token grid.
// The raw video occupies temporal slots [0, t) and every clip appends n_comp
// whole frame slots for its aggregation tokens, giving
// t_extended = t + n_clips * n_comp. Each temporal slot carries a full
// (h/s) x (w/s) spatial grid of tokens; temporal ids are scaled by
// delta_t * tau, spatial ids are raw grid indices.
struct PositionGrid3D {
    std::int64_t t = 0;
    std::int64_t t_extended = 0;
    std::int64_t n_clips = 0;
    std::int64_t n_comp = 0;  // appended temporal slots per clip
    std::array<std::int64_t, 3> n_comp_per_level{};
    double delta_t = 1.0;
    double tau = 1.0;
    std::int64_t s_merge = 1;
    std::int64_t h = 0, w = 0;      // raw spatial extents
    std::int64_t h_m = 0, w_m = 0;  // merged extents h/s, w/s

    // Per-token ids, token-major over (t_extended, h_m, w_m); all three have
    // length t_extended * h_m * w_m.
    std::vector<double> pos_t;
    std::vector<std::int64_t> pos_h;
    std::vector<std::int64_t> pos_w;

    std::int64_t tokens_per_slot() const { return h_m * w_m; }
    std::int64_t token_count() const { return t_extended * tokens_per_slot(); }

    // First appended temporal slot of a clip (1-based); the clip's levels
    // occupy [slot_begin, slot_begin + n_comp) in level order, level j taking
    // n_comp_per_level[j-1] slots.
    std::int64_t slot_begin(int clip_1based) const {
        return t + static_cast<std::int64_t>(clip_1based - 1) * n_comp;
    }

    std::string to_json_string() const;

    friend bool operator==(const PositionGrid3D&, const PositionGrid3D&) = default;
};

// Grid arithmetic with an explicit scalar slot count per clip. Throws
// GridError when h or w is not divisible by s_merge or any extent is
// non-positive.
PositionGrid3D build_position_grid(std::int64_t t, std::int64_t n_clips,
                                   std::int64_t n_comp, double delta_t,
                                   double tau, std::int64_t s_merge,
                                   std::int64_t h, std::int64_t w);

// Schedule-level entry point: derives t = total frames from the layout, and
// each level's appended slot count as ceil(level_size / merged tokens per
// frame), so aggregation tokens occupy whole frame slots. Requires the
// layout's tokens_per_frame to equal (h/s)*(w/s) (GridError otherwise).
PositionGrid3D build_position_ids(const SequenceLayout& layout,
                                  const AggregationSchedule& schedule,
                                  double delta_t, double tau,
                                  std::int64_t s_merge, std::int64_t h,
                                  std::int64_t w);

}  // namespace oncue

#endif  // ONCUE_POSITION_HPP
