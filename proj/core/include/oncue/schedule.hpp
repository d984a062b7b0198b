#ifndef ONCUE_SCHEDULE_HPP
#define ONCUE_SCHEDULE_HPP

#include <array>
#include <cstddef>

namespace oncue {

// Static description of the hierarchical compression applied to every clip:
// three aggregation levels sized (3,2,1)*n_vc, spliced into the decoder at
// layers {0, L/3, 2L/3}.
struct AggregationSchedule {
    int layers = 12;           // L; must be divisible by 3
    int n_vc = 4;              // final-level token count per clip
    int clip_frames = 32;      // frames per clip (16 for the reduced budget)
    int tokens_per_frame = 4;  // visual tokens per frame
    int d = 16;                // embedding width

    // Throws ConfigError when any field is out of range.
    void validate() const;

    std::array<int, 3> insertion_layers() const {
        return {0, layers / 3, 2 * layers / 3};
    }
    // Row count of level j in 1..3: (4-j)*n_vc.
    int level_size(int level) const { return (4 - level) * n_vc; }
    std::array<int, 3> level_sizes() const {
        return {3 * n_vc, 2 * n_vc, n_vc};
    }
    int tokens_per_clip() const { return clip_frames * tokens_per_frame; }
    // Total aggregation tokens appended per clip: 3n + 2n + n.
    int agg_tokens_per_clip() const { return 6 * n_vc; }

    friend bool operator==(const AggregationSchedule&,
                           const AggregationSchedule&) = default;
};

// Number of aggregation levels active at decoder layer `layer`:
// 1 + floor(3*layer/L), clamped to 3.
int active_level_count(int total_layers, int layer);
int active_level_count(const AggregationSchedule& s, int layer);

// Fraction of a clip's raw visual tokens still visible to text at the top
// band: n_vc / (clip_frames * tokens_per_frame). 16-frame clips with a final
// level of one frame's tokens give 0.0625, i.e. a 93.75% reduction.
double compression_ratio(const AggregationSchedule& s);

}  // namespace oncue

#endif  // ONCUE_SCHEDULE_HPP
