#include "oncue/schedule.hpp"

#include <algorithm>
#include <string>

#include "oncue/errors.hpp"

namespace oncue {

void AggregationSchedule::validate() const {
    if (layers < 3 || layers % 3 != 0)
        throw ConfigError("layers must be a positive multiple of 3, got " +
                          std::to_string(layers));
    if (n_vc < 1) throw ConfigError("n_vc must be >= 1");
    if (clip_frames < 1) throw ConfigError("clip_frames must be >= 1");
    if (tokens_per_frame < 1) throw ConfigError("tokens_per_frame must be >= 1");
    if (d < 1) throw ConfigError("d must be >= 1");
    if (tokens_per_clip() < 3 * n_vc)
        throw ConfigError("clip of " + std::to_string(tokens_per_clip()) +
                          " tokens is too short for 3*n_vc=" +
                          std::to_string(3 * n_vc) + " level-1 tokens");
}

int active_level_count(int total_layers, int layer) {
    return std::min(3, 1 + (3 * layer) / total_layers);
}

int active_level_count(const AggregationSchedule& s, int layer) {
    return active_level_count(s.layers, layer);
}

double compression_ratio(const AggregationSchedule& s) {
    return static_cast<double>(s.n_vc) /
           (static_cast<double>(s.clip_frames) *
            static_cast<double>(s.tokens_per_frame));
}

}  // namespace oncue
