#include "oncue/position.hpp"

#include <string>

#include "json.hpp"

#include "oncue/errors.hpp"

namespace oncue {

using nlohmann::json;

PositionGrid3D build_position_grid(std::int64_t t, std::int64_t n_clips,
                                   std::int64_t n_comp, double delta_t,
                                   double tau, std::int64_t s_merge,
                                   std::int64_t h, std::int64_t w) {
    if (t < 1) throw GridError("temporal extent must be >= 1");
    if (n_clips < 0 || n_comp < 0)
        throw GridError("clip and slot counts must be >= 0");
    if (s_merge < 1) throw GridError("s_merge must be >= 1");
    if (h < 1 || w < 1) throw GridError("spatial extents must be >= 1");
    if (h % s_merge != 0 || w % s_merge != 0)
        throw GridError("spatial extents " + std::to_string(h) + "x" +
                        std::to_string(w) + " not divisible by s_merge=" +
                        std::to_string(s_merge));

    PositionGrid3D g;
    g.t = t;
    g.n_clips = n_clips;
    g.n_comp = n_comp;
    g.delta_t = delta_t;
    g.tau = tau;
    g.s_merge = s_merge;
    g.h = h;
    g.w = w;
    g.h_m = h / s_merge;
    g.w_m = w / s_merge;
    g.t_extended = t + n_clips * n_comp;

    const std::int64_t per_slot = g.h_m * g.w_m;
    const std::int64_t count = g.t_extended * per_slot;
    g.pos_t.resize(static_cast<std::size_t>(count));
    g.pos_h.resize(static_cast<std::size_t>(count));
    g.pos_w.resize(static_cast<std::size_t>(count));
    for (std::int64_t k = 0; k < count; ++k) {
        const std::int64_t t_idx = k / per_slot;
        g.pos_t[static_cast<std::size_t>(k)] =
            static_cast<double>(t_idx) * delta_t * tau;
        g.pos_h[static_cast<std::size_t>(k)] = (k / g.w_m) % g.h_m;
        g.pos_w[static_cast<std::size_t>(k)] = k % g.w_m;
    }
    return g;
}

PositionGrid3D build_position_ids(const SequenceLayout& layout,
                                  const AggregationSchedule& schedule,
                                  double delta_t, double tau,
                                  std::int64_t s_merge, std::int64_t h,
                                  std::int64_t w) {
    schedule.validate();
    if (s_merge < 1) throw GridError("s_merge must be >= 1");
    if (h < 1 || w < 1) throw GridError("spatial extents must be >= 1");
    if (h % s_merge != 0 || w % s_merge != 0)
        throw GridError("spatial extents not divisible by s_merge");

    const std::int64_t h_m = h / s_merge;
    const std::int64_t w_m = w / s_merge;
    const std::int64_t per_slot = h_m * w_m;
    if (per_slot != static_cast<std::int64_t>(layout.tokens_per_frame))
        throw GridError("merged grid carries " + std::to_string(per_slot) +
                        " tokens per frame but the layout expects " +
                        std::to_string(layout.tokens_per_frame));

    std::int64_t total_frames = 0;
    for (const auto& span : layout.clips)
        total_frames +=
            static_cast<std::int64_t>(span.visual_len / layout.tokens_per_frame);
    if (total_frames < 1) throw GridError("layout contains no frames");

    std::array<std::int64_t, 3> per_level{};
    std::int64_t n_comp = 0;
    for (int j = 1; j <= 3; ++j) {
        const std::int64_t tokens = schedule.level_size(j);
        per_level[j - 1] = (tokens + per_slot - 1) / per_slot;
        n_comp += per_level[j - 1];
    }

    PositionGrid3D g = build_position_grid(total_frames, layout.n_clips, n_comp,
                                           delta_t, tau, s_merge, h, w);
    g.n_comp_per_level = per_level;
    return g;
}

std::string PositionGrid3D::to_json_string() const {
    json j;
    j["t"] = t;
    j["t_extended"] = t_extended;
    j["n_clips"] = n_clips;
    j["n_comp"] = n_comp;
    j["n_comp_per_level"] = n_comp_per_level;
    j["delta_t"] = delta_t;
    j["tau"] = tau;
    j["s_merge"] = s_merge;
    j["h"] = h;
    j["w"] = w;
    j["h_merged"] = h_m;
    j["w_merged"] = w_m;
    json slots = json::array();
    for (int i = 1; i <= n_clips; ++i) {
        json e;
        e["clip"] = i;
        const std::int64_t begin = slot_begin(i);
        e["slots"] = json::array({begin, begin + n_comp});
        json levels = json::array();
        std::int64_t cursor = begin;
        for (int lvl = 0; lvl < 3; ++lvl) {
            levels.push_back(json::array({cursor, cursor + n_comp_per_level[lvl]}));
            cursor += n_comp_per_level[lvl];
        }
        e["level_slots"] = std::move(levels);
        slots.push_back(std::move(e));
    }
    j["clip_slots"] = std::move(slots);
    json triples = json::array();
    for (std::int64_t k = 0; k < token_count(); ++k) {
        triples.push_back(json::array({pos_t[static_cast<std::size_t>(k)],
                                       pos_h[static_cast<std::size_t>(k)],
                                       pos_w[static_cast<std::size_t>(k)]}));
    }
    j["triples"] = std::move(triples);
    return j.dump(2);
}

}  // namespace oncue
