#ifndef ONCUE_DATASET_HPP
#define ONCUE_DATASET_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "oncue/schedule.hpp"
#include "oncue/stream.hpp"

namespace oncue {

struct DatasetOptions {
    int count = 10;
    std::uint64_t seed = 7;
    int n_clips_min = 3;
    int n_clips_max = 6;
    double clip_seconds = 2.0;
    // The last `unresolvable` episodes leave one sub-question unanswered for
    // the whole stream.
    int unresolvable = 0;
    // Episode 0 gets a scripted confidence drop (0.8 -> 0.4) plus the
    // reflection replies that recover from it.
    bool drop_on_first = false;
};

// One generated episode: the stream, the query, and a reply script that a
// ScriptedOracle can serve. Scripts are schema-perfect and cover part-3 for
// every clip, so any prefetch width works.
struct EpisodeBundle {
    std::string dir;  // "ep_000", ...
    ClipStream stream;
    QueryEpisode episode;
    std::string script_json;
    int completion_clip = 0;  // 1-based clip where rho first hits 1; 0 if never
    bool has_drop = false;
};

// Deterministic: the same options always produce byte-identical bundles.
std::vector<EpisodeBundle> build_dataset(const DatasetOptions& options);

// Writes dir/ep_NNN/{stream.jsonl,episode.json,script.json} plus
// dir/manifest.json. Creates directories as needed.
void write_dataset(const std::string& dir, const std::vector<EpisodeBundle>& bundles,
                   const DatasetOptions& options);

// Episode subdirectory names from dir/manifest.json, in manifest order.
std::vector<std::string> list_dataset(const std::string& dir);

// Feature-mode stream for the compression pipeline: n_clips clips of
// schedule.clip_frames frames, each frame tokens_per_frame x d, seeded
// Gaussian values.
ClipStream make_feature_stream(const AggregationSchedule& schedule, int n_clips,
                               std::uint64_t seed);

}  // namespace oncue

#endif  // ONCUE_DATASET_HPP
