#ifndef ONCUE_EVAL_HPP
#define ONCUE_EVAL_HPP

#include <memory>
#include <string>
#include <vector>

#include "oncue/backend.hpp"
#include "oncue/config.hpp"
#include "oncue/controller.hpp"
#include "oncue/stream.hpp"

namespace oncue {

enum class BackendKind { mock, http };

struct EpisodeRow {
    std::string id;
    bool answered = false;
    bool correct = false;
    bool unresolvable = false;  // ground-truth marker from the episode file
    double t_r = 0.0;
    double delta = 0.0;
    int backend_calls = 0;
    int reflections = 0;
    std::string error;  // non-empty when the episode raised

    friend bool operator==(const EpisodeRow&, const EpisodeRow&) = default;
};

// Accuracy here is correct / total episodes (unresolved and failed episodes
// count against it); the convention is embedded in the report so downstream
// readers cannot misread the denominator.
struct EvalReport {
    std::string accuracy_convention = "correct_over_total";
    int episodes = 0;
    int answered = 0;
    int correct = 0;
    int unresolved = 0;  // ran to stream end without an answer
    int failed = 0;      // raised an error
    double accuracy = 0.0;
    double mean_delta = 0.0;    // over answered episodes
    double median_delta = 0.0;  // over answered episodes
    double mean_backend_calls = 0.0;  // over non-failed episodes
    std::vector<EpisodeRow> rows;

    std::string to_json_string() const;  // canonical, wall-clock free
    static EvalReport from_rows(std::vector<EpisodeRow> rows);
};

// Runs every episode under dataset_dir (per its manifest). For mock, each
// episode gets its own ScriptedOracle loaded from its script.json; for http,
// `shared_backend` is used (constructed from the environment when null).
// Per-episode errors are captured in rows, never thrown.
EvalReport evaluate(const std::string& dataset_dir, const EngineConfig& cfg,
                    BackendKind kind, TelemetrySink* sink = nullptr,
                    std::shared_ptr<ReasonerBackend> shared_backend = nullptr);

// Runs one episode from its directory; throws on error.
DecisionTrace run_episode_dir(const std::string& episode_dir, const EngineConfig& cfg,
                              BackendKind kind, TelemetrySink* sink = nullptr,
                              std::shared_ptr<ReasonerBackend> shared_backend = nullptr);

// Compression-pipeline inspection over a feature stream: the interleaved
// layout, per-band attention masks, 3D position ids, and the compression
// ratio.
struct InspectResult {
    std::string layout_json;
    std::vector<std::string> mask_jsons;  // bands 1..rules.max_levels
    std::string position_json;
    double ratio = 0.0;
    std::size_t total_tokens = 0;
};

InspectResult hpsi_inspect(const ClipStream& stream, const EngineConfig& cfg);

}  // namespace oncue

#endif  // ONCUE_EVAL_HPP
