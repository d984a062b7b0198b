#include "oncue/eval.hpp"

#include <algorithm>
#include <filesystem>

#include <nlohmann/json.hpp>

#include "oncue/dataset.hpp"
#include "oncue/errors.hpp"
#include "oncue/mask.hpp"
#include "oncue/position.hpp"

namespace oncue {

namespace {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

std::shared_ptr<ReasonerBackend> backend_for(const fs::path& episode_dir,
                                             const EngineConfig& cfg, BackendKind kind,
                                             std::shared_ptr<ReasonerBackend> shared) {
    if (kind == BackendKind::mock) {
        return ScriptedOracle::from_file((episode_dir / "script.json").string());
    }
    if (shared) return shared;
    HttpBackendConfig http;
    http.model = cfg.backend_model;
    return std::make_shared<HttpBackend>(http);
}

DecisionTrace run_one(const fs::path& episode_dir, const EngineConfig& cfg,
                      BackendKind kind, TelemetrySink* sink,
                      std::shared_ptr<ReasonerBackend> shared,
                      QueryEpisode* episode_out) {
    const ClipStream stream = load_stream((episode_dir / "stream.jsonl").string());
    const QueryEpisode episode = load_episode((episode_dir / "episode.json").string());
    if (episode_out) *episode_out = episode;
    EpisodeController controller(backend_for(episode_dir, cfg, kind, std::move(shared)),
                                 cfg.controller, sink);
    return controller.run_episode(stream, episode);
}

}  // namespace

std::string EvalReport::to_json_string() const {
    ojson rows_json = ojson::array();
    for (const auto& row : rows) {
        ojson r;
        r["id"] = row.id;
        r["answered"] = row.answered;
        r["correct"] = row.correct;
        r["unresolvable"] = row.unresolvable;
        if (row.answered) {
            r["t_r"] = row.t_r;
            r["delta"] = row.delta;
        } else {
            r["t_r"] = nullptr;
            r["delta"] = nullptr;
        }
        r["backend_calls"] = row.backend_calls;
        r["reflections"] = row.reflections;
        r["error"] = row.error;
        rows_json.push_back(std::move(r));
    }
    ojson doc;
    doc["accuracy_convention"] = accuracy_convention;
    doc["episodes"] = episodes;
    doc["answered"] = answered;
    doc["correct"] = correct;
    doc["unresolved"] = unresolved;
    doc["failed"] = failed;
    doc["accuracy"] = accuracy;
    doc["mean_delta"] = mean_delta;
    doc["median_delta"] = median_delta;
    doc["mean_backend_calls"] = mean_backend_calls;
    doc["rows"] = std::move(rows_json);
    return doc.dump(2) + "\n";
}

EvalReport EvalReport::from_rows(std::vector<EpisodeRow> rows) {
    EvalReport report;
    report.rows = std::move(rows);
    report.episodes = static_cast<int>(report.rows.size());
    std::vector<double> deltas;
    double calls = 0.0;
    int non_failed = 0;
    for (const auto& row : report.rows) {
        if (!row.error.empty()) {
            ++report.failed;
            continue;
        }
        ++non_failed;
        calls += row.backend_calls;
        if (row.answered) {
            ++report.answered;
            if (row.correct) ++report.correct;
            deltas.push_back(row.delta);
        } else {
            ++report.unresolved;
        }
    }
    if (report.episodes > 0) {
        report.accuracy =
            static_cast<double>(report.correct) / static_cast<double>(report.episodes);
    }
    if (!deltas.empty()) {
        double sum = 0.0;
        for (double d : deltas) sum += d;
        report.mean_delta = sum / static_cast<double>(deltas.size());
        std::sort(deltas.begin(), deltas.end());
        const std::size_t n = deltas.size();
        report.median_delta = (n % 2 == 1)
                                  ? deltas[n / 2]
                                  : 0.5 * (deltas[n / 2 - 1] + deltas[n / 2]);
    }
    if (non_failed > 0) {
        report.mean_backend_calls = calls / static_cast<double>(non_failed);
    }
    return report;
}

EvalReport evaluate(const std::string& dataset_dir, const EngineConfig& cfg,
                    BackendKind kind, TelemetrySink* sink,
                    std::shared_ptr<ReasonerBackend> shared_backend) {
    const std::vector<std::string> dirs = list_dataset(dataset_dir);
    std::vector<EpisodeRow> rows;
    rows.reserve(dirs.size());
    for (const auto& name : dirs) {
        const fs::path episode_dir = fs::path(dataset_dir) / name;
        EpisodeRow row;
        row.id = name;
        try {
            QueryEpisode episode;
            const DecisionTrace trace =
                run_one(episode_dir, cfg, kind, sink, shared_backend, &episode);
            row.unresolvable = episode.unresolvable;
            row.answered = trace.timing.answered;
            if (row.answered) {
                row.t_r = trace.timing.t_r;
                row.delta = trace.timing.delta;
                row.correct = trace.answer_text == episode.answer_gt;
            }
            row.backend_calls = trace.backend_calls;
            row.reflections = trace.reflections;
        } catch (const std::exception& e) {
            row.error = e.what();
        }
        rows.push_back(std::move(row));
    }
    return EvalReport::from_rows(std::move(rows));
}

DecisionTrace run_episode_dir(const std::string& episode_dir, const EngineConfig& cfg,
                              BackendKind kind, TelemetrySink* sink,
                              std::shared_ptr<ReasonerBackend> shared_backend) {
    return run_one(fs::path(episode_dir), cfg, kind, sink, std::move(shared_backend),
                   nullptr);
}

InspectResult hpsi_inspect(const ClipStream& stream, const EngineConfig& cfg) {
    if (stream.mode != ClipMode::feature) {
        throw ConfigError("hpsi inspection needs a feature-mode stream");
    }
    if (stream.clips.empty()) throw SizeError("cannot inspect an empty stream");
    if (stream.tokens_per_frame !=
        static_cast<std::size_t>(cfg.schedule.tokens_per_frame)) {
        throw ConfigError("stream tokens_per_frame does not match the schedule");
    }
    std::vector<std::size_t> clip_tokens;
    clip_tokens.reserve(stream.clips.size());
    for (const auto& clip : stream.clips) clip_tokens.push_back(clip.token_count());

    const SequenceLayout layout =
        build_layout(cfg.layout.text_pre_len, clip_tokens, cfg.schedule,
                     cfg.layout.text_post_len);

    InspectResult result;
    result.layout_json = layout.to_json_string();
    for (int band = 1; band <= cfg.rules.max_levels; ++band) {
        result.mask_jsons.push_back(
            build_band_mask(layout, band, cfg.rules).to_json_string());
    }
    const PositionGrid3D grid =
        build_position_ids(layout, cfg.schedule, cfg.position.delta_t,
                           cfg.position.tau, cfg.position.s_merge, cfg.position.h,
                           cfg.position.w);
    result.position_json = grid.to_json_string();
    result.ratio = compression_ratio(cfg.schedule);
    result.total_tokens = layout.total;
    return result;
}

}  // namespace oncue
