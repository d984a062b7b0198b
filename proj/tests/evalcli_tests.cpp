// Harness checks: the strict engine-config loader, seeded dataset generation
// and its on-disk layout, the end-to-end mock evaluation with its aggregate
// accounting, compression inspection, and byte-stability of the shipped demo
// datasets together with their pinned evaluation reports.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "oncue/config.hpp"
#include "oncue/dataset.hpp"
#include "oncue/errors.hpp"
#include "oncue/eval.hpp"
#include "oncue/stream.hpp"

using namespace oncue;
using ojson = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

const std::string kRoot = std::string(ONCUE_SOURCE_DIR);

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE_MESSAGE(in.good(), "missing file: " << path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spill(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    REQUIRE(out.good());
    out << text;
}

bool regen() { return std::getenv("ONCUE_WRITE_GOLDENS") != nullptr; }

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        const auto tick = std::chrono::steady_clock::now().time_since_epoch().count();
        path = fs::temp_directory_path() /
               ("oncue_" + tag + "_" + std::to_string(tick));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

// Relative paths of every regular file under root, sorted.
std::vector<std::string> file_list(const fs::path& root) {
    std::vector<std::string> files;
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
        if (entry.is_regular_file()) {
            files.push_back(fs::relative(entry.path(), root).generic_string());
        }
    }
    std::sort(files.begin(), files.end());
    return files;
}

void check_same_tree(const fs::path& got, const fs::path& want) {
    const std::vector<std::string> got_files = file_list(got);
    REQUIRE(got_files == file_list(want));
    for (const std::string& rel : got_files) {
        CHECK_MESSAGE(slurp(got / rel) == slurp(want / rel), "file drift: " << rel);
    }
}

// Regenerates (under ONCUE_WRITE_GOLDENS=1) or verifies one shipped dataset
// plus its pinned evaluation report.
void check_shipped_dataset(const std::string& name, const DatasetOptions& options) {
    const fs::path shipped = fs::path(kRoot) / "data" / name;
    const fs::path report_golden =
        fs::path(kRoot) / "tests" / "golden" / (name + "_report.json");

    const auto bundles = build_dataset(options);
    if (regen()) {
        fs::remove_all(shipped);
        write_dataset(shipped.string(), bundles, options);
        const EvalReport report =
            evaluate(shipped.string(), default_engine_config(), BackendKind::mock);
        spill(report_golden, report.to_json_string());
        return;
    }
    TempDir tmp("regen_" + name);
    write_dataset(tmp.path.string(), bundles, options);
    check_same_tree(tmp.path, shipped);

    const EvalReport report =
        evaluate(shipped.string(), default_engine_config(), BackendKind::mock);
    CHECK(report.to_json_string() == slurp(report_golden));
}

}  // namespace

// ---------------------------------------------------------------------------
// Engine config
// ---------------------------------------------------------------------------

TEST_CASE("the default config round-trips through JSON byte-identically") {
    const EngineConfig cfg = default_engine_config();
    const std::string text = serialize_engine_config(cfg);
    const EngineConfig back = parse_engine_config(text);
    CHECK(serialize_engine_config(back) == text);
    CHECK(back.schedule == cfg.schedule);
    CHECK(back.backend_model == cfg.backend_model);
}

TEST_CASE("unknown config keys are rejected at every scope") {
    CHECK_THROWS_AS(parse_engine_config("{\"bogus\": 1}"), ConfigError);
    CHECK_THROWS_AS(parse_engine_config("{\"schedule\": {\"bogus\": 1}}"), ConfigError);
    CHECK_THROWS_AS(parse_engine_config("{\"mask\": {\"bogus\": true}}"), ConfigError);
    CHECK_THROWS_AS(parse_engine_config("{\"controller\": {\"theta\": 0.3}}"),
                    ConfigError);
    CHECK_THROWS_AS(parse_engine_config("{\"layout\": {\"pre\": 4}}"), ConfigError);
    CHECK_THROWS_AS(parse_engine_config("{\"position\": {\"dt\": 1}}"), ConfigError);
    CHECK_THROWS_AS(parse_engine_config("{\"decoder\": {\"temp\": 0}}"), ConfigError);
    CHECK_THROWS_AS(parse_engine_config("{\"backend\": {\"url\": \"x\"}}"), ConfigError);
}

TEST_CASE("type and range violations are config errors") {
    CHECK_THROWS_AS(parse_engine_config("not json"), ConfigError);
    CHECK_THROWS_AS(parse_engine_config("[]"), ConfigError);
    CHECK_THROWS_AS(parse_engine_config("{\"mask\": {\"first_frame_anchor\": 1}}"),
                    ConfigError);
    CHECK_THROWS_AS(parse_engine_config("{\"schedule\": {\"layers\": \"twelve\"}}"),
                    ConfigError);
    CHECK_THROWS_AS(parse_engine_config("{\"mask\": {\"max_levels\": 4}}"), ConfigError);
    CHECK_THROWS_AS(parse_engine_config("{\"mask\": {\"max_levels\": 0}}"), ConfigError);
    CHECK_THROWS_AS(parse_engine_config("{\"controller\": {\"theta_drop\": 0}}"),
                    ConfigError);
    CHECK_THROWS_AS(parse_engine_config("{\"controller\": {\"w_par\": 0}}"),
                    ConfigError);
    CHECK_THROWS_AS(parse_engine_config("{\"controller\": {\"w_low\": 0}}"),
                    ConfigError);
    CHECK_THROWS_AS(
        parse_engine_config("{\"controller\": {\"caption_history_cap\": 0}}"),
        ConfigError);
    CHECK_THROWS_AS(parse_engine_config("{\"layout\": {\"text_pre_len\": 0}}"),
                    ConfigError);
    CHECK_THROWS_AS(parse_engine_config("{\"position\": {\"delta_t\": 0}}"),
                    ConfigError);
    CHECK_THROWS_AS(parse_engine_config("{\"position\": {\"tau\": -1}}"), ConfigError);
    CHECK_THROWS_AS(parse_engine_config("{\"position\": {\"s_merge\": 0}}"),
                    ConfigError);
    CHECK_THROWS_AS(parse_engine_config("{\"decoder\": {\"vocab_size\": 1}}"),
                    ConfigError);
    CHECK_THROWS_AS(parse_engine_config("{\"backend\": {\"model\": 7}}"), ConfigError);
    // Structural schedule constraints still apply after parsing.
    CHECK_THROWS_AS(parse_engine_config("{\"schedule\": {\"layers\": 10}}"),
                    ConfigError);
    CHECK_THROWS_AS(parse_engine_config("{\"schedule\": {\"n_vc\": 0}}"), ConfigError);
    CHECK_THROWS_AS(load_engine_config("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("partial configs override only what they name") {
    const EngineConfig cfg =
        parse_engine_config("{\"controller\": {\"w_par\": 3},"
                            " \"schedule\": {\"clip_frames\": 16}}");
    CHECK(cfg.controller.w_par == 3);
    CHECK(cfg.controller.theta_drop == 0.3);
    CHECK(cfg.schedule.clip_frames == 16);
    CHECK(cfg.schedule.n_vc == 4);
    CHECK(cfg.rules.first_frame_anchor);
    CHECK(compression_ratio(cfg.schedule) == 0.0625);
}

// ---------------------------------------------------------------------------
// Dataset generation
// ---------------------------------------------------------------------------

TEST_CASE("dataset generation is reproducible from its seed") {
    DatasetOptions opts;
    opts.count = 4;
    opts.seed = 11;
    opts.unresolvable = 1;
    opts.drop_on_first = true;

    const auto a = build_dataset(opts);
    const auto b = build_dataset(opts);
    REQUIRE(a.size() == 4);
    REQUIRE(b.size() == 4);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].dir == b[i].dir);
        CHECK(a[i].script_json == b[i].script_json);
        CHECK(serialize_stream(a[i].stream) == serialize_stream(b[i].stream));
        CHECK(serialize_episode(a[i].episode) == serialize_episode(b[i].episode));
        CHECK(a[i].completion_clip == b[i].completion_clip);
    }

    DatasetOptions other = opts;
    other.seed = 12;
    const auto c = build_dataset(other);
    bool differs = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (c[i].script_json != a[i].script_json) differs = true;
    }
    CHECK(differs);

    // Structural invariants of every bundle.
    for (const auto& bundle : a) {
        if (bundle.episode.unresolvable) {
            CHECK(bundle.completion_clip == 0);
            CHECK(bundle.episode.t_star == bundle.stream.t_end());
        } else {
            CHECK(bundle.completion_clip >= 1);
            CHECK(bundle.episode.t_star ==
                  opts.clip_seconds * bundle.completion_clip);
        }
        CHECK_NOTHROW((void)ScriptedOracle::from_json_text(bundle.script_json));
    }
    CHECK(a[0].has_drop);
    CHECK(a[3].episode.unresolvable);  // the last episode
}

TEST_CASE("dataset options are validated") {
    DatasetOptions opts;
    opts.count = 0;
    CHECK_THROWS_AS(build_dataset(opts), ConfigError);
    opts.count = 2;
    opts.n_clips_min = 0;
    CHECK_THROWS_AS(build_dataset(opts), ConfigError);
    opts.n_clips_min = 5;
    opts.n_clips_max = 4;
    CHECK_THROWS_AS(build_dataset(opts), ConfigError);
    opts = DatasetOptions{};
    opts.count = 2;
    opts.unresolvable = 3;
    CHECK_THROWS_AS(build_dataset(opts), ConfigError);
    opts = DatasetOptions{};
    opts.clip_seconds = 0.0;
    CHECK_THROWS_AS(build_dataset(opts), ConfigError);
}

TEST_CASE("written datasets load back exactly") {
    DatasetOptions opts;
    opts.count = 3;
    opts.seed = 21;
    const auto bundles = build_dataset(opts);

    TempDir tmp("layout");
    write_dataset(tmp.path.string(), bundles, opts);

    const std::vector<std::string> dirs = list_dataset(tmp.path.string());
    REQUIRE(dirs == std::vector<std::string>{"ep_000", "ep_001", "ep_002"});
    for (std::size_t i = 0; i < bundles.size(); ++i) {
        const fs::path ep = tmp.path / dirs[i];
        const ClipStream stream = load_stream((ep / "stream.jsonl").string());
        const QueryEpisode episode = load_episode((ep / "episode.json").string());
        CHECK(serialize_stream(stream) == serialize_stream(bundles[i].stream));
        CHECK(serialize_episode(episode) == serialize_episode(bundles[i].episode));
        CHECK(slurp(ep / "script.json") == bundles[i].script_json);
    }
    CHECK_THROWS_AS(list_dataset((tmp.path / "nope").string()), ConfigError);
}

// ---------------------------------------------------------------------------
// End-to-end evaluation with the scripted mock
// ---------------------------------------------------------------------------

TEST_CASE("mock evaluation answers faithfully and aggregates correctly") {
    DatasetOptions opts;
    opts.count = 6;
    opts.seed = 11;
    opts.unresolvable = 1;
    opts.drop_on_first = true;
    TempDir tmp("eval");
    write_dataset(tmp.path.string(), build_dataset(opts), opts);

    const EngineConfig cfg = default_engine_config();
    const EvalReport report = evaluate(tmp.path.string(), cfg, BackendKind::mock);

    REQUIRE(report.rows.size() == 6);
    CHECK(report.episodes == 6);
    CHECK(report.failed == 0);
    CHECK(report.unresolved == 1);
    CHECK(report.answered == 5);
    CHECK(report.correct == 5);
    CHECK(report.accuracy == 5.0 / 6.0);
    // Faithful scripts answer exactly at the evidence-completing clip.
    CHECK(report.mean_delta == 0.0);
    CHECK(report.median_delta == 0.0);

    CHECK(report.rows[0].id == "ep_000");
    CHECK(report.rows[0].reflections == 1);  // the scripted drop
    for (std::size_t i = 1; i < report.rows.size(); ++i) {
        CHECK(report.rows[i].reflections == 0);
    }
    CHECK(report.rows[5].unresolvable);
    CHECK_FALSE(report.rows[5].answered);
    for (const EpisodeRow& row : report.rows) {
        CHECK(row.error.empty());
        if (row.answered) {
            CHECK(row.correct);
            CHECK(row.delta == 0.0);
        }
    }

    // The aggregates match an independent recomputation from the rows.
    int answered = 0, correct = 0, unresolved = 0;
    double calls = 0.0;
    for (const EpisodeRow& row : report.rows) {
        if (row.answered) {
            ++answered;
            if (row.correct) ++correct;
        } else {
            ++unresolved;
        }
        calls += row.backend_calls;
    }
    CHECK(report.answered == answered);
    CHECK(report.correct == correct);
    CHECK(report.unresolved == unresolved);
    CHECK(report.mean_backend_calls == calls / 6.0);
    CHECK(EvalReport::from_rows(report.rows).to_json_string() ==
          report.to_json_string());

    // Determinism, and independence from the prefetch width.
    CHECK(evaluate(tmp.path.string(), cfg, BackendKind::mock).to_json_string() ==
          report.to_json_string());
    EngineConfig wide = cfg;
    wide.controller.w_par = 3;
    CHECK(evaluate(tmp.path.string(), wide, BackendKind::mock).to_json_string() ==
          report.to_json_string());
}

TEST_CASE("per-episode failures are captured in rows, never thrown") {
    DatasetOptions opts;
    opts.count = 3;
    opts.seed = 4;
    TempDir tmp("fail");
    write_dataset(tmp.path.string(), build_dataset(opts), opts);
    spill(tmp.path / "ep_001" / "script.json", "not a script");

    const EvalReport report =
        evaluate(tmp.path.string(), default_engine_config(), BackendKind::mock);
    REQUIRE(report.rows.size() == 3);
    CHECK(report.failed == 1);
    CHECK(report.rows[1].error != "");
    CHECK_FALSE(report.rows[1].answered);
    CHECK(report.rows[0].error.empty());
    CHECK(report.rows[2].error.empty());
    CHECK(report.answered == 2);
    CHECK(report.accuracy == 2.0 / 3.0);
    // Failed episodes are excluded from the call average.
    const double calls = report.rows[0].backend_calls + report.rows[2].backend_calls;
    CHECK(report.mean_backend_calls == calls / 2.0);
}

TEST_CASE("run_episode_dir streams NDJSON telemetry") {
    DatasetOptions opts;
    opts.count = 1;
    opts.seed = 11;
    opts.drop_on_first = true;
    TempDir tmp("ndjson");
    write_dataset(tmp.path.string(), build_dataset(opts), opts);

    std::ostringstream out;
    NdjsonSink sink(out);
    const DecisionTrace trace = run_episode_dir(
        (tmp.path / "ep_000").string(), default_engine_config(), BackendKind::mock,
        &sink);
    CHECK(trace.timing.answered);
    CHECK(trace.reflections == 1);

    std::istringstream lines(out.str());
    std::string line;
    int n_lines = 0;
    bool saw_reflect = false, saw_answer = false;
    while (std::getline(lines, line)) {
        ++n_lines;
        const ojson doc = ojson::parse(line, nullptr, false);
        REQUIRE_FALSE(doc.is_discarded());
        for (const char* key : {"t", "event", "clip", "rho", "confidences", "payload"}) {
            CHECK(doc.contains(key));
        }
        if (doc["event"] == "reflect") saw_reflect = true;
        if (doc["event"] == "answer") saw_answer = true;
    }
    CHECK(n_lines == static_cast<int>(trace.events.size()));
    CHECK(saw_reflect);
    CHECK(saw_answer);
}

// ---------------------------------------------------------------------------
// Compression inspection
// ---------------------------------------------------------------------------

TEST_CASE("compression inspection reports the live ratio and full artifacts") {
    const EngineConfig cfg = default_engine_config();
    const ClipStream stream = make_feature_stream(cfg.schedule, 2, 9);
    const InspectResult result = hpsi_inspect(stream, cfg);

    CHECK(result.ratio == 0.03125);  // 4 / (32 * 4)
    CHECK(result.mask_jsons.size() == 3);
    const ojson layout = ojson::parse(result.layout_json);
    CHECK(layout.at("total").get<std::size_t>() == result.total_tokens);
    const ojson position = ojson::parse(result.position_json);
    CHECK(position.at("n_clips").get<int>() == 2);
    CHECK(position.at("t_extended").get<int>() ==
          position.at("t").get<int>() + 2 * position.at("n_comp").get<int>());
    for (const std::string& mask : result.mask_jsons) {
        CHECK_FALSE(ojson::parse(mask, nullptr, false).is_discarded());
    }

    EngineConfig two_bands = cfg;
    two_bands.rules.max_levels = 2;
    CHECK(hpsi_inspect(stream, two_bands).mask_jsons.size() == 2);

    ClipStream captions;
    captions.mode = ClipMode::caption;
    CHECK_THROWS_AS(hpsi_inspect(captions, cfg), ConfigError);

    ClipStream empty;
    empty.mode = ClipMode::feature;
    empty.tokens_per_frame = cfg.schedule.tokens_per_frame;
    CHECK_THROWS_AS(hpsi_inspect(empty, cfg), SizeError);

    ClipStream mismatched = stream;
    mismatched.tokens_per_frame = 2;
    CHECK_THROWS_AS(hpsi_inspect(mismatched, cfg), ConfigError);
}

// ---------------------------------------------------------------------------
// Shipped demo datasets
// ---------------------------------------------------------------------------

TEST_CASE("the shipped 10-episode suite reproduces byte-for-byte") {
    DatasetOptions opts;
    opts.count = 10;
    opts.seed = 7;
    check_shipped_dataset("suite10", opts);

    if (!regen()) {
        const EvalReport report =
            evaluate((fs::path(kRoot) / "data" / "suite10").string(),
                     default_engine_config(), BackendKind::mock);
        CHECK(report.episodes == 10);
        CHECK(report.answered == 10);
        CHECK(report.accuracy == 1.0);
        CHECK(report.mean_delta == 0.0);
        for (const EpisodeRow& row : report.rows) CHECK(row.reflections == 0);
    }
}

TEST_CASE("the shipped reflection episode fires exactly one part-5 pass") {
    DatasetOptions opts;
    opts.count = 1;
    opts.seed = 5;
    opts.drop_on_first = true;
    check_shipped_dataset("reflect1", opts);

    if (!regen()) {
        const EvalReport report =
            evaluate((fs::path(kRoot) / "data" / "reflect1").string(),
                     default_engine_config(), BackendKind::mock);
        REQUIRE(report.rows.size() == 1);
        CHECK(report.rows[0].answered);
        CHECK(report.rows[0].reflections == 1);
        CHECK(report.rows[0].delta == 0.0);
    }
}

TEST_CASE("the shipped config presets reproduce from the serializer byte-for-byte") {
    EngineConfig live = default_engine_config();
    EngineConfig budget16 = default_engine_config();
    budget16.schedule.clip_frames = 16;

    const std::vector<std::pair<std::string, const EngineConfig*>> presets = {
        {"live.json", &live},
        {"budget16.json", &budget16},
    };
    for (const auto& [name, cfg] : presets) {
        const fs::path path = fs::path(kRoot) / "configs" / name;
        const std::string text = serialize_engine_config(*cfg);
        if (regen()) {
            spill(path, text);
        } else {
            CHECK_MESSAGE(slurp(path) == text, "preset drifted: " << name);
        }
    }

    if (!regen()) {
        // The presets load back through the strict parser and keep their
        // defining compression budgets.
        const EngineConfig l =
            load_engine_config((fs::path(kRoot) / "configs" / "live.json").string());
        CHECK(compression_ratio(l.schedule) == 1.0 / 32.0);
        const EngineConfig b = load_engine_config(
            (fs::path(kRoot) / "configs" / "budget16.json").string());
        CHECK(b.schedule.clip_frames == 16);
        CHECK(compression_ratio(b.schedule) == 0.0625);
    }
}
