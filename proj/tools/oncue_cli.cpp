// Command-line front end: dataset generation, single-episode runs with live
// telemetry, batch evaluation, and compression-pipeline inspection.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>

#include <CLI11.hpp>

#include "oncue/config.hpp"
#include "oncue/dataset.hpp"
#include "oncue/errors.hpp"
#include "oncue/eval.hpp"

namespace fs = std::filesystem;
using namespace oncue;

namespace {

struct CommonFlags {
    std::string config_path;
    std::string backend = "mock";
    int w_par = 0;          // 0: keep config value
    bool binary_gate = false;
    bool debug = false;
};

EngineConfig make_config(const CommonFlags& flags) {
    EngineConfig cfg = flags.config_path.empty() ? default_engine_config()
                                                 : load_engine_config(flags.config_path);
    if (flags.w_par > 0) cfg.controller.w_par = flags.w_par;
    if (flags.binary_gate) cfg.controller.binary_gate = true;
    return cfg;
}

BackendKind backend_kind(const std::string& name) {
    if (name == "mock") return BackendKind::mock;
    if (name == "http") return BackendKind::http;
    throw ConfigError("unknown backend: " + name);
}

std::shared_ptr<ReasonerBackend> http_backend(const EngineConfig& cfg, bool debug) {
    HttpBackendConfig http;
    http.model = cfg.backend_model;
    http.debug = debug;
    return std::make_shared<HttpBackend>(http);
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << text;
}

void add_common(CLI::App* cmd, CommonFlags& flags, bool with_backend) {
    cmd->add_option("--config", flags.config_path, "engine config JSON file");
    cmd->add_flag("--debug", flags.debug, "verbose diagnostics on stderr");
    if (with_backend) {
        cmd->add_option("--backend", flags.backend, "reasoner backend")
            ->check(CLI::IsMember({"mock", "http"}));
        cmd->add_option("--wpar", flags.w_par, "part-3 prefetch window")
            ->check(CLI::PositiveNumber);
        cmd->add_flag("--binary-gate", flags.binary_gate,
                      "quantize confidences to 0/1 (ablation)");
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"streaming video QA decision engine"};
    app.require_subcommand(1);

    // --- gen -----------------------------------------------------------------
    auto* gen = app.add_subcommand("gen", "generate a scripted synthetic dataset");
    CommonFlags gen_flags;
    std::string gen_out = "dataset";
    DatasetOptions gen_options;
    add_common(gen, gen_flags, false);
    gen->add_option("--out", gen_out, "output directory")->required();
    gen->add_option("--seed", gen_options.seed, "dataset seed");
    gen->add_option("--count", gen_options.count, "episode count")
        ->check(CLI::PositiveNumber);
    gen->add_option("--unresolvable", gen_options.unresolvable,
                    "how many trailing episodes stay unresolved");
    gen->add_flag("--drop", gen_options.drop_on_first,
                  "script a 0.8->0.4 confidence drop into episode 0");
    gen->add_option("--clips-min", gen_options.n_clips_min, "minimum clips per episode");
    gen->add_option("--clips-max", gen_options.n_clips_max, "maximum clips per episode");

    // --- run -----------------------------------------------------------------
    auto* run = app.add_subcommand("run", "run one episode with live telemetry");
    CommonFlags run_flags;
    std::string run_episode_path;
    std::string run_trace_out;
    add_common(run, run_flags, true);
    run->add_option("episode", run_episode_path, "episode directory")->required();
    run->add_option("--trace-out", run_trace_out, "write the decision trace JSON here");

    // --- eval ----------------------------------------------------------------
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a dataset to an EvalReport");
    CommonFlags eval_flags;
    std::string eval_dataset;
    std::string eval_out;
    add_common(eval_cmd, eval_flags, true);
    eval_cmd->add_option("dataset", eval_dataset, "dataset directory")->required();
    eval_cmd->add_option("--out", eval_out, "write the report here (default stdout)");

    // --- hpsi-inspect ----------------------------------------------------------
    auto* inspect = app.add_subcommand(
        "hpsi-inspect", "dump layout, masks and position ids for a feature stream");
    CommonFlags inspect_flags;
    std::string inspect_stream_path;
    int inspect_clips = 0;
    std::uint64_t inspect_seed = 7;
    std::string inspect_out = ".";
    bool no_first_frame = false;
    int levels = 0;
    add_common(inspect, inspect_flags, false);
    inspect->add_option("--stream", inspect_stream_path, "feature-mode stream JSONL");
    inspect->add_option("--clips", inspect_clips,
                        "synthesize this many clips instead of reading a stream");
    inspect->add_option("--seed", inspect_seed, "seed for synthesized clips");
    inspect->add_option("--out", inspect_out, "dump directory");
    inspect->add_flag("--no-first-frame", no_first_frame,
                      "drop the first-frame anchor rule (ablation)");
    inspect->add_option("--levels", levels, "cap usable aggregation levels (ablation)")
        ->check(CLI::Range(1, 3));

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) {
            const auto bundles = build_dataset(gen_options);
            write_dataset(gen_out, bundles, gen_options);
            std::cout << "wrote " << bundles.size() << " episodes to " << gen_out
                      << "\n";
            return 0;
        }

        if (*run) {
            const EngineConfig cfg = make_config(run_flags);
            const BackendKind kind = backend_kind(run_flags.backend);
            std::shared_ptr<ReasonerBackend> shared;
            if (kind == BackendKind::http) shared = http_backend(cfg, run_flags.debug);
            NdjsonSink sink(std::cout);
            const DecisionTrace trace =
                run_episode_dir(run_episode_path, cfg, kind, &sink, shared);
            if (!run_trace_out.empty()) {
                write_file(run_trace_out, trace.to_json_string() + "\n");
            }
            return 0;
        }

        if (*eval_cmd) {
            const EngineConfig cfg = make_config(eval_flags);
            const BackendKind kind = backend_kind(eval_flags.backend);
            std::shared_ptr<ReasonerBackend> shared;
            if (kind == BackendKind::http) shared = http_backend(cfg, eval_flags.debug);
            const EvalReport report = evaluate(eval_dataset, cfg, kind, nullptr, shared);
            if (eval_out.empty()) {
                std::cout << report.to_json_string();
            } else {
                write_file(eval_out, report.to_json_string());
            }
            return 0;
        }

        if (*inspect) {
            EngineConfig cfg = make_config(inspect_flags);
            if (no_first_frame) cfg.rules.first_frame_anchor = false;
            if (levels > 0) cfg.rules.max_levels = levels;
            ClipStream stream;
            if (!inspect_stream_path.empty()) {
                stream = load_stream(inspect_stream_path);
            } else if (inspect_clips > 0) {
                stream = make_feature_stream(cfg.schedule, inspect_clips, inspect_seed);
            } else {
                throw ConfigError("hpsi-inspect needs --stream FILE or --clips N");
            }
            const InspectResult result = hpsi_inspect(stream, cfg);
            fs::create_directories(inspect_out);
            const fs::path out(inspect_out);
            write_file(out / "layout.json", result.layout_json + "\n");
            for (std::size_t band = 0; band < result.mask_jsons.size(); ++band) {
                write_file(out / ("mask_band" + std::to_string(band + 1) + ".json"),
                           result.mask_jsons[band] + "\n");
            }
            write_file(out / "position.json", result.position_json + "\n");
            char line[128];
            std::snprintf(line, sizeof(line), "compression_ratio: %g (%.4g%% reduction)",
                          result.ratio, 100.0 * (1.0 - result.ratio));
            std::cout << line << "\n"
                      << "total_tokens: " << result.total_tokens << "\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
