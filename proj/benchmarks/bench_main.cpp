/*
 * Microbenchmarks for the hot paths: segment-mean pooling, attention-mask
 * construction, the toy decoder forward pass, and reply extraction with its
 * repair pass. Run the binary directly; it is not registered with ctest.
 */

#include <benchmark/benchmark.h>

#include <cstddef>
#include <string>
#include <vector>

#include "oncue/decoder.hpp"
#include "oncue/json_extract.hpp"
#include "oncue/layout.hpp"
#include "oncue/mask.hpp"
#include "oncue/pooling.hpp"
#include "oncue/rng.hpp"
#include "oncue/schedule.hpp"

namespace {

using namespace oncue;

Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols) {
    Matrix m(rows, cols);
    for (double& x : m.data) x = rng.uniform(-1.0, 1.0);
    return m;
}

void BM_AdapterPool(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    Rng rng(1);
    const Matrix in = random_matrix(rng, n, 64);
    for (auto _ : state) {
        benchmark::DoNotOptimize(adapter_pool(in, n / 8));
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                            static_cast<std::int64_t>(n));
}
BENCHMARK(BM_AdapterPool)->Arg(128)->Arg(512)->Arg(2048);

void BM_BuildMask(benchmark::State& state) {
    const int n_clips = static_cast<int>(state.range(0));
    AggregationSchedule s;  // live defaults: 32 frames x 4 tokens, n_vc 4
    const std::vector<std::size_t> clips(
        static_cast<std::size_t>(n_clips),
        static_cast<std::size_t>(s.clip_frames * s.tokens_per_frame));
    const SequenceLayout lay = build_layout(16, clips, s, 8);
    const std::vector<int> active(static_cast<std::size_t>(n_clips), 3);
    for (auto _ : state) {
        benchmark::DoNotOptimize(build_mask(lay, active, MaskRules{}));
    }
    state.counters["tokens"] = static_cast<double>(lay.total);
}
BENCHMARK(BM_BuildMask)->Arg(2)->Arg(4)->Arg(8);

void BM_DecoderForwardFull(benchmark::State& state) {
    const int n_clips = static_cast<int>(state.range(0));
    DecoderConfig cfg;
    cfg.schedule.layers = 12;
    cfg.schedule.d = 16;
    cfg.schedule.n_vc = 1;
    cfg.schedule.clip_frames = 4;
    cfg.schedule.tokens_per_frame = 1;
    cfg.vocab_size = 8;
    cfg.seed = 42;
    ToyDecoder dec(cfg);
    Rng rng(2);
    std::vector<Matrix> clips;
    for (int i = 0; i < n_clips; ++i) clips.push_back(random_matrix(rng, 4, 16));
    const Matrix text_pre = random_matrix(rng, 3, 16);
    const Matrix text_post = random_matrix(rng, 2, 16);
    for (auto _ : state) {
        benchmark::DoNotOptimize(dec.forward_full(clips, text_pre, text_post));
    }
}
BENCHMARK(BM_DecoderForwardFull)->Arg(2)->Arg(4);

void BM_ExtractJson(benchmark::State& state) {
    // The worst common case: fenced reply with trailing commas, so both the
    // strict pass and the repair pass run.
    std::string reply = "Here is the update:\n```json\n{\n  \"subquestion_status\": [\n";
    for (int i = 0; i < 8; ++i)
        reply += "    {\"question\": \"q" + std::to_string(i) +
                 "\", \"value\": \"yes\", \"confidence\": 0.9,},\n";
    reply += "  ],\n  \"estimated_progress\": 80,\n}\n```\nDone.";
    for (auto _ : state) {
        benchmark::DoNotOptimize(extract_json(reply));
    }
    state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations()) *
                            static_cast<std::int64_t>(reply.size()));
}
BENCHMARK(BM_ExtractJson);

}  // namespace

BENCHMARK_MAIN();
