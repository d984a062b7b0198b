/*
 * Acceptance gate. One line per criterion, PASS or FAIL, exit status equal
 * to the number of failures. Each criterion re-derives its expected values
 * from the independent oracles in support/oracles.hpp (scatter-route
 * pooling, the declarative mask-rule interpreter, the transcribed position
 * algorithm, the double-loop integration loss) rather than trusting the
 * library route, and all tolerances and time limits are pinned here:
 *
 *  1  pooling equals the scatter oracle for all n<=32, m<=n, d<=4 (1e-12, <1s)
 *  2  level sizes are (3,2,1)*N_vc; depth table follows 1+floor(3l/L)
 *  3  build_mask equals the rule interpreter on 200 random configs (<5s)
 *  4  position ids equal the transcribed algorithm on 50 random grids
 *  5  compression ratio: 0.0625 for the 16-frame budget, 1/32 live
 *  6  integration loss within 1e-9 of the oracle; gradient within 1e-4 of FD
 *  7  attention is exactly isolated; incremental forward is bitwise equal
 *  8  shipped 10-episode suite: all answered at completion, delta 0,
 *     identical traces at prefetch widths 1 and 3 (<10s)
 *  9  scripted drop triggers exactly one reflection; monotone runs none;
 *     unchanged merges echo bit-exactly
 * 10  prompt templates byte-match the versioned assets; worked replies
 *     parse to exact states (rho 0.75, the 0.95 upgrades)
 * 11  extract_json returns a parseable object or SchemaError on a
 *     10,000-case fuzz corpus plus the 20-case malformed corpus
 */

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "oncue/backend.hpp"
#include "oncue/config.hpp"
#include "oncue/controller.hpp"
#include "oncue/decoder.hpp"
#include "oncue/errors.hpp"
#include "oncue/eval.hpp"
#include "oncue/integration.hpp"
#include "oncue/json_extract.hpp"
#include "oncue/layout.hpp"
#include "oncue/mask.hpp"
#include "oncue/pooling.hpp"
#include "oncue/position.hpp"
#include "oncue/protocol.hpp"
#include "oncue/rng.hpp"
#include "oncue/schedule.hpp"

#include "support/oracles.hpp"

using namespace oncue;
using json = nlohmann::json;

namespace {

// Pinned tolerances and time limits.
constexpr double kPoolTol = 1e-12;
constexpr double kLossTol = 1e-9;
constexpr double kGradRelTol = 1e-4;
constexpr double kPoolSecondsLimit = 1.0;
constexpr double kMaskSecondsLimit = 5.0;
constexpr double kSuiteSecondsLimit = 10.0;

const std::string kRoot = std::string(ONCUE_SOURCE_DIR);

struct GateFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void expect(bool ok, const std::string& what) {
    if (!ok) throw GateFailure(what);
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    expect(in.good(), "missing file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols,
                     double lo = -1.0, double hi = 1.0) {
    Matrix m(rows, cols);
    for (double& x : m.data) x = rng.uniform(lo, hi);
    return m;
}

// ---------------------------------------------------------------------------
// 1. Pooling against the independent scatter-route oracle.
// ---------------------------------------------------------------------------

void criterion_pooling() {
    Rng rng(11);
    for (std::size_t n = 1; n <= 32; ++n) {
        for (std::size_t m = 1; m <= n; ++m) {
            for (std::size_t d = 1; d <= 4; ++d) {
                const Matrix in = random_matrix(rng, n, d, -3.0, 3.0);
                const Matrix got = adapter_pool(in, m);
                const Matrix want = oracle::segment_mean_pool(in, m);
                expect(got.rows == m && got.cols == d, "pooled shape");
                for (std::size_t i = 0; i < got.data.size(); ++i)
                    expect(std::abs(got.data[i] - want.data[i]) <= kPoolTol,
                           "pooling mismatch beyond 1e-12 at n=" +
                               std::to_string(n) + " m=" + std::to_string(m));
            }
        }
    }
}

// ---------------------------------------------------------------------------
// 2. Schedule arithmetic: level sizes and the active-depth table.
// ---------------------------------------------------------------------------

void criterion_schedule() {
    Rng rng(5);
    for (int n_vc = 1; n_vc <= 4; ++n_vc) {
        AggregationSchedule s;
        s.n_vc = n_vc;
        expect(s.level_size(1) == 3 * n_vc, "level 1 size");
        expect(s.level_size(2) == 2 * n_vc, "level 2 size");
        expect(s.level_size(3) == 1 * n_vc, "level 3 size");

        // The initializer must produce exactly those row counts.
        const std::size_t n_v = static_cast<std::size_t>(4 * n_vc) + 3;
        const auto levels = init_aggregation_tokens(random_matrix(rng, n_v, 6), n_vc);
        expect(levels[0].rows == static_cast<std::size_t>(3 * n_vc) &&
                   levels[1].rows == static_cast<std::size_t>(2 * n_vc) &&
                   levels[2].rows == static_cast<std::size_t>(1 * n_vc),
               "init_aggregation_tokens row counts");
    }

    AggregationSchedule s12;
    s12.layers = 12;
    for (int l = 0; l < 12; ++l) {
        const int want = l < 4 ? 1 : (l < 8 ? 2 : 3);
        expect(active_level_count(s12, l) == want,
               "active_level_count(12, " + std::to_string(l) + ")");
    }
    expect(s12.insertion_layers() == std::array<int, 3>{0, 4, 8},
           "insertion layers for L=12");
}

// ---------------------------------------------------------------------------
// 3. Masks against the declarative rule interpreter.
// ---------------------------------------------------------------------------

struct MaskConfig {
    AggregationSchedule schedule;
    SequenceLayout layout;
    std::vector<int> active;
    MaskRules rules;
};

MaskConfig random_mask_config(Rng& rng) {
    MaskConfig mc;
    mc.schedule.n_vc = static_cast<int>(rng.uniform_int(1, 4));
    mc.schedule.layers = rng.uniform_int(0, 1) == 0 ? 6 : 12;
    mc.schedule.tokens_per_frame = static_cast<int>(rng.uniform_int(1, 3));
    const int n_clips = static_cast<int>(rng.uniform_int(1, 5));

    const int min_frames =
        (3 * mc.schedule.n_vc + mc.schedule.tokens_per_frame - 1) /
        mc.schedule.tokens_per_frame;
    mc.schedule.clip_frames = min_frames + 3;

    std::vector<std::size_t> clip_tokens;
    for (int i = 0; i < n_clips; ++i) {
        const int frames = static_cast<int>(rng.uniform_int(min_frames, min_frames + 3));
        clip_tokens.push_back(
            static_cast<std::size_t>(frames * mc.schedule.tokens_per_frame));
    }
    const std::size_t text_pre = static_cast<std::size_t>(rng.uniform_int(0, 4));
    const std::size_t text_post = static_cast<std::size_t>(rng.uniform_int(0, 4));
    mc.layout = build_layout(text_pre, clip_tokens, mc.schedule, text_post);

    for (int i = 0; i < n_clips; ++i)
        mc.active.push_back(static_cast<int>(rng.uniform_int(0, 3)));
    mc.rules.first_frame_anchor = rng.uniform_int(0, 1) == 1;
    mc.rules.raw_sees_prev_summary = rng.uniform_int(0, 1) == 1;
    mc.rules.same_level_self_context = rng.uniform_int(0, 1) == 1;
    mc.rules.max_levels = static_cast<int>(rng.uniform_int(1, 3));
    return mc;
}

void criterion_masks() {
    Rng rng(17);
    for (int trial = 0; trial < 200; ++trial) {
        const MaskConfig mc = random_mask_config(rng);
        const AttentionMask got = build_mask(mc.layout, mc.active, mc.rules);
        const oracle::RuleInterpreter interp(mc.layout, mc.active, mc.rules);

        expect(got.n == mc.layout.total, "mask dimension");
        expect(got.bits == interp.bits(),
               "mask/interpreter divergence at trial " + std::to_string(trial));

        // Causality on every row, and inactive rows/columns fully blocked.
        for (std::size_t r = 0; r < got.n; ++r) {
            for (std::size_t c = 0; c < got.n; ++c) {
                if (got.at(r, c)) expect(c <= r, "causality violation");
                if (!interp.is_active(r))
                    expect(!got.at(r, c) && !got.at(c, r), "inactive row/col leak");
            }
            if (interp.is_active(r)) expect(got.at(r, r), "missing diagonal");
        }
    }
}

// ---------------------------------------------------------------------------
// 4. Position ids against the transcribed algorithm.
// ---------------------------------------------------------------------------

void criterion_positions() {
    Rng rng(29);
    for (int trial = 0; trial < 50; ++trial) {
        const std::int64_t S = rng.uniform_int(1, 3);
        const std::int64_t H = S * rng.uniform_int(1, 4);
        const std::int64_t W = S * rng.uniform_int(1, 4);
        const std::int64_t T = rng.uniform_int(1, 24);
        const std::int64_t n_clips = rng.uniform_int(1, 5);
        const std::int64_t n_comp = rng.uniform_int(1, 9);
        const double dt = static_cast<double>(rng.uniform_int(1, 4));
        const double tau = static_cast<double>(rng.uniform_int(1, 4)) * 0.25;

        const PositionGrid3D got =
            build_position_grid(T, n_clips, n_comp, dt, tau, S, H, W);
        const oracle::GridOracle want =
            oracle::algorithm_grid(T, n_clips, n_comp, dt, tau, S, H, W);

        expect(got.t_extended == want.t_extended,
               "t_extended mismatch at trial " + std::to_string(trial));
        expect(got.token_count() == static_cast<std::int64_t>(want.t.size()),
               "token count mismatch");
        expect(got.pos_t == want.t && got.pos_h == want.h && got.pos_w == want.w,
               "position id mismatch at trial " + std::to_string(trial));
    }
}

// ---------------------------------------------------------------------------
// 5. Compression budgets.
// ---------------------------------------------------------------------------

void criterion_budgets() {
    AggregationSchedule budget16;
    budget16.clip_frames = 16;
    budget16.tokens_per_frame = 4;
    budget16.n_vc = 4;
    const double r16 = compression_ratio(budget16);
    expect(r16 == 0.0625, "16-frame ratio is not exactly 0.0625");
    expect((1.0 - r16) * 100.0 == 93.75, "16-frame reduction is not 93.75%");

    AggregationSchedule live;  // defaults: 32 frames, 4 tokens/frame, n_vc 4
    expect(live.clip_frames == 32 && live.tokens_per_frame == 4 && live.n_vc == 4,
           "live schedule defaults");
    expect(compression_ratio(live) == 1.0 / 32.0,
           "live text-visible fraction is not 1/32");
}

// ---------------------------------------------------------------------------
// 6. Integration objective against the double-loop oracle and FD gradients.
// ---------------------------------------------------------------------------

LevelSnapshots random_snapshots(Rng& rng, const AggregationSchedule& s,
                                std::size_t d) {
    LevelSnapshots p;
    p.layers.resize(static_cast<std::size_t>(s.layers));
    const auto ins = s.insertion_layers();
    for (int l = 0; l < s.layers; ++l)
        for (int j = 1; j <= 3; ++j)
            if (l >= ins[static_cast<std::size_t>(j - 1)])
                p.layers[static_cast<std::size_t>(l)][static_cast<std::size_t>(j - 1)] =
                    random_matrix(rng, static_cast<std::size_t>(s.level_size(j)), d);
    return p;
}

void criterion_integration() {
    Rng rng(31);
    for (int trial = 0; trial < 20; ++trial) {
        AggregationSchedule s;
        s.layers = 6;
        s.n_vc = static_cast<int>(rng.uniform_int(1, 3));
        s.d = 4;
        s.clip_frames = 4 * s.n_vc;
        s.tokens_per_frame = 1;
        const Matrix v = random_matrix(rng, static_cast<std::size_t>(s.clip_frames), 4);
        const LevelSnapshots p = random_snapshots(rng, s, 4);
        expect(std::abs(integration_loss(p, v, s) - oracle::double_loop_loss(p, v, s)) <=
                   kLossTol,
               "loss differs from the oracle beyond 1e-9 at trial " +
                   std::to_string(trial));
    }

    Rng grng(37);
    for (int trial = 0; trial < 20; ++trial) {
        AggregationSchedule s;
        s.layers = 3;
        s.n_vc = static_cast<int>(grng.uniform_int(1, 2));
        s.d = 3;
        s.clip_frames = 3 * s.n_vc + 2;
        s.tokens_per_frame = 1;
        const Matrix v = random_matrix(grng, static_cast<std::size_t>(s.clip_frames), 3);
        LevelSnapshots p = random_snapshots(grng, s, 3);

        const LevelSnapshots grad = integration_loss_grad(p, v, s);
        const double h = 1e-6;
        for (std::size_t l = 0; l < p.layers.size(); ++l) {
            for (int j = 0; j < 3; ++j) {
                if (!p.layers[l][static_cast<std::size_t>(j)].has_value()) {
                    expect(!grad.layers[l][static_cast<std::size_t>(j)].has_value(),
                           "gradient present for an absent snapshot");
                    continue;
                }
                Matrix& snap = *p.layers[l][static_cast<std::size_t>(j)];
                const Matrix& g = *grad.layers[l][static_cast<std::size_t>(j)];
                for (std::size_t i = 0; i < snap.data.size(); ++i) {
                    const double keep = snap.data[i];
                    snap.data[i] = keep + h;
                    const double up = oracle::double_loop_loss(p, v, s);
                    snap.data[i] = keep - h;
                    const double down = oracle::double_loop_loss(p, v, s);
                    snap.data[i] = keep;
                    const double fd = (up - down) / (2.0 * h);
                    const double scale =
                        std::max({1.0, std::abs(fd), std::abs(g.data[i])});
                    expect(std::abs(fd - g.data[i]) <= kGradRelTol * scale,
                           "gradient differs from finite differences beyond 1e-4");
                }
            }
        }
    }

    // A constant clip pools to itself at every level: zero loss, zero grad.
    AggregationSchedule s;
    s.layers = 6;
    s.n_vc = 2;
    s.d = 3;
    s.clip_frames = 8;
    s.tokens_per_frame = 1;
    Matrix v(8, 3);
    for (std::size_t r = 0; r < 8; ++r)
        for (std::size_t c = 0; c < 3; ++c) v.at(r, c) = 0.5 * (c + 1.0);
    const auto levels = init_aggregation_tokens(v, s.n_vc);
    LevelSnapshots p;
    p.layers.resize(static_cast<std::size_t>(s.layers));
    const auto ins = s.insertion_layers();
    for (int l = 0; l < s.layers; ++l)
        for (int j = 1; j <= 3; ++j)
            if (l >= ins[static_cast<std::size_t>(j - 1)])
                p.layers[static_cast<std::size_t>(l)][static_cast<std::size_t>(j - 1)] =
                    levels[static_cast<std::size_t>(j - 1)];
    expect(integration_loss(p, v, s) == 0.0, "constant-token loss is not zero");
    const LevelSnapshots grad = integration_loss_grad(p, v, s);
    for (const auto& layer : grad.layers)
        for (const auto& g : layer)
            if (g.has_value())
                for (double x : g->data)
                    expect(x == 0.0, "constant-token gradient is not zero");
}

// ---------------------------------------------------------------------------
// 7. Attention isolation and carried-state equivalence on the full decoder.
// ---------------------------------------------------------------------------

void criterion_isolation() {
    DecoderConfig cfg;
    cfg.schedule.layers = 12;
    cfg.schedule.d = 16;
    cfg.schedule.n_vc = 1;
    cfg.schedule.clip_frames = 4;
    cfg.schedule.tokens_per_frame = 1;
    cfg.vocab_size = 8;
    cfg.seed = 42;
    ToyDecoder dec(cfg);

    Rng rng(107);
    std::vector<Matrix> clips;
    for (int i = 0; i < 3; ++i) clips.push_back(random_matrix(rng, 4, 16));
    const Matrix text_pre = random_matrix(rng, 2, 16);
    const Matrix text_post = random_matrix(rng, 2, 16);

    DecoderTrace trace;
    const DecoderResult full = dec.forward_full(clips, text_pre, text_post, &trace);
    expect(trace.hidden_in.size() == 12, "trace depth");

    // Masked attention probabilities are exact zeros at every layer.
    for (std::size_t l = 0; l < 12; ++l) {
        const AttentionMask& m = trace.masks[l];
        const Matrix& probs = trace.attn_probs[l];
        for (std::size_t r = 0; r < m.n; ++r)
            for (std::size_t c = 0; c < m.n; ++c)
                if (!m.at(r, c))
                    expect(probs.at(r, c) == 0.0,
                           "nonzero attention at a masked pair, layer " +
                               std::to_string(l));
    }

    // Perturbing any invisible column leaves every protected row's attention
    // output bit-identical, at every layer.
    for (std::size_t l = 0; l < 12; ++l) {
        const AttentionMask& m = trace.masks[l];
        const Matrix& hidden = trace.hidden_in[l];
        for (std::size_t c = 0; c < m.n; ++c) {
            Matrix poked = hidden;
            for (std::size_t k = 0; k < poked.cols; ++k)
                poked.at(c, k) += 7.5 + static_cast<double>(k);
            for (std::size_t r = 0; r < m.n; ++r) {
                if (m.at(r, c) || r == c) continue;
                expect(dec.attention_row(static_cast<int>(l), hidden, m, r) ==
                           dec.attention_row(static_cast<int>(l), poked, m, r),
                       "invisible token influenced row " + std::to_string(r) +
                           " via column " + std::to_string(c) + " at layer " +
                           std::to_string(l));
            }
        }
    }

    // Clip-by-clip incremental decoding is bitwise equal to the full prefix.
    DecoderState carried;
    DecoderResult step;
    for (const Matrix& clip : clips) {
        step = dec.forward_step(carried, clip, text_pre, text_post);
        carried = step.state;
    }
    expect(step.text_logits == full.text_logits,
           "incremental logits differ from the full forward");
    expect(step.state == full.state, "incremental carried state differs");
}

// ---------------------------------------------------------------------------
// 8. Shipped decision suite: stopping, timing, and prefetch invariance.
// ---------------------------------------------------------------------------

struct CollectSink final : TelemetrySink {
    std::vector<TraceEvent> events;
    void emit(const TraceEvent& event) override { events.push_back(event); }
};

void criterion_suite() {
    const std::string dir = kRoot + "/data/suite10";
    EngineConfig cfg = default_engine_config();

    CollectSink sink;
    const EvalReport narrow = evaluate(dir, cfg, BackendKind::mock, &sink);
    expect(narrow.episodes == 10, "suite size is not 10");
    expect(narrow.failed == 0 && narrow.unresolved == 0, "suite episodes failed");
    expect(narrow.answered == 10 && narrow.correct == 10, "not every episode answered");
    expect(narrow.accuracy == 1.0, "accuracy is not 1.0");
    expect(narrow.mean_delta == 0.0 && narrow.median_delta == 0.0,
           "answers did not land at reveal completion");
    for (const EpisodeRow& row : narrow.rows)
        expect(row.answered && row.delta == 0.0,
               "episode " + row.id + " missed its completion clip");

    // No answer is emitted before every sub-question clears the bar.
    int answers = 0;
    for (const TraceEvent& e : sink.events) {
        if (e.event == "answer") {
            ++answers;
            expect(e.rho == 1.0, "answer emitted at rho " + std::to_string(e.rho));
        }
    }
    expect(answers == 10, "expected one answer event per episode");

    // Prefetch width must not change the trace or the report.
    EngineConfig wide = cfg;
    wide.controller.w_par = 3;
    const EvalReport parallel = evaluate(dir, wide, BackendKind::mock);
    expect(parallel.to_json_string() == narrow.to_json_string(),
           "report differs between prefetch widths 1 and 3");
}

// ---------------------------------------------------------------------------
// 9. Reflection triggering and merge discipline.
// ---------------------------------------------------------------------------

SubAnswerState state_of(
    const std::vector<std::tuple<std::string, std::string, double>>& rows) {
    SubAnswerState s;
    for (const auto& [q, v, c] : rows) {
        SubAnswer a;
        a.question = q;
        a.value = v;
        a.confidence = c;
        s.items.push_back(a);
    }
    return s;
}

ReflectionReport report_of(
    const std::vector<std::tuple<std::string, std::string, double, MergeStatus>>& rows) {
    ReflectionReport r;
    for (const auto& [q, v, c, st] : rows) {
        ReflectionEntry e;
        e.question = q;
        e.value = v;
        e.confidence = c;
        e.status = st;
        r.entries.push_back(e);
    }
    return r;
}

void criterion_reflection() {
    EngineConfig cfg = default_engine_config();

    // The scripted confidence drop fires exactly one reflection pass.
    CollectSink sink;
    const EvalReport drop =
        evaluate(kRoot + "/data/reflect1", cfg, BackendKind::mock, &sink);
    expect(drop.episodes == 1 && drop.answered == 1, "drop episode did not answer");
    expect(drop.rows[0].reflections == 1,
           "expected exactly one reflection, got " +
               std::to_string(drop.rows[0].reflections));
    int reflect_events = 0;
    for (const TraceEvent& e : sink.events)
        if (e.event == "reflect") ++reflect_events;
    expect(reflect_events == 1, "reflect event count is not 1");

    // Monotone confidence trajectories never trigger one.
    const EvalReport monotone =
        evaluate(kRoot + "/data/suite10", cfg, BackendKind::mock);
    for (const EpisodeRow& row : monotone.rows)
        expect(row.reflections == 0,
               "monotone episode " + row.id + " triggered a reflection");

    // Unchanged merge entries must echo the prior bit-exactly.
    const double awkward = 0.7000000000000001;  // != 0.7 in binary
    const SubAnswerState prior =
        state_of({{"q1", "red bus", awkward}, {"q2", "?", 0.0}});
    const SubAnswerState same = merge_reflection(
        prior,
        report_of({{"q1", "red bus", awkward, MergeStatus::unchanged},
                   {"q2", "?", 0.0, MergeStatus::unchanged}}),
        false);
    expect(same.items[0].value == "red bus" && same.items[0].confidence == awkward,
           "unchanged entry not preserved bit-exactly");

    bool threw = false;
    try {
        merge_reflection(
            prior, report_of({{"q1", "red bus", 0.7, MergeStatus::unchanged}}),
            false);
    } catch (const MergeError&) {
        threw = true;
    }
    expect(threw, "an inexact unchanged echo must raise MergeError");
}

// ---------------------------------------------------------------------------
// 10. Prompt fidelity: byte-exact templates, exactly-parsed worked replies.
// ---------------------------------------------------------------------------

void criterion_prompts() {
    const std::vector<std::pair<TemplateId, std::string>> ids = {
        {TemplateId::part1, "part1.txt"},       {TemplateId::part2, "part2.txt"},
        {TemplateId::part3, "part3.txt"},       {TemplateId::part4, "part4.txt"},
        {TemplateId::part5, "part5.txt"},       {TemplateId::final_answer, "final.txt"},
    };
    for (const auto& [id, file] : ids)
        expect(template_text(id) == slurp(kRoot + "/assets/prompts/" + file),
               "template differs from assets/prompts/" + file);

    // The question decomposition example yields the four typed sub-questions.
    const SubQuestionSet subqs =
        parse_part2(slurp(kRoot + "/tests/fixtures/part2_road_width.json"));
    expect(subqs.items.size() == 4, "expected 4 sub-questions");
    expect(subqs.items[0].type == SubQuestionType::object &&
               subqs.items[1].type == SubQuestionType::temporal_change &&
               subqs.items[2].type == SubQuestionType::spatial_relation &&
               subqs.items[3].type == SubQuestionType::other,
           "sub-question types");

    // The progress-75 state update example: exact values, rho exactly 3/4.
    const SubAnswerState next =
        parse_part4(slurp(kRoot + "/tests/fixtures/part4_progress75.json"),
                    SubAnswerState::initial(subqs), false);
    expect(next.items[0].value == "yes" && next.items[0].confidence == 0.95,
           "first sub-answer");
    expect(next.items[2].value == "?" && next.items[2].confidence == 0.0,
           "unresolved sub-answer");
    expect(next.rho() == 0.75, "rho is not exactly 0.75");
    expect(next.estimated_progress_advisory == 75, "advisory progress");

    // The painting reflection example: trailing comma forces the repair
    // path, three entries upgrade 0.00 -> 0.95, merged state completes.
    const std::string raw = slurp(kRoot + "/tests/fixtures/part5_painting.json");
    expect(json::parse(raw, nullptr, false).is_discarded(),
           "fixture should not parse strictly");
    const ReflectionReport report = parse_part5(raw);
    expect(report.entries.size() == 3, "expected 3 reflection entries");
    for (const ReflectionEntry& e : report.entries)
        expect(e.status == MergeStatus::upgraded && e.confidence == 0.95,
               "entry is not an upgrade to 0.95");
    expect(report.estimated_progress == 95, "estimated progress is not 95");

    const SubAnswerState prior = state_of({
        {"is there a painting visible on the wall?", "?", 0.0},
        {"is text readable on the painting?", "?", 0.0},
        {"is the camera focused on the lower left corner of the wall while showing the painting?",
         "?", 0.0},
    });
    expect(merge_reflection(prior, report, false).rho() == 1.0,
           "merged painting state does not complete");
}

// ---------------------------------------------------------------------------
// 11. Extraction totality: value or SchemaError, never a crash.
// ---------------------------------------------------------------------------

void criterion_extraction() {
    const std::vector<std::string> corpus = {
        "",
        "plain refusal text",
        "{",
        "}",
        "{\"a\": }",
        "{\"a\" 1}",
        "[1, 2, 3]",
        "\"just a string\"",
        "null",
        "{\"a\": 1",
        "{{{{",
        "``````",
        "```json\n```",
        "{\"a\": 0x1}",
        "{'a': 1}",
        "{\"a\": 1} extra } ",
        "{\"a\": ...}",
        "{\"a\": \"unterminated}",
        "NaN",
        "{:}",
    };
    expect(corpus.size() == 20, "corpus size");

    const auto probe = [](const std::string& text) {
        try {
            const std::string out = extract_json(text);
            const json doc = json::parse(out, nullptr, false);
            expect(!doc.is_discarded() && doc.is_object(),
                   "extraction returned a non-object for: " + text);
            expect(extract_json(out) == out, "extraction is not idempotent");
            return true;
        } catch (const SchemaError&) {
            return false;
        }
        // Any other exception type escapes and fails the criterion.
    };

    for (const std::string& text : corpus) probe(text);

    std::mt19937 rng(20260817);
    const std::vector<std::string> tokens = {
        "{", "}", "[", "]", ",", ":", "\"", "\\", "```", "```json\n",
        "{\"a\": 1}", "{\"b\": [1, 2,]}", "\"key\"", "true", "false", "null",
        "3.5", "-7", "prose with spaces", "\n", "\t", "{\"nested\": {\"x\":",
        "\"unterminated", "\xc3\xa9", "<|Question|>", "0:07:46",
    };
    std::uniform_int_distribution<std::size_t> pick(0, tokens.size() - 1);
    std::uniform_int_distribution<int> len(0, 12);

    int extracted = 0, rejected = 0;
    for (int iter = 0; iter < 10000; ++iter) {
        std::string text;
        const int n = len(rng);
        for (int i = 0; i < n; ++i) text += tokens[pick(rng)];
        (probe(text) ? extracted : rejected) += 1;
    }
    expect(extracted + rejected == 10000, "fuzz case count");
    expect(extracted > 100 && rejected > 100, "fuzz corpus is degenerate");
}

// ---------------------------------------------------------------------------

struct Criterion {
    int id;
    const char* label;
    double seconds_limit;  // 0 = unlimited
    std::function<void()> run;
};

}  // namespace

int main() {
    const std::vector<Criterion> criteria = {
        {1, "pooling equals the scatter oracle for all n<=32, m<=n, d<=4 (tol 1e-12)",
         kPoolSecondsLimit, criterion_pooling},
        {2, "level sizes are (3,2,1)*N_vc and depth follows the insertion table",
         0.0, criterion_schedule},
        {3, "build_mask equals the rule interpreter on 200 random configs",
         kMaskSecondsLimit, criterion_masks},
        {4, "position ids equal the transcribed algorithm on 50 random grids",
         0.0, criterion_positions},
        {5, "compression ratio is exactly 0.0625 (16-frame) and 1/32 (live)",
         0.0, criterion_budgets},
        {6, "integration loss within 1e-9 of oracle; gradient within 1e-4 of FD",
         0.0, criterion_integration},
        {7, "attention is exactly isolated; incremental forward is bitwise equal",
         0.0, criterion_isolation},
        {8, "10-episode suite: all answers at completion, trace-stable at w_par 1 and 3",
         kSuiteSecondsLimit, criterion_suite},
        {9, "drop suite reflects exactly once; monotone never; merges echo bit-exactly",
         0.0, criterion_reflection},
        {10, "templates byte-match assets; worked replies parse to exact states",
         0.0, criterion_prompts},
        {11, "extract_json yields an object or SchemaError on 10,020 hostile replies",
         0.0, criterion_extraction},
    };

    int failures = 0;
    for (const Criterion& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        std::string error;
        try {
            c.run();
        } catch (const std::exception& e) {
            error = e.what();
        } catch (...) {
            error = "unknown exception";
        }
        const double seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                .count();
        if (error.empty() && c.seconds_limit > 0.0 && seconds > c.seconds_limit) {
            std::ostringstream ss;
            ss << "exceeded the " << c.seconds_limit << "s budget";
            error = ss.str();
        }

        std::ostringstream line;
        line.setf(std::ios::fixed);
        line.precision(2);
        line << (error.empty() ? "PASS" : "FAIL") << "  criterion " << c.id
             << (c.id < 10 ? "  " : " ") << c.label << "  (" << seconds << "s)";
        if (!error.empty()) line << "  -- " << error;
        std::cout << line.str() << "\n";
        if (!error.empty()) ++failures;
    }

    if (failures == 0)
        std::cout << "acceptance: all " << criteria.size() << " criteria hold\n";
    else
        std::cout << "acceptance: " << failures << " criteria FAILED\n";
    return failures;
}
