// Stream-model checks: JSONL clip parsing with its contiguity and mode
// invariants, episode files, clip lookup over half-open intervals, and the
// timing metric, including serialize/parse round trips.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <string>

#include "oncue/errors.hpp"
#include "oncue/rng.hpp"
#include "oncue/stream.hpp"

using namespace oncue;

namespace {

std::string caption_line(int index, double t0, double t1, const std::string& text) {
    return "{\"index\":" + std::to_string(index) + ",\"t_start\":" +
           std::to_string(t0) + ",\"t_end\":" + std::to_string(t1) +
           ",\"caption_gt\":\"" + text + "\"}\n";
}

}  // namespace

TEST_CASE("two caption clips parse into an ordered stream") {
    const std::string text =
        caption_line(1, 0.0, 2.0, "a street") + caption_line(2, 2.0, 4.0, "a bus");
    const ClipStream s = parse_stream(text);
    CHECK(s.mode == ClipMode::caption);
    REQUIRE(s.clips.size() == 2);
    CHECK(s.clips[0].caption_gt == "a street");
    CHECK(s.clips[1].index == 2);
    CHECK(s.t_begin() == 0.0);
    CHECK(s.t_end() == 4.0);
}

TEST_CASE("a gap between clips is a contiguity error") {
    const std::string text =
        caption_line(1, 0.0, 2.0, "a") + caption_line(2, 3.0, 4.0, "b");
    CHECK_THROWS_AS(parse_stream(text), ContiguityError);
}

TEST_CASE("an overlap between clips is a contiguity error") {
    const std::string text =
        caption_line(1, 0.0, 2.0, "a") + caption_line(2, 1.5, 4.0, "b");
    CHECK_THROWS_AS(parse_stream(text), ContiguityError);
}

TEST_CASE("parse errors carry the 1-based line number") {
    const std::string text = caption_line(1, 0.0, 2.0, "a") + "{oops\n";
    try {
        parse_stream(text);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line == 2);
    }
}

TEST_CASE("out-of-order indices and mixed modes are rejected") {
    CHECK_THROWS_AS(parse_stream(caption_line(2, 0.0, 2.0, "a")), ParseError);
    CHECK_THROWS_AS(
        parse_stream(caption_line(1, 0.0, 2.0, "a") + caption_line(1, 2.0, 4.0, "b")),
        ParseError);
    const std::string mixed =
        caption_line(1, 0.0, 2.0, "a") +
        "{\"index\":2,\"t_start\":2.0,\"t_end\":4.0,\"frames\":[[[0.5]]]}\n";
    CHECK_THROWS_AS(parse_stream(mixed), ParseError);
    CHECK_THROWS_AS(parse_stream(""), ParseError);  // no clips at all
}

TEST_CASE("feature-mode streams validate shapes and round-trip") {
    // 2 clips x 3 frames x 2 tokens/frame x d=2.
    std::string text;
    for (int i = 1; i <= 2; ++i) {
        text += "{\"index\":" + std::to_string(i) + ",\"t_start\":" +
                std::to_string(2.0 * (i - 1)) + ",\"t_end\":" +
                std::to_string(2.0 * i) + ",\"frames\":[";
        for (int f = 0; f < 3; ++f) {
            if (f) text += ",";
            text += "[[0.5,1.5],[2.5,3.5]]";
        }
        text += "]}\n";
    }
    const ClipStream s = parse_stream(text);
    CHECK(s.mode == ClipMode::feature);
    CHECK(s.tokens_per_frame == 2);
    CHECK(s.dim == 2);
    REQUIRE(s.clips.size() == 2);
    CHECK(s.clips[0].frame_count() == 3);
    CHECK(s.clips[0].token_count() == 6);
    const Matrix stacked = s.clips[0].tokens();
    CHECK(stacked.rows == 6);
    CHECK(stacked.cols == 2);
    CHECK(stacked.at(0, 0) == 0.5);
    CHECK(stacked.at(1, 1) == 3.5);

    // Round trip through the serializer is exact.
    CHECK(parse_stream(serialize_stream(s)) == s);

    // A clip whose frame shape differs from the stream's is rejected.
    const std::string bad =
        "{\"index\":1,\"t_start\":0.0,\"t_end\":2.0,\"frames\":[[[0.5,1.5]]]}\n"
        "{\"index\":2,\"t_start\":2.0,\"t_end\":4.0,\"frames\":[[[0.5]]]}\n";
    CHECK_THROWS_AS(parse_stream(bad), ParseError);
}

TEST_CASE("caption streams round-trip through the serializer") {
    const ClipStream s = parse_stream(caption_line(1, 0.0, 2.5, "first") +
                                      caption_line(2, 2.5, 3.75, "second"));
    CHECK(parse_stream(serialize_stream(s)) == s);
}

TEST_CASE("episode files parse and round-trip") {
    const std::string text =
        "{\"query\":\"What happens?\",\"t_q\":1.0,\"t_star\":7.5,"
        "\"answer_gt\":\"A bus stops.\",\"options\":[\"A\",\"B\"]}";
    const QueryEpisode e = parse_episode(text);
    CHECK(e.query == "What happens?");
    CHECK(e.t_q == 1.0);
    CHECK(e.t_star == 7.5);
    CHECK(e.answer_gt == "A bus stops.");
    REQUIRE(e.options.size() == 2);
    CHECK_FALSE(e.unresolvable);
    CHECK(parse_episode(serialize_episode(e)) == e);

    CHECK_THROWS_AS(parse_episode("{\"query\":\"x\"}"), ParseError);
    CHECK_THROWS_AS(
        parse_episode("{\"query\":\"x\",\"t_q\":-1.0,\"t_star\":0.0,"
                      "\"answer_gt\":\"y\"}"),
        ParseError);  // t_q must be >= 0
}

TEST_CASE("clip_at resolves half-open intervals") {
    const ClipStream s = parse_stream(caption_line(1, 0.0, 2.0, "a") +
                                      caption_line(2, 2.0, 4.0, "b"));
    CHECK(clip_at(s, 2.0) == 2);  // boundary belongs to the later clip
    CHECK(clip_at(s, 1.9) == 1);
    CHECK(clip_at(s, 0.0) == 1);
    CHECK_THROWS_AS(clip_at(s, 4.0), OutOfRangeError);
    CHECK_THROWS_AS(clip_at(s, -0.5), OutOfRangeError);
}

TEST_CASE("clip_at is non-decreasing and total on [begin, end)") {
    const ClipStream s = parse_stream(caption_line(1, 0.0, 1.5, "a") +
                                      caption_line(2, 1.5, 2.25, "b") +
                                      caption_line(3, 2.25, 6.0, "c"));
    int prev = 1;
    for (double t = 0.0; t < 6.0; t += 0.01) {
        const int idx = clip_at(s, t);
        CHECK(idx >= prev);
        prev = idx;
    }
    CHECK(prev == 3);
}

TEST_CASE("timing delta worked examples") {
    CHECK(timing_delta(48.0, 45.0) == 3.0);
    CHECK(timing_delta(45.0, 45.0) == 0.0);
    CHECK(timing_delta(10.0, 45.0) == 35.0);  // early answers penalized too

    const TimingResult r = make_timing(48.0, 45.0);
    CHECK(r.answered);
    CHECK(r.t_r == 48.0);
    CHECK(r.delta == 3.0);

    CHECK_THROWS_AS(timing_delta(-1.0, 0.0), OutOfRangeError);
    CHECK_THROWS_AS(timing_delta(0.0, std::nan("")), NonFiniteError);
}

TEST_CASE("timing delta is symmetric and satisfies the triangle inequality") {
    Rng rng(13);
    for (int i = 0; i < 500; ++i) {
        const double a = rng.uniform(0.0, 100.0);
        const double b = rng.uniform(0.0, 100.0);
        const double c = rng.uniform(0.0, 100.0);
        CHECK(timing_delta(a, b) == timing_delta(b, a));
        CHECK(timing_delta(a, c) <= timing_delta(a, b) + timing_delta(b, c) + 1e-12);
    }
}
