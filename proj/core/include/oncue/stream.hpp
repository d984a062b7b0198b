#ifndef ONCUE_STREAM_HPP
#define ONCUE_STREAM_HPP

#include <cstddef>
#include <string>
#include <vector>

#include "oncue/matrix.hpp"

namespace oncue {

enum class ClipMode { caption, feature };

// One ingested segment of the stream. Exactly one of caption_gt / frames is
// populated, matching the two record shapes of the stream file format.
struct Clip {
    int index = 0;        // 1-based position in the stream
    double t_start = 0.0; // seconds; the clip covers the half-open [t_start, t_end)
    double t_end = 0.0;
    ClipMode mode = ClipMode::caption;
    std::string caption_gt;      // caption mode
    std::vector<Matrix> frames;  // feature mode: one tokens_per_frame x d matrix per frame

    std::size_t frame_count() const { return frames.size(); }
    std::size_t tokens_per_frame() const {
        return frames.empty() ? 0 : frames.front().rows;
    }
    std::size_t token_count() const {
        return frames.size() * tokens_per_frame();
    }
    // All frames stacked into one (frame_count * tokens_per_frame) x d matrix.
    Matrix tokens() const;

    friend bool operator==(const Clip&, const Clip&) = default;
};

struct ClipStream {
    ClipMode mode = ClipMode::caption;
    std::vector<Clip> clips;
    std::size_t tokens_per_frame = 0;  // feature mode; 0 in caption mode
    std::size_t dim = 0;               // feature mode; 0 in caption mode

    double t_begin() const { return clips.empty() ? 0.0 : clips.front().t_start; }
    double t_end() const { return clips.empty() ? 0.0 : clips.back().t_end; }

    friend bool operator==(const ClipStream&, const ClipStream&) = default;
};

struct QueryEpisode {
    std::string query;
    double t_q = 0.0;     // seconds at which the query arrives
    double t_star = 0.0;  // seconds at which evidence is first sufficient
    std::string answer_gt;
    std::vector<std::string> options;  // optional multiple-choice options
    bool unresolvable = false;         // optional marker; loaders default it to false

    friend bool operator==(const QueryEpisode&, const QueryEpisode&) = default;
};

// Timing outcome of one episode. t_r and delta are meaningful only when
// answered is true.
struct TimingResult {
    bool answered = false;
    double t_r = 0.0;
    double delta = 0.0;

    friend bool operator==(const TimingResult&, const TimingResult&) = default;
};

// Stream files are JSONL, one clip per line; mixing caption and feature
// records in one file is rejected. Throws ParseError (with the 1-based line
// number) and ContiguityError.
ClipStream load_stream(const std::string& path);
ClipStream parse_stream(const std::string& text);
std::string serialize_stream(const ClipStream& stream);

// Episode files are a single JSON object.
QueryEpisode load_episode(const std::string& path);
QueryEpisode parse_episode(const std::string& text);
std::string serialize_episode(const QueryEpisode& episode);

// 1-based index of the unique clip whose [t_start, t_end) contains t.
// Throws OutOfRangeError when t falls outside the stream's covered interval.
int clip_at(const ClipStream& stream, double t);

// |t_r - t_star|. Both arguments must be finite and non-negative.
double timing_delta(double t_r, double t_star);
TimingResult make_timing(double t_r, double t_star);

}  // namespace oncue

#endif  // ONCUE_STREAM_HPP
