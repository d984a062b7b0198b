#ifndef ONCUE_CONTROLLER_HPP
#define ONCUE_CONTROLLER_HPP

#include <deque>
#include <future>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "oncue/backend.hpp"
#include "oncue/protocol.hpp"
#include "oncue/stream.hpp"

namespace oncue {

struct ControllerConfig {
    double theta_drop = 0.3;  // reflection drop depth
    int w_low = 2;            // reflection low-persistence window
    int w_par = 1;            // part-3 prefetch window (>= 1)
    bool binary_gate = false; // ablation: confidences quantized to {0, 1}
    int caption_history_cap = kCaptionHistoryCap;
};

// One telemetry event. payload_json is always a serialized JSON object.
// Wall-clock latencies never enter events, so traces are comparable across
// runs and prefetch widths.
struct TraceEvent {
    double t = 0.0;
    std::string event;  // part1|part2|caption|update|reflect|wait|answer|unresolved
    int clip = 0;       // 0 for episode-level events
    double rho = 0.0;
    std::vector<double> confidences;
    std::string payload_json = "{}";

    std::string to_json_string() const;  // one NDJSON line, no trailing newline
};

class TelemetrySink {
  public:
    virtual ~TelemetrySink() = default;
    virtual void emit(const TraceEvent& event) = 0;
};

// Writes one JSON object per line.
class NdjsonSink final : public TelemetrySink {
  public:
    explicit NdjsonSink(std::ostream& out) : out_(out) {}
    void emit(const TraceEvent& event) override;

  private:
    std::ostream& out_;
};

struct DecisionTrace {
    std::vector<TraceEvent> events;
    TimingResult timing;
    std::string answer_text;
    int backend_calls = 0;  // calls whose results entered the trace
    int reflections = 0;

    std::string to_json_string() const;  // canonical form, wall-clock free
};

// Drives one episode through the five-part protocol: parts 1-2 once at t_q,
// then per clip part-3 captioning, part-4 state update, reflection when
// triggered, and the final answer call once every sub-question clears the
// 0.85 bar. Part-3 calls for up to w_par consecutive clips run concurrently;
// merges stay in clip order, so the trace is independent of w_par.
class EpisodeController {
  public:
    EpisodeController(std::shared_ptr<ReasonerBackend> backend, ControllerConfig cfg,
                      TelemetrySink* sink = nullptr);
    ~EpisodeController();

    EpisodeController(const EpisodeController&) = delete;
    EpisodeController& operator=(const EpisodeController&) = delete;

    // Runs parts 1-2. Must be called exactly once per episode.
    void open(const ClipStream& stream, const QueryEpisode& episode);

    // Processes the next clip end to end; throws StreamEnded when the episode
    // is already decided or the stream is exhausted.
    void step();

    bool done() const { return done_; }
    bool answered() const { return answered_; }

    // Joins leftover prefetches, emits the unresolved event when the stream
    // ran out, and returns the trace.
    DecisionTrace finish();

    // open + step-to-completion + finish.
    DecisionTrace run_episode(const ClipStream& stream, const QueryEpisode& episode);

    const SubAnswerState& state() const { return state_; }

  private:
    struct Prefetch {
        int clip_index = 0;
        std::future<ReasonerResponse> future;
    };

    ReasonerResponse invoke_counted(TemplateId id, int clip, const std::string& prompt);
    void fill_prefetch_window();
    ReasonerResponse take_prefetched(int clip_index);
    void drain_prefetch();
    void emit(double t, const std::string& event, int clip, const std::string& payload);
    std::string video_payload(const Clip& clip) const;

    std::shared_ptr<ReasonerBackend> backend_;
    ControllerConfig cfg_;
    TelemetrySink* sink_ = nullptr;

    ClipStream stream_;
    QueryEpisode episode_;
    CaptionInstructions instructions_;
    SubQuestionSet subqs_;
    SubAnswerState state_;
    std::vector<SubAnswerState> history_;
    std::vector<ClipCaption> caption_history_;

    std::deque<Prefetch> prefetch_;
    int next_prefetch_ = 0;  // 0-based index into stream_.clips
    int clip_pos_ = 0;       // clips fully processed
    bool opened_ = false;
    bool answered_ = false;
    bool done_ = false;
    bool finished_ = false;

    DecisionTrace trace_;
};

}  // namespace oncue

#endif  // ONCUE_CONTROLLER_HPP
