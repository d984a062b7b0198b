#include "oncue/controller.hpp"

#include <cmath>
#include <utility>

#include <nlohmann/json.hpp>

#include "oncue/errors.hpp"

namespace oncue {

namespace {

using ojson = nlohmann::ordered_json;

ojson event_json(const TraceEvent& e) {
    ojson payload = ojson::parse(e.payload_json, nullptr, false);
    if (payload.is_discarded()) payload = ojson::object();
    ojson doc;
    doc["t"] = e.t;
    doc["event"] = e.event;
    doc["clip"] = e.clip;
    doc["rho"] = e.rho;
    doc["confidences"] = e.confidences;
    doc["payload"] = std::move(payload);
    return doc;
}

}  // namespace

std::string TraceEvent::to_json_string() const { return event_json(*this).dump(); }

void NdjsonSink::emit(const TraceEvent& event) {
    out_ << event.to_json_string() << "\n";
    out_.flush();
}

std::string DecisionTrace::to_json_string() const {
    ojson events = ojson::array();
    for (const auto& e : this->events) events.push_back(event_json(e));
    ojson doc;
    doc["events"] = std::move(events);
    doc["answered"] = timing.answered;
    if (timing.answered) {
        doc["t_r"] = timing.t_r;
        doc["delta"] = timing.delta;
        doc["answer"] = answer_text;
    } else {
        doc["t_r"] = nullptr;
        doc["delta"] = nullptr;
        doc["answer"] = nullptr;
    }
    doc["backend_calls"] = backend_calls;
    doc["reflections"] = reflections;
    return doc.dump(2);
}

EpisodeController::EpisodeController(std::shared_ptr<ReasonerBackend> backend,
                                     ControllerConfig cfg, TelemetrySink* sink)
    : backend_(std::move(backend)), cfg_(cfg), sink_(sink) {
    if (!backend_) throw ConfigError("controller needs a backend");
    if (cfg_.w_par < 1) throw ConfigError("w_par must be >= 1");
    if (cfg_.w_low < 1) throw ConfigError("w_low must be >= 1");
    if (!(cfg_.theta_drop > 0.0)) throw ConfigError("theta_drop must be positive");
    if (cfg_.caption_history_cap < 1) {
        throw ConfigError("caption_history_cap must be >= 1");
    }
}

EpisodeController::~EpisodeController() { drain_prefetch(); }

ReasonerResponse EpisodeController::invoke_counted(TemplateId id, int clip,
                                                   const std::string& prompt) {
    ReasonerRequest req;
    req.template_id = id;
    req.prompt = prompt;
    req.clip_index = clip;
    ReasonerResponse resp = backend_->invoke(req);
    ++trace_.backend_calls;
    return resp;
}

void EpisodeController::emit(double t, const std::string& event, int clip,
                             const std::string& payload) {
    TraceEvent e;
    e.t = t;
    e.event = event;
    e.clip = clip;
    e.rho = state_.rho();
    e.confidences = state_.confidences();
    e.payload_json = payload;
    trace_.events.push_back(e);
    if (sink_) sink_->emit(e);
}

std::string EpisodeController::video_payload(const Clip& clip) const {
    if (clip.mode == ClipMode::caption) return clip.caption_gt;
    return "[[clip " + std::to_string(clip.index) + ": " +
           std::to_string(clip.frame_count()) + " frames x " +
           std::to_string(clip.tokens_per_frame()) + " tokens, dim " +
           std::to_string(clip.frames.empty() ? 0 : clip.frames.front().cols) + "]]";
}

void EpisodeController::open(const ClipStream& stream, const QueryEpisode& episode) {
    if (opened_) throw ConfigError("episode already opened");
    if (stream.clips.empty()) throw SizeError("cannot run an empty stream");
    if (episode.query.empty()) throw SizeError("episode query must be non-empty");
    stream_ = stream;
    episode_ = episode;
    opened_ = true;

    // Part-1: captioning instructions. One retry on schema trouble; the
    // episode cannot proceed without instructions, so a second failure is
    // fatal for the episode.
    ReasonerResponse r1 = invoke_counted(TemplateId::part1, 0,
                                         render_part1(episode_.query));
    try {
        instructions_ = parse_part1(r1.raw_text, episode_.query);
    } catch (const SchemaError&) {
        r1 = invoke_counted(TemplateId::part1, 0, render_part1(episode_.query));
        instructions_ = parse_part1(r1.raw_text, episode_.query);
    }
    {
        ojson payload;
        payload["requirements"] = instructions_.requirements;
        emit(episode_.t_q, "part1", 0, payload.dump());
    }

    // Part-2: question decomposition.
    ReasonerResponse r2 = invoke_counted(TemplateId::part2, 0,
                                         render_part2(episode_.query));
    try {
        subqs_ = parse_part2(r2.raw_text);
    } catch (const SchemaError&) {
        r2 = invoke_counted(TemplateId::part2, 0, render_part2(episode_.query));
        subqs_ = parse_part2(r2.raw_text);
    }
    state_ = SubAnswerState::initial(subqs_);
    history_.clear();
    history_.push_back(state_);
    {
        ojson items = ojson::array();
        for (const auto& q : subqs_.items) {
            items.push_back({{"type", to_string(q.type)}, {"question", q.question}});
        }
        ojson payload;
        payload["subquestions"] = std::move(items);
        emit(episode_.t_q, "part2", 0, payload.dump());
    }
}

void EpisodeController::fill_prefetch_window() {
    while (static_cast<int>(prefetch_.size()) < cfg_.w_par &&
           next_prefetch_ < static_cast<int>(stream_.clips.size())) {
        const Clip& clip = stream_.clips[static_cast<std::size_t>(next_prefetch_)];
        ReasonerRequest req;
        req.template_id = TemplateId::part3;
        req.prompt = render_part3(instructions_.requirements,
                                  format_clip_window(clip.t_start, clip.t_end),
                                  video_payload(clip));
        req.clip_index = clip.index;
        auto backend = backend_;
        prefetch_.push_back(Prefetch{
            clip.index,
            std::async(std::launch::async,
                       [backend, req] { return backend->invoke(req); })});
        ++next_prefetch_;
    }
}

ReasonerResponse EpisodeController::take_prefetched(int clip_index) {
    if (prefetch_.empty() || prefetch_.front().clip_index != clip_index) {
        throw IndexError("prefetch queue out of order");
    }
    ReasonerResponse resp = prefetch_.front().future.get();
    prefetch_.pop_front();
    ++trace_.backend_calls;  // the result enters the trace
    return resp;
}

void EpisodeController::drain_prefetch() {
    // Discarded results never enter the trace and are not counted.
    for (auto& p : prefetch_) {
        try {
            p.future.get();
        } catch (...) {
        }
    }
    prefetch_.clear();
}

void EpisodeController::step() {
    if (!opened_) throw ConfigError("episode not opened");
    if (done_ || clip_pos_ >= static_cast<int>(stream_.clips.size())) {
        throw StreamEnded("no clips left to process");
    }
    try {
        fill_prefetch_window();
        const Clip& clip = stream_.clips[static_cast<std::size_t>(clip_pos_)];
        const SubAnswerState before = state_;

        // Part-3: clip caption.
        ClipCaption caption;
        bool have_caption = false;
        {
            ReasonerResponse resp = take_prefetched(clip.index);
            try {
                caption = parse_part3(resp.raw_text, clip.t_start, clip.t_end, clip.index);
                have_caption = true;
            } catch (const SchemaError&) {
                resp = invoke_counted(
                    TemplateId::part3, clip.index,
                    render_part3(instructions_.requirements,
                                 format_clip_window(clip.t_start, clip.t_end),
                                 video_payload(clip)));
                try {
                    caption = parse_part3(resp.raw_text, clip.t_start, clip.t_end,
                                          clip.index);
                    have_caption = true;
                } catch (const SchemaError&) {
                    // Twice malformed: the clip contributes nothing.
                }
            }
        }
        if (!have_caption) {
            emit(clip.t_end, "wait", clip.index, "{\"skipped\":\"caption_schema\"}");
            ++clip_pos_;
            if (clip_pos_ == static_cast<int>(stream_.clips.size())) done_ = true;
            return;
        }
        {
            ojson payload;
            payload["clip_timestamp"] = caption.clip_timestamp;
            payload["caption"] = caption.caption;
            emit(clip.t_end, "caption", clip.index, payload.dump());
        }

        // Part-4: sub-answer update.
        bool have_update = false;
        {
            ReasonerResponse resp = invoke_counted(
                TemplateId::part4, clip.index,
                render_part4(episode_.query, state_, caption.caption));
            try {
                state_ = parse_part4(resp.raw_text, state_, cfg_.binary_gate);
                have_update = true;
            } catch (const SchemaError&) {
                resp = invoke_counted(
                    TemplateId::part4, clip.index,
                    render_part4(episode_.query, state_, caption.caption));
                try {
                    state_ = parse_part4(resp.raw_text, state_, cfg_.binary_gate);
                    have_update = true;
                } catch (const SchemaError&) {
                }
            }
        }
        if (!have_update) {
            emit(clip.t_end, "wait", clip.index, "{\"skipped\":\"update_schema\"}");
            ++clip_pos_;
            if (clip_pos_ == static_cast<int>(stream_.clips.size())) done_ = true;
            return;
        }
        history_.push_back(state_);
        {
            const int local = static_cast<int>(std::llround(100.0 * state_.rho()));
            ojson payload;
            payload["estimated_progress_advisory"] = state_.estimated_progress_advisory;
            payload["advisory_mismatch"] = state_.estimated_progress_advisory != local;
            emit(clip.t_end, "update", clip.index, payload.dump());
        }

        // Part-5: reflection when confidences drop sharply or sit low.
        if (reflection_trigger(history_, ReflectionConfig{cfg_.theta_drop, cfg_.w_low})) {
            ReasonerResponse resp = invoke_counted(
                TemplateId::part5, clip.index,
                render_part5(episode_.query, state_, caption_history_));
            bool have_report = false;
            ReflectionReport report;
            try {
                report = parse_part5(resp.raw_text);
                have_report = true;
            } catch (const SchemaError&) {
                resp = invoke_counted(
                    TemplateId::part5, clip.index,
                    render_part5(episode_.query, state_, caption_history_));
                try {
                    report = parse_part5(resp.raw_text);
                    have_report = true;
                } catch (const SchemaError&) {
                    // Reflection skipped; the part-4 state stands.
                }
            }
            if (have_report) {
                state_ = merge_reflection(state_, report, cfg_.binary_gate);
                history_.back() = state_;  // the clip's final state
                ++trace_.reflections;
                ojson statuses = ojson::object();
                for (const auto& entry : report.entries) {
                    statuses[entry.question] = to_string(entry.status);
                }
                ojson payload;
                payload["causal_chain"] = report.causal_chain;
                payload["statuses"] = std::move(statuses);
                payload["estimated_progress_advisory"] = report.estimated_progress;
                emit(clip.t_end, "reflect", clip.index, payload.dump());
            } else {
                emit(clip.t_end, "wait", clip.index, "{\"skipped\":\"reflect_schema\"}");
            }
        }

        // Captions enter part-5 context only at confidence-change points.
        if (state_.confidences() != before.confidences()) {
            caption_history_.push_back(caption);
            while (static_cast<int>(caption_history_.size()) > cfg_.caption_history_cap) {
                caption_history_.erase(caption_history_.begin());
            }
        }

        if (state_.rho() == 1.0) {
            // Final answer: composed via one backend call over the resolved
            // state. Unrecoverable if twice malformed.
            ReasonerResponse resp = invoke_counted(
                TemplateId::final_answer, clip.index,
                render_final(episode_.query, state_));
            try {
                trace_.answer_text = parse_final(resp.raw_text);
            } catch (const SchemaError&) {
                resp = invoke_counted(TemplateId::final_answer, clip.index,
                                      render_final(episode_.query, state_));
                trace_.answer_text = parse_final(resp.raw_text);
            }
            answered_ = true;
            done_ = true;
            trace_.timing = make_timing(clip.t_end, episode_.t_star);
            {
                ojson payload;
                payload["answer"] = trace_.answer_text;
                emit(clip.t_end, "answer", clip.index, payload.dump());
            }
            drain_prefetch();
            ++clip_pos_;
            return;
        }

        emit(clip.t_end, "wait", clip.index, "{}");
        ++clip_pos_;
        if (clip_pos_ == static_cast<int>(stream_.clips.size())) done_ = true;
    } catch (...) {
        drain_prefetch();
        throw;
    }
}

DecisionTrace EpisodeController::finish() {
    if (!opened_) throw ConfigError("episode not opened");
    drain_prefetch();
    if (!finished_) {
        finished_ = true;
        if (!answered_) {
            trace_.timing = TimingResult{};  // unanswered: t_r undefined
            emit(stream_.t_end(), "unresolved",
                 stream_.clips.empty() ? 0 : stream_.clips.back().index, "{}");
        }
    }
    return trace_;
}

DecisionTrace EpisodeController::run_episode(const ClipStream& stream,
                                             const QueryEpisode& episode) {
    open(stream, episode);
    while (!done_) step();
    return finish();
}

}  // namespace oncue
