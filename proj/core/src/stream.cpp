#include "oncue/stream.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "oncue/errors.hpp"

namespace oncue {

using nlohmann::json;

Matrix Clip::tokens() const {
    const std::size_t tpf = tokens_per_frame();
    Matrix out(frames.size() * tpf, frames.empty() ? 0 : frames.front().cols);
    std::size_t r = 0;
    for (const Matrix& f : frames)
        for (std::size_t i = 0; i < f.rows; ++i, ++r)
            for (std::size_t c = 0; c < f.cols; ++c) out.at(r, c) = f.at(i, c);
    return out;
}

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

double require_number(const json& j, const char* key, std::size_t line) {
    if (!j.contains(key) || !j[key].is_number())
        throw ParseError(std::string("missing or non-numeric \"") + key + "\"", line);
    return j[key].get<double>();
}

Clip parse_clip_record(const json& j, std::size_t line) {
    if (!j.is_object()) throw ParseError("clip record is not an object", line);

    Clip clip;
    if (!j.contains("index") || !j["index"].is_number_integer())
        throw ParseError("missing or non-integer \"index\"", line);
    clip.index = j["index"].get<int>();
    if (clip.index < 1) throw ParseError("\"index\" must be >= 1", line);

    clip.t_start = require_number(j, "t_start", line);
    clip.t_end = require_number(j, "t_end", line);
    if (!std::isfinite(clip.t_start) || !std::isfinite(clip.t_end))
        throw ParseError("non-finite clip boundary", line);
    if (!(clip.t_start < clip.t_end))
        throw ParseError("t_start must be < t_end", line);

    const bool has_caption = j.contains("caption_gt");
    const bool has_frames = j.contains("frames");
    if (has_caption == has_frames)
        throw ParseError("exactly one of \"caption_gt\" and \"frames\" must be present",
                         line);

    if (has_caption) {
        if (!j["caption_gt"].is_string())
            throw ParseError("\"caption_gt\" must be a string", line);
        clip.mode = ClipMode::caption;
        clip.caption_gt = j["caption_gt"].get<std::string>();
        return clip;
    }

    clip.mode = ClipMode::feature;
    const json& frames = j["frames"];
    if (!frames.is_array() || frames.empty())
        throw ParseError("\"frames\" must be a non-empty array", line);

    std::size_t tpf = 0, dim = 0;
    for (const json& frame : frames) {
        if (!frame.is_array() || frame.empty())
            throw ParseError("frame must be a non-empty array of token rows", line);
        if (tpf == 0) {
            tpf = frame.size();
            if (!frame[0].is_array() || frame[0].empty())
                throw ParseError("token row must be a non-empty array", line);
            dim = frame[0].size();
        }
        if (frame.size() != tpf)
            throw ParseError("inconsistent tokens_per_frame within clip", line);
        Matrix m(tpf, dim);
        for (std::size_t r = 0; r < tpf; ++r) {
            const json& row = frame[r];
            if (!row.is_array() || row.size() != dim)
                throw ParseError("inconsistent token width within clip", line);
            for (std::size_t c = 0; c < dim; ++c) {
                if (!row[c].is_number())
                    throw ParseError("feature value is not a number", line);
                const double v = row[c].get<double>();
                if (!std::isfinite(v))
                    throw ParseError("non-finite feature value", line);
                m.at(r, c) = v;
            }
        }
        clip.frames.push_back(std::move(m));
    }
    return clip;
}

}  // namespace

ClipStream parse_stream(const std::string& text) {
    ClipStream stream;
    std::istringstream in(text);
    std::string raw;
    std::size_t line_no = 0;
    bool mode_known = false;

    while (std::getline(in, raw)) {
        ++line_no;
        if (raw.find_first_not_of(" \t\r") == std::string::npos) continue;

        json j = json::parse(raw, nullptr, false);
        if (j.is_discarded()) throw ParseError("malformed JSON record", line_no);
        Clip clip = parse_clip_record(j, line_no);

        if (!mode_known) {
            stream.mode = clip.mode;
            mode_known = true;
        } else if (clip.mode != stream.mode) {
            throw ParseError("caption and feature records mixed in one stream", line_no);
        }

        if (clip.index != static_cast<int>(stream.clips.size()) + 1)
            throw ParseError("clip index " + std::to_string(clip.index) +
                                 " out of order (expected " +
                                 std::to_string(stream.clips.size() + 1) + ")",
                             line_no);

        if (clip.mode == ClipMode::feature) {
            if (stream.clips.empty()) {
                stream.tokens_per_frame = clip.tokens_per_frame();
                stream.dim = clip.frames.front().cols;
            } else if (clip.tokens_per_frame() != stream.tokens_per_frame ||
                       clip.frames.front().cols != stream.dim) {
                throw ParseError("feature shape differs from earlier clips", line_no);
            }
        }

        if (!stream.clips.empty()) {
            const Clip& prev = stream.clips.back();
            if (clip.t_start != prev.t_end)
                throw ContiguityError(
                    "clip " + std::to_string(clip.index) + " starts at " +
                    std::to_string(clip.t_start) + " but clip " +
                    std::to_string(prev.index) + " ends at " +
                    std::to_string(prev.t_end));
        }
        stream.clips.push_back(std::move(clip));
    }

    if (stream.clips.empty()) throw ParseError("stream contains no clips");
    return stream;
}

ClipStream load_stream(const std::string& path) {
    return parse_stream(read_file(path));
}

std::string serialize_stream(const ClipStream& stream) {
    std::string out;
    for (const Clip& clip : stream.clips) {
        json j;
        j["index"] = clip.index;
        j["t_start"] = clip.t_start;
        j["t_end"] = clip.t_end;
        if (clip.mode == ClipMode::caption) {
            j["caption_gt"] = clip.caption_gt;
        } else {
            json frames = json::array();
            for (const Matrix& f : clip.frames) {
                json frame = json::array();
                for (std::size_t r = 0; r < f.rows; ++r) {
                    json row = json::array();
                    for (std::size_t c = 0; c < f.cols; ++c) row.push_back(f.at(r, c));
                    frame.push_back(std::move(row));
                }
                frames.push_back(std::move(frame));
            }
            j["frames"] = std::move(frames);
        }
        out += j.dump();
        out += '\n';
    }
    return out;
}

QueryEpisode parse_episode(const std::string& text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object())
        throw ParseError("episode file is not a JSON object");

    QueryEpisode ep;
    if (!j.contains("query") || !j["query"].is_string())
        throw ParseError("missing or non-string \"query\"");
    ep.query = j["query"].get<std::string>();
    ep.t_q = require_number(j, "t_q", 0);
    ep.t_star = require_number(j, "t_star", 0);
    if (ep.t_q < 0 || ep.t_star < 0)
        throw ParseError("t_q and t_star must be >= 0");
    if (!j.contains("answer_gt") || !j["answer_gt"].is_string())
        throw ParseError("missing or non-string \"answer_gt\"");
    ep.answer_gt = j["answer_gt"].get<std::string>();
    if (j.contains("options")) {
        if (!j["options"].is_array()) throw ParseError("\"options\" must be an array");
        for (const json& o : j["options"]) {
            if (!o.is_string()) throw ParseError("option is not a string");
            ep.options.push_back(o.get<std::string>());
        }
    }
    if (j.contains("unresolvable") && j["unresolvable"].is_boolean())
        ep.unresolvable = j["unresolvable"].get<bool>();
    return ep;
}

QueryEpisode load_episode(const std::string& path) {
    return parse_episode(read_file(path));
}

std::string serialize_episode(const QueryEpisode& ep) {
    json j;
    j["query"] = ep.query;
    j["t_q"] = ep.t_q;
    j["t_star"] = ep.t_star;
    j["answer_gt"] = ep.answer_gt;
    j["options"] = ep.options;
    if (ep.unresolvable) j["unresolvable"] = true;
    return j.dump();
}

int clip_at(const ClipStream& stream, double t) {
    if (stream.clips.empty()) throw OutOfRangeError("empty stream");
    if (!std::isfinite(t) || t < stream.t_begin() || t >= stream.t_end())
        throw OutOfRangeError("t=" + std::to_string(t) + " outside stream [" +
                              std::to_string(stream.t_begin()) + ", " +
                              std::to_string(stream.t_end()) + ")");
    std::size_t lo = 0, hi = stream.clips.size() - 1;
    while (lo < hi) {
        const std::size_t mid = (lo + hi) / 2;
        if (t >= stream.clips[mid].t_end)
            lo = mid + 1;
        else
            hi = mid;
    }
    return stream.clips[lo].index;
}

double timing_delta(double t_r, double t_star) {
    if (!std::isfinite(t_r) || !std::isfinite(t_star))
        throw NonFiniteError("timing_delta requires finite times");
    if (t_r < 0 || t_star < 0)
        throw OutOfRangeError("timing_delta requires non-negative times");
    return std::abs(t_r - t_star);
}

TimingResult make_timing(double t_r, double t_star) {
    TimingResult r;
    r.answered = true;
    r.t_r = t_r;
    r.delta = timing_delta(t_r, t_star);
    return r;
}

}  // namespace oncue
