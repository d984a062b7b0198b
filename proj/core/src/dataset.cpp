#include "oncue/dataset.hpp"

#include <array>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "oncue/errors.hpp"
#include "oncue/protocol.hpp"
#include "oncue/rng.hpp"

namespace oncue {

namespace {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

constexpr std::array<const char*, 5> kColors = {"red", "blue", "green", "white",
                                                "black"};
constexpr std::array<const char*, 5> kObjects = {"car", "truck", "bicycle", "bus",
                                                 "van"};
constexpr std::array<const char*, 5> kActions = {
    "turns left at the intersection", "stops at the crosswalk",
    "passes the camera", "parks by the curb", "accelerates away"};

struct SubqPlan {
    SubQuestionType type;
    std::string question;
    std::string value;       // resolved value
    std::string evidence;    // caption sentence revealing it
    int reveal_clip = 0;     // 1-based; 0 = never revealed
    double confidence = 0.0; // confidence at and after the reveal
};

std::string dir_name(int index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "ep_%03d", index);
    return buf;
}

std::string window(const Clip& clip) {
    return format_clip_window(clip.t_start, clip.t_end);
}

ojson state_items(const std::vector<SubqPlan>& plan,
                  const std::vector<double>& confidence,
                  const std::vector<bool>& revealed) {
    ojson items = ojson::array();
    for (std::size_t s = 0; s < plan.size(); ++s) {
        ojson entry;
        entry["type"] = to_string(plan[s].type);
        entry["question"] = plan[s].question;
        entry["value"] = revealed[s] ? plan[s].value : "?";
        entry["confidence"] = revealed[s] ? confidence[s] : 0.0;
        items.push_back(std::move(entry));
    }
    return items;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << text;
}

}  // namespace

std::vector<EpisodeBundle> build_dataset(const DatasetOptions& options) {
    if (options.count < 1) throw ConfigError("dataset count must be >= 1");
    if (options.n_clips_min < 1 || options.n_clips_max < options.n_clips_min) {
        throw ConfigError("bad n_clips range");
    }
    if (!(options.clip_seconds > 0.0)) {
        throw ConfigError("clip_seconds must be positive");
    }
    if (options.unresolvable < 0 || options.unresolvable > options.count) {
        throw ConfigError("unresolvable count out of range");
    }
    Rng rng(options.seed);
    std::vector<EpisodeBundle> bundles;
    bundles.reserve(static_cast<std::size_t>(options.count));

    for (int e = 0; e < options.count; ++e) {
        const bool drop = options.drop_on_first && e == 0;
        const bool unresolvable = e >= options.count - options.unresolvable;
        int n_clips = static_cast<int>(
            rng.uniform_int(options.n_clips_min, options.n_clips_max));
        if (drop && n_clips < 4) n_clips = 4;

        const std::string color = kColors[rng.uniform_int(0, kColors.size() - 1)];
        const std::string object = kObjects[rng.uniform_int(0, kObjects.size() - 1)];
        const std::string action = kActions[rng.uniform_int(0, kActions.size() - 1)];

        std::vector<SubqPlan> plan;
        plan.push_back(
            {SubQuestionType::object,
             "Does a " + color + " " + object + " appear in the video?", "yes",
             "A " + color + " " + object + " enters the frame.", 0, 0.0});
        plan.push_back({SubQuestionType::action,
                        "What does the " + color + " " + object + " do?", action,
                        "The " + color + " " + object + " " + action + ".", 0, 0.0});
        if (rng.uniform() < 0.5) {
            plan.push_back({SubQuestionType::scene, "Where does the scene take place?",
                            "on a city street",
                            "The scene takes place on a city street.", 0, 0.0});
        }

        // Reveal schedule. Each revealed sub-question keeps a fixed
        // confidence >= 0.86 from its reveal clip onward; the drop victim
        // instead runs 0.8 -> 0.4 -> reflected 0.8 -> 0.9.
        const std::size_t k_subq = plan.size();
        for (std::size_t s = 0; s < k_subq; ++s) {
            plan[s].reveal_clip = static_cast<int>(rng.uniform_int(1, n_clips));
            plan[s].confidence = 0.86 + 0.01 * static_cast<double>((e * 7 + s * 3) % 10);
        }
        if (drop) {
            plan[0].reveal_clip = 3;  // resolved (>= 0.85) only at clip 3
            plan[0].confidence = 0.9;
            if (plan.size() > 1 && plan[1].reveal_clip < 2) plan[1].reveal_clip = 2;
        }
        const std::size_t victim =
            unresolvable ? rng.uniform_int(0, k_subq - 1) : k_subq;
        if (unresolvable) plan[victim].reveal_clip = 0;

        int completion = 0;
        if (!unresolvable) {
            for (const auto& s : plan) completion = std::max(completion, s.reveal_clip);
        }

        // Stream clips with ground-truth captions carrying the evidence.
        ClipStream stream;
        stream.mode = ClipMode::caption;
        for (int i = 1; i <= n_clips; ++i) {
            Clip clip;
            clip.index = i;
            clip.t_start = options.clip_seconds * static_cast<double>(i - 1);
            clip.t_end = options.clip_seconds * static_cast<double>(i);
            clip.mode = ClipMode::caption;
            std::string text = "Clip " + std::to_string(i) +
                               ": a city street seen from a fixed camera.";
            for (const auto& s : plan) {
                if (s.reveal_clip == i) text += " " + s.evidence;
            }
            if (drop && i == 1) {
                text += " A " + color + " " + object + " enters the frame.";
            }
            if (drop && i == 2) {
                text += " The " + object + " is partially occluded by a passing bus.";
            }
            clip.caption_gt = text;
            stream.clips.push_back(std::move(clip));
        }

        QueryEpisode episode;
        episode.query =
            "What does the " + color + " " + object + " do after it first appears?";
        episode.answer_gt = "The " + color + " " + object + " " + action + ".";
        episode.t_q = 0.0;
        episode.t_star = unresolvable
                             ? stream.t_end()
                             : options.clip_seconds * static_cast<double>(completion);
        episode.unresolvable = unresolvable;

        // Reply script.
        ScriptedOracle script;
        {
            ojson reply;
            reply["caption_requirements"] = ojson::array(
                {"presence and color of the " + object,
                 "action performed by the " + object,
                 "scene context and setting",
                 "count of similar vehicles visible"});
            script.add(TemplateId::part1, 0, reply.dump(2));
        }
        {
            ojson items = ojson::array();
            for (const auto& s : plan) {
                items.push_back({{"type", to_string(s.type)}, {"question", s.question}});
            }
            ojson reply;
            reply["required_subquestions"] = std::move(items);
            script.add(TemplateId::part2, 0, reply.dump(2));
        }
        for (const auto& clip : stream.clips) {
            ojson reply;
            reply["clip_timestamp"] = window(clip);
            reply["caption"] = clip.caption_gt;
            script.add(TemplateId::part3, clip.index, reply.dump(2));
        }
        // Part-4 confidences per clip, mirroring what a faithful extractor
        // would read off the captions.
        for (int i = 1; i <= n_clips; ++i) {
            std::vector<double> confidence(k_subq, 0.0);
            std::vector<bool> revealed(k_subq, false);
            for (std::size_t s = 0; s < k_subq; ++s) {
                if (plan[s].reveal_clip != 0 && i >= plan[s].reveal_clip) {
                    revealed[s] = true;
                    confidence[s] = plan[s].confidence;
                }
            }
            if (drop) {
                if (i == 1) {
                    revealed[0] = true;
                    confidence[0] = 0.8;
                } else if (i == 2) {
                    revealed[0] = true;
                    confidence[0] = 0.4;
                }
            }
            int resolved = 0;
            for (std::size_t s = 0; s < k_subq; ++s) {
                if (revealed[s] && confidence[s] >= kAnswerThreshold) ++resolved;
            }
            ojson reply;
            reply["subquestion_status"] = state_items(plan, confidence, revealed);
            reply["estimated_progress"] = static_cast<int>(
                std::llround(100.0 * resolved / static_cast<double>(k_subq)));
            script.add(TemplateId::part4, i, reply.dump(2));
        }
        if (drop) {
            // Reflection reply at clip 2: the clip-1 evidence restores 0.8.
            const std::string evidence = "A " + color + " " + object +
                                         " enters the frame.";
            ojson status;
            status[plan[0].question] = {
                {"value", "yes"},
                {"confidence", 0.8},
                {"status", "upgraded"},
                {"note", "old 0.40 -> new 0.80, [" + evidence + "]"}};
            ojson reply;
            reply["causal_chain"] = ojson::array(
                {"Clip 1 -> [supports] [" + plan[0].question + "] because [" +
                 evidence + "]"});
            reply["attribute_status"] = std::move(status);
            int resolved = 0;
            for (std::size_t s = 1; s < k_subq; ++s) {
                if (plan[s].reveal_clip != 0 && plan[s].reveal_clip <= 2) ++resolved;
            }
            reply["estimated_progress"] = static_cast<int>(
                std::llround(100.0 * resolved / static_cast<double>(k_subq)));
            script.add(TemplateId::part5, 2, reply.dump(2));
        }
        if (!unresolvable) {
            ojson reply;
            reply["final_answer"] = episode.answer_gt;
            script.add(TemplateId::final_answer, completion, reply.dump(2));
        }

        EpisodeBundle bundle;
        bundle.dir = dir_name(e);
        bundle.stream = std::move(stream);
        bundle.episode = std::move(episode);
        bundle.script_json = script.to_json_text();
        bundle.completion_clip = completion;
        bundle.has_drop = drop;
        bundles.push_back(std::move(bundle));
    }
    return bundles;
}

void write_dataset(const std::string& dir, const std::vector<EpisodeBundle>& bundles,
                   const DatasetOptions& options) {
    const fs::path root(dir);
    fs::create_directories(root);
    ojson manifest_entries = ojson::array();
    for (const auto& bundle : bundles) {
        const fs::path ep = root / bundle.dir;
        fs::create_directories(ep);
        write_text(ep / "stream.jsonl", serialize_stream(bundle.stream));
        write_text(ep / "episode.json", serialize_episode(bundle.episode));
        write_text(ep / "script.json", bundle.script_json);
        manifest_entries.push_back({{"dir", bundle.dir},
                                    {"question", bundle.episode.query},
                                    {"answer", bundle.episode.answer_gt},
                                    {"n_clips", bundle.stream.clips.size()},
                                    {"completion_clip", bundle.completion_clip},
                                    {"t_star", bundle.episode.t_star},
                                    {"unresolvable", bundle.episode.unresolvable},
                                    {"drop", bundle.has_drop}});
    }
    ojson manifest;
    manifest["seed"] = options.seed;
    manifest["count"] = options.count;
    manifest["clip_seconds"] = options.clip_seconds;
    manifest["unresolvable"] = options.unresolvable;
    manifest["drop_on_first"] = options.drop_on_first;
    manifest["episodes"] = std::move(manifest_entries);
    write_text(root / "manifest.json", manifest.dump(2) + "\n");
}

std::vector<std::string> list_dataset(const std::string& dir) {
    const fs::path path = fs::path(dir) / "manifest.json";
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open dataset manifest: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    ojson manifest = ojson::parse(buf.str(), nullptr, false);
    if (manifest.is_discarded() || !manifest.is_object() ||
        !manifest.contains("episodes") || !manifest["episodes"].is_array()) {
        throw ConfigError("malformed dataset manifest: " + path.string());
    }
    std::vector<std::string> dirs;
    for (const auto& entry : manifest["episodes"]) {
        if (!entry.is_object() || !entry.contains("dir")) {
            throw ConfigError("malformed manifest entry in " + path.string());
        }
        dirs.push_back(entry["dir"].get<std::string>());
    }
    return dirs;
}

ClipStream make_feature_stream(const AggregationSchedule& schedule, int n_clips,
                               std::uint64_t seed) {
    schedule.validate();
    if (n_clips < 1) throw ConfigError("n_clips must be >= 1");
    Rng rng(seed);
    ClipStream stream;
    stream.mode = ClipMode::feature;
    stream.tokens_per_frame = schedule.tokens_per_frame;
    stream.dim = schedule.d;
    for (int i = 1; i <= n_clips; ++i) {
        Clip clip;
        clip.index = i;
        clip.t_start = static_cast<double>(i - 1);
        clip.t_end = static_cast<double>(i);
        clip.mode = ClipMode::feature;
        for (std::size_t f = 0; f < schedule.clip_frames; ++f) {
            Matrix frame(schedule.tokens_per_frame, schedule.d);
            for (double& x : frame.data) x = rng.gaussian(0.0, 1.0);
            clip.frames.push_back(std::move(frame));
        }
        stream.clips.push_back(std::move(clip));
    }
    return stream;
}

}  // namespace oncue
