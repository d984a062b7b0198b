#include "oncue/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "oncue/errors.hpp"

namespace oncue {

namespace {

using ojson = nlohmann::ordered_json;

void reject_unknown(const ojson& obj, const std::string& scope,
                    const std::set<std::string>& known) {
    for (const auto& [key, value] : obj.items()) {
        if (!known.count(key)) {
            throw ConfigError("unknown config key: " + scope + key);
        }
    }
}

template <typename T>
void read_number(const ojson& obj, const char* key, T& out, const std::string& scope) {
    auto it = obj.find(key);
    if (it == obj.end()) return;
    if (!it->is_number()) {
        throw ConfigError("config key " + scope + key + " must be numeric");
    }
    out = it->get<T>();
}

void read_bool(const ojson& obj, const char* key, bool& out, const std::string& scope) {
    auto it = obj.find(key);
    if (it == obj.end()) return;
    if (!it->is_boolean()) {
        throw ConfigError("config key " + scope + key + " must be boolean");
    }
    out = it->get<bool>();
}

}  // namespace

EngineConfig default_engine_config() { return EngineConfig{}; }

EngineConfig parse_engine_config(const std::string& json_text) {
    ojson doc = ojson::parse(json_text, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
        throw ConfigError("config must be a JSON object");
    }
    reject_unknown(doc, "", {"schedule", "mask", "controller", "layout", "position",
                             "decoder", "backend"});
    EngineConfig cfg;

    if (doc.contains("schedule")) {
        const ojson& s = doc["schedule"];
        if (!s.is_object()) throw ConfigError("schedule must be an object");
        reject_unknown(s, "schedule.",
                       {"layers", "n_vc", "clip_frames", "tokens_per_frame", "d"});
        read_number(s, "layers", cfg.schedule.layers, "schedule.");
        read_number(s, "n_vc", cfg.schedule.n_vc, "schedule.");
        read_number(s, "clip_frames", cfg.schedule.clip_frames, "schedule.");
        read_number(s, "tokens_per_frame", cfg.schedule.tokens_per_frame, "schedule.");
        read_number(s, "d", cfg.schedule.d, "schedule.");
    }
    if (doc.contains("mask")) {
        const ojson& m = doc["mask"];
        if (!m.is_object()) throw ConfigError("mask must be an object");
        reject_unknown(m, "mask.",
                       {"first_frame_anchor", "raw_sees_prev_summary",
                        "same_level_self_context", "max_levels"});
        read_bool(m, "first_frame_anchor", cfg.rules.first_frame_anchor, "mask.");
        read_bool(m, "raw_sees_prev_summary", cfg.rules.raw_sees_prev_summary, "mask.");
        read_bool(m, "same_level_self_context", cfg.rules.same_level_self_context,
                  "mask.");
        read_number(m, "max_levels", cfg.rules.max_levels, "mask.");
        if (cfg.rules.max_levels < 1 || cfg.rules.max_levels > 3) {
            throw ConfigError("mask.max_levels must be 1, 2 or 3");
        }
    }
    if (doc.contains("controller")) {
        const ojson& c = doc["controller"];
        if (!c.is_object()) throw ConfigError("controller must be an object");
        reject_unknown(c, "controller.",
                       {"theta_drop", "w_low", "w_par", "binary_gate",
                        "caption_history_cap"});
        read_number(c, "theta_drop", cfg.controller.theta_drop, "controller.");
        read_number(c, "w_low", cfg.controller.w_low, "controller.");
        read_number(c, "w_par", cfg.controller.w_par, "controller.");
        read_bool(c, "binary_gate", cfg.controller.binary_gate, "controller.");
        read_number(c, "caption_history_cap", cfg.controller.caption_history_cap,
                    "controller.");
        if (!(cfg.controller.theta_drop > 0.0)) {
            throw ConfigError("controller.theta_drop must be positive");
        }
        if (cfg.controller.w_low < 1) throw ConfigError("controller.w_low must be >= 1");
        if (cfg.controller.w_par < 1) throw ConfigError("controller.w_par must be >= 1");
        if (cfg.controller.caption_history_cap < 1) {
            throw ConfigError("controller.caption_history_cap must be >= 1");
        }
    }
    if (doc.contains("layout")) {
        const ojson& l = doc["layout"];
        if (!l.is_object()) throw ConfigError("layout must be an object");
        reject_unknown(l, "layout.", {"text_pre_len", "text_post_len"});
        read_number(l, "text_pre_len", cfg.layout.text_pre_len, "layout.");
        read_number(l, "text_post_len", cfg.layout.text_post_len, "layout.");
        if (cfg.layout.text_pre_len < 1) {
            throw ConfigError("layout.text_pre_len must be >= 1");
        }
    }
    if (doc.contains("position")) {
        const ojson& p = doc["position"];
        if (!p.is_object()) throw ConfigError("position must be an object");
        reject_unknown(p, "position.", {"delta_t", "tau", "s_merge", "h", "w"});
        read_number(p, "delta_t", cfg.position.delta_t, "position.");
        read_number(p, "tau", cfg.position.tau, "position.");
        read_number(p, "s_merge", cfg.position.s_merge, "position.");
        read_number(p, "h", cfg.position.h, "position.");
        read_number(p, "w", cfg.position.w, "position.");
        if (!(cfg.position.delta_t > 0.0) || !(cfg.position.tau > 0.0)) {
            throw ConfigError("position.delta_t and position.tau must be positive");
        }
        if (cfg.position.s_merge < 1 || cfg.position.h < 1 || cfg.position.w < 1) {
            throw ConfigError("position.s_merge, h and w must be >= 1");
        }
    }
    if (doc.contains("decoder")) {
        const ojson& d = doc["decoder"];
        if (!d.is_object()) throw ConfigError("decoder must be an object");
        reject_unknown(d, "decoder.", {"vocab_size", "seed"});
        read_number(d, "vocab_size", cfg.decoder.vocab_size, "decoder.");
        read_number(d, "seed", cfg.decoder.seed, "decoder.");
        if (cfg.decoder.vocab_size < 2) {
            throw ConfigError("decoder.vocab_size must be >= 2");
        }
    }
    if (doc.contains("backend")) {
        const ojson& b = doc["backend"];
        if (!b.is_object()) throw ConfigError("backend must be an object");
        reject_unknown(b, "backend.", {"model"});
        auto it = b.find("model");
        if (it != b.end()) {
            if (!it->is_string()) throw ConfigError("backend.model must be a string");
            cfg.backend_model = it->get<std::string>();
        }
    }

    cfg.schedule.validate();
    return cfg;
}

EngineConfig load_engine_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_engine_config(buf.str());
}

std::string serialize_engine_config(const EngineConfig& cfg) {
    ojson doc;
    doc["schedule"] = {{"layers", cfg.schedule.layers},
                       {"n_vc", cfg.schedule.n_vc},
                       {"clip_frames", cfg.schedule.clip_frames},
                       {"tokens_per_frame", cfg.schedule.tokens_per_frame},
                       {"d", cfg.schedule.d}};
    doc["mask"] = {{"first_frame_anchor", cfg.rules.first_frame_anchor},
                   {"raw_sees_prev_summary", cfg.rules.raw_sees_prev_summary},
                   {"same_level_self_context", cfg.rules.same_level_self_context},
                   {"max_levels", cfg.rules.max_levels}};
    doc["controller"] = {{"theta_drop", cfg.controller.theta_drop},
                         {"w_low", cfg.controller.w_low},
                         {"w_par", cfg.controller.w_par},
                         {"binary_gate", cfg.controller.binary_gate},
                         {"caption_history_cap", cfg.controller.caption_history_cap}};
    doc["layout"] = {{"text_pre_len", cfg.layout.text_pre_len},
                     {"text_post_len", cfg.layout.text_post_len}};
    doc["position"] = {{"delta_t", cfg.position.delta_t},
                       {"tau", cfg.position.tau},
                       {"s_merge", cfg.position.s_merge},
                       {"h", cfg.position.h},
                       {"w", cfg.position.w}};
    doc["decoder"] = {{"vocab_size", cfg.decoder.vocab_size},
                      {"seed", cfg.decoder.seed}};
    doc["backend"] = {{"model", cfg.backend_model}};
    return doc.dump(2) + "\n";
}

}  // namespace oncue
