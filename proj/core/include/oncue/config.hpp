#ifndef ONCUE_CONFIG_HPP
#define ONCUE_CONFIG_HPP

#include <cstdint>
#include <string>

#include "oncue/controller.hpp"
#include "oncue/mask.hpp"
#include "oncue/schedule.hpp"

namespace oncue {

struct LayoutConfig {
    std::size_t text_pre_len = 4;
    std::size_t text_post_len = 4;
};

struct PositionConfig {
    double delta_t = 1.0;   // seconds per frame slot
    double tau = 1.0;       // temporal scale
    std::int64_t s_merge = 2;
    std::int64_t h = 4;     // pre-merge grid height
    std::int64_t w = 4;     // pre-merge grid width
};

struct DecoderKnobs {
    std::size_t vocab_size = 32;
    std::uint64_t seed = 1;
};

struct EngineConfig {
    AggregationSchedule schedule;
    MaskRules rules;
    ControllerConfig controller;
    LayoutConfig layout;
    PositionConfig position;
    DecoderKnobs decoder;
    std::string backend_model = "default";
};

EngineConfig default_engine_config();

// Strict JSON loader: unknown keys raise ConfigError, missing keys keep their
// defaults, every numeric field is range-checked.
EngineConfig parse_engine_config(const std::string& json_text);
EngineConfig load_engine_config(const std::string& path);
std::string serialize_engine_config(const EngineConfig& cfg);

}  // namespace oncue

#endif  // ONCUE_CONFIG_HPP
