#pragma once

#include <string>

#include "tsc/microsim.hpp"
#include "tsc/ppo.hpp"

namespace tsc {

struct FullConfig {
    SimConfig sim;
    TrainConfig train;
};

// Parses the top-level JSON config: `intersection`, `demand`, `psych_rules`,
// `episode_seconds`, `training`. Missing sections fall back to the built-in
// preset / defaults.
FullConfig parse_full_config(const std::string& json_text);
FullConfig load_full_config_file(const std::string& path);
FullConfig default_full_config();

RuleSet parse_psych_rules(const std::string& json_text);

}  // namespace tsc
