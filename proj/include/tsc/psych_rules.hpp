#pragma once

#include <string>
#include <vector>

#include "tsc/phase_graph.hpp"

namespace tsc {

// Comfort rules only ever clear mask bits, never set them.
struct PsychRule {
    enum class Kind { ForbidBounceBack, MinGreenComfort, Custom };

    std::string id;
    Kind kind = Kind::ForbidBounceBack;

    // ForbidBounceBack: while in `hub_phase`, forbid returning to the phase
    // occupied immediately before entering it if the pattern x -> hub -> x
    // would complete within `window_s` of the hub dwell.
    int hub_phase = 1;
    int window_s = 30;

    // MinGreenComfort: forbid leaving the current phase before `min_green_s`.
    int min_green_s = 0;

    // Custom: while in `when_in`, forbid the listed target phases outright.
    int when_in = 0;
    std::vector<int> forbid_targets;
};

struct RuleSet {
    std::vector<PsychRule> rules;
};

// Default comfort configuration: a single bounce-back rule with a 30 s window.
RuleSet default_rules();

PhaseMask psych_mask(const RuleSet& rules, const PhaseHistory& history, int num_phases);

struct CombinedMask {
    PhaseMask mask;
    // Set when the conjunction came up empty and the safety mask was used
    // unchanged; comfort never unlocks an unsafe phase, and safety wins over
    // comfort when they disagree completely.
    bool comfort_overridden = false;
};

CombinedMask combine_masks(const PhaseMask& safety, const PhaseMask& psych);

}  // namespace tsc
