#include "tsc/psych_rules.hpp"

#include <algorithm>

namespace tsc {

RuleSet default_rules() {
    PsychRule r;
    r.id = "no-bounce-back";
    r.kind = PsychRule::Kind::ForbidBounceBack;
    r.hub_phase = 1;
    r.window_s = 30;
    return RuleSet{{r}};
}

namespace {

void apply_rule(const PsychRule& r, const PhaseHistory& h, PhaseMask& m) {
    const int cur = h.current_phase();
    switch (r.kind) {
        case PsychRule::Kind::ForbidBounceBack: {
            if (cur != r.hub_phase || h.size() < 2) return;
            if (h.current_duration() >= r.window_s) return;
            const int prev = h.phase_at(1);
            m.bits.at(static_cast<size_t>(prev - 1)) = 0;
            break;
        }
        case PsychRule::Kind::MinGreenComfort: {
            if (h.current_duration() >= r.min_green_s) return;
            for (int p = 1; p <= m.size(); ++p)
                if (p != cur) m.bits[static_cast<size_t>(p - 1)] = 0;
            break;
        }
        case PsychRule::Kind::Custom: {
            if (cur != r.when_in) return;
            for (int p : r.forbid_targets) m.bits.at(static_cast<size_t>(p - 1)) = 0;
            break;
        }
    }
}

}  // namespace

PhaseMask psych_mask(const RuleSet& rules, const PhaseHistory& history, int num_phases) {
    PhaseMask m = PhaseMask::all_ones(num_phases);
    for (const PsychRule& r : rules.rules) apply_rule(r, history, m);
    return m;
}

CombinedMask combine_masks(const PhaseMask& safety, const PhaseMask& psych) {
    if (safety.size() != psych.size())
        throw LengthMismatch("mask lengths differ: " + std::to_string(safety.size()) + " vs " +
                             std::to_string(psych.size()));
    CombinedMask out;
    out.mask.bits.resize(safety.bits.size());
    for (size_t i = 0; i < safety.bits.size(); ++i)
        out.mask.bits[i] = static_cast<uint8_t>(safety.bits[i] & psych.bits[i]);
    if (out.mask.popcount() == 0) {
        out.mask = safety;
        out.comfort_overridden = true;
    }
    return out;
}

}  // namespace tsc
