#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tsc/errors.hpp"

namespace tsc {

enum class SignalColor {
    Red,
    Yellow,
    Green,
    GreenWithLeftPriority,
};

const char* to_token(SignalColor c);
SignalColor color_from_token(const std::string& tok);

inline bool is_green(SignalColor c) {
    return c == SignalColor::Green || c == SignalColor::GreenWithLeftPriority;
}

enum class GroupKind { Vehicle, Pedestrian };

struct SignalGroup {
    int id = 0;
    GroupKind kind = GroupKind::Vehicle;
    std::string label;

    bool operator==(const SignalGroup&) const = default;
};

// Symmetric, diagonal-false adjacency over signal groups.
class ConflictMatrix {
public:
    ConflictMatrix() = default;
    explicit ConflictMatrix(int num_groups) : n_(num_groups), cells_(static_cast<size_t>(num_groups) * num_groups, 0) {}

    int size() const { return n_; }

    void set_conflict(int a, int b) {
        check(a);
        check(b);
        if (a == b) throw ValidationError("conflict matrix diagonal must stay false");
        cells_[idx(a, b)] = 1;
        cells_[idx(b, a)] = 1;
    }

    bool conflicts(int a, int b) const {
        check(a);
        check(b);
        return cells_[idx(a, b)] != 0;
    }

    bool operator==(const ConflictMatrix&) const = default;

private:
    size_t idx(int a, int b) const { return static_cast<size_t>(a) * n_ + b; }
    void check(int g) const {
        if (g < 0 || g >= n_) throw ValidationError("signal group out of range: " + std::to_string(g));
    }

    int n_ = 0;
    std::vector<uint8_t> cells_;
};

// Seconds between a clearing group turning red and an entering group turning
// green. Entries exist only for conflicting (clearing, entering) pairs.
class IntergreenMatrix {
public:
    IntergreenMatrix() = default;
    explicit IntergreenMatrix(int num_groups) : n_(num_groups), cells_(static_cast<size_t>(num_groups) * num_groups, -1) {}

    int size() const { return n_; }

    void set(int clearing, int entering, int seconds) {
        if (seconds < 0) throw ValidationError("intergreen time must be >= 0");
        cells_.at(idx(clearing, entering)) = seconds;
    }

    bool defined(int clearing, int entering) const { return cells_.at(idx(clearing, entering)) >= 0; }

    int get(int clearing, int entering) const {
        int v = cells_.at(idx(clearing, entering));
        if (v < 0) throw ValidationError("intergreen undefined for pair");
        return v;
    }

    bool operator==(const IntergreenMatrix&) const = default;

private:
    size_t idx(int a, int b) const { return static_cast<size_t>(a) * n_ + b; }

    int n_ = 0;
    std::vector<int> cells_;
};

struct PhaseSpec {
    int phase_id = 0;  // 1..N
    std::vector<SignalColor> colors;  // indexed by signal group id
    int min_duration_s = 0;
    int max_duration_s = 1;

    bool operator==(const PhaseSpec&) const = default;
};

struct SafetyViolation {
    int phase_id;
    int group_a;
    int group_b;
    std::string describe() const;
};

// One timed color change during a phase transition.
struct TransitionEvent {
    int offset_s;
    int signal_group;
    SignalColor color;

    bool operator==(const TransitionEvent&) const = default;
};

struct TransitionSpec {
    int from_phase = 0;
    int to_phase = 0;
    std::vector<TransitionEvent> timeline;  // ordered by offset
    int total_duration_s = 0;
};

struct GraphEdgeSpec {
    int from = 0;
    int to = 0;
    int min_dwell_source_s = 0;
};

class IntersectionModel {
public:
    std::vector<SignalGroup> groups;
    std::vector<PhaseSpec> phases;  // phases[i].phase_id == i + 1
    ConflictMatrix conflicts;
    IntergreenMatrix intergreen;
    int yellow_s = 3;
    std::vector<GraphEdgeSpec> graph_edges;  // non-self edges of the phase graph

    int num_groups() const { return static_cast<int>(groups.size()); }
    int num_phases() const { return static_cast<int>(phases.size()); }

    bool has_phase(int phase_id) const { return phase_id >= 1 && phase_id <= num_phases(); }

    const PhaseSpec& phase(int phase_id) const {
        if (!has_phase(phase_id)) throw NoSuchPhase(phase_id);
        return phases[static_cast<size_t>(phase_id - 1)];
    }

    bool operator==(const IntersectionModel& o) const {
        return groups == o.groups && phases == o.phases && conflicts == o.conflicts &&
               intergreen == o.intergreen && yellow_s == o.yellow_s;
    }
};

// Built-in preset of the eight-phase intersection (four vehicle approaches,
// two pedestrian crossings).
IntersectionModel owl322_preset();
std::vector<GraphEdgeSpec> owl322_preset_edges();

IntersectionModel load_model(const std::string& config_text);
std::string serialize_model(const IntersectionModel& model);

// Empty result means every phase only shows non-red to pairwise
// non-conflicting groups.
std::vector<SafetyViolation> validate_phase_safety(const IntersectionModel& model);

// Minimal-duration transition schedule between two phases. `pending_green_floor`,
// when given, holds per-group lower bounds (seconds into the transition) on
// when a group may turn green; the simulator uses it to carry intergreen
// constraints across earlier transitions.
TransitionSpec build_transition(const IntersectionModel& model, int from, int to, int yellow_s,
                                const std::vector<int>* pending_green_floor = nullptr);

}  // namespace tsc
