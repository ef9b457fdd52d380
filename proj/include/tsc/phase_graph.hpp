#pragma once

#include <vector>

#include "tsc/intersection.hpp"

namespace tsc {

struct PhaseMask {
    std::vector<uint8_t> bits;  // indexed by phase_id - 1

    int size() const { return static_cast<int>(bits.size()); }
    bool allows(int phase_id) const { return bits.at(static_cast<size_t>(phase_id - 1)) != 0; }
    int popcount() const;
    static PhaseMask all_ones(int n) { return {std::vector<uint8_t>(static_cast<size_t>(n), 1)}; }

    bool operator==(const PhaseMask&) const = default;
};

// Temporal directed graph over phases. Every phase carries an implicit
// self-edge; non-self edges may require a minimum dwell in the source phase.
class PhaseGraph {
public:
    PhaseGraph() = default;
    PhaseGraph(int num_phases, const std::vector<GraphEdgeSpec>& edges);

    int num_phases() const { return n_; }
    bool has_edge(int from, int to) const;
    // Only meaningful when has_edge(from, to).
    int min_dwell_source_s(int from, int to) const;

private:
    void validate() const;

    int n_ = 0;
    std::vector<int> dwell_;  // -1 = no edge
};

// Bounded history of (phase, duration) entries. Consecutive phases differ;
// the last entry is the in-progress phase with its elapsed dwell.
class PhaseHistory {
public:
    static constexpr int kRetention = 16;

    explicit PhaseHistory(int initial_phase) { seq_.push_back({initial_phase, 0}); }

    int current_phase() const { return seq_.back().phase; }
    int current_duration() const { return seq_.back().duration_s; }
    int size() const { return static_cast<int>(seq_.size()); }
    // i = 0 is the most recent entry, i = 1 the one before it, ...
    int phase_at(int i) const { return seq_[seq_.size() - 1 - static_cast<size_t>(i)].phase; }
    int duration_at(int i) const { return seq_[seq_.size() - 1 - static_cast<size_t>(i)].duration_s; }

    void accrue(int dt_s) { seq_.back().duration_s += dt_s; }
    void push(int phase);

private:
    struct Entry {
        int phase;
        int duration_s;
    };
    std::vector<Entry> seq_;
};

// Safety function f over a single edge: 1 iff the system, currently in
// `from` for its recorded dwell, may move along (from, to) right now.
int safety_fn(const PhaseGraph& graph, int from, int to, const PhaseHistory& history,
              const IntersectionModel& model);

// Disjunction over all edges targeting each phase. Throws DeadlockError if no
// phase is reachable (misconfigured graph or duration bounds).
PhaseMask phase_mask(const PhaseGraph& graph, const PhaseHistory& history,
                     const IntersectionModel& model);

// Reference implementation: naive enumeration of every (source, target) pair.
// Test-only companion to phase_mask.
PhaseMask mask_oracle(const PhaseGraph& graph, const PhaseHistory& history,
                      const IntersectionModel& model);

// Applies one control interval: same phase accrues dt, a new phase is pushed
// and then accrues dt. Throws IllegalTransition if the mask forbids the move.
void advance(PhaseHistory& history, int chosen_phase, int dt_s, const PhaseGraph& graph,
             const IntersectionModel& model);

}  // namespace tsc
