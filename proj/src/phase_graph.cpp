#include "tsc/phase_graph.hpp"

#include <algorithm>
#include <numeric>
#include <queue>

namespace tsc {

int PhaseMask::popcount() const {
    return static_cast<int>(std::count(bits.begin(), bits.end(), uint8_t{1}));
}

PhaseGraph::PhaseGraph(int num_phases, const std::vector<GraphEdgeSpec>& edges)
    : n_(num_phases), dwell_(static_cast<size_t>(num_phases) * num_phases, -1) {
    for (int p = 1; p <= n_; ++p) dwell_[static_cast<size_t>((p - 1) * n_ + (p - 1))] = 0;
    for (const GraphEdgeSpec& e : edges) {
        if (e.from < 1 || e.from > n_ || e.to < 1 || e.to > n_)
            throw ValidationError("graph edge references unknown phase");
        if (e.min_dwell_source_s < 0) throw ValidationError("negative min dwell on edge");
        dwell_[static_cast<size_t>((e.from - 1) * n_ + (e.to - 1))] = e.min_dwell_source_s;
    }
    validate();
}

bool PhaseGraph::has_edge(int from, int to) const {
    if (from < 1 || from > n_ || to < 1 || to > n_) return false;
    return dwell_[static_cast<size_t>((from - 1) * n_ + (to - 1))] >= 0;
}

int PhaseGraph::min_dwell_source_s(int from, int to) const {
    return dwell_[static_cast<size_t>((from - 1) * n_ + (to - 1))];
}

void PhaseGraph::validate() const {
    // Strong connectivity: BFS forward and backward from phase 1.
    auto reach = [&](bool forward) {
        std::vector<uint8_t> seen(static_cast<size_t>(n_), 0);
        std::queue<int> q;
        q.push(1);
        seen[0] = 1;
        while (!q.empty()) {
            int p = q.front();
            q.pop();
            for (int o = 1; o <= n_; ++o) {
                bool edge = forward ? has_edge(p, o) : has_edge(o, p);
                if (edge && !seen[static_cast<size_t>(o - 1)]) {
                    seen[static_cast<size_t>(o - 1)] = 1;
                    q.push(o);
                }
            }
        }
        return std::accumulate(seen.begin(), seen.end(), 0);
    };
    if (reach(true) != n_ || reach(false) != n_)
        throw ValidationError("phase graph is not strongly connected");
}

void PhaseHistory::push(int phase) {
    if (phase == current_phase()) throw IllegalTransition("consecutive history phases must differ");
    seq_.push_back({phase, 0});
    if (static_cast<int>(seq_.size()) > kRetention) seq_.erase(seq_.begin());
}

int safety_fn(const PhaseGraph& graph, int from, int to, const PhaseHistory& history,
              const IntersectionModel& model) {
    if (!graph.has_edge(from, to)) return 0;
    if (history.current_phase() != from) return 0;
    const int d = history.current_duration();
    if (from == to) return d < model.phase(from).max_duration_s ? 1 : 0;
    const int need = std::max(model.phase(from).min_duration_s, graph.min_dwell_source_s(from, to));
    return d >= need ? 1 : 0;
}

PhaseMask phase_mask(const PhaseGraph& graph, const PhaseHistory& history,
                     const IntersectionModel& model) {
    const int n = graph.num_phases();
    PhaseMask m{std::vector<uint8_t>(static_cast<size_t>(n), 0)};
    const int cur = history.current_phase();
    for (int target = 1; target <= n; ++target) {
        if (safety_fn(graph, cur, target, history, model))
            m.bits[static_cast<size_t>(target - 1)] = 1;
    }
    if (m.popcount() == 0)
        throw DeadlockError("no phase reachable from phase " + std::to_string(cur) + " at dwell " +
                            std::to_string(history.current_duration()));
    return m;
}

PhaseMask mask_oracle(const PhaseGraph& graph, const PhaseHistory& history,
                      const IntersectionModel& model) {
    const int n = graph.num_phases();
    PhaseMask m{std::vector<uint8_t>(static_cast<size_t>(n), 0)};
    for (int target = 1; target <= n; ++target) {
        int bit = 0;
        for (int source = 1; source <= n; ++source)
            bit |= safety_fn(graph, source, target, history, model);
        m.bits[static_cast<size_t>(target - 1)] = static_cast<uint8_t>(bit);
    }
    return m;
}

void advance(PhaseHistory& history, int chosen_phase, int dt_s, const PhaseGraph& graph,
             const IntersectionModel& model) {
    if (!safety_fn(graph, history.current_phase(), chosen_phase, history, model))
        throw IllegalTransition("phase " + std::to_string(chosen_phase) +
                                " violates the current mask (from " +
                                std::to_string(history.current_phase()) + ", dwell " +
                                std::to_string(history.current_duration()) + ")");
    if (chosen_phase != history.current_phase()) history.push(chosen_phase);
    history.accrue(dt_s);
}

}  // namespace tsc
