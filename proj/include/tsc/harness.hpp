#pragma once

#include <string>
#include <vector>

#include "tsc/ppo.hpp"

namespace tsc {

enum class ControllerKind { SafetyLayer, MaskSafety, MaskSafetyPsych, FixedTime };

ControllerKind controller_from_token(const std::string& tok);  // "a" | "b" | "c" | "fixed"
const char* controller_token(ControllerKind k);

// Projects an unconstrained phase wish onto the safety mask: legal wishes pass
// through; otherwise stay in the current phase while its self-edge is still
// permitted; otherwise take the lowest-numbered permitted phase.
int safety_layer_project(int wish, const PhaseMask& safety, int current_phase);
int safety_layer(int wish, const PhaseHistory& history, const PhaseGraph& graph,
                 const IntersectionModel& model);

struct CyclePlanStep {
    int phase;
    int dwell_s;
};

struct CyclePlan {
    std::vector<CyclePlanStep> steps;
};

CyclePlan parse_cycle_plan(const std::string& json_text);
CyclePlan default_cycle_plan();

// Deterministic cyclic phase stream; the plan is validated against the graph
// and duration bounds up front (InvalidCyclePlan otherwise).
class FixedTimeController {
public:
    FixedTimeController(CyclePlan plan, const PhaseGraph& graph, const IntersectionModel& model);

    int next_action();
    void reset();

private:
    CyclePlan plan_;
    size_t step_index_ = 0;
    int elapsed_s_ = 0;
};

struct CurveRow {
    long env_steps = 0;
    long episodes = 0;
    double mean_episodic_reward = 0.0;
    double ema_reward = 0.0;  // EMA(0.9)
};

struct TrainedAgent {
    NetSizes sizes;
    std::vector<double> theta;
    std::vector<CurveRow> curve;
    long comfort_overrides = 0;
    long safety_violations = 0;
};

MaskMode mask_mode_for(ControllerKind kind);

TrainedAgent train_single(ControllerKind kind, uint64_t seed, const TrainConfig& tcfg,
                          const SimConfig& scfg, bool verbose = false);

// Trains one agent per seed and persists curves_<ctrl>_<seed>.csv plus
// ckpt_<ctrl>_<seed>.json under out_dir. Seeds run in parallel threads.
// Returns the total rendered-timeline safety violations observed (always 0
// unless the kernel is misconfigured).
long train_controller(ControllerKind kind, const std::vector<uint64_t>& seeds,
                      const TrainConfig& tcfg, const SimConfig& scfg, const std::string& out_dir,
                      bool verbose = false);

struct EvalRun {
    uint64_t seed = 0;
    double cumulative_reward = 0.0;
    TrafficMetrics metrics;  // time-averaged over the run
    long bounce_count = 0;   // x -> 1 -> x patterns within the rule window
    long safety_violations = 0;
};

struct EvalReport {
    std::vector<EvalRun> runs;

    double mean_cumulative_reward() const;
    TrafficMetrics mean_metrics() const;
    long total_bounces() const;
    long total_safety_violations() const;
};

// Greedy (argmax) evaluation by default; `sample` draws actions from the
// policy distribution instead, deterministically per eval seed.
EvalReport evaluate_policy(const PolicyNet& net, ControllerKind kind, const SimConfig& scfg,
                           const std::vector<uint64_t>& eval_seeds,
                           const std::string& trace_dir = "", bool sample = false);

EvalReport evaluate_fixed_time(const CyclePlan& plan, const SimConfig& scfg,
                               const std::vector<uint64_t>& eval_seeds,
                               const std::string& trace_dir = "");

void write_eval_csv(const std::string& path, const EvalReport& report);

// Table-style aggregate over trials: one row per trial plus "avg best 3" (by
// cumulative reward) and std rows.
void write_metrics_table(const std::string& path, const std::string& controller,
                         const std::vector<EvalReport>& trials);

// Helpers reused by tests.
long count_bounce_patterns(const std::vector<std::pair<int, int>>& phase_durations, int hub_phase,
                           int window_s);
std::vector<uint64_t> parse_seed_list(const std::string& csv);

}  // namespace tsc
