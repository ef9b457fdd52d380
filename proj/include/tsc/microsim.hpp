#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "tsc/intersection.hpp"
#include "tsc/phase_graph.hpp"
#include "tsc/psych_rules.hpp"

namespace tsc {

// Piecewise-constant demand in arrivals per hour over episode time.
struct ArrivalProfile {
    struct Piece {
        int until_s;      // exclusive upper bound of this piece
        double per_hour;
    };
    std::vector<Piece> pieces;

    double rate_at(int t_s) const {
        for (const Piece& p : pieces)
            if (t_s < p.until_s) return p.per_hour;
        return pieces.empty() ? 0.0 : pieces.back().per_hour;
    }
};

struct LaneConfig {
    std::string name;
    int signal_group = 0;
    double length_m = 280.0;
    double v_max_mps = 14.0;
    ArrivalProfile arrivals;
};

struct CrosswalkConfig {
    std::string name;
    int signal_group = 0;
    ArrivalProfile arrivals;
};

struct RewardCoeffs {
    double queue = 0.8;
    double wait_veh = 0.8;
    double wait_ped = 0.2;
    double stops = 1.9;
};

struct SimConfig {
    IntersectionModel model;
    RuleSet rules;
    bool psych_enabled = false;
    std::vector<LaneConfig> lanes;
    std::vector<CrosswalkConfig> crosswalks;
    int episode_s = 3600;
    double sat_headway_s = 2.0;   // discharge headway on green
    double jam_spacing_m = 7.5;   // vehicle length + standstill gap
    RewardCoeffs reward;

    // Observation scaling.
    double queue_norm_m = 200.0;
    double wait_norm_s = 120.0;
    double wave_norm = 20.0;
};

// Preset rush-hour demand on the built-in intersection: dominant west/east
// flow with a mid-episode surge.
SimConfig default_sim_config();

struct Vehicle {
    int spawn_time_s = 0;
    double position_m = 0.0;  // distance to the stop line
    double speed_mps = 0.0;
    int stop_count = 0;
    bool stopped = false;
    int wait_streak_s = 0;
};

struct TrafficMetrics {
    std::vector<double> queue_m;     // per lane
    std::vector<double> wait_veh_s;  // per lane
    std::vector<double> speed_mps;   // per lane
    std::vector<double> wait_ped_s;  // per crosswalk
    double stops = 0.0;              // mean stops per crossed vehicle
    double travel_time_s = 0.0;      // mean approach time of crossed vehicles

    double queue_avg() const;
    double wait_veh_avg() const;
    double speed_avg() const;
    double wait_ped_avg() const;
};

using Observation = std::vector<double>;

struct StepInfo {
    int current_phase = 1;
    PhaseMask safety_mask;
    PhaseMask combined_mask;
    bool in_transition = false;
    bool comfort_overridden = false;
    TrafficMetrics metrics;
};

struct StepResult {
    Observation observation;
    double reward = 0.0;
    bool done = false;
    StepInfo info;
};

double compute_reward(const RewardCoeffs& coeffs, const std::vector<double>& queue_m,
                      const std::vector<double>& wait_veh_s, const std::vector<int>& stops_total,
                      const std::vector<double>& wait_ped_s);

class Simulator {
public:
    explicit Simulator(SimConfig cfg);

    Observation reset(uint64_t seed);
    StepResult step(int action);
    Observation observe() const;

    // Instantaneous per-lane metrics plus cumulative stop/travel statistics.
    TrafficMetrics compute_metrics() const;
    // Time-averaged metrics over the episode so far.
    TrafficMetrics episode_metrics() const;

    const SimConfig& config() const { return cfg_; }
    const PhaseGraph& graph() const { return graph_; }
    const PhaseHistory& history() const { return *history_; }
    int num_phases() const { return cfg_.model.num_phases(); }
    int observation_size() const;

    int time_s() const { return t_; }
    bool done() const { return done_; }
    int current_phase() const { return history_->current_phase(); }
    bool in_transition() const { return transition_active_; }
    const std::vector<SignalColor>& colors() const { return colors_; }
    const PhaseMask& safety_mask() const { return safety_mask_; }
    const PhaseMask& combined_mask() const { return combined_mask_; }

    long spawned() const { return spawned_; }
    long crossed() const { return crossed_; }
    long present() const;
    double cumulative_reward() const { return cumulative_reward_; }
    long comfort_override_count() const { return comfort_overrides_; }

    // Rendered-timeline safety checks (conflicting greens, intergreen gaps);
    // populated every simulated second.
    const std::vector<std::string>& safety_violations() const { return violations_; }

private:
    struct LaneState {
        std::deque<Vehicle> vehicles;  // front = closest to stop line
        double discharge_credit = 0.0;
        int stops_this_step = 0;
        // episode accumulators
        double sum_queue_m = 0.0;
        double sum_wait_s = 0.0;
        double sum_speed = 0.0;
    };
    struct CrosswalkState {
        std::optional<int> waiting_since_s;
        double sum_wait_s = 0.0;
    };

    void set_color(int group, SignalColor c);
    void apply_transition_events(int offset);
    void start_transition(int target);
    void update_traffic();
    void refresh_masks();
    void check_rendered_safety();
    double lane_queue_m(const LaneState& l) const;
    double lane_wait_s(const LaneState& l) const;
    double lane_speed(size_t i) const;
    double crosswalk_wait_s(const CrosswalkState& c) const;

    SimConfig cfg_;
    PhaseGraph graph_;
    std::optional<PhaseHistory> history_;
    std::mt19937_64 rng_;

    int t_ = 0;
    bool done_ = true;
    std::vector<SignalColor> colors_;
    std::vector<long> red_since_;  // time each group last turned red
    std::vector<LaneState> lanes_;
    std::vector<CrosswalkState> crosswalks_;

    bool transition_active_ = false;
    TransitionSpec transition_;
    int transition_elapsed_ = 0;

    PhaseMask safety_mask_;
    PhaseMask combined_mask_;
    bool comfort_overridden_now_ = false;

    long spawned_ = 0;
    long crossed_ = 0;
    double sum_travel_time_s_ = 0.0;
    long sum_stops_ = 0;
    double cumulative_reward_ = 0.0;
    long comfort_overrides_ = 0;
    std::vector<std::string> violations_;
};

}  // namespace tsc
