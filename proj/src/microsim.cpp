#include "tsc/microsim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace tsc {

namespace {
constexpr double kStopSpeed = 0.1;  // m/s threshold for "waiting"
constexpr long kNeverRed = -1000000000;

double avg(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}
}  // namespace

double TrafficMetrics::queue_avg() const { return avg(queue_m); }
double TrafficMetrics::wait_veh_avg() const { return avg(wait_veh_s); }
double TrafficMetrics::speed_avg() const { return avg(speed_mps); }
double TrafficMetrics::wait_ped_avg() const { return avg(wait_ped_s); }

SimConfig default_sim_config() {
    SimConfig cfg;
    cfg.model = owl322_preset();
    cfg.rules = default_rules();

    auto profile = [](double base) {
        // 1.5x surge across the middle third of the hour; repeats for longer
        // episodes via rate_at clamping to the last piece.
        return ArrivalProfile{{{1200, base}, {2400, base * 1.5}, {3600, base}}};
    };
    cfg.lanes = {
        {"west", 0, 280.0, 14.0, profile(600.0)},
        {"east", 1, 280.0, 14.0, profile(600.0)},
        {"north", 2, 280.0, 14.0, profile(250.0)},
        {"south", 3, 280.0, 14.0, profile(250.0)},
    };
    cfg.crosswalks = {
        {"w&e", 4, profile(120.0)},
        {"n&s", 5, profile(120.0)},
    };
    cfg.episode_s = 3600;
    return cfg;
}

double compute_reward(const RewardCoeffs& c, const std::vector<double>& queue_m,
                      const std::vector<double>& wait_veh_s, const std::vector<int>& stops_total,
                      const std::vector<double>& wait_ped_s) {
    double r = 0.0;
    for (size_t l = 0; l < queue_m.size(); ++l)
        r += c.queue * queue_m[l] + c.wait_veh * wait_veh_s[l] + c.stops * stops_total[l];
    for (double w : wait_ped_s) r += c.wait_ped * w;
    return -r;
}

Simulator::Simulator(SimConfig cfg)
    : cfg_(std::move(cfg)), graph_(cfg_.model.num_phases(), cfg_.model.graph_edges) {
    if (cfg_.model.num_phases() == 0) throw ConfigError("sim config has no phases");
    if (cfg_.episode_s <= 0) throw ConfigError("episode length must be positive");
    for (const LaneConfig& l : cfg_.lanes)
        if (l.signal_group < 0 || l.signal_group >= cfg_.model.num_groups())
            throw ConfigError("lane '" + l.name + "' references unknown signal group");
    for (const CrosswalkConfig& c : cfg_.crosswalks)
        if (c.signal_group < 0 || c.signal_group >= cfg_.model.num_groups())
            throw ConfigError("crosswalk '" + c.name + "' references unknown signal group");
}

int Simulator::observation_size() const {
    return 4 * static_cast<int>(cfg_.lanes.size()) + static_cast<int>(cfg_.crosswalks.size()) +
           cfg_.model.num_phases() + 1;
}

long Simulator::present() const {
    long n = 0;
    for (const LaneState& l : lanes_) n += static_cast<long>(l.vehicles.size());
    return n;
}

Observation Simulator::reset(uint64_t seed) {
    rng_.seed(seed);
    t_ = 0;
    done_ = false;
    history_.emplace(1);
    colors_ = cfg_.model.phase(1).colors;
    red_since_.assign(static_cast<size_t>(cfg_.model.num_groups()), kNeverRed);
    lanes_.assign(cfg_.lanes.size(), LaneState{});
    crosswalks_.assign(cfg_.crosswalks.size(), CrosswalkState{});
    transition_active_ = false;
    transition_elapsed_ = 0;
    spawned_ = 0;
    crossed_ = 0;
    sum_travel_time_s_ = 0.0;
    sum_stops_ = 0;
    cumulative_reward_ = 0.0;
    comfort_overrides_ = 0;
    violations_.clear();
    refresh_masks();
    return observe();
}

void Simulator::set_color(int group, SignalColor c) {
    SignalColor old = colors_[static_cast<size_t>(group)];
    if (old == c) return;
    if (c == SignalColor::Red) {
        red_since_[static_cast<size_t>(group)] = t_;
    } else if (old == SignalColor::Red) {
        // entering: verify intergreen against every conflicting group's last red
        for (int c2 = 0; c2 < cfg_.model.num_groups(); ++c2) {
            if (c2 == group || !cfg_.model.conflicts.conflicts(c2, group)) continue;
            long gap = static_cast<long>(t_) - red_since_[static_cast<size_t>(c2)];
            if (gap < cfg_.model.intergreen.get(c2, group)) {
                std::ostringstream os;
                os << "t=" << t_ << ": group " << group << " green only " << gap
                   << "s after group " << c2 << " red (need "
                   << cfg_.model.intergreen.get(c2, group) << ")";
                violations_.push_back(os.str());
            }
        }
    }
    colors_[static_cast<size_t>(group)] = c;
}

void Simulator::apply_transition_events(int offset) {
    for (const TransitionEvent& e : transition_.timeline)
        if (e.offset_s == offset) set_color(e.signal_group, e.color);
    if (transition_elapsed_ >= transition_.total_duration_s) transition_active_ = false;
}

void Simulator::start_transition(int target) {
    std::vector<int> floor(static_cast<size_t>(cfg_.model.num_groups()), 0);
    for (int g = 0; g < cfg_.model.num_groups(); ++g) {
        for (int c = 0; c < cfg_.model.num_groups(); ++c) {
            if (c == g || !cfg_.model.conflicts.conflicts(c, g)) continue;
            if (colors_[static_cast<size_t>(c)] != SignalColor::Red) continue;
            long needed = red_since_[static_cast<size_t>(c)] + cfg_.model.intergreen.get(c, g) -
                          static_cast<long>(t_);
            floor[static_cast<size_t>(g)] =
                std::max(floor[static_cast<size_t>(g)], static_cast<int>(std::max(0L, needed)));
        }
    }
    transition_ = build_transition(cfg_.model, history_->current_phase(), target,
                                   cfg_.model.yellow_s, &floor);
    transition_active_ = true;
    transition_elapsed_ = 0;
}

void Simulator::update_traffic() {
    for (size_t li = 0; li < lanes_.size(); ++li) {
        LaneState& lane = lanes_[li];
        const LaneConfig& lc = cfg_.lanes[li];
        const bool green = is_green(colors_[static_cast<size_t>(lc.signal_group)]);
        lane.stops_this_step = 0;

        if (green)
            lane.discharge_credit = std::min(1.0, lane.discharge_credit + 1.0 / cfg_.sat_headway_s);
        else
            lane.discharge_credit = 0.0;

        // front vehicle may cross the stop line
        if (green && !lane.vehicles.empty() && lane.discharge_credit >= 1.0 &&
            lane.vehicles.front().position_m <= lc.v_max_mps + 1e-9) {
            const Vehicle& v = lane.vehicles.front();
            ++crossed_;
            sum_travel_time_s_ += static_cast<double>(t_ + 1 - v.spawn_time_s);
            sum_stops_ += v.stop_count;
            lane.discharge_credit -= 1.0;
            lane.vehicles.pop_front();
        }

        double ahead = -cfg_.jam_spacing_m;  // position of the predecessor
        for (size_t i = 0; i < lane.vehicles.size(); ++i) {
            Vehicle& v = lane.vehicles[i];
            double limit = (i == 0) ? 0.0 : ahead + cfg_.jam_spacing_m;
            double new_pos = std::max(limit, v.position_m - lc.v_max_mps);
            v.speed_mps = v.position_m - new_pos;
            v.position_m = new_pos;
            bool now_stopped = v.speed_mps < kStopSpeed;
            if (now_stopped && !v.stopped) {
                ++v.stop_count;
                ++lane.stops_this_step;
            }
            v.wait_streak_s = now_stopped ? v.wait_streak_s + 1 : 0;
            v.stopped = now_stopped;
            ahead = v.position_m;
        }

        const double rate = lc.arrivals.rate_at(t_) / 3600.0;
        int k = rate > 0.0 ? std::poisson_distribution<int>(rate)(rng_) : 0;
        for (int s = 0; s < k; ++s) {
            Vehicle v;
            v.spawn_time_s = t_ + 1;
            v.position_m = lc.length_m;
            if (!lane.vehicles.empty())
                v.position_m = std::max(v.position_m, lane.vehicles.back().position_m + cfg_.jam_spacing_m);
            v.speed_mps = lc.v_max_mps;
            lane.vehicles.push_back(v);
            ++spawned_;
        }

        lane.sum_queue_m += lane_queue_m(lane);
        lane.sum_wait_s += lane_wait_s(lane);
        lane.sum_speed += lane_speed(li);
    }

    for (size_t ci = 0; ci < crosswalks_.size(); ++ci) {
        CrosswalkState& cw = crosswalks_[ci];
        const CrosswalkConfig& cc = cfg_.crosswalks[ci];
        const bool green = is_green(colors_[static_cast<size_t>(cc.signal_group)]);
        if (green) {
            cw.waiting_since_s.reset();
        } else {
            const double rate = cc.arrivals.rate_at(t_) / 3600.0;
            int k = rate > 0.0 ? std::poisson_distribution<int>(rate)(rng_) : 0;
            if (k > 0 && !cw.waiting_since_s) cw.waiting_since_s = t_ + 1;
        }
        cw.sum_wait_s += crosswalk_wait_s(cw);
    }
}

void Simulator::check_rendered_safety() {
    for (int a = 0; a < cfg_.model.num_groups(); ++a) {
        for (int b = a + 1; b < cfg_.model.num_groups(); ++b) {
            if (cfg_.model.conflicts.conflicts(a, b) && colors_[static_cast<size_t>(a)] != SignalColor::Red &&
                colors_[static_cast<size_t>(b)] != SignalColor::Red) {
                std::ostringstream os;
                os << "t=" << t_ << ": conflicting groups " << a << " and " << b << " both non-red";
                violations_.push_back(os.str());
            }
        }
    }
}

void Simulator::refresh_masks() {
    const int n = cfg_.model.num_phases();
    if (transition_active_) {
        // actions latch onto the transition target until it completes
        PhaseMask m{std::vector<uint8_t>(static_cast<size_t>(n), 0)};
        m.bits[static_cast<size_t>(transition_.to_phase - 1)] = 1;
        safety_mask_ = m;
        combined_mask_ = m;
        comfort_overridden_now_ = false;
        return;
    }
    safety_mask_ = phase_mask(graph_, *history_, cfg_.model);
    if (cfg_.psych_enabled) {
        CombinedMask cm = combine_masks(safety_mask_, psych_mask(cfg_.rules, *history_, n));
        combined_mask_ = cm.mask;
        comfort_overridden_now_ = cm.comfort_overridden;
        if (cm.comfort_overridden) ++comfort_overrides_;
    } else {
        combined_mask_ = safety_mask_;
        comfort_overridden_now_ = false;
    }
}

StepResult Simulator::step(int action) {
    if (done_) throw EpisodeDone();
    if (!cfg_.model.has_phase(action)) throw IllegalAction("unknown phase " + std::to_string(action));
    if (!combined_mask_.allows(action))
        throw IllegalAction("phase " + std::to_string(action) + " violates the published mask at t=" +
                            std::to_string(t_));

    if (transition_active_) {
        apply_transition_events(transition_elapsed_);
        history_->accrue(1);
    } else if (action != history_->current_phase()) {
        start_transition(action);
        advance(*history_, action, 1, graph_, cfg_.model);
        apply_transition_events(0);
    } else {
        advance(*history_, action, 1, graph_, cfg_.model);
    }

    check_rendered_safety();
    update_traffic();
    if (transition_active_) ++transition_elapsed_;

    std::vector<double> queue(lanes_.size()), wait(lanes_.size()), ped(crosswalks_.size());
    std::vector<int> stops(lanes_.size());
    for (size_t i = 0; i < lanes_.size(); ++i) {
        queue[i] = lane_queue_m(lanes_[i]);
        wait[i] = lane_wait_s(lanes_[i]);
        stops[i] = lanes_[i].stops_this_step;
    }
    for (size_t i = 0; i < crosswalks_.size(); ++i) ped[i] = crosswalk_wait_s(crosswalks_[i]);
    const double reward = compute_reward(cfg_.reward, queue, wait, stops, ped);
    cumulative_reward_ += reward;

    ++t_;
    done_ = t_ >= cfg_.episode_s;
    refresh_masks();

    StepResult res;
    res.observation = observe();
    res.reward = reward;
    res.done = done_;
    res.info.current_phase = history_->current_phase();
    res.info.safety_mask = safety_mask_;
    res.info.combined_mask = combined_mask_;
    res.info.in_transition = transition_active_;
    res.info.comfort_overridden = comfort_overridden_now_;
    res.info.metrics = compute_metrics();
    return res;
}

double Simulator::lane_queue_m(const LaneState& l) const {
    long stopped = std::count_if(l.vehicles.begin(), l.vehicles.end(),
                                 [](const Vehicle& v) { return v.speed_mps < kStopSpeed; });
    return static_cast<double>(stopped) * cfg_.jam_spacing_m;
}

double Simulator::lane_wait_s(const LaneState& l) const {
    int w = 0;
    for (const Vehicle& v : l.vehicles) w = std::max(w, v.wait_streak_s);
    return static_cast<double>(w);
}

double Simulator::lane_speed(size_t i) const {
    const LaneState& l = lanes_[i];
    if (l.vehicles.empty()) return 0.0;
    double s = 0.0;
    for (const Vehicle& v : l.vehicles) s += v.speed_mps;
    return s / static_cast<double>(l.vehicles.size());
}

double Simulator::crosswalk_wait_s(const CrosswalkState& c) const {
    return c.waiting_since_s ? static_cast<double>(t_ + 1 - *c.waiting_since_s) : 0.0;
}

TrafficMetrics Simulator::compute_metrics() const {
    TrafficMetrics m;
    for (size_t i = 0; i < lanes_.size(); ++i) {
        m.queue_m.push_back(lane_queue_m(lanes_[i]));
        m.wait_veh_s.push_back(lane_wait_s(lanes_[i]));
        m.speed_mps.push_back(lane_speed(i));
    }
    for (const CrosswalkState& c : crosswalks_) m.wait_ped_s.push_back(crosswalk_wait_s(c));
    m.stops = crossed_ > 0 ? static_cast<double>(sum_stops_) / static_cast<double>(crossed_) : 0.0;
    m.travel_time_s = crossed_ > 0 ? sum_travel_time_s_ / static_cast<double>(crossed_) : 0.0;
    return m;
}

TrafficMetrics Simulator::episode_metrics() const {
    TrafficMetrics m;
    const double steps = std::max(1, t_);
    for (const LaneState& l : lanes_) {
        m.queue_m.push_back(l.sum_queue_m / steps);
        m.wait_veh_s.push_back(l.sum_wait_s / steps);
        m.speed_mps.push_back(l.sum_speed / steps);
    }
    for (const CrosswalkState& c : crosswalks_) m.wait_ped_s.push_back(c.sum_wait_s / steps);
    m.stops = crossed_ > 0 ? static_cast<double>(sum_stops_) / static_cast<double>(crossed_) : 0.0;
    m.travel_time_s = crossed_ > 0 ? sum_travel_time_s_ / static_cast<double>(crossed_) : 0.0;
    return m;
}

Observation Simulator::observe() const {
    Observation obs;
    obs.reserve(static_cast<size_t>(observation_size()));
    for (size_t i = 0; i < lanes_.size(); ++i) {
        obs.push_back(lane_queue_m(lanes_[i]) / cfg_.queue_norm_m);
        obs.push_back(lane_wait_s(lanes_[i]) / cfg_.wait_norm_s);
        obs.push_back(lane_speed(i) / cfg_.lanes[i].v_max_mps);
        obs.push_back(static_cast<double>(lanes_[i].vehicles.size()) / cfg_.wave_norm);
    }
    for (const CrosswalkState& c : crosswalks_) obs.push_back(crosswalk_wait_s(c) / cfg_.wait_norm_s);
    const int cur = history_->current_phase();
    for (int p = 1; p <= cfg_.model.num_phases(); ++p) obs.push_back(p == cur ? 1.0 : 0.0);
    obs.push_back(static_cast<double>(history_->current_duration()) /
                  static_cast<double>(cfg_.model.phase(cur).max_duration_s));
    return obs;
}

}  // namespace tsc
