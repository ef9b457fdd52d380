#include "tsc/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace tsc {

using nlohmann::json;

ControllerKind controller_from_token(const std::string& tok) {
    if (tok == "a") return ControllerKind::SafetyLayer;
    if (tok == "b") return ControllerKind::MaskSafety;
    if (tok == "c") return ControllerKind::MaskSafetyPsych;
    if (tok == "fixed") return ControllerKind::FixedTime;
    throw ConfigError("unknown controller '" + tok + "' (expected a|b|c|fixed)");
}

const char* controller_token(ControllerKind k) {
    switch (k) {
        case ControllerKind::SafetyLayer: return "a";
        case ControllerKind::MaskSafety: return "b";
        case ControllerKind::MaskSafetyPsych: return "c";
        case ControllerKind::FixedTime: return "fixed";
    }
    return "?";
}

int safety_layer_project(int wish, const PhaseMask& safety, int current_phase) {
    if (wish >= 1 && wish <= safety.size() && safety.allows(wish)) return wish;
    if (safety.allows(current_phase)) return current_phase;  // no-op while self-edge holds
    for (int p = 1; p <= safety.size(); ++p)
        if (safety.allows(p)) return p;
    throw DeadlockError("safety layer found no permitted phase");
}

int safety_layer(int wish, const PhaseHistory& history, const PhaseGraph& graph,
                 const IntersectionModel& model) {
    return safety_layer_project(wish, phase_mask(graph, history, model), history.current_phase());
}

CyclePlan parse_cycle_plan(const std::string& json_text) {
    try {
        json j = json::parse(json_text);
        CyclePlan plan;
        for (const auto& js : j.at("plan"))
            plan.steps.push_back({js.at("phase").get<int>(), js.at("dwell_s").get<int>()});
        return plan;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad cycle plan: ") + e.what());
    }
}

CyclePlan default_cycle_plan() {
    return CyclePlan{{{3, 30}, {1, 6}, {7, 30}, {1, 6}}};
}

FixedTimeController::FixedTimeController(CyclePlan plan, const PhaseGraph& graph,
                                         const IntersectionModel& model)
    : plan_(std::move(plan)) {
    if (plan_.steps.empty()) throw InvalidCyclePlan("empty plan");
    const size_t n = plan_.steps.size();
    for (size_t i = 0; i < n; ++i) {
        const CyclePlanStep& cur = plan_.steps[i];
        const CyclePlanStep& next = plan_.steps[(i + 1) % n];
        if (!model.has_phase(cur.phase)) throw InvalidCyclePlan("unknown phase in plan");
        if (cur.phase == next.phase) throw InvalidCyclePlan("consecutive plan phases must differ");
        if (!graph.has_edge(cur.phase, next.phase))
            throw InvalidCyclePlan("plan uses missing edge " + std::to_string(cur.phase) + "->" +
                                   std::to_string(next.phase));
        const int need = std::max(model.phase(cur.phase).min_duration_s,
                                  graph.min_dwell_source_s(cur.phase, next.phase));
        if (cur.dwell_s < need)
            throw InvalidCyclePlan("dwell " + std::to_string(cur.dwell_s) + "s in phase " +
                                   std::to_string(cur.phase) + " is below the required " +
                                   std::to_string(need) + "s");
        if (cur.dwell_s > model.phase(cur.phase).max_duration_s)
            throw InvalidCyclePlan("dwell exceeds max duration of phase " + std::to_string(cur.phase));
    }
    // Episodes start in phase 1; enter the cycle at a phase-1 step if it has one.
    for (size_t i = 0; i < n; ++i) {
        if (plan_.steps[i].phase == 1) {
            std::rotate(plan_.steps.begin(), plan_.steps.begin() + static_cast<long>(i),
                        plan_.steps.end());
            break;
        }
    }
}

int FixedTimeController::next_action() {
    const CyclePlanStep& s = plan_.steps[step_index_];
    if (++elapsed_s_ >= s.dwell_s) {
        step_index_ = (step_index_ + 1) % plan_.steps.size();
        elapsed_s_ = 0;
    }
    return s.phase;
}

void FixedTimeController::reset() {
    step_index_ = 0;
    elapsed_s_ = 0;
}

MaskMode mask_mode_for(ControllerKind kind) {
    switch (kind) {
        case ControllerKind::SafetyLayer: return MaskMode::Unmasked;
        case ControllerKind::MaskSafety: return MaskMode::Safety;
        case ControllerKind::MaskSafetyPsych: return MaskMode::Combined;
        case ControllerKind::FixedTime: return MaskMode::Safety;
    }
    return MaskMode::Safety;
}

namespace {

ActionProjector make_projector() {
    return [](int wish, Simulator& env) {
        return safety_layer_project(wish, env.safety_mask(), env.current_phase());
    };
}

SimConfig sim_for(ControllerKind kind, SimConfig scfg) {
    scfg.psych_enabled = kind == ControllerKind::MaskSafetyPsych;
    return scfg;
}

int bounce_window(const SimConfig& scfg) {
    for (const PsychRule& r : scfg.rules.rules)
        if (r.kind == PsychRule::Kind::ForbidBounceBack) return r.window_s;
    return 30;
}

}  // namespace

TrainedAgent train_single(ControllerKind kind, uint64_t seed, const TrainConfig& tcfg,
                          const SimConfig& scfg_in, bool verbose) {
    if (kind == ControllerKind::FixedTime)
        throw ConfigError("fixed-time controller is not trainable");
    const SimConfig scfg = sim_for(kind, scfg_in);
    const MaskMode mode = mask_mode_for(kind);
    const ActionProjector projector = make_projector();
    const ActionProjector* proj = kind == ControllerKind::SafetyLayer ? &projector : nullptr;

    const int workers = std::max(1, tcfg.num_workers);
    const int per_worker = std::max(1, tcfg.train_batch_size / workers);

    std::vector<EnvSession> sessions;
    std::vector<std::mt19937_64> worker_rngs;
    sessions.reserve(static_cast<size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        sessions.emplace_back(scfg, seed * 1000000ULL + static_cast<uint64_t>(w) * 100000ULL);
        worker_rngs.emplace_back(seed * 7919ULL + static_cast<uint64_t>(w) + 1ULL);
    }

    NetSizes sizes;
    sizes.input = sessions.front().env.observation_size();
    sizes.hidden1 = tcfg.hidden1;
    sizes.hidden2 = tcfg.hidden2;
    sizes.actions = scfg.model.num_phases();
    PolicyNet net(sizes, seed);
    AdamState adam(net.params().size(), tcfg.lr);
    std::mt19937_64 update_rng(seed ^ 0x9e3779b97f4a7c15ULL);
    ValueNorm vnorm;

    TrainedAgent out;
    out.sizes = sizes;
    long total_episodes = 0;
    long total_steps = 0;
    double last_mean = 0.0;
    double ema = 0.0;
    bool ema_started = false;

    while (total_episodes < tcfg.episode_total) {
        RolloutBatch batch;
        std::vector<double> finished;
        for (int w = 0; w < workers; ++w) {
            RolloutBatch b = collect_rollout(sessions[static_cast<size_t>(w)], net,
                                             worker_rngs[static_cast<size_t>(w)], per_worker, mode,
                                             proj, &finished, &vnorm);
            compute_advantages(b, tcfg);
            batch.concat(b);
        }
        total_steps += batch.n;
        total_episodes += static_cast<long>(finished.size());

        update(net, adam, batch, tcfg, update_rng, &vnorm);

        if (!finished.empty())
            last_mean = std::accumulate(finished.begin(), finished.end(), 0.0) /
                        static_cast<double>(finished.size());
        if (!finished.empty() || ema_started) {
            if (!ema_started) {
                ema = last_mean;
                ema_started = true;
            } else {
                ema = 0.9 * ema + 0.1 * last_mean;
            }
        }
        out.curve.push_back({total_steps, total_episodes, last_mean, ema});
        if (verbose)
            std::cerr << "[train " << controller_token(kind) << " seed " << seed << "] steps "
                      << total_steps << " episodes " << total_episodes << " mean_ep_reward "
                      << last_mean << "\n";
    }

    out.theta = net.params();
    for (const EnvSession& s : sessions) {
        out.comfort_overrides += s.env.comfort_override_count();
        out.safety_violations += static_cast<long>(s.env.safety_violations().size());
    }
    return out;
}

long train_controller(ControllerKind kind, const std::vector<uint64_t>& seeds,
                      const TrainConfig& tcfg, const SimConfig& scfg, const std::string& out_dir,
                      bool verbose) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    std::vector<std::thread> threads;
    std::vector<std::string> errors(seeds.size());
    std::vector<long> violations(seeds.size(), 0);
    for (size_t i = 0; i < seeds.size(); ++i) {
        threads.emplace_back([&, i] {
            try {
                const uint64_t seed = seeds[i];
                TrainedAgent agent = train_single(kind, seed, tcfg, scfg, verbose);
                violations[i] = agent.safety_violations;
                const std::string tag =
                    std::string(controller_token(kind)) + "_" + std::to_string(seed);
                std::ofstream curve(out_dir + "/curves_" + tag + ".csv");
                curve << "env_steps,episodes,mean_episodic_reward,ema_reward\n";
                for (const CurveRow& r : agent.curve)
                    curve << r.env_steps << "," << r.episodes << "," << r.mean_episodic_reward << ","
                          << r.ema_reward << "\n";
                PolicyNet net(agent.sizes, 0);
                net.params() = agent.theta;
                save_checkpoint(out_dir + "/ckpt_" + tag + ".json", net);
            } catch (const std::exception& e) {
                errors[i] = e.what();
            }
        });
    }
    for (std::thread& t : threads) t.join();
    for (const std::string& e : errors)
        if (!e.empty()) throw std::runtime_error("training trial failed: " + e);
    return std::accumulate(violations.begin(), violations.end(), 0L);
}

long count_bounce_patterns(const std::vector<std::pair<int, int>>& phase_durations, int hub_phase,
                           int window_s) {
    long count = 0;
    for (size_t i = 0; i + 2 < phase_durations.size(); ++i) {
        if (phase_durations[i + 1].first == hub_phase &&
            phase_durations[i + 1].second < window_s &&
            phase_durations[i].first == phase_durations[i + 2].first)
            ++count;
    }
    return count;
}

namespace {

void write_trace(const std::string& path, const std::vector<std::string>& rows,
                 const SimConfig& scfg) {
    std::ofstream f(path);
    f << "t,phase,in_transition";
    for (int g = 0; g < scfg.model.num_groups(); ++g) f << ",color_" << g;
    f << ",reward";
    for (const LaneConfig& l : scfg.lanes) f << ",queue_" << l.name;
    f << "\n";
    for (const std::string& r : rows) f << r << "\n";
}

template <typename NextAction>
EvalRun run_episode(Simulator& env, uint64_t seed, NextAction next_action, const SimConfig& scfg,
                    const std::string& trace_path) {
    EvalRun run;
    run.seed = seed;
    env.reset(seed);
    std::vector<std::pair<int, int>> phase_durations;
    int cur_phase = env.current_phase();
    int cur_dwell = 0;
    std::vector<std::string> trace_rows;

    while (!env.done()) {
        const int action = next_action(env);
        StepResult sr = env.step(action);
        if (sr.info.current_phase == cur_phase) {
            ++cur_dwell;
        } else {
            phase_durations.emplace_back(cur_phase, cur_dwell);
            cur_phase = sr.info.current_phase;
            cur_dwell = 1;
        }
        if (!trace_path.empty()) {
            std::ostringstream os;
            os << env.time_s() - 1 << "," << sr.info.current_phase << ","
               << (sr.info.in_transition ? 1 : 0);
            for (SignalColor c : env.colors()) os << "," << to_token(c);
            os << "," << sr.reward;
            for (double q : sr.info.metrics.queue_m) os << "," << q;
            trace_rows.push_back(os.str());
        }
    }
    phase_durations.emplace_back(cur_phase, cur_dwell);

    run.cumulative_reward = env.cumulative_reward();
    run.metrics = env.episode_metrics();
    run.bounce_count = count_bounce_patterns(phase_durations, 1, bounce_window(scfg));
    run.safety_violations = static_cast<long>(env.safety_violations().size());
    if (!trace_path.empty()) write_trace(trace_path, trace_rows, scfg);
    return run;
}

}  // namespace

EvalReport evaluate_policy(const PolicyNet& net, ControllerKind kind, const SimConfig& scfg_in,
                           const std::vector<uint64_t>& eval_seeds, const std::string& trace_dir,
                           bool sample) {
    const SimConfig scfg = sim_for(kind, scfg_in);
    const MaskMode mode = mask_mode_for(kind);
    EvalReport report;
    Simulator env(scfg);
    for (uint64_t seed : eval_seeds) {
        std::mt19937_64 action_rng(seed ^ 0xeaa1eaa1eaa1ULL);
        auto next = [&](Simulator& e) {
            PhaseMask mask = mode == MaskMode::Unmasked ? PhaseMask::all_ones(e.num_phases())
                             : mode == MaskMode::Safety ? e.safety_mask()
                                                        : e.combined_mask();
            const ForwardCache fwd = net.forward(e.observe(), mask);
            const int wish = sample ? fwd.dist.sample(action_rng) : fwd.dist.argmax();
            if (kind == ControllerKind::SafetyLayer)
                return safety_layer_project(wish, e.safety_mask(), e.current_phase());
            return wish;
        };
        std::string trace_path =
            trace_dir.empty() ? "" : trace_dir + "/trace_" + std::to_string(seed) + ".csv";
        report.runs.push_back(run_episode(env, seed, next, scfg, trace_path));
    }
    return report;
}

EvalReport evaluate_fixed_time(const CyclePlan& plan, const SimConfig& scfg_in,
                               const std::vector<uint64_t>& eval_seeds,
                               const std::string& trace_dir) {
    SimConfig scfg = sim_for(ControllerKind::FixedTime, scfg_in);
    EvalReport report;
    Simulator env(scfg);
    FixedTimeController ctrl(plan, env.graph(), scfg.model);
    for (uint64_t seed : eval_seeds) {
        ctrl.reset();
        auto next = [&](Simulator&) { return ctrl.next_action(); };
        std::string trace_path =
            trace_dir.empty() ? "" : trace_dir + "/trace_fixed_" + std::to_string(seed) + ".csv";
        report.runs.push_back(run_episode(env, seed, next, scfg, trace_path));
    }
    return report;
}

double EvalReport::mean_cumulative_reward() const {
    if (runs.empty()) return 0.0;
    double s = 0.0;
    for (const EvalRun& r : runs) s += r.cumulative_reward;
    return s / static_cast<double>(runs.size());
}

TrafficMetrics EvalReport::mean_metrics() const {
    TrafficMetrics m;
    if (runs.empty()) return m;
    const auto& first = runs.front().metrics;
    m.queue_m.assign(first.queue_m.size(), 0.0);
    m.wait_veh_s.assign(first.wait_veh_s.size(), 0.0);
    m.speed_mps.assign(first.speed_mps.size(), 0.0);
    m.wait_ped_s.assign(first.wait_ped_s.size(), 0.0);
    for (const EvalRun& r : runs) {
        for (size_t i = 0; i < m.queue_m.size(); ++i) m.queue_m[i] += r.metrics.queue_m[i];
        for (size_t i = 0; i < m.wait_veh_s.size(); ++i) m.wait_veh_s[i] += r.metrics.wait_veh_s[i];
        for (size_t i = 0; i < m.speed_mps.size(); ++i) m.speed_mps[i] += r.metrics.speed_mps[i];
        for (size_t i = 0; i < m.wait_ped_s.size(); ++i) m.wait_ped_s[i] += r.metrics.wait_ped_s[i];
        m.stops += r.metrics.stops;
        m.travel_time_s += r.metrics.travel_time_s;
    }
    const double n = static_cast<double>(runs.size());
    for (double& x : m.queue_m) x /= n;
    for (double& x : m.wait_veh_s) x /= n;
    for (double& x : m.speed_mps) x /= n;
    for (double& x : m.wait_ped_s) x /= n;
    m.stops /= n;
    m.travel_time_s /= n;
    return m;
}

long EvalReport::total_bounces() const {
    long s = 0;
    for (const EvalRun& r : runs) s += r.bounce_count;
    return s;
}

long EvalReport::total_safety_violations() const {
    long s = 0;
    for (const EvalRun& r : runs) s += r.safety_violations;
    return s;
}

void write_eval_csv(const std::string& path, const EvalReport& report) {
    std::ofstream f(path);
    f << "seed,queue_m,wait_veh_s,speed_mps,stops,travel_time_s,wait_ped_s,cumulative_reward,"
         "bounces,safety_violations\n";
    for (const EvalRun& r : report.runs) {
        f << r.seed << "," << r.metrics.queue_avg() << "," << r.metrics.wait_veh_avg() << ","
          << r.metrics.speed_avg() << "," << r.metrics.stops << "," << r.metrics.travel_time_s
          << "," << r.metrics.wait_ped_avg() << "," << r.cumulative_reward << "," << r.bounce_count
          << "," << r.safety_violations << "\n";
    }
    const TrafficMetrics m = report.mean_metrics();
    f << "mean," << m.queue_avg() << "," << m.wait_veh_avg() << "," << m.speed_avg() << ","
      << m.stops << "," << m.travel_time_s << "," << m.wait_ped_avg() << ","
      << report.mean_cumulative_reward() << "," << report.total_bounces() << ","
      << report.total_safety_violations() << "\n";
}

void write_metrics_table(const std::string& path, const std::string& controller,
                         const std::vector<EvalReport>& trials) {
    std::ofstream f(path);
    f << "ctrl,trial,queue_m,wait_veh_s,speed_mps,stops,travel_time_s,wait_ped_s,cum_reward\n";

    struct Row {
        double q, wv, sp, st, tt, wp, cr;
    };
    std::vector<Row> rows;
    for (size_t i = 0; i < trials.size(); ++i) {
        const TrafficMetrics m = trials[i].mean_metrics();
        Row r{m.queue_avg(),  m.wait_veh_avg(), m.speed_avg(),
              m.stops,        m.travel_time_s,  m.wait_ped_avg(),
              trials[i].mean_cumulative_reward()};
        rows.push_back(r);
        f << controller << "," << (i + 1) << "," << r.q << "," << r.wv << "," << r.sp << "," << r.st
          << "," << r.tt << "," << r.wp << "," << r.cr << "\n";
    }
    if (rows.empty()) return;

    std::vector<size_t> order(rows.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return rows[a].cr > rows[b].cr; });
    const size_t k = std::min<size_t>(3, rows.size());
    Row best{};
    for (size_t i = 0; i < k; ++i) {
        const Row& r = rows[order[i]];
        best.q += r.q;
        best.wv += r.wv;
        best.sp += r.sp;
        best.st += r.st;
        best.tt += r.tt;
        best.wp += r.wp;
        best.cr += r.cr;
    }
    f << controller << ",avg_best_3," << best.q / k << "," << best.wv / k << "," << best.sp / k
      << "," << best.st / k << "," << best.tt / k << "," << best.wp / k << "," << best.cr / k
      << "\n";

    auto sd = [&](auto get) {
        double mean = 0.0;
        for (const Row& r : rows) mean += get(r);
        mean /= static_cast<double>(rows.size());
        if (rows.size() < 2) return 0.0;
        double var = 0.0;
        for (const Row& r : rows) var += (get(r) - mean) * (get(r) - mean);
        return std::sqrt(var / static_cast<double>(rows.size() - 1));
    };
    f << controller << ",std," << sd([](const Row& r) { return r.q; }) << ","
      << sd([](const Row& r) { return r.wv; }) << "," << sd([](const Row& r) { return r.sp; })
      << "," << sd([](const Row& r) { return r.st; }) << ","
      << sd([](const Row& r) { return r.tt; }) << "," << sd([](const Row& r) { return r.wp; })
      << "," << sd([](const Row& r) { return r.cr; }) << "\n";
}

std::vector<uint64_t> parse_seed_list(const std::string& csv) {
    std::vector<uint64_t> seeds;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        seeds.push_back(std::stoull(tok));
    }
    if (seeds.empty()) throw ConfigError("empty seed list");
    return seeds;
}

}  // namespace tsc
