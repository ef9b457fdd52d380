#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "tsc/harness.hpp"

using namespace tsc;

namespace {

SimConfig zero_demand_config() {
    SimConfig cfg = default_sim_config();
    for (LaneConfig& l : cfg.lanes) l.arrivals.pieces.clear();
    for (CrosswalkConfig& c : cfg.crosswalks) c.arrivals.pieces.clear();
    return cfg;
}

}  // namespace

TEST_CASE("controller tokens round-trip") {
    for (const char* tok : {"a", "b", "c", "fixed"})
        CHECK(controller_token(controller_from_token(tok)) == std::string(tok));
    CHECK_THROWS_AS(controller_from_token("d"), ConfigError);
}

TEST_CASE("safety layer projection: pass-through, no-op stay, forced advance") {
    PhaseMask m{{0, 1, 1, 0, 0, 0, 0, 0}};

    CHECK(safety_layer_project(3, m, 2) == 3);  // legal wish passes through
    CHECK(safety_layer_project(7, m, 2) == 2);  // illegal wish becomes a no-op
    // self bit gone too: lowest permitted phase is forced
    PhaseMask expired{{1, 0, 0, 1, 1, 0, 0, 0}};
    CHECK(safety_layer_project(7, expired, 3) == 1);
    CHECK(safety_layer_project(0, m, 2) == 2);  // out-of-range wish handled

    PhaseMask none{{0, 0, 0, 0, 0, 0, 0, 0}};
    CHECK_THROWS_AS(safety_layer_project(1, none, 1), DeadlockError);
}

TEST_CASE("safety layer over a live history") {
    IntersectionModel model = owl322_preset();
    PhaseGraph graph(model.num_phases(), model.graph_edges);
    PhaseHistory h(3);
    h.accrue(2);  // below min duration: everything but 3 is masked
    CHECK(safety_layer(7, h, graph, model) == 3);
    h.accrue(58);  // at max duration: self bit drops
    int forced = safety_layer(7, h, graph, model);
    CHECK(forced != 3);
    CHECK(forced != 7);
    CHECK(phase_mask(graph, h, model).allows(forced));
}

TEST_CASE("cycle plan parsing and validation") {
    CyclePlan plan = parse_cycle_plan(
        R"({"plan": [{"phase": 3, "dwell_s": 30}, {"phase": 1, "dwell_s": 6},
                     {"phase": 7, "dwell_s": 30}, {"phase": 1, "dwell_s": 6}]})");
    CHECK(plan.steps.size() == 4);
    CHECK_THROWS_AS(parse_cycle_plan("{}"), ConfigError);

    IntersectionModel model = owl322_preset();
    PhaseGraph graph(model.num_phases(), model.graph_edges);
    CHECK_NOTHROW(FixedTimeController(plan, graph, model));
    CHECK_NOTHROW(FixedTimeController(default_cycle_plan(), graph, model));

    CHECK_THROWS_AS(FixedTimeController(CyclePlan{}, graph, model), InvalidCyclePlan);
    CHECK_THROWS_AS(FixedTimeController(CyclePlan{{{3, 30}, {7, 30}}}, graph, model),
                    InvalidCyclePlan);  // opposing streams need phase 1 between them
    CHECK_THROWS_AS(FixedTimeController(CyclePlan{{{1, 2}, {3, 30}}}, graph, model),
                    InvalidCyclePlan);  // 2 s in phase 1 is under the 6 s edge dwell
    CHECK_THROWS_AS(FixedTimeController(CyclePlan{{{1, 6}, {3, 90}}}, graph, model),
                    InvalidCyclePlan);  // beyond max duration
    CHECK_THROWS_AS(FixedTimeController(CyclePlan{{{1, 6}, {9, 10}}}, graph, model),
                    InvalidCyclePlan);
    CHECK_THROWS_AS(FixedTimeController(CyclePlan{{{3, 30}, {3, 30}}}, graph, model),
                    InvalidCyclePlan);
}

TEST_CASE("fixed-time controller starts at a phase-1 plan step") {
    IntersectionModel model = owl322_preset();
    PhaseGraph graph(model.num_phases(), model.graph_edges);
    FixedTimeController ctrl(default_cycle_plan(), graph, model);
    CHECK(ctrl.next_action() == 1);
    ctrl.reset();
    std::vector<int> seq;
    for (int i = 0; i < 80; ++i) seq.push_back(ctrl.next_action());
    // 6x phase 1, 30x phase 7, 6x phase 1, 30x phase 3, wrap
    CHECK(seq[0] == 1);
    CHECK(seq[5] == 1);
    CHECK(seq[6] == 7);
    CHECK(seq[35] == 7);
    CHECK(seq[36] == 1);
    CHECK(seq[42] == 3);
    CHECK(seq[72] == 1);
}

TEST_CASE("fixed-time baseline on zero demand scores zero") {
    SimConfig cfg = zero_demand_config();
    cfg.episode_s = 300;
    EvalReport rep = evaluate_fixed_time(default_cycle_plan(), cfg, {1, 2, 3});
    REQUIRE(rep.runs.size() == 3);
    for (const EvalRun& r : rep.runs) {
        CHECK(r.cumulative_reward == 0.0);
        CHECK(r.metrics.wait_veh_avg() == 0.0);
        CHECK(r.metrics.wait_ped_avg() == 0.0);
        CHECK(r.safety_violations == 0);
    }
    CHECK(rep.mean_cumulative_reward() == 0.0);
}

TEST_CASE("fixed-time evaluation is deterministic and safe under load") {
    SimConfig cfg = default_sim_config();
    cfg.episode_s = 400;
    EvalReport a = evaluate_fixed_time(default_cycle_plan(), cfg, {11, 12});
    EvalReport b = evaluate_fixed_time(default_cycle_plan(), cfg, {11, 12});
    REQUIRE(a.runs.size() == b.runs.size());
    for (size_t i = 0; i < a.runs.size(); ++i) {
        CHECK(a.runs[i].cumulative_reward == b.runs[i].cumulative_reward);
        CHECK(a.runs[i].metrics.queue_avg() == b.runs[i].metrics.queue_avg());
    }
    CHECK(a.total_safety_violations() == 0);
    CHECK(a.mean_cumulative_reward() < 0.0);
}

TEST_CASE("bounce pattern counting") {
    using PD = std::vector<std::pair<int, int>>;
    CHECK(count_bounce_patterns(PD{{3, 20}, {1, 7}, {3, 15}}, 1, 30) == 1);
    CHECK(count_bounce_patterns(PD{{3, 20}, {1, 30}, {3, 15}}, 1, 30) == 0);  // full window dwell
    CHECK(count_bounce_patterns(PD{{3, 20}, {1, 7}, {4, 15}}, 1, 30) == 0);  // different flank
    CHECK(count_bounce_patterns(PD{{3, 5}, {1, 6}, {3, 5}, {1, 6}, {3, 5}}, 1, 30) == 2);
    CHECK(count_bounce_patterns(PD{{2, 9}, {3, 9}, {2, 9}}, 1, 30) == 0);  // hub mismatch
    CHECK(count_bounce_patterns(PD{}, 1, 30) == 0);
}

TEST_CASE("seed list parsing") {
    CHECK(parse_seed_list("1,2,30") == std::vector<uint64_t>{1, 2, 30});
    CHECK(parse_seed_list("7") == std::vector<uint64_t>{7});
    CHECK_THROWS_AS(parse_seed_list(""), ConfigError);
}

TEST_CASE("eval report arithmetic recomputes from its rows") {
    EvalReport rep;
    for (int i = 0; i < 3; ++i) {
        EvalRun r;
        r.seed = static_cast<uint64_t>(i);
        r.cumulative_reward = -100.0 * (i + 1);
        r.metrics.queue_m = {double(i), double(2 * i)};
        r.metrics.wait_veh_s = {1.0, 3.0};
        r.metrics.speed_mps = {5.0, 5.0};
        r.metrics.wait_ped_s = {double(i)};
        r.metrics.stops = double(i);
        r.metrics.travel_time_s = 40.0 + i;
        r.bounce_count = i;
        r.safety_violations = 0;
        rep.runs.push_back(r);
    }
    CHECK(rep.mean_cumulative_reward() == doctest::Approx(-200.0));
    CHECK(rep.total_bounces() == 3);
    TrafficMetrics m = rep.mean_metrics();
    CHECK(m.queue_m[0] == doctest::Approx(1.0));
    CHECK(m.queue_m[1] == doctest::Approx(2.0));
    CHECK(m.stops == doctest::Approx(1.0));
    CHECK(m.travel_time_s == doctest::Approx(41.0));

    const std::string path = "eval_report_test.csv";
    write_eval_csv(path, rep);
    std::ifstream f(path);
    REQUIRE(f.good());
    int lines = 0;
    std::string line;
    while (std::getline(f, line)) ++lines;
    CHECK(lines == 5);  // header + 3 runs + mean
    f.close();
    std::remove(path.c_str());

    const std::string table = "metrics_table_test.csv";
    write_metrics_table(table, "b", {rep, rep, rep, rep});
    std::ifstream tf(table);
    REQUIRE(tf.good());
    lines = 0;
    while (std::getline(tf, line)) ++lines;
    CHECK(lines == 7);  // header + 4 trials + avg_best_3 + std
    tf.close();
    std::remove(table.c_str());
}

TEST_CASE("tiny training runs are reproducible and safe") {
    SimConfig scfg = default_sim_config();
    scfg.episode_s = 60;
    TrainConfig tcfg;
    tcfg.train_batch_size = 128;
    tcfg.minibatch_size = 64;
    tcfg.num_sgd_iter = 3;
    tcfg.episode_total = 4;
    tcfg.hidden1 = 16;
    tcfg.hidden2 = 16;
    tcfg.num_workers = 2;

    TrainedAgent a = train_single(ControllerKind::MaskSafety, 123, tcfg, scfg);
    TrainedAgent b = train_single(ControllerKind::MaskSafety, 123, tcfg, scfg);
    CHECK(a.theta == b.theta);
    CHECK_FALSE(a.curve.empty());
    CHECK(a.safety_violations == 0);
    for (double w : a.theta) CHECK(std::isfinite(w));
    CHECK(a.curve.back().episodes >= 4);

    // the unmasked controller trains through the projection layer without
    // ever tripping IllegalAction
    CHECK_NOTHROW(train_single(ControllerKind::SafetyLayer, 7, tcfg, scfg));
    TrainedAgent c = train_single(ControllerKind::MaskSafetyPsych, 9, tcfg, scfg);
    CHECK(c.safety_violations == 0);

    CHECK_THROWS_AS(train_single(ControllerKind::FixedTime, 1, tcfg, scfg), ConfigError);
}
