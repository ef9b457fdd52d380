#include <doctest.h>

#include <algorithm>

#include "tsc/intersection.hpp"

using namespace tsc;

namespace {

// Minimal two-group config builder for validation tests.
std::string tiny_config(const std::string& phase_colors, bool with_intergreen = true) {
    std::string ig = with_intergreen
                         ? R"([{"clearing":0,"entering":1,"s":5},{"clearing":1,"entering":0,"s":5}])"
                         : "[]";
    return std::string(R"({
      "signal_groups": [
        {"id": 0, "kind": "vehicle", "label": "veh west"},
        {"id": 1, "kind": "vehicle", "label": "veh north"}
      ],
      "phases": [
        {"id": 1, "colors": ["r", "r"]},
        {"id": 2, "colors": )") +
           phase_colors + R"(}
      ],
      "conflicts": [[0, 1]],
      "intergreen_s": )" +
           ig + R"(,
      "duration_bounds_s": {"default": [5, 60]},
      "yellow_s": 3,
      "edges": [{"from": 1, "to": 2}, {"from": 2, "to": 1}]
    })";
}

int event_offset(const TransitionSpec& t, int group, SignalColor c) {
    for (const TransitionEvent& e : t.timeline)
        if (e.signal_group == group && e.color == c) return e.offset_s;
    return -1;
}

bool has_event(const TransitionSpec& t, int group, SignalColor c) {
    return event_offset(t, group, c) >= 0;
}

// Independent minimality check: smallest feasible offset for each entering
// group by linear scan against every constraint.
int brute_force_min_offset(const IntersectionModel& m, int from, int to, int group) {
    const PhaseSpec& pf = m.phase(from);
    for (int offset = 0; offset < 1000; ++offset) {
        bool ok = true;
        for (int c = 0; c < m.num_groups(); ++c) {
            if (c == group || !m.conflicts.conflicts(c, group)) continue;
            if (pf.colors[static_cast<size_t>(c)] == SignalColor::Red) continue;
            if (m.phase(to).colors[static_cast<size_t>(c)] != SignalColor::Red) continue;
            int red_t = m.groups[static_cast<size_t>(c)].kind == GroupKind::Vehicle ? m.yellow_s : 0;
            if (offset < red_t + m.intergreen.get(c, group)) ok = false;
        }
        if (ok) return offset;
    }
    return -1;
}

}  // namespace

TEST_CASE("owl322 preset has 8 phases and 6 signal groups") {
    IntersectionModel m = owl322_preset();
    CHECK(m.num_phases() == 8);
    CHECK(m.num_groups() == 6);
    CHECK(m.phase(5).colors[0] == SignalColor::GreenWithLeftPriority);
    CHECK(m.phase(6).colors[4] == SignalColor::Green);  // ped w&e green alongside north/south
    CHECK(validate_phase_safety(m).empty());
}

TEST_CASE("serialization round-trips the preset") {
    IntersectionModel m = owl322_preset();
    IntersectionModel again = load_model(serialize_model(m));
    CHECK(again == m);
    CHECK(again.graph_edges.size() == m.graph_edges.size());
}

TEST_CASE("conflicting greens in a phase are rejected") {
    CHECK_THROWS_AS(load_model(tiny_config(R"(["g", "g"])")), ValidationError);
    CHECK_NOTHROW(load_model(tiny_config(R"(["g", "r"])")));
}

TEST_CASE("empty phase list is rejected") {
    std::string cfg = R"({
      "signal_groups": [{"id": 0, "kind": "vehicle"}],
      "phases": [],
      "conflicts": [],
      "intergreen_s": []
    })";
    CHECK_THROWS_AS(load_model(cfg), ValidationError);
}

TEST_CASE("malformed text raises ParseError") {
    CHECK_THROWS_AS(load_model("{not json"), ParseError);
    CHECK_THROWS_AS(load_model(R"({"signal_groups": []})"), ParseError);
}

TEST_CASE("missing intergreen for a conflicting pair is rejected") {
    CHECK_THROWS_AS(load_model(tiny_config(R"(["g", "r"])", false)), ValidationError);
}

TEST_CASE("validate_phase_safety flags an injected ped/vehicle clash") {
    IntersectionModel m = owl322_preset();
    // veh west green together with ped w&e green in phase 4
    m.phases[3].colors[4] = SignalColor::Green;
    auto v = validate_phase_safety(m);
    REQUIRE(v.size() == 1);
    CHECK(v[0].phase_id == 4);
    CHECK(v[0].group_a == 0);
    CHECK(v[0].group_b == 4);
}

TEST_CASE("build_transition: east loses green via yellow") {
    IntersectionModel m = owl322_preset();
    TransitionSpec t = build_transition(m, 3, 4, 3);
    CHECK(event_offset(t, 1, SignalColor::Yellow) == 0);
    CHECK(event_offset(t, 1, SignalColor::Red) == 3);
    CHECK(t.total_duration_s == 3);
    CHECK_FALSE(has_event(t, 0, SignalColor::Yellow));  // west keeps green
}

TEST_CASE("build_transition: all-red to green with nothing to clear") {
    IntersectionModel m = owl322_preset();
    TransitionSpec t = build_transition(m, 1, 3, 3);
    CHECK(t.total_duration_s == 0);
    CHECK(event_offset(t, 0, SignalColor::Green) == 0);
    CHECK(event_offset(t, 1, SignalColor::Green) == 0);
}

TEST_CASE("build_transition: pedestrians drop to red without yellow") {
    IntersectionModel m = owl322_preset();
    TransitionSpec t = build_transition(m, 2, 3, 3);
    CHECK(event_offset(t, 5, SignalColor::Red) == 0);
    CHECK_FALSE(has_event(t, 5, SignalColor::Yellow));
    CHECK_FALSE(has_event(t, 0, SignalColor::Green));  // west/east stay green, no events
    CHECK_FALSE(has_event(t, 1, SignalColor::Green));
    CHECK(t.total_duration_s == 0);
}

TEST_CASE("build_transition: errors") {
    IntersectionModel m = owl322_preset();
    CHECK_THROWS_AS(build_transition(m, 1, 99, 3), NoSuchPhase);
    CHECK_THROWS_AS(build_transition(m, 99, 1, 3), NoSuchPhase);
    CHECK_THROWS_AS(build_transition(m, 3, 3, 3), IllegalTransition);
}

TEST_CASE("build_transition invariants hold for all 8x7 preset pairs") {
    IntersectionModel m = owl322_preset();
    for (int from = 1; from <= 8; ++from) {
        for (int to = 1; to <= 8; ++to) {
            if (from == to) continue;
            CAPTURE(from);
            CAPTURE(to);
            TransitionSpec t = build_transition(m, from, to, m.yellow_s);

            // offsets nondecreasing, bounded by total
            for (size_t i = 1; i < t.timeline.size(); ++i)
                CHECK(t.timeline[i - 1].offset_s <= t.timeline[i].offset_s);
            for (const TransitionEvent& e : t.timeline) CHECK(e.offset_s <= t.total_duration_s);

            int max_required = 0;
            for (int g = 0; g < m.num_groups(); ++g) {
                SignalColor cf = m.phase(from).colors[static_cast<size_t>(g)];
                SignalColor ct = m.phase(to).colors[static_cast<size_t>(g)];
                if (cf != SignalColor::Red && ct == SignalColor::Red &&
                    m.groups[static_cast<size_t>(g)].kind == GroupKind::Vehicle) {
                    // vehicles pass through yellow before red
                    CHECK(event_offset(t, g, SignalColor::Yellow) == 0);
                    CHECK(event_offset(t, g, SignalColor::Red) == m.yellow_s);
                    max_required = std::max(max_required, m.yellow_s);
                }
                if (cf == SignalColor::Red && ct != SignalColor::Red) {
                    // minimal entering offset matches the brute-force oracle
                    int off = event_offset(t, g, ct);
                    REQUIRE(off >= 0);
                    CHECK(off == brute_force_min_offset(m, from, to, g));
                    max_required = std::max(max_required, off);
                    // intergreen respected against every clearing conflict
                    for (int c = 0; c < m.num_groups(); ++c) {
                        if (c == g || !m.conflicts.conflicts(c, g)) continue;
                        if (m.phase(from).colors[static_cast<size_t>(c)] == SignalColor::Red) continue;
                        int red_t = event_offset(t, c, SignalColor::Red);
                        REQUIRE(red_t >= 0);
                        CHECK(off - red_t >= m.intergreen.get(c, g));
                    }
                }
            }
            CHECK(t.total_duration_s == max_required);  // minimal total
        }
    }
}

TEST_CASE("pending floors delay entering greens") {
    IntersectionModel m = owl322_preset();
    std::vector<int> floor(6, 0);
    floor[2] = 4;  // veh north still owes 4 s of intergreen from an earlier clearance
    TransitionSpec t = build_transition(m, 1, 7, 3, &floor);
    CHECK(event_offset(t, 2, SignalColor::Green) == 4);
    CHECK(event_offset(t, 3, SignalColor::Green) == 0);
    CHECK(t.total_duration_s == 4);
}
