#include "tsc/intersection.hpp"

#include <algorithm>
#include <array>
#include <sstream>

#include <json.hpp>

namespace tsc {

using nlohmann::json;

const char* to_token(SignalColor c) {
    switch (c) {
        case SignalColor::Red: return "r";
        case SignalColor::Yellow: return "y";
        case SignalColor::Green: return "g";
        case SignalColor::GreenWithLeftPriority: return "g+left";
    }
    return "?";
}

SignalColor color_from_token(const std::string& tok) {
    if (tok == "r") return SignalColor::Red;
    if (tok == "y") return SignalColor::Yellow;
    if (tok == "g") return SignalColor::Green;
    if (tok == "g+left") return SignalColor::GreenWithLeftPriority;
    throw ParseError("unknown signal color token: '" + tok + "'");
}

std::string SafetyViolation::describe() const {
    std::ostringstream os;
    os << "phase " << phase_id << ": conflicting groups " << group_a << " and " << group_b
       << " are both non-red";
    return os.str();
}

namespace {

PhaseSpec make_phase(int id, std::vector<SignalColor> colors, int min_s, int max_s) {
    PhaseSpec p;
    p.phase_id = id;
    p.colors = std::move(colors);
    p.min_duration_s = min_s;
    p.max_duration_s = max_s;
    return p;
}

constexpr SignalColor R = SignalColor::Red;
constexpr SignalColor G = SignalColor::Green;
constexpr SignalColor GL = SignalColor::GreenWithLeftPriority;

void validate_model(const IntersectionModel& m) {
    if (m.groups.empty()) throw ValidationError("model has no signal groups");
    for (int i = 0; i < m.num_groups(); ++i) {
        if (m.groups[static_cast<size_t>(i)].id != i)
            throw ValidationError("signal group ids must be contiguous from 0");
    }
    if (m.phases.empty()) throw ValidationError("model has no phases");
    for (int i = 0; i < m.num_phases(); ++i) {
        const PhaseSpec& p = m.phases[static_cast<size_t>(i)];
        if (p.phase_id != i + 1) throw ValidationError("phase ids must be contiguous from 1");
        if (static_cast<int>(p.colors.size()) != m.num_groups())
            throw ValidationError("phase " + std::to_string(p.phase_id) + " color count mismatch");
        if (p.min_duration_s < 0 || p.max_duration_s <= 0 || p.min_duration_s > p.max_duration_s)
            throw ValidationError("phase " + std::to_string(p.phase_id) + " has bad duration bounds");
        for (int g = 0; g < m.num_groups(); ++g) {
            if (p.colors[static_cast<size_t>(g)] == GL &&
                m.groups[static_cast<size_t>(g)].kind != GroupKind::Vehicle)
                throw ValidationError("g+left is only valid for vehicle groups");
        }
    }
    if (m.conflicts.size() != m.num_groups() || m.intergreen.size() != m.num_groups())
        throw ValidationError("conflict/intergreen matrix size mismatch");
    // Every conflicting pair needs intergreen entries in both directions.
    for (int a = 0; a < m.num_groups(); ++a) {
        for (int b = 0; b < m.num_groups(); ++b) {
            if (a != b && m.conflicts.conflicts(a, b) && !m.intergreen.defined(a, b))
                throw ValidationError("missing intergreen for conflicting pair (" + std::to_string(a) +
                                      "," + std::to_string(b) + ")");
        }
    }
    auto violations = validate_phase_safety(m);
    if (!violations.empty()) throw ValidationError(violations.front().describe());
}

}  // namespace

IntersectionModel owl322_preset() {
    IntersectionModel m;
    m.groups = {
        {0, GroupKind::Vehicle, "veh west"},  {1, GroupKind::Vehicle, "veh east"},
        {2, GroupKind::Vehicle, "veh north"}, {3, GroupKind::Vehicle, "veh south"},
        {4, GroupKind::Pedestrian, "ped w&e"}, {5, GroupKind::Pedestrian, "ped n&s"},
    };

    m.phases = {
        make_phase(1, {R, R, R, R, R, R}, 1, 30),
        make_phase(2, {G, G, R, R, R, G}, 5, 60),
        make_phase(3, {G, G, R, R, R, R}, 5, 60),
        make_phase(4, {G, R, R, R, R, R}, 5, 60),
        make_phase(5, {GL, R, R, R, R, R}, 5, 60),
        make_phase(6, {R, R, G, G, G, R}, 5, 60),
        make_phase(7, {R, R, G, G, R, R}, 5, 60),
        make_phase(8, {R, R, G, R, R, R}, 5, 60),
    };

    m.conflicts = ConflictMatrix(6);
    // West/east vehicle flows cross north/south flows; each pedestrian
    // crossing conflicts with the vehicle flows running across it.
    const std::pair<int, int> pairs[] = {{0, 2}, {0, 3}, {1, 2}, {1, 3},
                                         {0, 4}, {1, 4}, {2, 5}, {3, 5}};
    m.intergreen = IntergreenMatrix(6);
    for (auto [a, b] : pairs) {
        m.conflicts.set_conflict(a, b);
        int ab = m.groups[static_cast<size_t>(a)].kind == GroupKind::Pedestrian ? 10 : 6;
        int ba = m.groups[static_cast<size_t>(b)].kind == GroupKind::Pedestrian ? 10 : 6;
        m.intergreen.set(a, b, ab);  // a clears, b enters
        m.intergreen.set(b, a, ba);
    }
    m.yellow_s = 3;
    m.graph_edges = owl322_preset_edges();
    return m;
}

std::vector<GraphEdgeSpec> owl322_preset_edges() {
    std::vector<GraphEdgeSpec> edges;
    // Phase 1 (all red) connects bidirectionally to every other phase; moving
    // out of it requires a 6 s all-red dwell.
    for (int p = 2; p <= 8; ++p) {
        edges.push_back({1, p, 6});
        edges.push_back({p, 1, 0});
    }
    // West/east phases {2..5} interconnect, as do north/south phases {6..8}.
    // Crossing between the two families goes through phase 1.
    for (int a = 2; a <= 5; ++a)
        for (int b = 2; b <= 5; ++b)
            if (a != b) edges.push_back({a, b, a == 2 && b == 3 ? 10 : 0});
    for (int a = 6; a <= 8; ++a)
        for (int b = 6; b <= 8; ++b)
            if (a != b) edges.push_back({a, b, 0});
    return edges;
}

std::vector<SafetyViolation> validate_phase_safety(const IntersectionModel& model) {
    std::vector<SafetyViolation> out;
    for (const PhaseSpec& p : model.phases) {
        for (int a = 0; a < model.num_groups(); ++a) {
            for (int b = a + 1; b < model.num_groups(); ++b) {
                if (model.conflicts.conflicts(a, b) && p.colors[static_cast<size_t>(a)] != R &&
                    p.colors[static_cast<size_t>(b)] != R) {
                    out.push_back({p.phase_id, a, b});
                }
            }
        }
    }
    return out;
}

IntersectionModel load_model(const std::string& config_text) {
    json j;
    try {
        j = json::parse(config_text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("bad intersection config: ") + e.what());
    }

    IntersectionModel m;
    try {
        for (const auto& jg : j.at("signal_groups")) {
            SignalGroup g;
            g.id = jg.at("id").get<int>();
            std::string kind = jg.at("kind").get<std::string>();
            if (kind == "vehicle")
                g.kind = GroupKind::Vehicle;
            else if (kind == "pedestrian")
                g.kind = GroupKind::Pedestrian;
            else
                throw ParseError("unknown group kind: " + kind);
            g.label = jg.value("label", std::string());
            m.groups.push_back(g);
        }
        std::sort(m.groups.begin(), m.groups.end(),
                  [](const SignalGroup& a, const SignalGroup& b) { return a.id < b.id; });

        const int n = static_cast<int>(m.groups.size());
        std::array<int, 2> default_bounds = {5, 60};
        std::map<int, std::array<int, 2>> bounds;
        if (j.contains("duration_bounds_s")) {
            for (auto& [key, val] : j.at("duration_bounds_s").items()) {
                std::array<int, 2> b = {val.at(0).get<int>(), val.at(1).get<int>()};
                if (key == "default")
                    default_bounds = b;
                else
                    bounds[std::stoi(key)] = b;
            }
        }

        for (const auto& jp : j.at("phases")) {
            PhaseSpec p;
            p.phase_id = jp.at("id").get<int>();
            for (const auto& tok : jp.at("colors")) p.colors.push_back(color_from_token(tok.get<std::string>()));
            auto it = bounds.find(p.phase_id);
            auto b = it != bounds.end() ? it->second : default_bounds;
            p.min_duration_s = b[0];
            p.max_duration_s = b[1];
            m.phases.push_back(p);
        }
        std::sort(m.phases.begin(), m.phases.end(),
                  [](const PhaseSpec& a, const PhaseSpec& b) { return a.phase_id < b.phase_id; });

        m.conflicts = ConflictMatrix(n);
        for (const auto& jc : j.at("conflicts")) {
            int a = jc.at(0).get<int>(), b = jc.at(1).get<int>();
            m.conflicts.set_conflict(a, b);
        }
        m.intergreen = IntergreenMatrix(n);
        for (const auto& ji : j.at("intergreen_s")) {
            m.intergreen.set(ji.at("clearing").get<int>(), ji.at("entering").get<int>(),
                             ji.at("s").get<int>());
        }
        m.yellow_s = j.value("yellow_s", 3);

        if (j.contains("edges")) {
            for (const auto& je : j.at("edges")) {
                GraphEdgeSpec e;
                e.from = je.at("from").get<int>();
                e.to = je.at("to").get<int>();
                e.min_dwell_source_s = je.value("min_dwell_source_s", 0);
                m.graph_edges.push_back(e);
            }
        } else {
            m.graph_edges = owl322_preset_edges();
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("bad intersection config: ") + e.what());
    }

    validate_model(m);
    return m;
}

std::string serialize_model(const IntersectionModel& m) {
    json j;
    j["version"] = 1;
    for (const SignalGroup& g : m.groups) {
        j["signal_groups"].push_back({{"id", g.id},
                                      {"kind", g.kind == GroupKind::Vehicle ? "vehicle" : "pedestrian"},
                                      {"label", g.label}});
    }
    for (const PhaseSpec& p : m.phases) {
        json colors = json::array();
        for (SignalColor c : p.colors) colors.push_back(to_token(c));
        j["phases"].push_back({{"id", p.phase_id}, {"colors", colors}});
        j["duration_bounds_s"][std::to_string(p.phase_id)] = {p.min_duration_s, p.max_duration_s};
    }
    j["conflicts"] = json::array();
    for (int a = 0; a < m.num_groups(); ++a)
        for (int b = a + 1; b < m.num_groups(); ++b)
            if (m.conflicts.conflicts(a, b)) j["conflicts"].push_back({a, b});
    j["intergreen_s"] = json::array();
    for (int a = 0; a < m.num_groups(); ++a)
        for (int b = 0; b < m.num_groups(); ++b)
            if (a != b && m.intergreen.defined(a, b))
                j["intergreen_s"].push_back({{"clearing", a}, {"entering", b}, {"s", m.intergreen.get(a, b)}});
    j["yellow_s"] = m.yellow_s;
    for (const GraphEdgeSpec& e : m.graph_edges)
        j["edges"].push_back({{"from", e.from}, {"to", e.to}, {"min_dwell_source_s", e.min_dwell_source_s}});
    return j.dump(2);
}

TransitionSpec build_transition(const IntersectionModel& model, int from, int to, int yellow_s,
                                const std::vector<int>* pending_green_floor) {
    if (!model.has_phase(from)) throw NoSuchPhase(from);
    if (!model.has_phase(to)) throw NoSuchPhase(to);
    if (from == to) throw IllegalTransition("transition needs distinct phases");

    const PhaseSpec& pf = model.phase(from);
    const PhaseSpec& pt = model.phase(to);
    const int n = model.num_groups();

    TransitionSpec t;
    t.from_phase = from;
    t.to_phase = to;

    // red_time[g] >= 0 when g clears in this transition.
    std::vector<int> red_time(static_cast<size_t>(n), -1);
    for (int g = 0; g < n; ++g) {
        SignalColor cf = pf.colors[static_cast<size_t>(g)];
        SignalColor ct = pt.colors[static_cast<size_t>(g)];
        if (cf == ct) continue;
        if (cf != R && ct == R) {
            if (model.groups[static_cast<size_t>(g)].kind == GroupKind::Vehicle) {
                t.timeline.push_back({0, g, SignalColor::Yellow});
                t.timeline.push_back({yellow_s, g, R});
                red_time[static_cast<size_t>(g)] = yellow_s;
            } else {
                t.timeline.push_back({0, g, R});  // pedestrian signals drop straight to red
                red_time[static_cast<size_t>(g)] = 0;
            }
        } else if (cf != R && ct != R) {
            t.timeline.push_back({0, g, ct});  // green variant switch, no clearance needed
        }
    }

    for (int g = 0; g < n; ++g) {
        SignalColor cf = pf.colors[static_cast<size_t>(g)];
        SignalColor ct = pt.colors[static_cast<size_t>(g)];
        if (!(cf == R && ct != R)) continue;
        int offset = pending_green_floor ? std::max(0, (*pending_green_floor)[static_cast<size_t>(g)]) : 0;
        for (int c = 0; c < n; ++c) {
            if (c == g || red_time[static_cast<size_t>(c)] < 0) continue;
            if (model.conflicts.conflicts(c, g))
                offset = std::max(offset, red_time[static_cast<size_t>(c)] + model.intergreen.get(c, g));
        }
        t.timeline.push_back({offset, g, ct});
    }

    t.total_duration_s = 0;
    for (const TransitionEvent& e : t.timeline) t.total_duration_s = std::max(t.total_duration_s, e.offset_s);
    std::stable_sort(t.timeline.begin(), t.timeline.end(),
                     [](const TransitionEvent& a, const TransitionEvent& b) { return a.offset_s < b.offset_s; });
    return t;
}

}  // namespace tsc
