#include "tsc/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace tsc {

using nlohmann::json;

namespace {

ArrivalProfile parse_profile(const json& j) {
    ArrivalProfile p;
    for (const auto& piece : j)
        p.pieces.push_back({piece.at("until_s").get<int>(), piece.at("rate").get<double>()});
    return p;
}

RuleSet parse_rules_json(const json& j) {
    RuleSet rs;
    for (const auto& jr : j) {
        PsychRule r;
        r.id = jr.at("id").get<std::string>();
        const std::string kind = jr.at("kind").get<std::string>();
        const json params = jr.value("params", json::object());
        if (kind == "forbid_bounce_back") {
            r.kind = PsychRule::Kind::ForbidBounceBack;
            r.hub_phase = params.value("hub_phase", 1);
            r.window_s = params.value("window_s", 30);
        } else if (kind == "min_green_comfort") {
            r.kind = PsychRule::Kind::MinGreenComfort;
            r.min_green_s = params.value("min_green_s", 0);
        } else if (kind == "custom") {
            r.kind = PsychRule::Kind::Custom;
            r.when_in = params.at("when_in").get<int>();
            r.forbid_targets = params.at("forbid").get<std::vector<int>>();
        } else {
            throw ConfigError("unknown psych rule kind: " + kind);
        }
        for (const PsychRule& existing : rs.rules)
            if (existing.id == r.id) throw ConfigError("duplicate psych rule id: " + r.id);
        rs.rules.push_back(r);
    }
    return rs;
}

}  // namespace

RuleSet parse_psych_rules(const std::string& json_text) {
    try {
        return parse_rules_json(json::parse(json_text));
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad psych rules: ") + e.what());
    }
}

FullConfig default_full_config() {
    FullConfig fc;
    fc.sim = default_sim_config();
    return fc;
}

FullConfig parse_full_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad config: ") + e.what());
    }

    FullConfig fc = default_full_config();
    try {
        if (j.contains("intersection")) fc.sim.model = load_model(j.at("intersection").dump());
        if (j.contains("psych_rules")) fc.sim.rules = parse_rules_json(j.at("psych_rules"));
        if (j.contains("demand")) {
            const json& d = j.at("demand");
            if (d.contains("lanes")) {
                fc.sim.lanes.clear();
                for (const auto& jl : d.at("lanes")) {
                    LaneConfig l;
                    l.name = jl.at("name").get<std::string>();
                    l.signal_group = jl.at("signal_group").get<int>();
                    l.length_m = jl.value("length_m", 280.0);
                    l.v_max_mps = jl.value("v_max_mps", 14.0);
                    l.arrivals = parse_profile(jl.at("arrivals_per_hour"));
                    fc.sim.lanes.push_back(l);
                }
            }
            if (d.contains("crosswalks")) {
                fc.sim.crosswalks.clear();
                for (const auto& jc : d.at("crosswalks")) {
                    CrosswalkConfig c;
                    c.name = jc.at("name").get<std::string>();
                    c.signal_group = jc.at("signal_group").get<int>();
                    c.arrivals = parse_profile(jc.at("arrivals_per_hour"));
                    fc.sim.crosswalks.push_back(c);
                }
            }
        }
        fc.sim.episode_s = j.value("episode_seconds", fc.sim.episode_s);
        if (j.contains("sim")) {
            const json& s = j.at("sim");
            fc.sim.sat_headway_s = s.value("sat_headway_s", fc.sim.sat_headway_s);
            fc.sim.jam_spacing_m = s.value("jam_spacing_m", fc.sim.jam_spacing_m);
            fc.sim.queue_norm_m = s.value("queue_norm_m", fc.sim.queue_norm_m);
            fc.sim.wait_norm_s = s.value("wait_norm_s", fc.sim.wait_norm_s);
            fc.sim.wave_norm = s.value("wave_norm", fc.sim.wave_norm);
        }
        if (j.contains("training")) {
            const json& t = j.at("training");
            TrainConfig& tc = fc.train;
            tc.train_batch_size = t.value("train_batch_size", tc.train_batch_size);
            tc.num_sgd_iter = t.value("num_sgd_iter", tc.num_sgd_iter);
            tc.gamma = t.value("gamma", tc.gamma);
            tc.lambda = t.value("lambda", tc.lambda);
            tc.vf_loss_coeff = t.value("vf_loss_coeff", tc.vf_loss_coeff);
            tc.lr = t.value("lr", tc.lr);
            tc.clip_eps = t.value("clip_eps", tc.clip_eps);
            tc.entropy_coeff = t.value("entropy_coeff", tc.entropy_coeff);
            tc.minibatch_size = t.value("minibatch_size", tc.minibatch_size);
            tc.episode_total = t.value("episode_total", tc.episode_total);
            tc.normalize_advantages = t.value("normalize_advantages", tc.normalize_advantages);
            tc.num_workers = t.value("num_workers", tc.num_workers);
            tc.hidden1 = t.value("hidden1", tc.hidden1);
            tc.hidden2 = t.value("hidden2", tc.hidden2);
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad config: ") + e.what());
    }
    return fc;
}

FullConfig load_full_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file: " + path);
    std::ostringstream os;
    os << f.rdbuf();
    return parse_full_config(os.str());
}

}  // namespace tsc
