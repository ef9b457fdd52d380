#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "tsc/config.hpp"
#include "tsc/harness.hpp"

namespace {

struct CommonOpts {
    std::string config_path;
    std::string intersection_path;
    std::string psych_rules = "on";
    int episode_seconds = 0;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "full JSON config file");
    cmd->add_option("--intersection", opts.intersection_path,
                    "intersection JSON (overrides the built-in preset)");
    cmd->add_option("--psych-rules", opts.psych_rules, "on|off comfort rules for controller c")
        ->check(CLI::IsMember({"on", "off"}));
    cmd->add_option("--episode-seconds", opts.episode_seconds, "episode length override");
}

tsc::FullConfig resolve_config(const CommonOpts& opts) {
    tsc::FullConfig fc = opts.config_path.empty() ? tsc::default_full_config()
                                                  : tsc::load_full_config_file(opts.config_path);
    if (!opts.intersection_path.empty()) {
        std::ifstream f(opts.intersection_path);
        if (!f) throw tsc::ConfigError("cannot open " + opts.intersection_path);
        std::ostringstream os;
        os << f.rdbuf();
        fc.sim.model = tsc::load_model(os.str());
    }
    if (opts.psych_rules == "off") fc.sim.rules.rules.clear();
    if (opts.episode_seconds > 0) fc.sim.episode_s = opts.episode_seconds;
    return fc;
}

std::string read_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw tsc::ConfigError("cannot open " + path);
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Safe-by-design RL traffic signal controller"};
    app.require_subcommand(1);

    CommonOpts train_opts, eval_opts, base_opts;

    auto* train_cmd = app.add_subcommand("train", "train PPO agents for a controller");
    std::string train_controller_tok = "b";
    std::string train_seeds = "1,2,3,4,5";
    std::string train_out = "out";
    int train_episodes = 0;
    bool verbose = false;
    train_cmd->add_option("--controller", train_controller_tok, "a|b|c")
        ->check(CLI::IsMember({"a", "b", "c"}));
    train_cmd->add_option("--seeds", train_seeds, "comma-separated trial seeds");
    train_cmd->add_option("--out", train_out, "output directory");
    train_cmd->add_option("--episodes", train_episodes, "episode_total override");
    train_cmd->add_flag("--verbose", verbose, "per-iteration progress on stderr");
    add_common(train_cmd, train_opts);

    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint over simulation runs");
    std::string ckpt_path, eval_controller_tok = "b", eval_seeds_str, eval_out = "out";
    int eval_runs = 10;
    eval_cmd->add_option("--checkpoint", ckpt_path, "checkpoint JSON")->required();
    eval_cmd->add_option("--controller", eval_controller_tok, "a|b|c")
        ->check(CLI::IsMember({"a", "b", "c"}));
    eval_cmd->add_option("--runs", eval_runs, "number of evaluation runs");
    eval_cmd->add_option("--seeds", eval_seeds_str, "explicit run seeds (default 1..runs)");
    eval_cmd->add_option("--out", eval_out, "output directory");
    add_common(eval_cmd, eval_opts);

    auto* base_cmd = app.add_subcommand("baseline", "run the fixed-time baseline");
    std::string plan_path, base_seeds_str, base_out = "out";
    int base_runs = 10;
    base_cmd->add_option("--plan", plan_path, "cycle plan JSON (default built-in)");
    base_cmd->add_option("--runs", base_runs, "number of runs");
    base_cmd->add_option("--seeds", base_seeds_str, "explicit run seeds (default 1..runs)");
    base_cmd->add_option("--out", base_out, "output directory");
    add_common(base_cmd, base_opts);

    CLI11_PARSE(app, argc, argv);

    try {
        if (train_cmd->parsed()) {
            tsc::FullConfig fc = resolve_config(train_opts);
            if (train_episodes > 0) fc.train.episode_total = train_episodes;
            const auto kind = tsc::controller_from_token(train_controller_tok);
            const long violations = tsc::train_controller(
                kind, tsc::parse_seed_list(train_seeds), fc.train, fc.sim, train_out, verbose);
            if (violations > 0) {
                std::cerr << "SAFETY VIOLATIONS DETECTED: " << violations << "\n";
                return 2;
            }
            std::cout << "training done; outputs in " << train_out << "\n";
        } else if (eval_cmd->parsed()) {
            tsc::FullConfig fc = resolve_config(eval_opts);
            const auto kind = tsc::controller_from_token(eval_controller_tok);
            std::vector<uint64_t> seeds;
            if (!eval_seeds_str.empty()) {
                seeds = tsc::parse_seed_list(eval_seeds_str);
            } else {
                for (int i = 1; i <= eval_runs; ++i) seeds.push_back(static_cast<uint64_t>(i));
            }
            std::filesystem::create_directories(eval_out);
            tsc::PolicyNet net = tsc::load_checkpoint(ckpt_path);
            tsc::EvalReport report = tsc::evaluate_policy(net, kind, fc.sim, seeds, eval_out);
            tsc::write_eval_csv(eval_out + "/eval_" + eval_controller_tok + ".csv", report);
            std::cout << "mean cumulative reward: " << report.mean_cumulative_reward() << "\n";
            if (report.total_safety_violations() > 0) {
                std::cerr << "SAFETY VIOLATIONS DETECTED: " << report.total_safety_violations()
                          << "\n";
                return 2;
            }
        } else if (base_cmd->parsed()) {
            tsc::FullConfig fc = resolve_config(base_opts);
            tsc::CyclePlan plan = plan_path.empty() ? tsc::default_cycle_plan()
                                                    : tsc::parse_cycle_plan(read_file(plan_path));
            std::vector<uint64_t> seeds;
            if (!base_seeds_str.empty()) {
                seeds = tsc::parse_seed_list(base_seeds_str);
            } else {
                for (int i = 1; i <= base_runs; ++i) seeds.push_back(static_cast<uint64_t>(i));
            }
            std::filesystem::create_directories(base_out);
            tsc::EvalReport report = tsc::evaluate_fixed_time(plan, fc.sim, seeds, base_out);
            tsc::write_eval_csv(base_out + "/eval_fixed.csv", report);
            std::cout << "mean cumulative reward: " << report.mean_cumulative_reward() << "\n";
            if (report.total_safety_violations() > 0) {
                std::cerr << "SAFETY VIOLATIONS DETECTED: " << report.total_safety_violations()
                          << "\n";
                return 2;
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
