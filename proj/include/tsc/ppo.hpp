#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "tsc/microsim.hpp"
#include "tsc/mlp.hpp"

namespace tsc {

struct TrainConfig {
    int train_batch_size = 2048;
    int num_sgd_iter = 20;
    double gamma = 0.98;
    double lambda = 0.95;
    double vf_loss_coeff = 0.005;  // c1
    double lr = 5e-5;
    double clip_eps = 0.2;
    double entropy_coeff = 0.0;  // c2
    int minibatch_size = 256;
    int episode_total = 2500;
    bool normalize_advantages = true;
    int num_workers = 1;
    int hidden1 = 128;
    int hidden2 = 128;
};

struct RolloutBatch {
    int n = 0;
    int obs_dim = 0;
    int n_actions = 0;
    std::vector<double> observations;  // n * obs_dim
    std::vector<int> actions;          // 1-based phase ids
    std::vector<uint8_t> masks;        // n * n_actions
    std::vector<double> log_prob_old;
    std::vector<double> rewards;
    std::vector<double> values;
    std::vector<uint8_t> dones;
    double bootstrap_value = 0.0;
    std::vector<double> advantages;
    std::vector<double> value_targets;

    PhaseMask mask_at(int i) const;
    std::vector<double> obs_at(int i) const;
    void append(const Observation& obs, int action, const PhaseMask& mask, double log_prob,
                double reward, double value, bool done);
    void concat(const RolloutBatch& other);
};

// GAE(gamma, lambda); value_targets = advantages + values. `dones` cuts the
// recursion at episode ends (terminal value 0); the bootstrap value covers a
// batch truncated mid-episode.
std::pair<std::vector<double>, std::vector<double>> gae(const std::vector<double>& rewards,
                                                        const std::vector<double>& values,
                                                        const std::vector<uint8_t>& dones,
                                                        double bootstrap_value, double gamma,
                                                        double lambda);

// Fills batch.advantages / batch.value_targets in place.
void compute_advantages(RolloutBatch& batch, const TrainConfig& cfg);

struct LossDiagnostics {
    double loss = 0.0;
    double policy_loss = 0.0;
    double vf_loss = 0.0;
    double entropy = 0.0;
    double clip_fraction = 0.0;
    double kl_estimate = 0.0;
};

// Clipped-surrogate PPO loss over the given sample indices:
//   loss = -E[ L_clip - c1 * L_vf + c2 * S_masked ].
// When `grad` is non-null it receives d loss / d theta (overwritten).
double ppo_loss(const PolicyNet& net, const RolloutBatch& batch, const std::vector<int>& indices,
                const TrainConfig& cfg, std::vector<double>* grad, LossDiagnostics* diag);

// Running normalizer for value-regression targets. Raw episodic returns can
// sit many orders of magnitude away from a freshly initialized value head;
// the critic learns in normalized units and its outputs are mapped back to
// environment units wherever they enter GAE.
struct ValueNorm {
    double mu = 0.0;
    double sigma = 1.0;
    bool initialized = false;

    void observe(const std::vector<double>& targets);
    double to_env(double v) const { return v * sigma + mu; }
    double to_norm(double t) const { return (t - mu) / sigma; }
};

// num_sgd_iter epochs of minibatch Adam steps; theta_old (the recorded
// log-probs) stays fixed for the whole update.
LossDiagnostics update(PolicyNet& net, AdamState& adam, RolloutBatch& batch, const TrainConfig& cfg,
                       std::mt19937_64& rng, ValueNorm* vnorm = nullptr);

enum class MaskMode { Safety, Combined, Unmasked };

// Maps a sampled wish to the action actually executed (safety-layer style
// projection). Identity when absent.
using ActionProjector = std::function<int(int wish, Simulator& env)>;

// One rollout worker: an environment plus its episode-seed stream.
struct EnvSession {
    Simulator env;
    uint64_t next_episode_seed = 0;
    Observation obs;
    double episode_return = 0.0;
    long env_steps = 0;
    long episodes_finished = 0;

    EnvSession(SimConfig cfg, uint64_t first_seed);
    void begin_episode();
};

RolloutBatch collect_rollout(EnvSession& session, const PolicyNet& net, std::mt19937_64& rng,
                             int steps, MaskMode mode, const ActionProjector* projector = nullptr,
                             std::vector<double>* finished_episode_returns = nullptr,
                             const ValueNorm* vnorm = nullptr);

void save_checkpoint(const std::string& path, const PolicyNet& net);
PolicyNet load_checkpoint(const std::string& path);

}  // namespace tsc
