#include "tsc/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

namespace tsc {

using nlohmann::json;

PhaseMask RolloutBatch::mask_at(int i) const {
    PhaseMask m;
    m.bits.assign(masks.begin() + static_cast<long>(i) * n_actions,
                  masks.begin() + static_cast<long>(i + 1) * n_actions);
    return m;
}

std::vector<double> RolloutBatch::obs_at(int i) const {
    return {observations.begin() + static_cast<long>(i) * obs_dim,
            observations.begin() + static_cast<long>(i + 1) * obs_dim};
}

void RolloutBatch::append(const Observation& obs, int action, const PhaseMask& mask,
                          double log_prob, double reward, double value, bool done) {
    if (n == 0) {
        obs_dim = static_cast<int>(obs.size());
        n_actions = mask.size();
    }
    observations.insert(observations.end(), obs.begin(), obs.end());
    actions.push_back(action);
    masks.insert(masks.end(), mask.bits.begin(), mask.bits.end());
    log_prob_old.push_back(log_prob);
    rewards.push_back(reward);
    values.push_back(value);
    dones.push_back(done ? 1 : 0);
    ++n;
}

void RolloutBatch::concat(const RolloutBatch& other) {
    if (other.n == 0) return;
    if (n == 0) {
        *this = other;
        return;
    }
    if (obs_dim != other.obs_dim || n_actions != other.n_actions)
        throw LengthMismatch("cannot concatenate batches with different shapes");
    observations.insert(observations.end(), other.observations.begin(), other.observations.end());
    actions.insert(actions.end(), other.actions.begin(), other.actions.end());
    masks.insert(masks.end(), other.masks.begin(), other.masks.end());
    log_prob_old.insert(log_prob_old.end(), other.log_prob_old.begin(), other.log_prob_old.end());
    rewards.insert(rewards.end(), other.rewards.begin(), other.rewards.end());
    values.insert(values.end(), other.values.begin(), other.values.end());
    dones.insert(dones.end(), other.dones.begin(), other.dones.end());
    advantages.insert(advantages.end(), other.advantages.begin(), other.advantages.end());
    value_targets.insert(value_targets.end(), other.value_targets.begin(), other.value_targets.end());
    bootstrap_value = other.bootstrap_value;  // only meaningful per contiguous segment; unused after GAE
    n += other.n;
}

std::pair<std::vector<double>, std::vector<double>> gae(const std::vector<double>& rewards,
                                                        const std::vector<double>& values,
                                                        const std::vector<uint8_t>& dones,
                                                        double bootstrap_value, double gamma,
                                                        double lambda) {
    const size_t T = rewards.size();
    if (values.size() != T || dones.size() != T) throw LengthMismatch("gae input lengths differ");
    std::vector<double> adv(T, 0.0), targets(T, 0.0);
    double carry = 0.0;
    for (size_t i = T; i-- > 0;) {
        const double not_done = dones[i] ? 0.0 : 1.0;
        const double next_v = (i + 1 < T) ? values[i + 1] : bootstrap_value;
        const double delta = rewards[i] + gamma * next_v * not_done - values[i];
        carry = delta + gamma * lambda * not_done * carry;
        adv[i] = carry;
        targets[i] = adv[i] + values[i];
    }
    return {adv, targets};
}

void compute_advantages(RolloutBatch& batch, const TrainConfig& cfg) {
    auto [adv, targets] =
        gae(batch.rewards, batch.values, batch.dones, batch.bootstrap_value, cfg.gamma, cfg.lambda);
    batch.advantages = std::move(adv);
    batch.value_targets = std::move(targets);
}

double ppo_loss(const PolicyNet& net, const RolloutBatch& batch, const std::vector<int>& indices,
                const TrainConfig& cfg, std::vector<double>* grad, LossDiagnostics* diag) {
    if (batch.advantages.size() != static_cast<size_t>(batch.n))
        throw LengthMismatch("batch advantages missing; call compute_advantages first");
    if (grad) grad->assign(net.params().size(), 0.0);

    const double inv_b = 1.0 / static_cast<double>(indices.size());
    double loss = 0.0, sum_entropy = 0.0, sum_kl = 0.0, clipped = 0.0;
    std::vector<double> d_logits(static_cast<size_t>(batch.n_actions));

    for (int idx : indices) {
        const ForwardCache c = net.forward(batch.obs_at(idx), batch.mask_at(idx));
        const int a = batch.actions[static_cast<size_t>(idx)] - 1;
        const double lp = c.dist.log_probs[static_cast<size_t>(a)];
        const double lp_old = batch.log_prob_old[static_cast<size_t>(idx)];
        const double adv = batch.advantages[static_cast<size_t>(idx)];
        const double vtarg = batch.value_targets[static_cast<size_t>(idx)];

        const double ratio = std::exp(lp - lp_old);
        const double clipped_ratio = std::clamp(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps);
        const double surr1 = ratio * adv;
        const double surr2 = clipped_ratio * adv;
        const double l_clip = std::min(surr1, surr2);
        const double l_vf = (c.value - vtarg) * (c.value - vtarg);
        const double entropy = masked_entropy(c.dist);

        loss += -(l_clip - cfg.vf_loss_coeff * l_vf + cfg.entropy_coeff * entropy) * inv_b;
        sum_entropy += entropy;
        sum_kl += lp_old - lp;
        if (ratio < 1.0 - cfg.clip_eps || ratio > 1.0 + cfg.clip_eps) clipped += 1.0;

        if (grad) {
            double dl_dratio;
            if (surr1 <= surr2)
                dl_dratio = adv;
            else
                dl_dratio = (ratio > 1.0 - cfg.clip_eps && ratio < 1.0 + cfg.clip_eps) ? adv : 0.0;
            const double dl_dlp = dl_dratio * ratio;  // d ratio / d lp = ratio

            for (int j = 0; j < batch.n_actions; ++j) {
                const double pj = c.dist.probs[static_cast<size_t>(j)];
                double g = dl_dlp * ((j == a ? 1.0 : 0.0) - pj);
                if (cfg.entropy_coeff != 0.0 && pj > 0.0)
                    g += cfg.entropy_coeff * (-pj * (c.dist.log_probs[static_cast<size_t>(j)] + entropy));
                d_logits[static_cast<size_t>(j)] = -g * inv_b;
            }
            const double d_value = inv_b * cfg.vf_loss_coeff * 2.0 * (c.value - vtarg);
            net.backward(c, d_logits, d_value, *grad);
        }
    }

    if (!std::isfinite(loss)) throw NonFiniteLoss();
    if (diag) {
        diag->loss = loss;
        diag->entropy = sum_entropy * inv_b;
        diag->kl_estimate = sum_kl * inv_b;
        diag->clip_fraction = clipped * inv_b;
    }
    return loss;
}

void ValueNorm::observe(const std::vector<double>& targets) {
    if (targets.empty()) return;
    double mean = std::accumulate(targets.begin(), targets.end(), 0.0) /
                  static_cast<double>(targets.size());
    double var = 0.0;
    for (double t : targets) var += (t - mean) * (t - mean);
    double sd = std::max(std::sqrt(var / static_cast<double>(targets.size())), 1e-8);
    if (!initialized) {
        mu = mean;
        sigma = sd;
        initialized = true;
    } else {
        mu = 0.9 * mu + 0.1 * mean;
        sigma = 0.9 * sigma + 0.1 * sd;
    }
}

LossDiagnostics update(PolicyNet& net, AdamState& adam, RolloutBatch& batch, const TrainConfig& cfg,
                       std::mt19937_64& rng, ValueNorm* vnorm) {
    if (batch.advantages.size() != static_cast<size_t>(batch.n)) compute_advantages(batch, cfg);
    if (vnorm) {
        vnorm->observe(batch.value_targets);
        for (double& t : batch.value_targets) t = vnorm->to_norm(t);
    }
    if (cfg.normalize_advantages && batch.n > 1) {
        double mean = std::accumulate(batch.advantages.begin(), batch.advantages.end(), 0.0) /
                      static_cast<double>(batch.n);
        double var = 0.0;
        for (double a : batch.advantages) var += (a - mean) * (a - mean);
        double sd = std::sqrt(var / static_cast<double>(batch.n)) + 1e-8;
        for (double& a : batch.advantages) a = (a - mean) / sd;
    }
    std::vector<int> order(static_cast<size_t>(batch.n));
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> grad;
    LossDiagnostics diag;
    const int mb = std::min(cfg.minibatch_size, batch.n);
    for (int epoch = 0; epoch < cfg.num_sgd_iter; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (int start = 0; start + mb <= batch.n; start += mb) {
            std::vector<int> mb_idx(order.begin() + start, order.begin() + start + mb);
            ppo_loss(net, batch, mb_idx, cfg, &grad, &diag);
            adam.apply(net.params(), grad);
        }
    }
    return diag;
}

EnvSession::EnvSession(SimConfig cfg, uint64_t first_seed)
    : env(std::move(cfg)), next_episode_seed(first_seed) {
    begin_episode();
}

void EnvSession::begin_episode() {
    obs = env.reset(next_episode_seed++);
    episode_return = 0.0;
}

RolloutBatch collect_rollout(EnvSession& session, const PolicyNet& net, std::mt19937_64& rng,
                             int steps, MaskMode mode, const ActionProjector* projector,
                             std::vector<double>* finished_episode_returns, const ValueNorm* vnorm) {
    RolloutBatch batch;
    for (int i = 0; i < steps; ++i) {
        PhaseMask mask;
        switch (mode) {
            case MaskMode::Safety: mask = session.env.safety_mask(); break;
            case MaskMode::Combined: mask = session.env.combined_mask(); break;
            case MaskMode::Unmasked: mask = PhaseMask::all_ones(session.env.num_phases()); break;
        }
        const ForwardCache c = net.forward(session.obs, mask);
        const int wish = c.dist.sample(rng);
        const int executed = projector ? (*projector)(wish, session.env) : wish;
        StepResult sr = session.env.step(executed);
        const double value_env = vnorm ? vnorm->to_env(c.value) : c.value;
        batch.append(session.obs, wish, mask, c.dist.log_prob(wish), sr.reward, value_env, sr.done);
        session.episode_return += sr.reward;
        ++session.env_steps;
        session.obs = sr.observation;
        if (sr.done) {
            if (finished_episode_returns) finished_episode_returns->push_back(session.episode_return);
            ++session.episodes_finished;
            session.begin_episode();
        }
    }
    if (!batch.dones.empty() && !batch.dones.back()) {
        PhaseMask mask = mode == MaskMode::Unmasked ? PhaseMask::all_ones(session.env.num_phases())
                                                    : (mode == MaskMode::Safety
                                                           ? session.env.safety_mask()
                                                           : session.env.combined_mask());
        const double v = net.forward(session.obs, mask).value;
        batch.bootstrap_value = vnorm ? vnorm->to_env(v) : v;
    }
    return batch;
}

void save_checkpoint(const std::string& path, const PolicyNet& net) {
    json j;
    j["version"] = 1;
    j["sizes"] = {{"input", net.sizes().input},
                  {"hidden1", net.sizes().hidden1},
                  {"hidden2", net.sizes().hidden2},
                  {"actions", net.sizes().actions}};
    j["theta"] = net.params();
    std::ofstream f(path);
    if (!f) throw CheckpointError("cannot write " + path);
    f << j.dump();
}

PolicyNet load_checkpoint(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw CheckpointError("cannot read " + path);
    json j;
    try {
        f >> j;
        NetSizes s;
        s.input = j.at("sizes").at("input").get<int>();
        s.hidden1 = j.at("sizes").at("hidden1").get<int>();
        s.hidden2 = j.at("sizes").at("hidden2").get<int>();
        s.actions = j.at("sizes").at("actions").get<int>();
        PolicyNet net(s, 0);
        auto theta = j.at("theta").get<std::vector<double>>();
        if (theta.size() != net.params().size()) throw CheckpointError("shape header mismatch in " + path);
        net.params() = std::move(theta);
        return net;
    } catch (const json::exception& e) {
        throw CheckpointError("bad checkpoint " + path + ": " + e.what());
    }
}

}  // namespace tsc
