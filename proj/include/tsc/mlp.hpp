#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "tsc/errors.hpp"
#include "tsc/phase_graph.hpp"

namespace tsc {

// Shared-trunk policy/value network: two tanh layers feeding a logit head and
// a scalar value head. Parameters live in one flat vector so the optimizer
// and finite-difference checks can treat them uniformly.
struct NetSizes {
    int input = 0;
    int hidden1 = 128;
    int hidden2 = 128;
    int actions = 0;

    int trunk1_w() const { return hidden1 * input; }
    int trunk2_w() const { return hidden2 * hidden1; }
    int policy_w() const { return actions * hidden2; }
    int value_w() const { return hidden2; }
    int total() const {
        return trunk1_w() + hidden1 + trunk2_w() + hidden2 + policy_w() + actions + value_w() + 1;
    }
};

// Probabilities of masked actions are exactly zero: masked logits are shifted
// by -1e9 before the softmax, which underflows their exp() to 0.0 at 64-bit.
struct MaskedDistribution {
    std::vector<double> logits;
    std::vector<double> log_probs;  // masked entries hold large negatives
    std::vector<double> probs;      // masked entries are exactly 0.0
    PhaseMask mask;

    int sample(std::mt19937_64& rng) const;  // 1-based action id
    int argmax() const;                      // 1-based action id
    double log_prob(int action) const { return log_probs.at(static_cast<size_t>(action - 1)); }
};

double masked_entropy(const MaskedDistribution& dist);

struct ForwardCache {
    std::vector<double> input;
    std::vector<double> h1;  // post-tanh
    std::vector<double> h2;
    MaskedDistribution dist;
    double value = 0.0;
};

class PolicyNet {
public:
    PolicyNet(NetSizes sizes, uint64_t init_seed);

    const NetSizes& sizes() const { return sizes_; }
    std::vector<double>& params() { return theta_; }
    const std::vector<double>& params() const { return theta_; }

    ForwardCache forward(const std::vector<double>& obs, const PhaseMask& mask) const;

    // Accumulates d(scalar)/d(theta) into grad given upstream gradients on the
    // raw logits and the value output.
    void backward(const ForwardCache& cache, const std::vector<double>& d_logits, double d_value,
                  std::vector<double>& grad) const;

    // Parameter block offsets within theta.
    int off_w1() const { return 0; }
    int off_b1() const { return sizes_.trunk1_w(); }
    int off_w2() const { return off_b1() + sizes_.hidden1; }
    int off_b2() const { return off_w2() + sizes_.trunk2_w(); }
    int off_wp() const { return off_b2() + sizes_.hidden2; }
    int off_bp() const { return off_wp() + sizes_.policy_w(); }
    int off_wv() const { return off_bp() + sizes_.actions; }
    int off_bv() const { return off_wv() + sizes_.value_w(); }

private:
    NetSizes sizes_;
    std::vector<double> theta_;
};

struct AdamState {
    double lr = 5e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long t = 0;
    std::vector<double> m;
    std::vector<double> v;

    explicit AdamState(size_t n, double lr_ = 5e-5) : lr(lr_), m(n, 0.0), v(n, 0.0) {}
    void apply(std::vector<double>& theta, const std::vector<double>& grad);
};

}  // namespace tsc
