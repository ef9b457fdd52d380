#include "tsc/mlp.hpp"

#include <algorithm>
#include <cmath>

namespace tsc {

int MaskedDistribution::sample(std::mt19937_64& rng) const {
    double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    double acc = 0.0;
    int last_valid = -1;
    for (size_t i = 0; i < probs.size(); ++i) {
        if (!mask.bits[i]) continue;
        last_valid = static_cast<int>(i);
        acc += probs[i];
        if (u < acc) return static_cast<int>(i) + 1;
    }
    if (last_valid < 0) throw EmptyMask();
    return last_valid + 1;  // guard against rounding at u ~ 1
}

int MaskedDistribution::argmax() const {
    int best = -1;
    double best_p = -1.0;
    for (size_t i = 0; i < probs.size(); ++i) {
        if (mask.bits[i] && probs[i] > best_p) {
            best_p = probs[i];
            best = static_cast<int>(i);
        }
    }
    if (best < 0) throw EmptyMask();
    return best + 1;
}

double masked_entropy(const MaskedDistribution& dist) {
    double s = 0.0;
    for (size_t i = 0; i < dist.probs.size(); ++i) {
        if (!dist.mask.bits[i] || dist.probs[i] <= 0.0) continue;  // 0*log 0 := 0
        s -= dist.probs[i] * dist.log_probs[i];
    }
    return s;
}

namespace {

// Orthogonal-style init: Gaussian rows orthonormalized by modified
// Gram-Schmidt, then scaled.
void init_matrix(std::vector<double>& theta, int off, int rows, int cols, double gain,
                 std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<std::vector<double>> m(static_cast<size_t>(rows), std::vector<double>(static_cast<size_t>(cols)));
    for (auto& row : m)
        for (double& x : row) x = gauss(rng);
    for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < std::min(i, cols); ++j) {
            double dot = 0.0;
            for (int k = 0; k < cols; ++k) dot += m[static_cast<size_t>(i)][static_cast<size_t>(k)] * m[static_cast<size_t>(j)][static_cast<size_t>(k)];
            for (int k = 0; k < cols; ++k) m[static_cast<size_t>(i)][static_cast<size_t>(k)] -= dot * m[static_cast<size_t>(j)][static_cast<size_t>(k)];
        }
        double norm = 0.0;
        for (int k = 0; k < cols; ++k) norm += m[static_cast<size_t>(i)][static_cast<size_t>(k)] * m[static_cast<size_t>(i)][static_cast<size_t>(k)];
        norm = std::sqrt(std::max(norm, 1e-12));
        for (int k = 0; k < cols; ++k) {
            m[static_cast<size_t>(i)][static_cast<size_t>(k)] /= norm;  // keep rows unit for later projections
            theta[static_cast<size_t>(off + i * cols + k)] = gain * m[static_cast<size_t>(i)][static_cast<size_t>(k)];
        }
    }
}

}  // namespace

PolicyNet::PolicyNet(NetSizes sizes, uint64_t init_seed) : sizes_(sizes) {
    theta_.assign(static_cast<size_t>(sizes_.total()), 0.0);
    std::mt19937_64 rng(init_seed);
    init_matrix(theta_, off_w1(), sizes_.hidden1, sizes_.input, 1.0, rng);
    init_matrix(theta_, off_w2(), sizes_.hidden2, sizes_.hidden1, 1.0, rng);
    init_matrix(theta_, off_wp(), sizes_.actions, sizes_.hidden2, 0.01, rng);
    init_matrix(theta_, off_wv(), 1, sizes_.hidden2, 0.01, rng);
}

ForwardCache PolicyNet::forward(const std::vector<double>& obs, const PhaseMask& mask) const {
    if (static_cast<int>(obs.size()) != sizes_.input)
        throw LengthMismatch("observation length " + std::to_string(obs.size()) + " != " +
                             std::to_string(sizes_.input));
    if (mask.size() != sizes_.actions) throw LengthMismatch("mask length mismatch");
    if (mask.popcount() == 0) throw EmptyMask();

    ForwardCache c;
    c.input = obs;
    c.h1.resize(static_cast<size_t>(sizes_.hidden1));
    for (int i = 0; i < sizes_.hidden1; ++i) {
        double a = theta_[static_cast<size_t>(off_b1() + i)];
        const double* w = &theta_[static_cast<size_t>(off_w1() + i * sizes_.input)];
        for (int j = 0; j < sizes_.input; ++j) a += w[j] * obs[static_cast<size_t>(j)];
        c.h1[static_cast<size_t>(i)] = std::tanh(a);
    }
    c.h2.resize(static_cast<size_t>(sizes_.hidden2));
    for (int i = 0; i < sizes_.hidden2; ++i) {
        double a = theta_[static_cast<size_t>(off_b2() + i)];
        const double* w = &theta_[static_cast<size_t>(off_w2() + i * sizes_.hidden1)];
        for (int j = 0; j < sizes_.hidden1; ++j) a += w[j] * c.h1[static_cast<size_t>(j)];
        c.h2[static_cast<size_t>(i)] = std::tanh(a);
    }

    MaskedDistribution& d = c.dist;
    d.mask = mask;
    d.logits.resize(static_cast<size_t>(sizes_.actions));
    for (int i = 0; i < sizes_.actions; ++i) {
        double a = theta_[static_cast<size_t>(off_bp() + i)];
        const double* w = &theta_[static_cast<size_t>(off_wp() + i * sizes_.hidden2)];
        for (int j = 0; j < sizes_.hidden2; ++j) a += w[j] * c.h2[static_cast<size_t>(j)];
        d.logits[static_cast<size_t>(i)] = a;
    }

    std::vector<double> shifted(d.logits);
    for (int i = 0; i < sizes_.actions; ++i)
        if (!mask.bits[static_cast<size_t>(i)]) shifted[static_cast<size_t>(i)] -= 1e9;
    double mx = *std::max_element(shifted.begin(), shifted.end());
    double sum = 0.0;
    for (double z : shifted) sum += std::exp(z - mx);
    double lse = mx + std::log(sum);
    d.log_probs.resize(static_cast<size_t>(sizes_.actions));
    d.probs.resize(static_cast<size_t>(sizes_.actions));
    for (int i = 0; i < sizes_.actions; ++i) {
        d.log_probs[static_cast<size_t>(i)] = shifted[static_cast<size_t>(i)] - lse;
        d.probs[static_cast<size_t>(i)] = std::exp(d.log_probs[static_cast<size_t>(i)]);
    }

    double v = theta_[static_cast<size_t>(off_bv())];
    const double* wv = &theta_[static_cast<size_t>(off_wv())];
    for (int j = 0; j < sizes_.hidden2; ++j) v += wv[j] * c.h2[static_cast<size_t>(j)];
    c.value = v;
    return c;
}

void PolicyNet::backward(const ForwardCache& c, const std::vector<double>& d_logits, double d_value,
                         std::vector<double>& grad) const {
    std::vector<double> gh2(static_cast<size_t>(sizes_.hidden2), 0.0);

    for (int i = 0; i < sizes_.actions; ++i) {
        double g = d_logits[static_cast<size_t>(i)];
        if (g == 0.0) continue;
        grad[static_cast<size_t>(off_bp() + i)] += g;
        double* gw = &grad[static_cast<size_t>(off_wp() + i * sizes_.hidden2)];
        const double* w = &theta_[static_cast<size_t>(off_wp() + i * sizes_.hidden2)];
        for (int j = 0; j < sizes_.hidden2; ++j) {
            gw[j] += g * c.h2[static_cast<size_t>(j)];
            gh2[static_cast<size_t>(j)] += g * w[j];
        }
    }
    if (d_value != 0.0) {
        grad[static_cast<size_t>(off_bv())] += d_value;
        double* gw = &grad[static_cast<size_t>(off_wv())];
        const double* w = &theta_[static_cast<size_t>(off_wv())];
        for (int j = 0; j < sizes_.hidden2; ++j) {
            gw[j] += d_value * c.h2[static_cast<size_t>(j)];
            gh2[static_cast<size_t>(j)] += d_value * w[j];
        }
    }

    std::vector<double> gh1(static_cast<size_t>(sizes_.hidden1), 0.0);
    for (int i = 0; i < sizes_.hidden2; ++i) {
        double ga = gh2[static_cast<size_t>(i)] * (1.0 - c.h2[static_cast<size_t>(i)] * c.h2[static_cast<size_t>(i)]);
        if (ga == 0.0) continue;
        grad[static_cast<size_t>(off_b2() + i)] += ga;
        double* gw = &grad[static_cast<size_t>(off_w2() + i * sizes_.hidden1)];
        const double* w = &theta_[static_cast<size_t>(off_w2() + i * sizes_.hidden1)];
        for (int j = 0; j < sizes_.hidden1; ++j) {
            gw[j] += ga * c.h1[static_cast<size_t>(j)];
            gh1[static_cast<size_t>(j)] += ga * w[j];
        }
    }
    for (int i = 0; i < sizes_.hidden1; ++i) {
        double ga = gh1[static_cast<size_t>(i)] * (1.0 - c.h1[static_cast<size_t>(i)] * c.h1[static_cast<size_t>(i)]);
        if (ga == 0.0) continue;
        grad[static_cast<size_t>(off_b1() + i)] += ga;
        double* gw = &grad[static_cast<size_t>(off_w1() + i * sizes_.input)];
        for (int j = 0; j < sizes_.input; ++j) gw[j] += ga * c.input[static_cast<size_t>(j)];
    }
}

void AdamState::apply(std::vector<double>& theta, const std::vector<double>& grad) {
    ++t;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (size_t i = 0; i < theta.size(); ++i) {
        if (!std::isfinite(grad[i])) throw NonFiniteGradient();
        m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
        theta[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
    }
}

}  // namespace tsc
