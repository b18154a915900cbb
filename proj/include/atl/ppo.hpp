#pragma once

// Importance-sampled policy-gradient update with the PPO clipped surrogate,
// plus generalized advantage estimation.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "atl/core.hpp"
#include "atl/policy.hpp"
#include "atl/rng.hpp"

namespace atl::ppo {

struct AdvantageBatch {
    Vector advantages;
    Vector returns;  ///< critic targets: advantage + V(s_t)
    bool normalized = false;
};

/// values has one more entry than rewards: values[T] is the bootstrap value
/// of the final successor state (0 for a terminal step).
inline AdvantageBatch gae(std::span<const double> rewards, std::span<const double> values, double gamma,
                          double lambda) {
    const std::size_t n = rewards.size();
    if (n == 0) throw std::invalid_argument("gae: empty trajectory");
    if (values.size() != n + 1) throw std::invalid_argument("gae: need len(rewards) + 1 values");
    AdvantageBatch out;
    out.advantages.resize(static_cast<Eigen::Index>(n));
    out.returns.resize(static_cast<Eigen::Index>(n));
    double running = 0.0;
    for (std::size_t t = n; t-- > 0;) {
        const double delta = rewards[t] + gamma * values[t + 1] - values[t];
        running = delta + gamma * lambda * running;
        out.advantages[static_cast<Eigen::Index>(t)] = running;
        out.returns[static_cast<Eigen::Index>(t)] = running + values[t];
    }
    return out;
}

/// GAE along a trajectory with the given (possibly shaped) per-step rewards.
/// The final state is bootstrapped with the critic unless the episode
/// ended in a terminal failure.
inline AdvantageBatch gae(const Trajectory& traj, std::span<const double> rewards, const nn::Critic& critic,
                          double gamma, double lambda) {
    const auto n = traj.transitions.size();
    if (n == 0) throw std::invalid_argument("gae: empty trajectory");
    if (rewards.size() != n) throw std::invalid_argument("gae: reward count mismatch");
    Matrix states(traj.transitions.front().s.size(), static_cast<Eigen::Index>(n + 1));
    for (std::size_t t = 0; t < n; ++t) states.col(static_cast<Eigen::Index>(t)) = traj.transitions[t].s;
    states.col(static_cast<Eigen::Index>(n)) = traj.transitions.back().s_next;
    const Vector v = critic.values(states);
    std::vector<double> values(v.data(), v.data() + v.size());
    if (traj.transitions.back().terminal) values.back() = 0.0;
    return gae(rewards, values, gamma, lambda);
}

inline AdvantageBatch gae(const Trajectory& traj, const nn::Critic& critic, double gamma, double lambda) {
    std::vector<double> rewards;
    rewards.reserve(traj.transitions.size());
    for (const auto& t : traj.transitions) rewards.push_back(t.r);
    return gae(traj, rewards, critic, gamma, lambda);
}

/// Shifts and scales to zero mean and unit (population) std.
inline void normalize_advantages(Vector& adv, double eps = 1e-8) {
    if (adv.size() == 0) return;
    const double mean = adv.mean();
    const double sd = std::sqrt((adv.array() - mean).square().mean());
    adv = (adv.array() - mean) / (sd + eps);
}

inline constexpr double kLogRatioClamp = 20.0;

/// exp(logp_new - logp_old) with the exponent clamped to [-20, 20].
inline double importance_ratio(double logp_new, double logp_old) {
    return std::exp(std::clamp(logp_new - logp_old, -kLogRatioClamp, kLogRatioClamp));
}

struct ClipConfig {
    double clip_epsilon = 0.2;
    int epochs = 10;
    int minibatch_size = 64;
    double lr = 3e-4;
    double target_kl = 0.02;  ///< stop further epochs once mean KL(old||new) exceeds this
    bool normalize_advantages = true;

    void validate() const {
        if (!(clip_epsilon > 0.0 && clip_epsilon < 1.0)) throw std::invalid_argument("clip_epsilon must be in (0, 1)");
        if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
        if (minibatch_size < 1) throw std::invalid_argument("minibatch_size must be >= 1");
        if (!(lr >= 0.0)) throw std::invalid_argument("lr must be >= 0");
    }
};

/// One sample per column; actions are the raw (pre-clamp) policy samples.
struct PpoBatch {
    Matrix states;
    Matrix actions;
    Vector logp_old;
    Vector advantages;

    Eigen::Index size() const { return logp_old.size(); }

    PpoBatch subset(std::span<const int> idx) const {
        PpoBatch out;
        const auto n = static_cast<Eigen::Index>(idx.size());
        out.states.resize(states.rows(), n);
        out.actions.resize(actions.rows(), n);
        out.logp_old.resize(n);
        out.advantages.resize(n);
        for (Eigen::Index j = 0; j < n; ++j) {
            out.states.col(j) = states.col(idx[j]);
            out.actions.col(j) = actions.col(idx[j]);
            out.logp_old[j] = logp_old[idx[j]];
            out.advantages[j] = advantages[idx[j]];
        }
        return out;
    }
};

/// (1/n) sum_i min(ratio_i A_i, clip(ratio_i, 1 - eps, 1 + eps) A_i)
inline double clipped_surrogate(const nn::GaussianPolicy& policy, const PpoBatch& batch, double clip_epsilon) {
    const Vector logp = nn::log_prob_batch(policy, batch.states, batch.actions);
    double total = 0.0;
    for (Eigen::Index i = 0; i < batch.size(); ++i) {
        const double ratio = importance_ratio(logp[i], batch.logp_old[i]);
        const double clipped = std::clamp(ratio, 1.0 - clip_epsilon, 1.0 + clip_epsilon);
        total += std::min(ratio * batch.advantages[i], clipped * batch.advantages[i]);
    }
    return total / static_cast<double>(batch.size());
}

/// Gradient of clipped_surrogate. Where the unclipped term is active this is
/// (1/n) sum_i ratio_i A_i grad log pi(a_i|s_i); clipped samples contribute 0.
inline Vector surrogate_gradient(const nn::GaussianPolicy& policy, const PpoBatch& batch, double clip_epsilon) {
    const Vector logp = nn::log_prob_batch(policy, batch.states, batch.actions);
    Vector weights(batch.size());
    for (Eigen::Index i = 0; i < batch.size(); ++i) {
        const double log_ratio = logp[i] - batch.logp_old[i];
        const double ratio = importance_ratio(logp[i], batch.logp_old[i]);
        const double a = batch.advantages[i];
        const bool clipped = (a > 0.0 && ratio > 1.0 + clip_epsilon) || (a < 0.0 && ratio < 1.0 - clip_epsilon);
        const bool saturated = std::abs(log_ratio) > kLogRatioClamp;
        weights[i] = (clipped || saturated) ? 0.0 : ratio * a;
    }
    return nn::grad_weighted_log_prob(policy, batch.states, batch.actions, weights) /
           static_cast<double>(batch.size());
}

/// The importance-sampled policy-gradient estimate
/// g = (1/n) sum_i ratio_i Q_i grad log pi(a_i|s_i) with no clipping.
inline Vector importance_sampled_gradient(const nn::GaussianPolicy& policy, const PpoBatch& batch) {
    return surrogate_gradient(policy, batch, std::numeric_limits<double>::infinity());
}

struct PpoStats {
    double surrogate_before = 0.0;
    double surrogate_after = 0.0;
    double mean_kl = 0.0;
    int epochs_run = 0;
    bool early_stopped = false;
    bool aborted = false;
    std::string diagnostic;
};

/// Deterministic Fisher-Yates shuffle (independent of the standard library's shuffle).
inline void shuffle_indices(std::vector<int>& idx, Rng& rng) {
    for (std::size_t i = idx.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng() % i);
        std::swap(idx[i - 1], idx[j]);
    }
}

/// Ascends the clipped surrogate with Adam for up to cfg.epochs passes of
/// shuffled minibatches. On a non-finite gradient the policy and optimizer
/// are restored and the stats carry a diagnostic.
inline PpoStats ppo_update(nn::GaussianPolicy& policy, nn::Adam& optimizer, PpoBatch batch, const ClipConfig& cfg,
                           Rng& rng) {
    if (batch.size() == 0) throw std::invalid_argument("ppo_update: empty batch");
    if (!batch.advantages.allFinite()) throw std::invalid_argument("ppo_update: non-finite advantages");
    if (cfg.normalize_advantages) normalize_advantages(batch.advantages);

    const nn::GaussianPolicy original = policy;
    const nn::Adam original_opt = optimizer;
    PpoStats stats;
    stats.surrogate_before = clipped_surrogate(policy, batch, cfg.clip_epsilon);

    const int n = static_cast<int>(batch.size());
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    const int mb = std::min(cfg.minibatch_size, n);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_indices(idx, rng);
        for (int start = 0; start < n; start += mb) {
            const int count = std::min(mb, n - start);
            const PpoBatch minibatch = batch.subset(std::span<const int>(idx).subspan(start, count));
            const Vector grad = surrogate_gradient(policy, minibatch, cfg.clip_epsilon);
            if (!grad.allFinite()) {
                policy = original;
                optimizer = original_opt;
                stats.aborted = true;
                stats.diagnostic = "non-finite policy gradient at epoch " + std::to_string(epoch);
                stats.surrogate_after = stats.surrogate_before;
                return stats;
            }
            policy.set_flat(policy.flat() + optimizer.step(grad, cfg.lr));
        }
        stats.epochs_run = epoch + 1;
        stats.mean_kl = nn::mean_kl(original, policy, batch.states);
        if (stats.mean_kl > cfg.target_kl) {
            stats.early_stopped = true;
            break;
        }
    }
    stats.surrogate_after = clipped_surrogate(policy, batch, cfg.clip_epsilon);
    return stats;
}

}  // namespace atl::ppo
