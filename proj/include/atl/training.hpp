#pragma once

// Plain on-policy PPO training loop: the scratch and warm-start baselines and
// source-policy training. The adaptation loop in adapt.hpp reuses the same
// rollout, normalization and update steps so that the two paths coincide
// exactly when the intrinsic term is switched off.

#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "atl/core.hpp"
#include "atl/envs.hpp"
#include "atl/policy.hpp"
#include "atl/ppo.hpp"
#include "atl/record.hpp"
#include "atl/rng.hpp"

namespace atl {

/// Seed-derivation streams; each purpose draws from its own generator.
namespace stream {
inline constexpr std::uint64_t kPolicyInit = 1;
inline constexpr std::uint64_t kCriticInit = 2;
inline constexpr std::uint64_t kTrainEpisode = 3;
inline constexpr std::uint64_t kTestEpisode = 4;
inline constexpr std::uint64_t kUpdate = 5;
inline constexpr std::uint64_t kSigma = 6;
inline constexpr std::uint64_t kEvaluation = 7;
}  // namespace stream

struct TrainConfig {
    double gamma = 0.995;
    double lambda = 0.95;
    int horizon = envs::kDefaultHorizon;
    int batch_episodes = 10;
    ppo::ClipConfig clip;
    double critic_lr = 1e-3;
    int critic_epochs = 10;
    int critic_minibatch = 64;
    std::vector<int> hidden{64, 64};
    double init_log_std = -0.5;
    bool record_wallclock = false;

    void validate() const {
        if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must be in (0, 1]");
        if (!(lambda >= 0.0 && lambda <= 1.0)) throw std::invalid_argument("lambda must be in [0, 1]");
        if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
        if (batch_episodes < 1) throw std::invalid_argument("batch_episodes must be >= 1");
        clip.validate();
    }
};

/// Parameters being learned plus everything that persists across iterations.
struct Learner {
    nn::GaussianPolicy policy;
    nn::Adam policy_optimizer;
    nn::Critic critic;
    RunningMoments reward_moments;
};

inline Learner make_learner(int state_dim, int action_dim, const TrainConfig& cfg, std::uint64_t seed,
                            const std::optional<nn::GaussianPolicy>& init_policy = std::nullopt) {
    Rng policy_rng(derive_seed(seed, {stream::kPolicyInit}));
    Rng critic_rng(derive_seed(seed, {stream::kCriticInit}));
    Learner l;
    if (init_policy) {
        if (init_policy->state_dim() != state_dim || init_policy->action_dim() != action_dim)
            throw std::invalid_argument("initial policy does not match environment dimensions");
        l.policy = *init_policy;
    } else {
        l.policy = nn::make_policy(state_dim, action_dim, policy_rng, cfg.hidden, cfg.init_log_std);
    }
    l.critic = nn::make_critic(state_dim, critic_rng, cfg.hidden);
    return l;
}

/// Runs one episode with a stochastic policy (or its mean when `deterministic`).
/// A DivergenceError ends the episode early with `diverged` set.
inline Trajectory rollout(envs::Environment& env, const nn::GaussianPolicy& policy, Rng& rng,
                          bool deterministic = false) {
    Trajectory traj;
    traj.horizon = env.horizon();
    EnvState s = env.reset(rng);
    const EnvAction low = env.action_low();
    const EnvAction high = env.action_high();
    for (int t = 0; t < env.horizon(); ++t) {
        Transition tr;
        tr.s = s;
        if (deterministic) {
            tr.a_raw = policy.mean(s);
            tr.log_prob = nn::log_prob(policy, s, tr.a_raw);
            tr.a = tr.a_raw.cwiseMax(low).cwiseMin(high);
        } else {
            auto smp = nn::sample(policy, s, rng, low, high);
            tr.a_raw = std::move(smp.raw);
            tr.a = std::move(smp.action);
            tr.log_prob = smp.log_prob;
        }
        envs::StepResult res;
        try {
            res = env.step(tr.a);
        } catch (const DivergenceError&) {
            traj.diverged = true;
            break;
        }
        tr.r = res.reward;
        tr.s_next = res.state;
        tr.done = res.done;
        tr.terminal = res.terminal;
        s = res.state;
        traj.transitions.push_back(std::move(tr));
        if (res.done) break;
    }
    return traj;
}

/// Mean undiscounted return over `episodes` rollouts seeded from `seed`.
inline double evaluate_policy(envs::Environment& env, const nn::GaussianPolicy& policy, int episodes,
                              std::uint64_t seed, bool deterministic = false) {
    double total = 0.0;
    for (int e = 0; e < episodes; ++e) {
        Rng rng(derive_seed(seed, {stream::kEvaluation, static_cast<std::uint64_t>(e)}));
        total += rollout(env, policy, rng, deterministic).undiscounted_return();
    }
    return total / episodes;
}

/// Folds every raw environment reward of the batch (episode order) into
/// `moments`, then returns the normalized rewards per episode.
inline std::vector<std::vector<double>> normalize_batch_rewards(std::span<const Trajectory> batch,
                                                                RunningMoments& moments) {
    for (const auto& traj : batch)
        for (const auto& t : traj.transitions) moments = update_moments(moments, t.r);
    std::vector<std::vector<double>> out;
    out.reserve(batch.size());
    for (const auto& traj : batch) {
        std::vector<double> r;
        r.reserve(traj.transitions.size());
        for (const auto& t : traj.transitions) r.push_back(normalize(t.r, moments));
        out.push_back(std::move(r));
    }
    return out;
}

/// GAE on the shaped rewards, one PPO update, then critic regression on the
/// GAE return targets.
inline ppo::PpoStats update_learner(Learner& learner, std::span<const Trajectory> batch,
                                    std::span<const std::vector<double>> rewards, const TrainConfig& cfg,
                                    Rng& update_rng) {
    Eigen::Index total = 0;
    for (const auto& traj : batch) total += static_cast<Eigen::Index>(traj.transitions.size());
    if (total == 0) throw std::invalid_argument("update_learner: batch has no transitions");
    const auto sdim = batch.front().transitions.front().s.size();
    const auto adim = batch.front().transitions.front().a_raw.size();
    ppo::PpoBatch ppo_batch{Matrix(sdim, total), Matrix(adim, total), Vector(total), Vector(total)};
    Vector returns(total);
    Eigen::Index k = 0;
    for (std::size_t e = 0; e < batch.size(); ++e) {
        const auto& traj = batch[e];
        if (traj.transitions.empty()) continue;
        const ppo::AdvantageBatch adv = ppo::gae(traj, rewards[e], learner.critic, cfg.gamma, cfg.lambda);
        for (std::size_t t = 0; t < traj.transitions.size(); ++t, ++k) {
            const auto& tr = traj.transitions[t];
            ppo_batch.states.col(k) = tr.s;
            ppo_batch.actions.col(k) = tr.a_raw;
            ppo_batch.logp_old[k] = tr.log_prob;
            ppo_batch.advantages[k] = adv.advantages[static_cast<Eigen::Index>(t)];
            returns[k] = adv.returns[static_cast<Eigen::Index>(t)];
        }
    }
    ppo::PpoStats stats = ppo::ppo_update(learner.policy, learner.policy_optimizer, ppo_batch, cfg.clip, update_rng);
    if (stats.aborted) throw DivergenceError("policy update aborted: " + stats.diagnostic);
    std::vector<int> order(static_cast<std::size_t>(total));
    for (int i = 0; i < static_cast<int>(total); ++i) order[static_cast<std::size_t>(i)] = i;
    ppo::shuffle_indices(order, update_rng);
    learner.critic = nn::critic_update(std::move(learner.critic), ppo_batch.states, returns, cfg.critic_lr,
                                       cfg.critic_epochs, cfg.critic_minibatch, order);
    return stats;
}

class WallClock {
public:
    explicit WallClock(bool enabled) : enabled_(enabled), start_(std::chrono::steady_clock::now()) {}
    double elapsed_ms() const {
        if (!enabled_) return 0.0;
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    bool enabled_;
    std::chrono::steady_clock::time_point start_;
};

struct TrainResult {
    std::vector<ExperimentRecord> records;
    nn::GaussianPolicy policy;
    nn::Critic critic;
};

/// PPO on environment reward only. `init_policy` selects warm start; without
/// it the policy is randomly initialized from `seed`. Records carry NaN in
/// the intrinsic columns and beta = 0.
inline TrainResult ppo_train(const TrainConfig& cfg, const envs::Environment& env_proto, std::uint64_t seed,
                             int iterations, const std::optional<nn::GaussianPolicy>& init_policy = std::nullopt,
                             const std::function<void(const ExperimentRecord&)>& on_iteration = {}) {
    cfg.validate();
    if (iterations < 0) throw std::invalid_argument("iterations must be >= 0");
    auto env = env_proto.clone();
    Learner learner = make_learner(env->state_dim(), env->action_dim(), cfg, seed, init_policy);
    WallClock clock(cfg.record_wallclock);
    TrainResult result;
    long episodes = 0;
    long steps = 0;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (int it = 0; it < iterations; ++it) {
        std::vector<Trajectory> batch;
        batch.reserve(static_cast<std::size_t>(cfg.batch_episodes));
        double return_sum = 0.0;
        for (int e = 0; e < cfg.batch_episodes; ++e) {
            const auto ep_seed = derive_seed(seed, {stream::kTrainEpisode, static_cast<std::uint64_t>(it),
                                                    static_cast<std::uint64_t>(e)});
            Rng rng(ep_seed);
            Trajectory traj = rollout(*env, learner.policy, rng);
            traj.seed = ep_seed;
            if (traj.diverged) throw DivergenceError("environment diverged during rollout");
            return_sum += traj.undiscounted_return();
            steps += static_cast<long>(traj.size());
            batch.push_back(std::move(traj));
        }
        episodes += cfg.batch_episodes;
        const auto rewards = normalize_batch_rewards(batch, learner.reward_moments);
        Rng update_rng(derive_seed(seed, {stream::kUpdate, static_cast<std::uint64_t>(it)}));
        update_learner(learner, batch, rewards, cfg, update_rng);

        ExperimentRecord rec;
        rec.iteration = it;
        rec.episodes_so_far = episodes;
        rec.env_steps_so_far = steps;
        rec.mean_env_return = return_sum / cfg.batch_episodes;
        rec.mean_intrinsic_log_return = nan;
        rec.mean_intrinsic_exp_return = nan;
        rec.beta = 0.0;
        rec.seed = seed;
        rec.wallclock_ms = clock.elapsed_ms();
        result.records.push_back(rec);
        if (on_iteration) on_iteration(rec);
    }
    result.policy = learner.policy;
    result.critic = learner.critic;
    return result;
}

}  // namespace atl
