#pragma once

// Adapt-to-Learn policy transfer.
//
// Every target step is paired with a reference step of the source simulator
// restarted from the same state and driven by the source policy's mean
// action. The per-step intrinsic term
//
//     zeta = log pi(a|s) - |s_next - s_ref|^2 / (2 sigma^2)
//
// is mixed with the environment reward as r' = (1 - beta) r - beta zeta
// (both normalized first), PPO ascends the mixed return, and beta = sigmoid(phi)
// is then moved along a return gradient measured on fresh test episodes
// collected with the updated policy.
//
// Subtracting zeta rewards -log pi and rewards moving away from the reference
// state. IntrinsicSign::add adds it instead; it is an opt-in variant,
// not the default.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "atl/core.hpp"
#include "atl/envs.hpp"
#include "atl/policy.hpp"
#include "atl/record.hpp"
#include "atl/rng.hpp"
#include "atl/training.hpp"

namespace atl::adapt {

// ---------------------------------------------------------------------------
// Intrinsic reward and mixing
// ---------------------------------------------------------------------------

/// zeta = log_prob - sum_d delta_d^2 / (2 sigma_d^2) for a per-dimension sigma.
inline double intrinsic_reward(double log_prob, const Vector& delta, const Vector& sigma) {
    if (delta.size() != sigma.size()) throw std::invalid_argument("intrinsic_reward: sigma dimension mismatch");
    return log_prob - 0.5 * delta.cwiseQuotient(sigma).squaredNorm();
}

inline double intrinsic_reward(double log_prob, const EnvState& s_next, const EnvState& s_ref, double sigma) {
    if (s_next.size() != s_ref.size()) throw std::invalid_argument("intrinsic_reward: state dimension mismatch");
    if (!(sigma > 0.0)) throw std::invalid_argument("intrinsic_reward: sigma must be > 0");
    return log_prob - (s_next - s_ref).squaredNorm() / (2.0 * sigma * sigma);
}

/// The same quantity written as log(pi(a|s) * exp(-|delta|^2 / (2 sigma^2))).
inline double intrinsic_reward_likelihood_form(double log_prob, const EnvState& s_next, const EnvState& s_ref,
                                               double sigma) {
    const double likelihood = std::exp(-(s_next - s_ref).squaredNorm() / (2.0 * sigma * sigma));
    return std::log(std::exp(log_prob) * likelihood);
}

enum class IntrinsicSign {
    subtract,  ///< r' = (1 - beta) r - beta zeta
    add,       ///< r' = (1 - beta) r + beta zeta
};

inline IntrinsicSign parse_intrinsic_sign(const std::string& s) {
    if (s == "subtract") return IntrinsicSign::subtract;
    if (s == "add") return IntrinsicSign::add;
    throw std::invalid_argument("intrinsic_sign must be 'subtract' or 'add', got '" + s + "'");
}

inline std::string to_string(IntrinsicSign s) { return s == IntrinsicSign::subtract ? "subtract" : "add"; }

/// (1 - beta) r -/+ beta zeta on normalized inputs. beta = 0 and beta = 1 are
/// accepted so the pure-exploration and pure-adaptation limits can be evaluated.
inline double mixed_reward(double r_norm, double zeta_norm, double beta, IntrinsicSign sign = IntrinsicSign::subtract) {
    if (!(beta >= 0.0 && beta <= 1.0)) throw std::invalid_argument("mixed_reward: beta must be in [0, 1]");
    return (1.0 - beta) * r_norm + (sign == IntrinsicSign::subtract ? -beta : beta) * zeta_norm;
}

inline double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline constexpr double kPhiLimit = 30.0;

/// beta = sigmoid(phi), so 0 < beta < 1.
struct MixingCoefficient {
    double phi = 0.0;

    double beta() const { return sigmoid(phi); }

    static MixingCoefficient from_beta(double beta) {
        if (!(beta > 0.0 && beta < 1.0)) throw std::invalid_argument("beta must be in (0, 1)");
        return {std::log(beta / (1.0 - beta))};
    }
};

enum class BetaGradientMode {
    difference,  ///< sum_t gamma^t (r_t - zeta_t)
    analytic,    ///< sum_t gamma^t d r'_t / d beta, i.e. (-r_t - zeta_t), or (-r_t + zeta_t) when zeta is added
};

inline BetaGradientMode parse_beta_mode(const std::string& s) {
    if (s == "difference") return BetaGradientMode::difference;
    if (s == "analytic") return BetaGradientMode::analytic;
    throw std::invalid_argument("beta_gradient_mode must be 'difference' or 'analytic', got '" + s + "'");
}

inline std::string to_string(BetaGradientMode m) { return m == BetaGradientMode::difference ? "difference" : "analytic"; }

/// Normalized environment reward and intrinsic term of one step.
struct RewardPair {
    double r = 0.0;
    double zeta = 0.0;
};

/// (1/N) sum_i sum_t gamma^t g(r_t, zeta_t), discounting from t = 0.
inline double beta_gradient(std::span<const std::vector<RewardPair>> trajectories, double gamma,
                            BetaGradientMode mode = BetaGradientMode::difference,
                            IntrinsicSign sign = IntrinsicSign::subtract) {
    const double zs = sign == IntrinsicSign::subtract ? -1.0 : 1.0;
    if (trajectories.empty()) throw std::invalid_argument("beta_gradient: no test trajectories");
    double total = 0.0;
    for (const auto& traj : trajectories) {
        double discount = 1.0;
        for (const auto& p : traj) {
            total += discount * (mode == BetaGradientMode::difference ? p.r - p.zeta : -p.r + zs * p.zeta);
            discount *= gamma;
        }
    }
    return total / static_cast<double>(trajectories.size());
}

/// Empirical mixed return (1/N) sum_i sum_t gamma^t r'_t at a given beta.
inline double mixed_return(std::span<const std::vector<RewardPair>> trajectories, double gamma, double beta,
                           IntrinsicSign sign = IntrinsicSign::subtract) {
    if (trajectories.empty()) throw std::invalid_argument("mixed_return: no trajectories");
    double total = 0.0;
    for (const auto& traj : trajectories) {
        double discount = 1.0;
        for (const auto& p : traj) {
            total += discount * mixed_reward(p.r, p.zeta, beta, sign);
            discount *= gamma;
        }
    }
    return total / static_cast<double>(trajectories.size());
}

/// phi <- phi + alpha_bar * g_beta * d beta / d phi, with d beta / d phi = beta (1 - beta).
/// phi is kept within +-kPhiLimit, where sigmoid is still strictly inside (0, 1) in double precision.
inline MixingCoefficient update_beta(MixingCoefficient m, double g_beta, double alpha_bar) {
    if (!std::isfinite(g_beta)) throw std::invalid_argument("update_beta: non-finite gradient");
    const double b = m.beta();
    m.phi = std::clamp(m.phi + alpha_bar * g_beta * b * (1.0 - b), -kPhiLimit, kPhiLimit);
    return m;
}

// ---------------------------------------------------------------------------
// Paired rollouts
// ---------------------------------------------------------------------------

struct PairedTransition {
    EnvState s;
    EnvAction a;      ///< applied target action (clamped)
    EnvAction a_raw;  ///< policy sample; log_prob refers to it
    EnvAction a_src;  ///< source policy mean action
    EnvState s_next;  ///< target successor
    EnvState s_ref;   ///< source-simulator successor from the same s
    double r = 0.0;
    double zeta = 0.0;
    double log_prob = 0.0;
    bool done = false;
    bool terminal = false;
};

struct PairedTrajectory {
    std::vector<PairedTransition> steps;
    std::uint64_t seed = 0;
    bool diverged = false;

    Trajectory as_trajectory(int horizon) const {
        Trajectory t;
        t.seed = seed;
        t.horizon = horizon;
        t.diverged = diverged;
        t.transitions.reserve(steps.size());
        for (const auto& p : steps) t.transitions.push_back({p.s, p.a, p.a_raw, p.r, p.s_next, p.log_prob, p.done, p.terminal});
        return t;
    }

    double env_return() const {
        double sum = 0.0;
        for (const auto& p : steps) sum += p.r;
        return sum;
    }
    double intrinsic_log_return() const {
        double sum = 0.0;
        for (const auto& p : steps) sum += p.zeta;
        return sum;
    }
    double intrinsic_exp_return() const {
        double sum = 0.0;
        for (const auto& p : steps) sum -= std::exp(p.zeta);
        return sum;
    }
};

/// Rolls the target policy in `target_env`; at every state the source
/// simulator is restarted there and stepped with the source policy's mean.
/// Draws from `rng` exactly as training.hpp's rollout() does, so the target
/// trajectory is the same one a plain rollout would produce.
inline PairedTrajectory collect_paired_trajectory(envs::Environment& target_env, envs::Environment& source_sim,
                                                  const nn::GaussianPolicy& policy,
                                                  const nn::GaussianPolicy& source_policy, const Vector& sigma,
                                                  Rng& rng, bool deterministic = false) {
    if (source_sim.state_dim() != target_env.state_dim())
        throw std::invalid_argument("source and target state spaces differ");
    PairedTrajectory traj;
    EnvState s = target_env.reset(rng);
    const EnvAction low = target_env.action_low();
    const EnvAction high = target_env.action_high();
    for (int t = 0; t < target_env.horizon(); ++t) {
        PairedTransition p;
        p.s = s;
        if (deterministic) {
            p.a_raw = policy.mean(s);
            p.log_prob = nn::log_prob(policy, s, p.a_raw);
            p.a = p.a_raw.cwiseMax(low).cwiseMin(high);
        } else {
            auto smp = nn::sample(policy, s, rng, low, high);
            p.a_raw = std::move(smp.raw);
            p.a = std::move(smp.action);
            p.log_prob = smp.log_prob;
        }
        p.a_src = source_sim.clamp_action(source_policy.mean(s));
        envs::StepResult res;
        try {
            res = target_env.step(p.a);
            source_sim.set_state(s);
            p.s_ref = source_sim.step(p.a_src).state;
        } catch (const DivergenceError&) {
            traj.diverged = true;
            break;
        }
        p.s_next = res.state;
        p.r = res.reward;
        p.done = res.done;
        p.terminal = res.terminal;
        p.zeta = intrinsic_reward(p.log_prob, target_env.state_difference(p.s_next, p.s_ref), sigma);
        s = res.state;
        traj.steps.push_back(std::move(p));
        if (res.done) break;
    }
    return traj;
}

/// sigma_d = scale * (max - min) of state coordinate d over stochastic source
/// rollouts on the source task (floored at 1e-3).
inline Vector heuristic_sigma(const envs::Environment& source_env, const nn::GaussianPolicy& source_policy,
                              int episodes, std::uint64_t seed, double scale = 0.25) {
    auto env = source_env.clone();
    Vector lo = Vector::Constant(env->state_dim(), std::numeric_limits<double>::infinity());
    Vector hi = -lo;
    for (int e = 0; e < episodes; ++e) {
        Rng rng(derive_seed(seed, {stream::kSigma, static_cast<std::uint64_t>(e)}));
        const Trajectory traj = rollout(*env, source_policy, rng);
        for (const auto& t : traj.transitions) {
            lo = lo.cwiseMin(t.s);
            hi = hi.cwiseMax(t.s);
        }
    }
    return (scale * (hi - lo)).cwiseMax(1e-3);
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct AtlConfig {
    TrainConfig train;
    double sigma = 0.0;  ///< <= 0 selects heuristic_sigma
    double sigma_scale = 0.25;
    int sigma_episodes = 10;
    double beta_init = 0.5;
    double beta_lr = 0.1;
    int test_episodes = 5;
    BetaGradientMode beta_mode = BetaGradientMode::difference;
    IntrinsicSign intrinsic_sign = IntrinsicSign::subtract;
    std::optional<double> beta_fixed;  ///< freezes beta (0 and 1 allowed); skips test rollouts
    bool init_from_source = true;

    void validate() const {
        train.validate();
        if (!(beta_init > 0.0 && beta_init < 1.0)) throw std::invalid_argument("beta_init must be in (0, 1)");
        if (beta_fixed && !(*beta_fixed >= 0.0 && *beta_fixed <= 1.0))
            throw std::invalid_argument("beta_fixed must be in [0, 1]");
        if (test_episodes < 1) throw std::invalid_argument("test_episodes must be >= 1");
        if (!std::isfinite(sigma)) throw std::invalid_argument("sigma must be finite");
    }
};

struct AtlResult {
    std::vector<ExperimentRecord> records;
    nn::GaussianPolicy policy;
    MixingCoefficient mixing;
    Vector sigma;
};

/// Normalized (r, zeta) pairs of paired trajectories under fixed moments.
inline std::vector<std::vector<RewardPair>> normalized_pairs(std::span<const PairedTrajectory> trajs,
                                                             const RunningMoments& r_moments,
                                                             const RunningMoments& zeta_moments) {
    std::vector<std::vector<RewardPair>> out;
    out.reserve(trajs.size());
    for (const auto& traj : trajs) {
        std::vector<RewardPair> v;
        v.reserve(traj.steps.size());
        for (const auto& p : traj.steps) v.push_back({normalize(p.r, r_moments), normalize(p.zeta, zeta_moments)});
        out.push_back(std::move(v));
    }
    return out;
}

/// Full adaptation loop. The target policy starts from the source policy
/// (cfg.init_from_source) or from a random initialization drawn exactly as
/// ppo_train() draws it.
inline AtlResult atl_train(const AtlConfig& cfg, const envs::Environment& target_proto,
                           const envs::Environment& source_proto, const nn::GaussianPolicy& source_policy,
                           std::uint64_t seed, int iterations,
                           const std::function<void(const ExperimentRecord&)>& on_iteration = {}) {
    cfg.validate();
    if (iterations < 0) throw std::invalid_argument("iterations must be >= 0");
    auto target = target_proto.clone();
    auto source = source_proto.clone();
    const TrainConfig& tc = cfg.train;

    Learner learner = make_learner(target->state_dim(), target->action_dim(), tc, seed,
                                   cfg.init_from_source ? std::optional(source_policy) : std::nullopt);
    AtlResult result;
    result.sigma = cfg.sigma > 0.0 ? Vector::Constant(target->state_dim(), cfg.sigma)
                                   : heuristic_sigma(*source, source_policy, cfg.sigma_episodes, seed, cfg.sigma_scale);
    result.mixing = MixingCoefficient::from_beta(cfg.beta_init);
    RunningMoments zeta_moments;
    WallClock clock(tc.record_wallclock);
    long episodes = 0;
    long steps = 0;

    for (int it = 0; it < iterations; ++it) {
        const double beta = cfg.beta_fixed ? *cfg.beta_fixed : result.mixing.beta();
        std::vector<PairedTrajectory> paired;
        paired.reserve(static_cast<std::size_t>(tc.batch_episodes));
        for (int e = 0; e < tc.batch_episodes; ++e) {
            const auto ep_seed = derive_seed(seed, {stream::kTrainEpisode, static_cast<std::uint64_t>(it),
                                                    static_cast<std::uint64_t>(e)});
            Rng rng(ep_seed);
            PairedTrajectory traj = collect_paired_trajectory(*target, *source, learner.policy, source_policy,
                                                              result.sigma, rng);
            traj.seed = ep_seed;
            if (traj.diverged) throw DivergenceError("environment diverged during paired rollout");
            steps += static_cast<long>(traj.steps.size());
            paired.push_back(std::move(traj));
        }
        episodes += tc.batch_episodes;

        std::vector<Trajectory> batch;
        batch.reserve(paired.size());
        for (const auto& p : paired) batch.push_back(p.as_trajectory(tc.horizon));
        std::vector<std::vector<double>> rewards = normalize_batch_rewards(batch, learner.reward_moments);
        for (const auto& p : paired)
            for (const auto& step : p.steps) zeta_moments = update_moments(zeta_moments, step.zeta);
        for (std::size_t e = 0; e < paired.size(); ++e) {
            for (std::size_t t = 0; t < paired[e].steps.size(); ++t) {
                rewards[e][t] = mixed_reward(rewards[e][t], normalize(paired[e].steps[t].zeta, zeta_moments), beta,
                                              cfg.intrinsic_sign);
            }
        }

        Rng update_rng(derive_seed(seed, {stream::kUpdate, static_cast<std::uint64_t>(it)}));
        update_learner(learner, batch, rewards, tc, update_rng);

        if (!cfg.beta_fixed) {
            std::vector<PairedTrajectory> test;
            test.reserve(static_cast<std::size_t>(cfg.test_episodes));
            for (int e = 0; e < cfg.test_episodes; ++e) {
                Rng rng(derive_seed(seed, {stream::kTestEpisode, static_cast<std::uint64_t>(it),
                                           static_cast<std::uint64_t>(e)}));
                test.push_back(collect_paired_trajectory(*target, *source, learner.policy, source_policy,
                                                         result.sigma, rng));
                if (test.back().diverged) throw DivergenceError("environment diverged during test rollout");
            }
            episodes += cfg.test_episodes;
            for (const auto& t : test) steps += static_cast<long>(t.steps.size());
            const auto pairs = normalized_pairs(test, learner.reward_moments, zeta_moments);
            const double g = beta_gradient(pairs, tc.gamma, cfg.beta_mode, cfg.intrinsic_sign);
            result.mixing = update_beta(result.mixing, g, cfg.beta_lr);
        }

        ExperimentRecord rec;
        rec.iteration = it;
        rec.episodes_so_far = episodes;
        rec.env_steps_so_far = steps;
        double env_sum = 0.0, log_sum = 0.0, exp_sum = 0.0;
        for (const auto& p : paired) {
            env_sum += p.env_return();
            log_sum += p.intrinsic_log_return();
            exp_sum += p.intrinsic_exp_return();
        }
        const double n = static_cast<double>(paired.size());
        rec.mean_env_return = env_sum / n;
        rec.mean_intrinsic_log_return = log_sum / n;
        rec.mean_intrinsic_exp_return = exp_sum / n;
        rec.beta = cfg.beta_fixed ? *cfg.beta_fixed : result.mixing.beta();
        rec.seed = seed;
        rec.wallclock_ms = clock.elapsed_ms();
        result.records.push_back(rec);
        if (on_iteration) on_iteration(rec);
    }
    result.policy = learner.policy;
    return result;
}

}  // namespace atl::adapt
