#pragma once

// Exactly solvable finite MDPs used to check the value-gap bound
//     |V_{M*} - V_{M^}|_inf <= gamma eps / (1 - gamma)^2,  eps = max_{s,a} |p^(.|s,a) - p*(.|s,a)|_1
// and the finite-class sample bound
//     n(eps, delta) >= 2 / (eps^2 (1 - gamma)^2) * log(2 |Pi| / delta).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "atl/core.hpp"
#include "atl/rng.hpp"

namespace atl::theory {

/// Transitions stored as P[(s * n_actions + a) * n_states + s'].
struct TabularMDP {
    int n_states = 0;
    int n_actions = 0;
    std::vector<double> P;
    std::vector<double> R;  ///< R[s * n_actions + a], in [0, 1]
    double gamma = 0.9;

    double p(int s, int a, int s2) const { return P[(static_cast<std::size_t>(s) * n_actions + a) * n_states + s2]; }
    double& p(int s, int a, int s2) { return P[(static_cast<std::size_t>(s) * n_actions + a) * n_states + s2]; }
    double r(int s, int a) const { return R[static_cast<std::size_t>(s) * n_actions + a]; }

    void validate() const {
        if (n_states < 1 || n_actions < 1) throw std::invalid_argument("TabularMDP: empty state or action set");
        if (P.size() != static_cast<std::size_t>(n_states) * n_actions * n_states ||
            R.size() != static_cast<std::size_t>(n_states) * n_actions)
            throw std::invalid_argument("TabularMDP: table sizes do not match n_states/n_actions");
        if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("TabularMDP: gamma must be in (0, 1)");
        for (int s = 0; s < n_states; ++s) {
            for (int a = 0; a < n_actions; ++a) {
                double sum = 0.0;
                for (int s2 = 0; s2 < n_states; ++s2) {
                    if (p(s, a, s2) < 0.0) throw std::invalid_argument("TabularMDP: negative transition probability");
                    sum += p(s, a, s2);
                }
                if (std::abs(sum - 1.0) > 1e-12) throw std::invalid_argument("TabularMDP: transition row does not sum to 1");
                if (!(r(s, a) >= 0.0 && r(s, a) <= 1.0)) throw std::invalid_argument("TabularMDP: reward outside [0, 1]");
            }
        }
    }
};

/// probs[s * n_actions + a]
struct TabularPolicy {
    int n_states = 0;
    int n_actions = 0;
    std::vector<double> probs;

    double prob(int s, int a) const { return probs[static_cast<std::size_t>(s) * n_actions + a]; }

    static TabularPolicy deterministic(const std::vector<int>& actions, int n_actions) {
        TabularPolicy pi{static_cast<int>(actions.size()), n_actions,
                         std::vector<double>(actions.size() * static_cast<std::size_t>(n_actions), 0.0)};
        for (std::size_t s = 0; s < actions.size(); ++s) pi.probs[s * n_actions + actions[s]] = 1.0;
        return pi;
    }
};

using FinitePolicyClass = std::vector<TabularPolicy>;

/// Policy-averaged transition matrix and reward vector.
inline std::pair<Matrix, Vector> policy_dynamics(const TabularMDP& m, const TabularPolicy& pi) {
    if (pi.n_states != m.n_states || pi.n_actions != m.n_actions)
        throw std::invalid_argument("policy shape does not match MDP");
    Matrix P = Matrix::Zero(m.n_states, m.n_states);
    Vector R = Vector::Zero(m.n_states);
    for (int s = 0; s < m.n_states; ++s) {
        for (int a = 0; a < m.n_actions; ++a) {
            const double w = pi.prob(s, a);
            if (w == 0.0) continue;
            R[s] += w * m.r(s, a);
            for (int s2 = 0; s2 < m.n_states; ++s2) P(s, s2) += w * m.p(s, a, s2);
        }
    }
    return {P, R};
}

/// Solves (I - gamma P_pi) V = R_pi.
inline Vector policy_evaluation_direct(const TabularMDP& m, const TabularPolicy& pi) {
    const auto [P, R] = policy_dynamics(m, pi);
    const Matrix A = Matrix::Identity(m.n_states, m.n_states) - m.gamma * P;
    return A.partialPivLu().solve(R);
}

/// Bellman iteration until successive iterates differ by at most tol*(1-gamma)/gamma
/// in sup norm, which bounds the Bellman residual of the result by tol.
inline Vector policy_evaluation_iterative(const TabularMDP& m, const TabularPolicy& pi, double tol) {
    const auto [P, R] = policy_dynamics(m, pi);
    Vector v = Vector::Zero(m.n_states);
    const double stop = tol * (1.0 - m.gamma) / m.gamma;
    for (int it = 0; it < 1000000; ++it) {
        Vector next = R + m.gamma * P * v;
        const double diff = (next - v).lpNorm<Eigen::Infinity>();
        v = std::move(next);
        if (diff <= stop) return v;
    }
    throw std::runtime_error("policy_evaluation: iteration did not converge");
}

inline Vector policy_evaluation(const TabularMDP& m, const TabularPolicy& pi, double tol = 1e-10) {
    if (m.n_states <= 50) return policy_evaluation_direct(m, pi);
    return policy_evaluation_iterative(m, pi, tol);
}

inline double bellman_residual(const TabularMDP& m, const TabularPolicy& pi, const Vector& v) {
    const auto [P, R] = policy_dynamics(m, pi);
    return (v - (R + m.gamma * P * v)).lpNorm<Eigen::Infinity>();
}

inline void check_same_shape(const TabularMDP& a, const TabularMDP& b) {
    if (a.n_states != b.n_states || a.n_actions != b.n_actions) throw std::invalid_argument("MDP shapes differ");
}

/// sup_{s,a} |<P1(.|s,a) - P2(.|s,a), V>|
inline double model_deviation(const TabularMDP& m1, const TabularMDP& m2, const Vector& v) {
    check_same_shape(m1, m2);
    double worst = 0.0;
    for (int s = 0; s < m1.n_states; ++s)
        for (int a = 0; a < m1.n_actions; ++a) {
            double inner = 0.0;
            for (int s2 = 0; s2 < m1.n_states; ++s2) inner += (m1.p(s, a, s2) - m2.p(s, a, s2)) * v[s2];
            worst = std::max(worst, std::abs(inner));
        }
    return worst;
}

/// max_{s,a} L1 distance between transition rows.
inline double transition_gap(const TabularMDP& m1, const TabularMDP& m2) {
    check_same_shape(m1, m2);
    double worst = 0.0;
    for (int s = 0; s < m1.n_states; ++s)
        for (int a = 0; a < m1.n_actions; ++a) {
            double l1 = 0.0;
            for (int s2 = 0; s2 < m1.n_states; ++s2) l1 += std::abs(m1.p(s, a, s2) - m2.p(s, a, s2));
            worst = std::max(worst, l1);
        }
    return worst;
}

struct LemmaReport {
    double lhs = 0.0;  ///< |V_{M*} - V_{M^}|_inf
    double rhs = 0.0;  ///< gamma eps / (1 - gamma)^2
    double epsilon = 0.0;
    double gamma = 0.0;
    bool pass = false;
    double tightness = 0.0;  ///< lhs / rhs (0 when rhs = 0)
};

inline LemmaReport lemma_bound_check(const TabularMDP& m_star, const TabularMDP& m_hat, const TabularPolicy& pi) {
    check_same_shape(m_star, m_hat);
    if (m_star.gamma != m_hat.gamma) throw std::invalid_argument("lemma_bound_check: discounts differ");
    LemmaReport rep;
    rep.gamma = m_star.gamma;
    rep.epsilon = transition_gap(m_star, m_hat);
    const Vector v_star = policy_evaluation_direct(m_star, pi);
    const Vector v_hat = policy_evaluation_direct(m_hat, pi);
    rep.lhs = (v_star - v_hat).lpNorm<Eigen::Infinity>();
    rep.rhs = rep.gamma * rep.epsilon / ((1.0 - rep.gamma) * (1.0 - rep.gamma));
    // Tolerance covers the linear-solve rounding when the two models coincide.
    rep.pass = rep.lhs <= rep.rhs + 1e-9;
    rep.tightness = rep.rhs > 0.0 ? rep.lhs / rep.rhs : 0.0;
    return rep;
}

/// Exact real value of the sample bound before rounding up.
inline double pac_sample_bound_real(double eps, double delta, double gamma, std::uint64_t policy_class_size) {
    if (!(eps > 0.0 && eps < 1.0)) throw std::invalid_argument("pac_sample_bound: eps must be in (0, 1)");
    if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("pac_sample_bound: delta must be in (0, 1)");
    if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("pac_sample_bound: gamma must be in (0, 1)");
    if (policy_class_size < 1) throw std::invalid_argument("pac_sample_bound: policy class is empty");
    const double c = 1.0 - gamma;
    return 2.0 / (eps * eps * c * c) * std::log(2.0 * static_cast<double>(policy_class_size) / delta);
}

inline std::uint64_t pac_sample_bound(double eps, double delta, double gamma, std::uint64_t policy_class_size) {
    return static_cast<std::uint64_t>(std::ceil(pac_sample_bound_real(eps, delta, gamma, policy_class_size)));
}

// ---------------------------------------------------------------------------
// Random instances
// ---------------------------------------------------------------------------

inline std::vector<double> dirichlet_ones(int n, Rng& rng) {
    std::exponential_distribution<double> expo(1.0);
    std::vector<double> w(static_cast<std::size_t>(n));
    double sum = 0.0;
    for (auto& x : w) {
        x = expo(rng);
        sum += x;
    }
    for (auto& x : w) x /= sum;
    return w;
}

/// Dirichlet(1,...,1) transition rows and Uniform[0,1] rewards.
inline TabularMDP random_mdp(int n_states, int n_actions, double gamma, Rng& rng) {
    TabularMDP m;
    m.n_states = n_states;
    m.n_actions = n_actions;
    m.gamma = gamma;
    m.P.resize(static_cast<std::size_t>(n_states) * n_actions * n_states);
    m.R.resize(static_cast<std::size_t>(n_states) * n_actions);
    for (int s = 0; s < n_states; ++s)
        for (int a = 0; a < n_actions; ++a) {
            const auto row = dirichlet_ones(n_states, rng);
            for (int s2 = 0; s2 < n_states; ++s2) m.p(s, a, s2) = row[static_cast<std::size_t>(s2)];
            m.R[static_cast<std::size_t>(s) * n_actions + a] = uniform(rng, 0.0, 1.0);
        }
    return m;
}

/// Each row becomes (1 - mix) p + mix q with q an independent Dirichlet(1,...,1) row,
/// so every row moves by at most 2 * mix in L1.
inline TabularMDP perturb_mdp(const TabularMDP& m, double mix, Rng& rng) {
    TabularMDP out = m;
    for (int s = 0; s < m.n_states; ++s)
        for (int a = 0; a < m.n_actions; ++a) {
            const auto q = dirichlet_ones(m.n_states, rng);
            double sum = 0.0;
            for (int s2 = 0; s2 < m.n_states; ++s2) {
                out.p(s, a, s2) = (1.0 - mix) * m.p(s, a, s2) + mix * q[static_cast<std::size_t>(s2)];
                sum += out.p(s, a, s2);
            }
            for (int s2 = 0; s2 < m.n_states; ++s2) out.p(s, a, s2) /= sum;
        }
    return out;
}

inline TabularPolicy random_policy(int n_states, int n_actions, Rng& rng) {
    TabularPolicy pi{n_states, n_actions, {}};
    for (int s = 0; s < n_states; ++s) {
        const auto row = dirichlet_ones(n_actions, rng);
        pi.probs.insert(pi.probs.end(), row.begin(), row.end());
    }
    return pi;
}

/// All deterministic policies (n_actions^n_states of them).
inline FinitePolicyClass all_deterministic_policies(int n_states, int n_actions) {
    FinitePolicyClass out;
    std::vector<int> actions(static_cast<std::size_t>(n_states), 0);
    while (true) {
        out.push_back(TabularPolicy::deterministic(actions, n_actions));
        int i = 0;
        while (i < n_states && ++actions[static_cast<std::size_t>(i)] == n_actions) actions[static_cast<std::size_t>(i++)] = 0;
        if (i == n_states) break;
    }
    return out;
}

struct RandomLemmaSummary {
    int instances = 0;
    int violations = 0;
    double max_tightness = 0.0;
    double mean_tightness = 0.0;
};

/// Random (M*, M^, pi) triples with n_states in [2, max_states], n_actions in
/// [1, max_actions] and gamma drawn from `gammas`.
inline RandomLemmaSummary random_lemma_verification(int instances, int max_states, int max_actions,
                                                    const std::vector<double>& gammas, std::uint64_t seed) {
    RandomLemmaSummary sum;
    for (int i = 0; i < instances; ++i) {
        Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(i)}));
        const int ns = 2 + static_cast<int>(rng() % static_cast<std::uint64_t>(max_states - 1));
        const int na = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(max_actions));
        const double gamma = gammas[rng() % gammas.size()];
        const TabularMDP m_star = random_mdp(ns, na, gamma, rng);
        const TabularMDP m_hat = perturb_mdp(m_star, uniform(rng, 0.0, 0.5), rng);
        const TabularPolicy pi = random_policy(ns, na, rng);
        const LemmaReport rep = lemma_bound_check(m_star, m_hat, pi);
        ++sum.instances;
        if (!rep.pass) ++sum.violations;
        sum.max_tightness = std::max(sum.max_tightness, rep.tightness);
        sum.mean_tightness += rep.tightness;
    }
    if (sum.instances > 0) sum.mean_tightness /= sum.instances;
    return sum;
}

// ---------------------------------------------------------------------------
// Empirical concentration
// ---------------------------------------------------------------------------

/// Smallest H with gamma^H / (1 - gamma) < eps / 10.
inline int truncation_horizon(double gamma, double eps) {
    int h = 0;
    double tail = 1.0 / (1.0 - gamma);
    while (tail >= eps / 10.0) {
        tail *= gamma;
        ++h;
        if (h > 100000) throw std::invalid_argument("truncation_horizon: gamma too close to 1");
    }
    return h;
}

struct PacReport {
    std::uint64_t n = 0;  ///< trajectories per policy per trial
    int horizon = 0;
    int trials = 0;
    int failures = 0;  ///< trials where some policy's estimate missed by >= eps/2
    double failure_frequency = 0.0;
    double delta = 0.0;
    double max_deviation = 0.0;
    bool pass = false;
};

/// For every trial and every policy in the class, averages n truncated
/// discounted returns from the initial distribution, with n from
/// pac_sample_bound, and records whether sup_pi |estimate - exact| >= eps/2.
inline PacReport empirical_pac_experiment(const TabularMDP& m, const std::vector<double>& initial,
                                          const FinitePolicyClass& policies, double eps, double delta, int trials,
                                          std::uint64_t seed, std::uint64_t n_override = 0) {
    m.validate();
    if (policies.empty()) throw std::invalid_argument("empirical_pac_experiment: empty policy class");
    if (initial.size() != static_cast<std::size_t>(m.n_states))
        throw std::invalid_argument("empirical_pac_experiment: initial distribution size mismatch");
    PacReport rep;
    rep.delta = delta;
    rep.trials = trials;
    rep.n = n_override ? n_override : pac_sample_bound(eps, delta, m.gamma, policies.size());
    rep.horizon = truncation_horizon(m.gamma, eps);

    const Eigen::Map<const Vector> rho(initial.data(), static_cast<Eigen::Index>(initial.size()));
    const int ns = m.n_states;
    const int na = m.n_actions;
    // Per policy: cumulative distribution over joint (action, next state) for each state.
    struct Sampler {
        std::vector<double> cdf;      // [s][a * ns + s2]
        std::vector<double> reward;   // [s][a * ns + s2] -> r(s, a)
        double exact = 0.0;
    };
    std::vector<Sampler> samplers;
    for (const auto& pi : policies) {
        Sampler smp;
        smp.cdf.resize(static_cast<std::size_t>(ns) * na * ns);
        smp.reward.resize(smp.cdf.size());
        for (int s = 0; s < ns; ++s) {
            double acc = 0.0;
            for (int a = 0; a < na; ++a)
                for (int s2 = 0; s2 < ns; ++s2) {
                    const auto k = (static_cast<std::size_t>(s) * na + a) * ns + s2;
                    acc += pi.prob(s, a) * m.p(s, a, s2);
                    smp.cdf[k] = acc;
                    smp.reward[k] = m.r(s, a);
                }
            smp.cdf[(static_cast<std::size_t>(s) + 1) * na * ns - 1] = 1.0;
        }
        smp.exact = rho.dot(policy_evaluation_direct(m, pi));
        samplers.push_back(std::move(smp));
    }
    std::vector<double> init_cdf(initial.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < initial.size(); ++i) init_cdf[i] = (acc += initial[i]);
    init_cdf.back() = 1.0;

    auto draw = [](const double* cdf, int count, double u) {
        int k = 0;
        while (k + 1 < count && u > cdf[k]) ++k;
        return k;
    };

    const int joint = na * ns;
    for (int trial = 0; trial < trials; ++trial) {
        Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(trial)}));
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        double worst = 0.0;
        for (const auto& smp : samplers) {
            double total = 0.0;
            for (std::uint64_t i = 0; i < rep.n; ++i) {
                int s = draw(init_cdf.data(), ns, unif(rng));
                double ret = 0.0;
                double discount = 1.0;
                for (int t = 0; t < rep.horizon; ++t) {
                    const double* row = smp.cdf.data() + static_cast<std::size_t>(s) * joint;
                    const int k = draw(row, joint, unif(rng));
                    ret += discount * smp.reward[static_cast<std::size_t>(s) * joint + k];
                    discount *= m.gamma;
                    s = k % ns;
                }
                total += ret;
            }
            worst = std::max(worst, std::abs(total / static_cast<double>(rep.n) - smp.exact));
        }
        rep.max_deviation = std::max(rep.max_deviation, worst);
        if (worst >= eps / 2.0) ++rep.failures;
    }
    rep.failure_frequency = trials > 0 ? static_cast<double>(rep.failures) / trials : 0.0;
    rep.pass = rep.failure_frequency <= delta;
    return rep;
}

}  // namespace atl::theory
