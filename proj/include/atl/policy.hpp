#pragma once

// Gaussian policy with a tanh-MLP mean and a state-independent log-std, and a
// scalar tanh-MLP value critic. All gradients are backpropagated by hand.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "atl/core.hpp"
#include "atl/mlp.hpp"
#include "atl/rng.hpp"

namespace atl::nn {

inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 2.0;
inline constexpr double kHalfLog2Pi = 0.91893853320467274178;

/// Flat ordering: mean-network parameters (see mlp.hpp), then log_std.
struct GaussianPolicy {
    MlpParams mean_net;
    Vector log_std;

    int state_dim() const { return mean_net.input_size(); }
    int action_dim() const { return mean_net.output_size(); }
    Eigen::Index parameter_count() const { return mean_net.parameter_count() + log_std.size(); }

    Vector mean(const EnvState& s) const { return mlp_forward(mean_net, s); }
    Vector stddev() const { return log_std.array().exp(); }

    Vector flat() const {
        Vector out(parameter_count());
        out << flatten(mean_net), log_std;
        return out;
    }

    /// log_std is clamped to [kLogStdMin, kLogStdMax] on assignment.
    void set_flat(const Vector& flat) {
        if (flat.size() != parameter_count()) throw std::invalid_argument("GaussianPolicy::set_flat: size mismatch");
        const auto n = mean_net.parameter_count();
        unflatten(mean_net, flat.head(n));
        log_std = flat.tail(log_std.size()).cwiseMax(kLogStdMin).cwiseMin(kLogStdMax);
    }
};

inline GaussianPolicy make_policy(int state_dim, int action_dim, Rng& rng, std::vector<int> hidden = {64, 64},
                                  double init_log_std = -0.5) {
    std::vector<int> sizes{state_dim};
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(action_dim);
    GaussianPolicy p;
    p.mean_net = init_mlp(sizes, rng, 0.01);
    p.log_std = Vector::Constant(action_dim, std::clamp(init_log_std, kLogStdMin, kLogStdMax));
    return p;
}

inline double gaussian_log_prob(const Vector& a, const Vector& mu, const Vector& log_std) {
    const Vector z = (a - mu).cwiseQuotient(log_std.array().exp().matrix());
    return -0.5 * z.squaredNorm() - log_std.sum() - kHalfLog2Pi * static_cast<double>(a.size());
}

inline double log_prob(const GaussianPolicy& policy, const EnvState& s, const EnvAction& a) {
    if (a.size() != policy.action_dim()) throw std::invalid_argument("log_prob: action dimension mismatch");
    return gaussian_log_prob(a, policy.mean(s), policy.log_std);
}

struct ActionSample {
    EnvAction action;  ///< clamped to bounds
    EnvAction raw;     ///< mu + sigma * eps
    double log_prob = 0.0;
};

/// a = mu(s) + sigma * eps, eps ~ N(0, I); log_prob is evaluated before clamping.
inline ActionSample sample(const GaussianPolicy& policy, const EnvState& s, Rng& rng, const EnvAction& low,
                           const EnvAction& high) {
    const Vector mu = policy.mean(s);
    const Vector sigma = policy.stddev();
    Vector eps(mu.size());
    for (Eigen::Index i = 0; i < eps.size(); ++i) eps[i] = standard_normal(rng);
    ActionSample out;
    out.raw = mu + sigma.cwiseProduct(eps);
    out.log_prob = -0.5 * eps.squaredNorm() - policy.log_std.sum() - kHalfLog2Pi * static_cast<double>(eps.size());
    out.action = out.raw.cwiseMax(low).cwiseMin(high);
    return out;
}

inline ActionSample sample(const GaussianPolicy& policy, const EnvState& s, Rng& rng) {
    const auto inf = std::numeric_limits<double>::infinity();
    return sample(policy, s, rng, Vector::Constant(policy.action_dim(), -inf),
                  Vector::Constant(policy.action_dim(), inf));
}

/// Log-probabilities of a batch (states and actions one per column).
inline Vector log_prob_batch(const GaussianPolicy& policy, const Matrix& states, const Matrix& actions) {
    const ForwardCache cache = forward_batch(policy.mean_net, states);
    const Vector inv_sigma = (-policy.log_std).array().exp();
    const Matrix z = (actions - cache.output()).array().colwise() * inv_sigma.array();
    const double constant = -policy.log_std.sum() - kHalfLog2Pi * static_cast<double>(policy.action_dim());
    return (-0.5 * z.colwise().squaredNorm().array() + constant).matrix().transpose();
}

/// sum_i weights[i] * grad log pi(actions_i | states_i) in GaussianPolicy::flat() ordering.
inline Vector grad_weighted_log_prob(const GaussianPolicy& policy, const Matrix& states, const Matrix& actions,
                                     const Vector& weights) {
    const ForwardCache cache = forward_batch(policy.mean_net, states);
    const Vector inv_var = (-2.0 * policy.log_std).array().exp();
    const Matrix residual = actions - cache.output();
    // d log pi / d mu = (a - mu) / sigma^2
    Matrix grad_mu = residual.array().colwise() * inv_var.array();
    grad_mu = grad_mu.array().rowwise() * weights.transpose().array();
    Vector grad(policy.parameter_count());
    grad.head(policy.mean_net.parameter_count()) = backward_batch(policy.mean_net, cache, grad_mu);
    // d log pi / d log sigma = (a - mu)^2 / sigma^2 - 1
    const Matrix dlogstd = (residual.array().square().colwise() * inv_var.array()) - 1.0;
    grad.tail(policy.log_std.size()) = dlogstd * weights;
    return grad;
}

inline Vector grad_log_prob(const GaussianPolicy& policy, const EnvState& s, const EnvAction& a) {
    return grad_weighted_log_prob(policy, s, a, Vector::Ones(1));
}

/// Mean over states of KL(old || new) for the Gaussian heads (closed form).
inline double mean_kl(const GaussianPolicy& old_policy, const GaussianPolicy& new_policy, const Matrix& states) {
    const Matrix mu_old = forward_batch(old_policy.mean_net, states).output();
    const Matrix mu_new = forward_batch(new_policy.mean_net, states).output();
    const Vector var_old = (2.0 * old_policy.log_std).array().exp();
    const Vector inv_var_new = (-2.0 * new_policy.log_std).array().exp();
    const double per_state_const =
        (new_policy.log_std - old_policy.log_std).sum() + 0.5 * var_old.dot(inv_var_new) - 0.5 * var_old.size();
    const Matrix diff2 = (mu_old - mu_new).array().square();
    const double quad = 0.5 * (diff2.transpose() * inv_var_new).sum();
    return per_state_const + quad / static_cast<double>(states.cols());
}

// ---------------------------------------------------------------------------
// Critic
// ---------------------------------------------------------------------------

struct Critic {
    MlpParams value_net;
    Adam optimizer;

    double value(const EnvState& s) const { return mlp_forward(value_net, s)[0]; }
    Vector values(const Matrix& states) const { return forward_batch(value_net, states).output().row(0).transpose(); }
};

inline Critic make_critic(int state_dim, Rng& rng, std::vector<int> hidden = {64, 64}) {
    std::vector<int> sizes{state_dim};
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(1);
    return Critic{init_mlp(sizes, rng, 1.0), Adam{}};
}

inline double critic_mse(const Critic& critic, const Matrix& states, const Vector& targets) {
    return (critic.values(states) - targets).squaredNorm() / static_cast<double>(targets.size());
}

/// Adam descent on the mean squared error. `order` (a permutation of sample
/// indices, may be empty for natural order) is split into minibatches of
/// `minibatch` samples (0 means full batch); repeated for `epochs` passes.
inline Critic critic_update(Critic critic, const Matrix& states, const Vector& targets, double lr, int epochs = 1,
                            int minibatch = 0, const std::vector<int>& order = {}) {
    if (states.cols() != targets.size()) throw std::invalid_argument("critic_update: length mismatch");
    const int n = static_cast<int>(targets.size());
    if (n == 0 || lr == 0.0 || epochs <= 0) return critic;
    std::vector<int> idx = order;
    if (idx.empty()) {
        idx.resize(n);
        for (int i = 0; i < n; ++i) idx[i] = i;
    }
    const int mb = minibatch <= 0 ? n : std::min(minibatch, n);
    for (int e = 0; e < epochs; ++e) {
        for (int start = 0; start < n; start += mb) {
            const int count = std::min(mb, n - start);
            Matrix xs(states.rows(), count);
            Vector ys(count);
            for (int j = 0; j < count; ++j) {
                xs.col(j) = states.col(idx[start + j]);
                ys[j] = targets[idx[start + j]];
            }
            const ForwardCache cache = forward_batch(critic.value_net, xs);
            const Matrix grad_out = (2.0 / count) * (cache.output().row(0) - ys.transpose());
            const Vector grad = backward_batch(critic.value_net, cache, grad_out);
            if (!grad.allFinite()) throw DivergenceError("critic_update: non-finite gradient");
            Vector flat = flatten(critic.value_net);
            flat -= critic.optimizer.step(grad, lr);
            unflatten(critic.value_net, flat);
        }
    }
    return critic;
}

// ---------------------------------------------------------------------------
// Snapshots
// ---------------------------------------------------------------------------

inline constexpr int kSnapshotVersion = 1;

/// Text snapshot:
///   atl-gaussian-policy <version>
///   sizes <input> <hidden...> <output>
///   params <count>
///   <one value per line, %.17g, in flat() ordering>
inline void save_policy(const GaussianPolicy& policy, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write policy snapshot '" + path + "'");
    out << "atl-gaussian-policy " << kSnapshotVersion << "\nsizes";
    for (int s : policy.mean_net.sizes()) out << ' ' << s;
    const Vector flat = policy.flat();
    out << "\nparams " << flat.size() << '\n';
    char buf[40];
    for (Eigen::Index i = 0; i < flat.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g\n", flat[i]);
        out << buf;
    }
    if (!out) throw std::runtime_error("failed writing policy snapshot '" + path + "'");
}

inline GaussianPolicy load_policy(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("missing policy snapshot '" + path + "'");
    std::string tag;
    int version = 0;
    in >> tag >> version;
    if (tag != "atl-gaussian-policy" || version != kSnapshotVersion)
        throw std::runtime_error("'" + path + "' is not a version-1 policy snapshot");
    std::string line;
    std::getline(in, line);
    std::getline(in, line);
    std::istringstream sizes_line(line);
    sizes_line >> tag;
    if (tag != "sizes") throw std::runtime_error("snapshot: expected 'sizes'");
    std::vector<int> sizes;
    for (int s; sizes_line >> s;) sizes.push_back(s);
    GaussianPolicy policy;
    policy.mean_net = make_mlp(sizes);
    policy.log_std = Vector::Zero(sizes.back());
    Eigen::Index count = 0;
    in >> tag >> count;
    if (tag != "params" || count != policy.parameter_count())
        throw std::runtime_error("snapshot: parameter count does not match layer sizes");
    Vector flat(count);
    for (Eigen::Index i = 0; i < count; ++i) {
        if (!(in >> flat[i])) throw std::runtime_error("snapshot: truncated parameter list");
    }
    policy.set_flat(flat);
    return policy;
}

}  // namespace atl::nn
