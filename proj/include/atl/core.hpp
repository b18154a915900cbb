#pragma once

// Core MDP value types shared by every other module: states, actions,
// transitions, trajectories, returns and running reward statistics.

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace atl {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Environment state; dimension is fixed per environment.
using EnvState = Eigen::VectorXd;
/// Environment action; clamped to the environment's bounds before stepping.
using EnvAction = Eigen::VectorXd;

/// Raised when a numerical integration or an update produces non-finite values.
class DivergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline bool all_finite(const Vector& v) { return v.allFinite(); }

struct Transition {
    EnvState s;
    EnvAction a;      ///< action applied to the environment (clamped)
    EnvAction a_raw;  ///< policy sample before clamping; log_prob refers to this
    double r = 0.0;
    EnvState s_next;
    double log_prob = 0.0;
    bool done = false;      ///< episode ended after this step (terminal or horizon)
    bool terminal = false;  ///< ended by a failure condition; no value bootstrap
};

struct Trajectory {
    std::vector<Transition> transitions;
    std::uint64_t seed = 0;
    int horizon = 0;
    bool diverged = false;

    std::size_t size() const { return transitions.size(); }

    /// Consecutive transitions chain: transitions[i].s_next == transitions[i+1].s.
    bool chained() const {
        for (std::size_t i = 1; i < transitions.size(); ++i) {
            if (transitions[i - 1].s_next != transitions[i].s) return false;
        }
        return true;
    }

    double undiscounted_return() const {
        double sum = 0.0;
        for (const auto& t : transitions) sum += t.r;
        return sum;
    }
};

/// Sum of gamma^t * r_t. An empty list is a valid trivial trajectory with return 0.
inline double discounted_return(std::span<const double> rewards, double gamma) {
    if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("discounted_return: gamma must be in (0, 1]");
    double total = 0.0;
    double discount = 1.0;
    for (double r : rewards) {
        total += discount * r;
        discount *= gamma;
    }
    return total;
}

/// Welford accumulator. variance() is the population variance m2 / count.
struct RunningMoments {
    std::int64_t count = 0;
    double mean = 0.0;
    double m2 = 0.0;

    double variance() const { return count >= 2 ? m2 / static_cast<double>(count) : 0.0; }
    double stddev() const { return std::sqrt(variance()); }

    /// Chan et al. pairwise combination; used to merge worker-local moments.
    RunningMoments merged(const RunningMoments& other) const {
        if (other.count == 0) return *this;
        if (count == 0) return other;
        RunningMoments out;
        out.count = count + other.count;
        const double delta = other.mean - mean;
        const double n = static_cast<double>(out.count);
        out.mean = mean + delta * static_cast<double>(other.count) / n;
        out.m2 = m2 + other.m2 + delta * delta * static_cast<double>(count) * static_cast<double>(other.count) / n;
        return out;
    }
};

inline RunningMoments update_moments(RunningMoments m, double x) {
    if (!std::isfinite(x)) throw std::invalid_argument("update_moments: non-finite sample");
    ++m.count;
    const double delta = x - m.mean;
    m.mean += delta / static_cast<double>(m.count);
    m.m2 += delta * (x - m.mean);
    return m;
}

/// (x - mean) / (std + eps); std is 0 while fewer than two samples have been seen.
inline double normalize(double x, const RunningMoments& m, double eps = 1e-8) {
    if (m.count < 1) throw std::invalid_argument("normalize: moments are empty");
    const double denom = m.stddev() + eps;
    if (denom == 0.0) return x - m.mean;
    return (x - m.mean) / denom;
}

}  // namespace atl
