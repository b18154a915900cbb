#pragma once

// Classic-control environments with perturbable physical parameters.
//
// Both systems integrate with semi-implicit (symplectic) Euler, split into
// `substeps` sub-intervals of the control period dt. Dynamics are
// deterministic; the only stochasticity in a rollout comes from the policy
// and the initial-state draw.
//
// Gravity is signed (-9.81 points down) so that perturbations such as
// "gravity +52%" scale it the same way a physics engine configuration would.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "atl/core.hpp"
#include "atl/rng.hpp"

namespace atl::envs {

struct StepResult {
    EnvState state;
    double reward = 0.0;
    bool done = false;      ///< episode is over (failure or horizon)
    bool terminal = false;  ///< failure condition (no bootstrap past this step)
};

/// List of (parameter name, percent change) pairs.
using PerturbationSpec = std::vector<std::pair<std::string, double>>;

/// Parses "friction:+100,mass:+50" (also accepts '=' as separator and an optional '%').
inline PerturbationSpec parse_perturbation(const std::string& text) {
    PerturbationSpec spec;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item.erase(std::remove_if(item.begin(), item.end(), [](unsigned char c) { return std::isspace(c) || c == '%'; }),
                   item.end());
        if (item.empty()) continue;
        const auto sep = item.find_first_of(":=");
        if (sep == std::string::npos) throw std::invalid_argument("perturbation entry '" + item + "' lacks ':'");
        spec.emplace_back(item.substr(0, sep), std::stod(item.substr(sep + 1)));
    }
    return spec;
}

inline double wrap_angle(double theta) { return std::remainder(theta, 2.0 * std::numbers::pi); }

// ---------------------------------------------------------------------------
// Pendulum (theta measured from upright; theta = 0 is the unstable equilibrium)
// ---------------------------------------------------------------------------

struct PendulumParams {
    double mass = 1.0;          // kg
    double length = 1.0;        // m
    double gravity = -9.81;     // m/s^2, signed
    double friction = 0.1;      // N m s / rad
    double dt = 0.05;           // s
    double torque_limit = 10.0;  // N m
    double control_sign = 1.0;  // +1 or -1
    int substeps = 50;

    void validate() const {
        if (!(mass > 0.0)) throw std::invalid_argument("pendulum: mass must be > 0");
        if (!(length > 0.0)) throw std::invalid_argument("pendulum: length must be > 0");
        if (!(dt > 0.0)) throw std::invalid_argument("pendulum: dt must be > 0");
        if (!(torque_limit > 0.0)) throw std::invalid_argument("pendulum: torque_limit must be > 0");
        if (!(friction >= 0.0)) throw std::invalid_argument("pendulum: friction must be >= 0");
        if (control_sign != 1.0 && control_sign != -1.0)
            throw std::invalid_argument("pendulum: control_sign must be +1 or -1");
        if (substeps < 1) throw std::invalid_argument("pendulum: substeps must be >= 1");
        if (!std::isfinite(gravity)) throw std::invalid_argument("pendulum: gravity must be finite");
    }
};

inline double pendulum_acceleration(double theta, double omega, double torque, const PendulumParams& p) {
    const double inertia = p.mass * p.length * p.length;
    return -(p.gravity / p.length) * std::sin(theta) - (p.friction / inertia) * omega +
           p.control_sign * torque / inertia;
}

/// Total mechanical energy (kinetic + potential, zero potential at the pivot height).
inline double pendulum_energy(const EnvState& s, const PendulumParams& p) {
    const double inertia = p.mass * p.length * p.length;
    return 0.5 * inertia * s[1] * s[1] - p.mass * p.gravity * p.length * std::cos(s[0]);
}

inline double pendulum_reward(const EnvState& s, double torque) {
    return -(10.0 * s[0] * s[0] + 0.5 * s[1] * s[1] + 0.01 * torque * torque);
}

/// One control period. State is [theta, theta_dot]; action is [torque].
/// Reward is charged on the pre-step state and the applied torque.
inline StepResult pendulum_step(const EnvState& s, const EnvAction& a, const PendulumParams& p) {
    if (s.size() != 2 || a.size() != 1) throw std::invalid_argument("pendulum_step: bad dimensions");
    const double u = std::clamp(a[0], -p.torque_limit, p.torque_limit);
    double theta = s[0];
    double omega = s[1];
    const double h = p.dt / p.substeps;
    for (int k = 0; k < p.substeps; ++k) {
        omega += h * pendulum_acceleration(theta, omega, u, p);
        theta += h * omega;
    }
    StepResult out;
    out.state = EnvState(2);
    out.state << wrap_angle(theta), omega;
    if (!out.state.allFinite()) throw DivergenceError("pendulum_step: non-finite state");
    out.reward = pendulum_reward(s, u);
    return out;
}

// ---------------------------------------------------------------------------
// Cart-pole (Barto, Sutton & Anderson equations; pole angle from upright)
// ---------------------------------------------------------------------------

struct CartPoleParams {
    double cart_mass = 1.0;
    double pole_mass = 0.1;
    double pole_length = 0.5;  // half-length, m
    double gravity = -9.8;
    double track_friction = 0.0;  // Coulomb coefficient on the cart
    double force_limit = 10.0;
    double dt = 0.02;
    int substeps = 4;

    static constexpr double kThetaLimit = std::numbers::pi / 2.0;
    static constexpr double kTrackLimit = 2.4;

    void validate() const {
        if (!(cart_mass > 0.0)) throw std::invalid_argument("cartpole: cart_mass must be > 0");
        if (!(pole_mass > 0.0)) throw std::invalid_argument("cartpole: pole_mass must be > 0");
        if (!(pole_length > 0.0)) throw std::invalid_argument("cartpole: pole_length must be > 0");
        if (!(dt > 0.0)) throw std::invalid_argument("cartpole: dt must be > 0");
        if (!(force_limit > 0.0)) throw std::invalid_argument("cartpole: force_limit must be > 0");
        if (!(track_friction >= 0.0)) throw std::invalid_argument("cartpole: track_friction must be >= 0");
        if (substeps < 1) throw std::invalid_argument("cartpole: substeps must be >= 1");
        if (!std::isfinite(gravity)) throw std::invalid_argument("cartpole: gravity must be finite");
    }
};

/// Returns (x_ddot, theta_ddot) for state [x, x_dot, theta, theta_dot].
inline std::pair<double, double> cartpole_acceleration(const EnvState& s, double force, const CartPoleParams& p) {
    const double g = -p.gravity;
    const double total = p.cart_mass + p.pole_mass;
    const double sin_t = std::sin(s[2]);
    const double cos_t = std::cos(s[2]);
    const double sgn_v = (s[1] > 0.0) - (s[1] < 0.0);
    const double friction = p.track_friction * total * g * sgn_v;
    const double temp = (force + p.pole_mass * p.pole_length * s[3] * s[3] * sin_t - friction) / total;
    const double theta_acc =
        (g * sin_t - cos_t * temp) / (p.pole_length * (4.0 / 3.0 - p.pole_mass * cos_t * cos_t / total));
    const double x_acc = temp - p.pole_mass * p.pole_length * theta_acc * cos_t / total;
    return {x_acc, theta_acc};
}

inline bool cartpole_failed(const EnvState& s) {
    return std::abs(s[2]) >= CartPoleParams::kThetaLimit || std::abs(s[0]) >= CartPoleParams::kTrackLimit;
}

/// Reward 1 - 5 theta^2 per surviving step (charged on the pre-step state);
/// a step that violates the angle or track limit ends the episode.
inline StepResult cartpole_step(const EnvState& s, const EnvAction& a, const CartPoleParams& p) {
    if (s.size() != 4 || a.size() != 1) throw std::invalid_argument("cartpole_step: bad dimensions");
    const double force = std::clamp(a[0], -p.force_limit, p.force_limit);
    EnvState x = s;
    const double h = p.dt / p.substeps;
    for (int k = 0; k < p.substeps; ++k) {
        const auto [x_acc, theta_acc] = cartpole_acceleration(x, force, p);
        x[1] += h * x_acc;
        x[0] += h * x[1];
        x[3] += h * theta_acc;
        x[2] += h * x[3];
    }
    if (!x.allFinite()) throw DivergenceError("cartpole_step: non-finite state");
    StepResult out;
    out.state = x;
    out.reward = 1.0 - 5.0 * s[2] * s[2];
    out.terminal = cartpole_failed(x);
    out.done = out.terminal;
    return out;
}

// ---------------------------------------------------------------------------
// Perturbations
// ---------------------------------------------------------------------------

namespace detail {

template <typename Params>
using FieldTable = std::map<std::string, double Params::*>;

inline const FieldTable<PendulumParams>& pendulum_fields() {
    static const FieldTable<PendulumParams> table{
        {"mass", &PendulumParams::mass},         {"length", &PendulumParams::length},
        {"gravity", &PendulumParams::gravity},   {"friction", &PendulumParams::friction},
        {"dt", &PendulumParams::dt},             {"torque_limit", &PendulumParams::torque_limit},
        {"control_sign", &PendulumParams::control_sign},
    };
    return table;
}

inline const FieldTable<CartPoleParams>& cartpole_fields() {
    static const FieldTable<CartPoleParams> table{
        {"cart_mass", &CartPoleParams::cart_mass},     {"pole_mass", &CartPoleParams::pole_mass},
        {"pole_length", &CartPoleParams::pole_length}, {"gravity", &CartPoleParams::gravity},
        {"track_friction", &CartPoleParams::track_friction}, {"force_limit", &CartPoleParams::force_limit},
        {"dt", &CartPoleParams::dt},
    };
    return table;
}

template <typename Params>
Params apply(Params p, const PerturbationSpec& spec, const FieldTable<Params>& fields) {
    for (const auto& [name, percent] : spec) {
        auto it = fields.find(name);
        if (it == fields.end()) throw std::invalid_argument("unknown parameter '" + name + "'");
        p.*(it->second) *= 1.0 + percent / 100.0;
    }
    p.validate();
    return p;
}

}  // namespace detail

/// Scales each named parameter by (1 + percent/100). A control-sign flip is -200%.
inline PendulumParams apply_perturbation(const PendulumParams& p, const PerturbationSpec& spec) {
    return detail::apply(p, spec, detail::pendulum_fields());
}

inline CartPoleParams apply_perturbation(const CartPoleParams& p, const PerturbationSpec& spec) {
    return detail::apply(p, spec, detail::cartpole_fields());
}

// ---------------------------------------------------------------------------
// Stateful environments (restartable-simulator contract)
// ---------------------------------------------------------------------------

class Environment {
public:
    virtual ~Environment() = default;

    virtual std::string name() const = 0;
    virtual int state_dim() const = 0;
    virtual int action_dim() const = 0;
    virtual EnvAction action_low() const = 0;
    virtual EnvAction action_high() const = 0;

    /// Draws an initial state and resets the step counter.
    virtual EnvState reset(Rng& rng) = 0;
    /// Places the simulator in exactly `s`; the next step transitions from `s`.
    virtual void set_state(const EnvState& s) = 0;
    virtual const EnvState& state() const = 0;
    virtual StepResult step(const EnvAction& a) = 0;
    virtual std::unique_ptr<Environment> clone() const = 0;
    /// a - b, with angular coordinates wrapped to [-pi, pi].
    virtual Vector state_difference(const EnvState& a, const EnvState& b) const { return a - b; }

    int horizon() const { return horizon_; }
    int steps_taken() const { return t_; }

    EnvAction clamp_action(const EnvAction& a) const {
        return a.cwiseMax(action_low()).cwiseMin(action_high());
    }

protected:
    explicit Environment(int horizon) : horizon_(horizon) {
        if (horizon < 1) throw std::invalid_argument("environment horizon must be >= 1");
    }
    int horizon_;
    int t_ = 0;
};

template <typename Params, StepResult (*StepFn)(const EnvState&, const EnvAction&, const Params&)>
class ClassicControl : public Environment {
public:
    ClassicControl(Params params, int horizon, double init_range, int state_dim, double action_limit, std::string name,
                   std::vector<int> angular_dims = {})
        : Environment(horizon),
          params_(params),
          init_range_(init_range),
          state_(EnvState::Zero(state_dim)),
          action_limit_(action_limit),
          name_(std::move(name)),
          angular_dims_(std::move(angular_dims)) {
        params_.validate();
    }

    std::string name() const override { return name_; }
    int state_dim() const override { return static_cast<int>(state_.size()); }
    int action_dim() const override { return 1; }
    EnvAction action_low() const override { return EnvAction::Constant(1, -action_limit_); }
    EnvAction action_high() const override { return EnvAction::Constant(1, action_limit_); }
    const Params& params() const { return params_; }

    EnvState reset(Rng& rng) override {
        for (int i = 0; i < state_.size(); ++i) state_[i] = uniform(rng, -init_range_, init_range_);
        t_ = 0;
        return state_;
    }

    void set_state(const EnvState& s) override {
        if (s.size() != state_.size()) throw std::invalid_argument(name_ + ": set_state dimension mismatch");
        state_ = s;
    }

    const EnvState& state() const override { return state_; }

    StepResult step(const EnvAction& a) override {
        StepResult out = StepFn(state_, a, params_);
        state_ = out.state;
        ++t_;
        if (t_ >= horizon_) out.done = true;
        return out;
    }

    std::unique_ptr<Environment> clone() const override { return std::make_unique<ClassicControl>(*this); }

    Vector state_difference(const EnvState& a, const EnvState& b) const override {
        Vector d = a - b;
        for (int i : angular_dims_) d[i] = wrap_angle(d[i]);
        return d;
    }

private:
    Params params_;
    double init_range_;
    EnvState state_;
    double action_limit_;
    std::string name_;
    std::vector<int> angular_dims_;
};

using Pendulum = ClassicControl<PendulumParams, &pendulum_step>;
using CartPole = ClassicControl<CartPoleParams, &cartpole_step>;

/// Initial states: each coordinate uniform in [-range, range].
inline constexpr double kPendulumInitRange = 0.4;
inline constexpr double kCartPoleInitRange = 0.05;
inline constexpr int kDefaultHorizon = 200;

inline std::unique_ptr<Environment> make_pendulum(const PendulumParams& p, int horizon = kDefaultHorizon) {
    return std::make_unique<Pendulum>(p, horizon, kPendulumInitRange, 2, p.torque_limit, "pendulum", std::vector<int>{0});
}

inline std::unique_ptr<Environment> make_cartpole(const CartPoleParams& p, int horizon = kDefaultHorizon) {
    return std::make_unique<CartPole>(p, horizon, kCartPoleInitRange, 4, p.force_limit, "cartpole");
}

/// Builds "pendulum", "cartpole" or their "crippled-" variants with a perturbation applied.
/// crippled-pendulum flips the control sign; crippled-cartpole keeps 30% of the force limit.
inline std::unique_ptr<Environment> make_environment(const std::string& name, const PerturbationSpec& spec = {},
                                                     int horizon = kDefaultHorizon) {
    if (name == "pendulum") return make_pendulum(apply_perturbation(PendulumParams{}, spec), horizon);
    if (name == "crippled-pendulum") {
        PerturbationSpec full{{"control_sign", -200.0}};
        full.insert(full.end(), spec.begin(), spec.end());
        return make_pendulum(apply_perturbation(PendulumParams{}, full), horizon);
    }
    if (name == "cartpole") return make_cartpole(apply_perturbation(CartPoleParams{}, spec), horizon);
    if (name == "crippled-cartpole") {
        PerturbationSpec full{{"force_limit", -70.0}};
        full.insert(full.end(), spec.begin(), spec.end());
        return make_cartpole(apply_perturbation(CartPoleParams{}, full), horizon);
    }
    throw std::invalid_argument("unknown environment '" + name + "'");
}

}  // namespace atl::envs
