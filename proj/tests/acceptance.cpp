// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance --out DIR [--only 1,2,7] [--source FILE]
//
// --source reuses an existing source-policy snapshot instead of training one
// (handy while iterating on a single criterion; the full run trains its own).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <limits>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "atl/harness/experiment.hpp"

using namespace atl;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances and sizes.
constexpr int kLemmaInstances = 1000;
constexpr double kLemmaSeconds = 60.0;
constexpr double kPacEps = 0.2;
constexpr double kPacDelta = 0.1;
constexpr double kPacGamma = 0.8;
constexpr int kPacTrials = 500;
constexpr double kPacSeconds = 600.0;
constexpr int kGradInstances = 100;
constexpr double kGradRtol = 1e-4;
constexpr double kGradAtol = 1e-6;
constexpr double kFdStep = 1e-5;
constexpr int kZetaInstances = 1000;
constexpr double kZetaTol = 1e-12;
constexpr int kDegeneracyIterations = 10;
constexpr int kSelfIterations = 20;
constexpr double kSelfBand = 0.10;
constexpr int kTransferIterations = 150;
constexpr int kFinalWindow = 5;
constexpr double kTransferSeconds = 1800.0;
constexpr int kCrippledIterations = 200;
constexpr double kRk4Tol = 1e-3;
constexpr double kEnergyBand = 0.01;

constexpr int kSourceIterations = 200;
constexpr double kSourceLr = 3e-4;
constexpr int kSourceEvalEpisodes = 200;
constexpr std::uint64_t kSourceSeed = 1;
const std::vector<std::uint64_t> kFiveSeeds{1, 2, 3, 4, 5};
const std::vector<std::uint64_t> kThreeSeeds{1, 2, 3};

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double x, int prec = 4) {
    std::ostringstream os;
    os << std::setprecision(prec) << x;
    return os.str();
}

bool close(double a, double b) { return std::abs(a - b) <= kGradAtol + kGradRtol * std::abs(b); }

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const auto n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

nn::GaussianPolicy random_policy(Rng& rng, int sdim, int adim) {
    nn::GaussianPolicy p = nn::make_policy(sdim, adim, rng, {8, 8}, 0.0);
    Vector flat = p.flat();
    for (auto& x : flat) x = uniform(rng, -0.8, 0.8);
    p.set_flat(flat);
    return p;
}

Vector random_vec(Rng& rng, int n) {
    Vector v(n);
    for (auto& x : v) x = standard_normal(rng);
    return v;
}

// Central differences of f around policy p, compared coordinate-wise with g.
bool matches_fd(const nn::GaussianPolicy& p, const Vector& g, const std::function<double(const nn::GaussianPolicy&)>& f) {
    const Vector flat = p.flat();
    for (Eigen::Index i = 0; i < flat.size(); ++i) {
        nn::GaussianPolicy q = p;
        Vector x = flat;
        x[i] += kFdStep;
        q.set_flat(x);
        const double up = f(q);
        x[i] -= 2 * kFdStep;
        q.set_flat(x);
        const double down = f(q);
        if (!close(g[i], (up - down) / (2 * kFdStep))) return false;
    }
    return true;
}

// ---------------------------------------------------------------------------

struct Context {
    fs::path out;
    nn::GaussianPolicy source;
    double source_return = 0.0;  ///< source policy on the unperturbed source task
    bool have_source = false;
    std::string source_override;
};

void ensure_source(Context& ctx) {
    if (ctx.have_source) return;
    const auto env = envs::make_environment("pendulum");
    if (!ctx.source_override.empty()) {
        ctx.source = nn::load_policy(ctx.source_override);
    } else {
        TrainConfig tc;
        tc.clip.lr = kSourceLr;
        const auto t0 = std::chrono::steady_clock::now();
        ctx.source = ppo_train(tc, *env, kSourceSeed, kSourceIterations).policy;
        nn::save_policy(ctx.source, (ctx.out / "source.policy").string());
        std::cout << "  source policy: " << kSourceIterations << " PPO iterations in " << fmt(seconds_since(t0), 3)
                  << " s\n";
    }
    auto e = env->clone();
    ctx.source_return = evaluate_policy(*e, ctx.source, kSourceEvalEpisodes, kSourceSeed);
    std::cout << "  source return on source task: " << fmt(ctx.source_return) << " (" << kSourceEvalEpisodes
              << " episodes)\n";
    ctx.have_source = true;
}

Outcome criterion1(Context&) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto sum = theory::random_lemma_verification(kLemmaInstances, 10, 4, {0.8, 0.9, 0.95}, 20240601);
    const double secs = seconds_since(t0);
    return {sum.instances == kLemmaInstances && sum.violations == 0 && secs < kLemmaSeconds,
            std::to_string(sum.instances) + " instances, " + std::to_string(sum.violations) +
                " violations, max lhs/rhs " + fmt(sum.max_tightness) + ", " + fmt(secs, 3) + " s"};
}

Outcome criterion2(Context&) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::uint64_t n = theory::pac_sample_bound(0.1, 0.05, 0.9, 16);
    const auto expected = static_cast<std::uint64_t>(std::ceil(20000.0 * std::log(640.0)));
    Rng rng(derive_seed(20240602, {1}));
    const auto m = theory::random_mdp(3, 2, kPacGamma, rng);
    const auto policies = theory::all_deterministic_policies(3, 2);
    const auto rep = theory::empirical_pac_experiment(m, {1.0 / 3, 1.0 / 3, 1.0 / 3}, policies, kPacEps, kPacDelta,
                                                      kPacTrials, derive_seed(20240602, {2}));
    const double secs = seconds_since(t0);
    return {n == expected && rep.pass && policies.size() == 8 && secs < kPacSeconds,
            "n(0.1,0.05,0.9,16)=" + std::to_string(n) + " (expected " + std::to_string(expected) +
                "); concentration n=" + std::to_string(rep.n) + " H=" + std::to_string(rep.horizon) + " gamma=" +
                fmt(kPacGamma) + ": " + std::to_string(rep.failures) + "/" + std::to_string(rep.trials) +
                " failures, frequency " + fmt(rep.failure_frequency) + " <= " + fmt(kPacDelta) + ", " +
                fmt(secs, 3) + " s"};
}

Outcome criterion3(Context&) {
    Rng rng(20240603);
    int ok_logp = 0, ok_surr = 0, ok_beta = 0;
    for (int i = 0; i < kGradInstances; ++i) {
        const auto p = random_policy(rng, 3, 2);
        const Vector s = random_vec(rng, 3);
        const Vector a = p.mean(s) + random_vec(rng, 2);
        if (matches_fd(p, nn::grad_log_prob(p, s, a), [&](const nn::GaussianPolicy& q) { return nn::log_prob(q, s, a); }))
            ++ok_logp;
    }
    for (int i = 0; i < kGradInstances; ++i) {
        const auto p = random_policy(rng, 3, 1);
        const int n = 16;
        ppo::PpoBatch b{Matrix(3, n), Matrix(1, n), Vector(n), Vector(n)};
        for (int j = 0; j < n; ++j) {
            b.states.col(j) = random_vec(rng, 3);
            const auto smp = nn::sample(p, b.states.col(j), rng);
            b.actions.col(j) = smp.raw;
            b.logp_old[j] = smp.log_prob + uniform(rng, -0.05, 0.05);
            b.advantages[j] = standard_normal(rng);
        }
        if (matches_fd(p, ppo::surrogate_gradient(p, b, 0.2),
                       [&](const nn::GaussianPolicy& q) { return ppo::clipped_surrogate(q, b, 0.2); }))
            ++ok_surr;
    }
    for (int i = 0; i < kGradInstances; ++i) {
        std::vector<std::vector<adapt::RewardPair>> pairs(1 + rng() % 5);
        for (auto& t : pairs) {
            t.resize(1 + rng() % 30);
            for (auto& x : t) x = {standard_normal(rng), standard_normal(rng)};
        }
        const double gamma = uniform(rng, 0.8, 1.0);
        const double beta = uniform(rng, 0.05, 0.95);
        const double fd = (adapt::mixed_return(pairs, gamma, beta + kFdStep) -
                           adapt::mixed_return(pairs, gamma, beta - kFdStep)) /
                          (2 * kFdStep);
        if (close(adapt::beta_gradient(pairs, gamma, adapt::BetaGradientMode::analytic), fd)) ++ok_beta;
    }
    const int n = kGradInstances;
    return {ok_logp == n && ok_surr == n && ok_beta == n,
            "log-prob " + std::to_string(ok_logp) + "/" + std::to_string(n) + ", surrogate " + std::to_string(ok_surr) +
                "/" + std::to_string(n) + ", beta (analytic) " + std::to_string(ok_beta) + "/" + std::to_string(n) +
                " within rtol " + fmt(kGradRtol) + " / atol " + fmt(kGradAtol)};
}

Outcome criterion4(Context&) {
    Rng rng(20240604);
    bool exact = true;
    double worst = 0.0;
    for (int i = 0; i < kZetaInstances; ++i) {
        const double lp = uniform(rng, -8.0, 2.0);
        // Kept where exp() of the penalty stays a normal double.
        const double sigma = uniform(rng, 0.1, 2.0);
        EnvState a(3), b(3);
        for (int d = 0; d < 3; ++d) a[d] = uniform(rng, -1, 1), b[d] = uniform(rng, -1, 1);
        exact = exact && adapt::intrinsic_reward(lp, a, a, sigma) == lp;
        worst = std::max(worst, std::abs(adapt::intrinsic_reward(lp, a, b, sigma) -
                                         adapt::intrinsic_reward_likelihood_form(lp, a, b, sigma)));
    }
    return {exact && worst <= kZetaTol, std::string("zero deviation exact: ") + (exact ? "yes" : "no") +
                                            "; max |direct - likelihood form| = " + fmt(worst, 3) + " over " +
                                            std::to_string(kZetaInstances) + " inputs"};
}

Outcome criterion5(Context& ctx) {
    ensure_source(ctx);
    adapt::AtlConfig cfg;
    cfg.beta_fixed = 0.0;
    cfg.init_from_source = false;
    const auto target = envs::make_environment("pendulum", {{"friction", 100.0}, {"mass", 50.0}});
    const auto source = envs::make_environment("pendulum");
    bool same = true;
    for (std::uint64_t seed : kThreeSeeds) {
        const auto a = adapt::atl_train(cfg, *target, *source, ctx.source, seed, kDegeneracyIterations);
        const auto b = ppo_train(cfg.train, *target, seed, kDegeneracyIterations);
        same = same && a.records.size() == b.records.size() && a.policy.flat() == b.policy.flat();
        for (std::size_t i = 0; same && i < a.records.size(); ++i) {
            same = a.records[i].mean_env_return == b.records[i].mean_env_return &&
                   a.records[i].episodes_so_far == b.records[i].episodes_so_far &&
                   a.records[i].env_steps_so_far == b.records[i].env_steps_so_far;
        }
    }
    return {same, std::to_string(kDegeneracyIterations) + " iterations x " + std::to_string(kThreeSeeds.size()) +
                      " seeds: learning curves and final parameters " + (same ? "bit-identical" : "differ")};
}

struct SelfTransfer {
    double worst = 0.0;       ///< vs the frozen source on the same episodes
    double worst_long = 0.0;  ///< vs the long source evaluation
    double first = 0.0, last = 0.0;
};

SelfTransfer self_transfer(Context& ctx, adapt::IntrinsicSign sign) {
    adapt::AtlConfig cfg;
    cfg.intrinsic_sign = sign;
    const auto env = envs::make_environment("pendulum");
    std::vector<double> atl_curve(kSelfIterations, 0.0), frozen_curve(kSelfIterations, 0.0);
    for (std::uint64_t seed : kThreeSeeds) {
        const auto res = adapt::atl_train(cfg, *env, *env, ctx.source, seed, kSelfIterations);
        // The frozen source on exactly the same episode seeds (initial states and action noise).
        const auto frozen = harness::evaluate_frozen(cfg.train, *env, ctx.source, seed, kSelfIterations, {});
        for (int i = 0; i < kSelfIterations; ++i) {
            atl_curve[i] += res.records[i].mean_env_return / kThreeSeeds.size();
            frozen_curve[i] += frozen[i].mean_env_return / kThreeSeeds.size();
        }
    }
    SelfTransfer out{0.0, 0.0, atl_curve.front(), atl_curve.back()};
    for (int i = 0; i < kSelfIterations; ++i) {
        out.worst = std::max(out.worst, std::abs(atl_curve[i] - frozen_curve[i]) / std::abs(frozen_curve[i]));
        out.worst_long =
            std::max(out.worst_long, std::abs(atl_curve[i] - ctx.source_return) / std::abs(ctx.source_return));
    }
    return out;
}

Outcome criterion6(Context& ctx) {
    ensure_source(ctx);
    const auto r = self_transfer(ctx, adapt::IntrinsicSign::subtract);
    std::string detail = "max relative gap to the source return on the same episodes " + fmt(r.worst, 3) + " (band " +
                         fmt(kSelfBand) + "); vs the " + std::to_string(kSourceEvalEpisodes) +
                         "-episode source return " + fmt(r.worst_long, 3) + "; ATL curve from " + fmt(r.first) +
                         " to " + fmt(r.last);
    const bool pass = r.worst <= kSelfBand;
    if (!pass) {
        const auto alt = self_transfer(ctx, adapt::IntrinsicSign::add);
        detail += "; added-zeta ablation gap " + fmt(alt.worst, 3) + ", curve " + fmt(alt.first) + " to " +
                  fmt(alt.last);
    }
    return {pass, detail};
}

struct TransferBaselines {
    std::vector<double> ppo_eps;
    std::vector<double> frozen_final;  ///< per seed, mean of the last kFinalWindow iterations
    std::vector<std::vector<ExperimentRecord>> ppo, frozen;
};

struct TransferOutcome {
    double atl_median = 0.0, ppo_median = 0.0, atl_final = 0.0, frozen_final = 0.0;
    bool pass = false;
};

TransferOutcome transfer(Context& ctx, adapt::IntrinsicSign sign, TransferBaselines& base, std::ostream* curves) {
    adapt::AtlConfig cfg;
    cfg.intrinsic_sign = sign;
    const auto target = envs::make_environment("pendulum", {{"friction", 100.0}, {"mass", 50.0}});
    const auto source = envs::make_environment("pendulum");
    const double threshold = harness::success_threshold(ctx.source_return);
    const double inf = std::numeric_limits<double>::infinity();
    const bool need_baselines = base.ppo.empty();
    std::vector<double> atl_eps;
    TransferOutcome out;
    for (std::size_t k = 0; k < kFiveSeeds.size(); ++k) {
        const std::uint64_t seed = kFiveSeeds[k];
        if (need_baselines) {
            base.ppo.push_back(ppo_train(cfg.train, *target, seed, kTransferIterations).records);
            base.frozen.push_back(harness::evaluate_frozen(cfg.train, *target, ctx.source, seed, kTransferIterations, {}));
            const auto p = harness::episodes_to_threshold(base.ppo.back(), threshold);
            base.ppo_eps.push_back(p ? static_cast<double>(*p) : inf);
            double f = 0.0;
            for (int i = kTransferIterations - kFinalWindow; i < kTransferIterations; ++i)
                f += base.frozen.back()[i].mean_env_return / kFinalWindow;
            base.frozen_final.push_back(f);
        }
        const auto atl = adapt::atl_train(cfg, *target, *source, ctx.source, seed, kTransferIterations).records;
        const auto a = harness::episodes_to_threshold(atl, threshold);
        atl_eps.push_back(a ? static_cast<double>(*a) : inf);
        for (int i = kTransferIterations - kFinalWindow; i < kTransferIterations; ++i)
            out.atl_final += atl[i].mean_env_return / (kFinalWindow * kFiveSeeds.size());
        out.frozen_final += base.frozen_final[k] / kFiveSeeds.size();
        if (curves)
            for (int i = 0; i < kTransferIterations; ++i)
                *curves << seed << ',' << i << ',' << atl[i].episodes_so_far << ','
                        << harness::format_double(atl[i].mean_env_return) << ',' << atl[i].beta << ','
                        << base.ppo[k][i].episodes_so_far << ','
                        << harness::format_double(base.ppo[k][i].mean_env_return) << ','
                        << harness::format_double(base.frozen[k][i].mean_env_return) << '\n';
    }
    out.atl_median = median(atl_eps);
    out.ppo_median = median(base.ppo_eps);
    out.pass = std::isfinite(out.atl_median) && out.atl_median <= out.ppo_median && out.atl_final >= out.frozen_final;
    return out;
}

Outcome criterion7(Context& ctx) {
    ensure_source(ctx);
    const auto t0 = std::chrono::steady_clock::now();
    TransferBaselines base;
    std::ofstream curves(ctx.out / "criterion7_curves.csv");
    curves << "seed,iteration,atl_episodes,atl_return,atl_beta,ppo_episodes,ppo_return,frozen_return\n";
    const auto r = transfer(ctx, adapt::IntrinsicSign::subtract, base, &curves);
    const double secs = seconds_since(t0);
    std::string detail = "threshold " + fmt(harness::success_threshold(ctx.source_return)) +
                         "; median episodes-to-threshold ATL " + fmt(r.atl_median, 6) + " vs scratch PPO " +
                         fmt(r.ppo_median, 6) + "; final return ATL " + fmt(r.atl_final) + " vs frozen source " +
                         fmt(r.frozen_final) + "; " + fmt(secs, 4) + " s";
    const bool pass = r.pass && secs < kTransferSeconds;
    if (!r.pass) {
        const auto alt = transfer(ctx, adapt::IntrinsicSign::add, base, nullptr);
        detail += "; added-zeta ablation: median " + fmt(alt.atl_median, 6) + ", final " + fmt(alt.atl_final);
    }
    return {pass, detail};
}

double crippled_median_beta(Context& ctx, adapt::BetaGradientMode mode, std::vector<double>& betas) {
    adapt::AtlConfig cfg;
    cfg.beta_mode = mode;
    const auto target = envs::make_environment("crippled-pendulum");
    const auto source = envs::make_environment("pendulum");
    betas.clear();
    for (std::uint64_t seed : kFiveSeeds)
        betas.push_back(adapt::atl_train(cfg, *target, *source, ctx.source, seed, kCrippledIterations)
                            .records.back()
                            .beta);
    return median(betas);
}

std::string join(const std::vector<double>& v) {
    std::string s;
    for (double x : v) s += (s.empty() ? "" : " ") + fmt(x, 3);
    return s;
}

Outcome criterion8(Context& ctx) {
    ensure_source(ctx);
    std::vector<double> betas;
    const double med = crippled_median_beta(ctx, adapt::BetaGradientMode::difference, betas);
    std::string detail = "difference mode median beta at iteration " + std::to_string(kCrippledIterations) + " = " +
                         fmt(med) + " [" + join(betas) + "] vs initial 0.5";
    if (med < 0.5) return {true, detail};
    const double med_a = crippled_median_beta(ctx, adapt::BetaGradientMode::analytic, betas);
    detail += "; analytic ablation median beta = " + fmt(med_a) + " [" + join(betas) + "]";
    return {false, detail};
}

Vector rk4(const std::function<Vector(const Vector&)>& f, Vector y, double T, int n) {
    const double h = T / n;
    for (int i = 0; i < n; ++i) {
        const Vector k1 = f(y), k2 = f(y + 0.5 * h * k1), k3 = f(y + 0.5 * h * k2), k4 = f(y + h * k3);
        y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return y;
}

Outcome criterion9(Context&) {
    Rng rng(20240609);
    const envs::PendulumParams pp;
    const envs::CartPoleParams cp;
    double worst_p = 0.0, worst_c = 0.0;
    for (int i = 0; i < 200; ++i) {
        EnvState s(2);
        s << uniform(rng, -3.0, 3.0), uniform(rng, -4.0, 4.0);
        const double u = uniform(rng, -pp.torque_limit, pp.torque_limit);
        const auto out = envs::pendulum_step(s, EnvAction::Constant(1, u), pp);
        const double g = -pp.gravity, ml2 = pp.mass * pp.length * pp.length;
        const Vector ref = rk4(
            [&](const Vector& y) {
                Vector d(2);
                d << y[1], g / pp.length * std::sin(y[0]) - pp.friction / ml2 * y[1] + u / ml2;
                return d;
            },
            s, pp.dt, 100);
        worst_p = std::max({worst_p, std::abs(envs::wrap_angle(out.state[0] - ref[0])), std::abs(out.state[1] - ref[1])});
    }
    envs::CartPoleParams frictionless = cp;
    frictionless.track_friction = 0.0;
    for (int i = 0; i < 200; ++i) {
        EnvState s(4);
        s << uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -0.2, 0.2), uniform(rng, -1, 1);
        const double F = uniform(rng, -cp.force_limit, cp.force_limit);
        const auto out = envs::cartpole_step(s, EnvAction::Constant(1, F), frictionless);
        const double mc = cp.cart_mass, mp = cp.pole_mass, l = cp.pole_length, g = -cp.gravity;
        const Vector ref = rk4(
            [&](const Vector& y) {
                const double sn = std::sin(y[2]), c = std::cos(y[2]), M = mc + mp;
                const double tmp = (F + mp * l * y[3] * y[3] * sn) / M;
                const double th = (g * sn - c * tmp) / (l * (4.0 / 3.0 - mp * c * c / M));
                Vector d(4);
                d << y[1], tmp - mp * l * th * c / M, y[3], th;
                return d;
            },
            s, cp.dt, 100);
        worst_c = std::max(worst_c, (out.state - ref).cwiseAbs().maxCoeff());
    }
    envs::PendulumParams nf = pp;
    nf.friction = 0.0;
    double worst_e = 0.0;
    for (double theta0 : {0.3, 1.0, 2.0, 2.8}) {
        EnvState s(2);
        s << theta0, 0.0;
        const double e0 = envs::pendulum_energy(s, nf);
        for (int t = 0; t < 200; ++t) {
            s = envs::pendulum_step(s, EnvAction::Zero(1), nf).state;
            worst_e = std::max(worst_e, std::abs(envs::pendulum_energy(s, nf) - e0) / std::abs(e0));
        }
    }
    return {worst_p <= kRk4Tol && worst_c <= kRk4Tol && worst_e <= kEnergyBand,
            "one-step max error vs RK4(dt/100): pendulum " + fmt(worst_p, 3) + ", cart-pole " + fmt(worst_c, 3) +
                "; energy drift " + fmt(100 * worst_e, 3) + "% over 200 steps"};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Outcome criterion10(Context& ctx) {
    // Every experiment kind, run twice (the second time with two workers).
    std::vector<std::string> diffs;
    int compared = 0;
    auto run_all = [&](const fs::path& dir, int workers) {
        std::ostringstream log;
        harness::ExperimentConfig base;
        base.out_dir = dir.string();
        base.seeds = {1, 2, 3};
        base.iterations = 4;
        base.perturbation = {{"friction", 100.0}, {"mass", 50.0}};
        base.atl.train.horizon = 100;
        base.atl.train.batch_episodes = 4;
        base.source_snapshot = (dir / "src_{seed}.policy").string();
        base.theory.lemma_instances = 100;
        base.theory.pac_trials = 20;
        for (auto kind : {harness::ExperimentKind::train_source, harness::ExperimentKind::transfer_atl,
                          harness::ExperimentKind::baseline_warmstart, harness::ExperimentKind::baseline_scratch,
                          harness::ExperimentKind::eval_source, harness::ExperimentKind::verify_theory}) {
            auto cfg = base;
            cfg.kind = kind;
            harness::run_experiment(cfg, log, workers);
        }
    };
    const fs::path a = ctx.out / "repro_a", b = ctx.out / "repro_b";
    fs::remove_all(a);
    fs::remove_all(b);
    run_all(a, 1);
    run_all(b, 2);
    for (const auto& entry : fs::directory_iterator(a)) {
        const auto name = entry.path().filename();
        if (name.extension() != ".csv" && name.extension() != ".policy" && name.extension() != ".txt") continue;
        ++compared;
        if (!fs::exists(b / name) || slurp(a / name) != slurp(b / name)) diffs.push_back(name.string());
    }
    std::size_t count_b = 0;
    for (const auto& entry : fs::directory_iterator(b)) {
        const auto ext = entry.path().extension();
        if (ext == ".csv" || ext == ".policy" || ext == ".txt") ++count_b;
    }
    const bool pass = diffs.empty() && compared > 0 && count_b == static_cast<std::size_t>(compared);
    return {pass, std::to_string(compared) + " output files compared across two runs (1 and 2 workers), " +
                      std::to_string(diffs.size()) + " differ" + (diffs.empty() ? "" : " (first: " + diffs[0] + ")")};
}

}  // namespace

int main(int argc, char** argv) {
    Context ctx;
    ctx.out = "acceptance_runs";
    std::set<int> only;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--out" && i + 1 < argc) {
            ctx.out = argv[++i];
        } else if (arg == "--only" && i + 1 < argc) {
            for (int c : harness::parse_list<int>(argv[++i])) only.insert(c);
        } else if (arg == "--source" && i + 1 < argc) {
            ctx.source_override = argv[++i];
        } else {
            std::cerr << "usage: acceptance [--out DIR] [--only 1,2,...] [--source FILE]\n";
            return 2;
        }
    }
    fs::create_directories(ctx.out);

    const std::vector<std::pair<std::string, std::function<Outcome(Context&)>>> criteria{
        {"value-gap bound on random tabular instances", criterion1},
        {"sample-bound arithmetic and empirical concentration", criterion2},
        {"analytic gradients vs central differences", criterion3},
        {"intrinsic reward formula", criterion4},
        {"frozen beta = 0 reproduces scratch PPO", criterion5},
        {"self-transfer keeps the source return", criterion6},
        {"transfer to heavier, higher-friction pendulum", criterion7},
        {"beta falls on the control-reversed pendulum", criterion8},
        {"integrator accuracy", criterion9},
        {"byte-identical reruns", criterion10},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!only.empty() && !only.count(id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second(ctx);
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        if (!o.pass) ++failures;
        std::cout << "criterion " << id << ' ' << (o.pass ? "PASS" : "FAIL") << "  " << criteria[i].first << ": "
                  << o.detail << "  [" << fmt(seconds_since(t0), 3) << " s]" << std::endl;
    }
    return failures == 0 ? 0 : 1;
}
