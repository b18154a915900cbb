#pragma once

// Experiment orchestration: one pipeline per seed, one CSV per seed, then a
// cross-seed aggregate.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "atl/adapt.hpp"
#include "atl/envs.hpp"
#include "atl/harness/config.hpp"
#include "atl/harness/csv.hpp"
#include "atl/theory.hpp"
#include "atl/training.hpp"

namespace atl::harness {

/// Return level that counts as "solved": 90% of the source policy's return on
/// its own task. For negative (cost-like) returns this is read as a 10% margin
/// below the source return, i.e. source_return - 0.1 * |source_return|.
inline double success_threshold(double source_return) { return source_return - 0.1 * std::abs(source_return); }

/// Episodes consumed up to the first iteration whose trailing moving average
/// (up to `window` iterations) of mean_env_return exceeds `threshold`.
inline std::optional<long> episodes_to_threshold(std::span<const ExperimentRecord> records, double threshold,
                                                 int window = 5) {
    double sum = 0.0;
    for (std::size_t i = 0; i < records.size(); ++i) {
        sum += records[i].mean_env_return;
        if (i >= static_cast<std::size_t>(window)) sum -= records[i - static_cast<std::size_t>(window)].mean_env_return;
        const auto n = std::min<std::size_t>(i + 1, static_cast<std::size_t>(window));
        if (sum / static_cast<double>(n) > threshold) return records[i].episodes_so_far;
    }
    return std::nullopt;
}

struct ExperimentSummary {
    std::vector<std::string> seed_files;
    std::string aggregate_file;
    std::vector<std::string> snapshot_files;
    std::vector<std::string> report_files;
    std::vector<std::string> failures;
};

inline std::string seed_file(const ExperimentConfig& cfg, std::uint64_t seed) {
    return (std::filesystem::path(cfg.out_dir) / (to_string(cfg.kind) + "_seed" + std::to_string(seed) + ".csv"))
        .string();
}

inline std::string default_snapshot(const ExperimentConfig& cfg, std::uint64_t seed) {
    return (std::filesystem::path(cfg.out_dir) / ("source_seed" + std::to_string(seed) + ".policy")).string();
}

inline nn::GaussianPolicy load_source(const ExperimentConfig& cfg, std::uint64_t seed) {
    if (cfg.source_snapshot.empty()) throw std::runtime_error("source.snapshot is required for " + to_string(cfg.kind));
    const std::string path = cfg.snapshot_for(seed);
    if (!std::filesystem::exists(path)) throw std::runtime_error("missing source snapshot '" + path + "'");
    return nn::load_policy(path);
}

/// Frozen policy: every "iteration" evaluates batch_episodes fresh stochastic
/// episodes with the same seed streams the learners use.
inline std::vector<ExperimentRecord> evaluate_frozen(const TrainConfig& tc, const envs::Environment& proto,
                                                     const nn::GaussianPolicy& policy, std::uint64_t seed,
                                                     int iterations,
                                                     const std::function<void(const ExperimentRecord&)>& sink) {
    auto env = proto.clone();
    std::vector<ExperimentRecord> out;
    long episodes = 0;
    long steps = 0;
    WallClock clock(tc.record_wallclock);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (int it = 0; it < iterations; ++it) {
        double sum = 0.0;
        for (int e = 0; e < tc.batch_episodes; ++e) {
            Rng rng(derive_seed(seed, {stream::kTrainEpisode, static_cast<std::uint64_t>(it),
                                       static_cast<std::uint64_t>(e)}));
            const Trajectory traj = rollout(*env, policy, rng);
            sum += traj.undiscounted_return();
            steps += static_cast<long>(traj.size());
        }
        episodes += tc.batch_episodes;
        ExperimentRecord rec{it, episodes, steps, sum / tc.batch_episodes, nan, nan, 0.0, seed, clock.elapsed_ms()};
        out.push_back(rec);
        if (sink) sink(rec);
    }
    return out;
}

/// Theory checks: random value-gap verification plus the sample-bound experiment.
inline std::vector<std::string> run_theory(const ExperimentConfig& cfg, std::ostream& log) {
    const TheoryConfig& th = cfg.theory;
    const std::uint64_t seed = cfg.seeds.front();
    std::filesystem::create_directories(cfg.out_dir);

    const auto lemma = theory::random_lemma_verification(th.lemma_instances, th.max_states, th.max_actions, th.gammas,
                                                         derive_seed(seed, {101}));

    const auto bound_example = theory::pac_sample_bound(0.1, 0.05, 0.9, 16);

    Rng mdp_rng(derive_seed(seed, {102}));
    theory::TabularMDP m = theory::random_mdp(th.pac_states, th.pac_actions, th.pac_gamma, mdp_rng);
    const auto policies = theory::all_deterministic_policies(th.pac_states, th.pac_actions);
    std::vector<double> initial(static_cast<std::size_t>(th.pac_states), 1.0 / th.pac_states);
    const auto pac = theory::empirical_pac_experiment(m, initial, policies, th.pac_eps, th.pac_delta, th.pac_trials,
                                                      derive_seed(seed, {103}));

    const std::string txt = (std::filesystem::path(cfg.out_dir) / "theory_report.txt").string();
    const std::string csv = (std::filesystem::path(cfg.out_dir) / "theory_report.csv").string();
    std::ostringstream report;
    report << "value-gap bound: " << lemma.instances << " random instances, " << lemma.violations
           << " violations, max lhs/rhs " << format_double(lemma.max_tightness) << ", mean lhs/rhs "
           << format_double(lemma.mean_tightness) << (lemma.violations == 0 ? "  PASS" : "  FAIL") << '\n';
    report << "sample bound n(0.1, 0.05, 0.9, 16) = " << bound_example << '\n';
    report << "concentration: |S|=" << th.pac_states << " |A|=" << th.pac_actions << " |Pi|=" << policies.size()
           << " gamma=" << format_double(th.pac_gamma) << " eps=" << format_double(th.pac_eps)
           << " delta=" << format_double(th.pac_delta) << " n=" << pac.n << " H=" << pac.horizon
           << " trials=" << pac.trials << " failures=" << pac.failures
           << " frequency=" << format_double(pac.failure_frequency)
           << " max deviation=" << format_double(pac.max_deviation) << (pac.pass ? "  PASS" : "  FAIL") << '\n';
    {
        std::ofstream out(txt);
        out << report.str();
    }
    {
        std::ofstream out(csv);
        out << "check,value,threshold,pass\n";
        out << "lemma_violations," << lemma.violations << ",0," << (lemma.violations == 0) << '\n';
        out << "lemma_max_tightness," << format_double(lemma.max_tightness) << ",1," << (lemma.max_tightness <= 1.0)
            << '\n';
        out << "pac_bound_example," << bound_example << ",nan,1\n";
        out << "pac_failure_frequency," << format_double(pac.failure_frequency) << ','
            << format_double(th.pac_delta) << ',' << pac.pass << '\n';
    }
    log << report.str();
    return {txt, csv};
}

struct SeedOutcome {
    std::string path;
    std::string snapshot;
    std::string error;  ///< empty on success
};

/// One seed's pipeline, start to finish. Writes only files derived from `seed`.
inline SeedOutcome run_seed(const ExperimentConfig& cfg, const envs::Environment& source_env,
                            const envs::Environment& target_env, std::uint64_t seed) {
    const TrainConfig& tc = cfg.atl.train;
    SeedOutcome out;
    out.path = seed_file(cfg, seed);
    std::filesystem::remove(out.path + ".failed");
    try {
        RecordWriter writer(out.path);
        auto sink = [&](const ExperimentRecord& r) { writer.write(r); };
        switch (cfg.kind) {
            case ExperimentKind::train_source: {
                auto res = ppo_train(tc, source_env, seed, cfg.iterations, std::nullopt, sink);
                out.snapshot = cfg.source_snapshot.empty() ? default_snapshot(cfg, seed) : cfg.snapshot_for(seed);
                if (auto parent = std::filesystem::path(out.snapshot).parent_path(); !parent.empty())
                    std::filesystem::create_directories(parent);
                nn::save_policy(res.policy, out.snapshot);
                break;
            }
            case ExperimentKind::transfer_atl:
                adapt::atl_train(cfg.atl, target_env, source_env, load_source(cfg, seed), seed, cfg.iterations, sink);
                break;
            case ExperimentKind::baseline_warmstart:
                ppo_train(tc, target_env, seed, cfg.iterations, load_source(cfg, seed), sink);
                break;
            case ExperimentKind::baseline_scratch:
                ppo_train(tc, target_env, seed, cfg.iterations, std::nullopt, sink);
                break;
            case ExperimentKind::eval_source:
                evaluate_frozen(tc, target_env, load_source(cfg, seed), seed, cfg.iterations, sink);
                break;
            case ExperimentKind::verify_theory:
                break;
        }
    } catch (const std::exception& e) {
        out.error = e.what();
        std::ofstream(out.path + ".failed") << out.error << '\n';
    }
    return out;
}

/// Runs the configured pipeline for every seed, `workers` seeds at a time.
/// Seeds share nothing, so outputs do not depend on `workers`. A failed seed
/// leaves its partial CSV next to a `<file>.failed` marker; the aggregate
/// covers the seeds that completed.
inline ExperimentSummary run_experiment(const ExperimentConfig& cfg, std::ostream& log, int workers = 1) {
    cfg.validate();
    ExperimentSummary summary;
    if (cfg.kind == ExperimentKind::verify_theory) {
        summary.report_files = run_theory(cfg, log);
        return summary;
    }
    std::filesystem::create_directories(cfg.out_dir);
    const int horizon = cfg.atl.train.horizon;
    const auto source_env = envs::make_environment(cfg.source_env, {}, horizon);
    const auto target_env =
        envs::make_environment(cfg.target_env.empty() ? cfg.source_env : cfg.target_env, cfg.perturbation, horizon);

    std::vector<SeedOutcome> outcomes(cfg.seeds.size());
    std::atomic<std::size_t> next{0};
    std::mutex log_mutex;
    auto work = [&] {
        for (std::size_t i = next++; i < cfg.seeds.size(); i = next++) {
            outcomes[i] = run_seed(cfg, *source_env, *target_env, cfg.seeds[i]);
            std::lock_guard lock(log_mutex);
            log << to_string(cfg.kind) << " seed " << cfg.seeds[i]
                << (outcomes[i].error.empty() ? " -> " + outcomes[i].path : " FAILED: " + outcomes[i].error) << '\n';
        }
    };
    const int n_threads = std::clamp<int>(workers, 1, static_cast<int>(cfg.seeds.size()));
    if (n_threads == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < n_threads; ++t) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }

    std::vector<std::string> completed;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        const auto& o = outcomes[i];
        summary.seed_files.push_back(o.path);
        if (!o.snapshot.empty()) summary.snapshot_files.push_back(o.snapshot);
        if (o.error.empty())
            completed.push_back(o.path);
        else
            summary.failures.push_back("seed " + std::to_string(cfg.seeds[i]) + ": " + o.error);
    }
    if (!completed.empty()) {
        summary.aggregate_file =
            (std::filesystem::path(cfg.out_dir) / (to_string(cfg.kind) + "_aggregate.csv")).string();
        write_table(summary.aggregate_file, aggregate_files(completed));
    }
    return summary;
}

}  // namespace atl::harness
