#pragma once

// Experiment configuration.
//
// Files use INI syntax: `[section]` headers, `key = value` lines and `;` comment
// lines. Every key can be overridden from the command line with
// `--set section.key=value`. Unknown keys are rejected. See README.md for the
// full key list.

#include <cstdint>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "atl/adapt.hpp"
#include "atl/envs.hpp"
#include "atl/training.hpp"

namespace atl::harness {

enum class ExperimentKind { train_source, transfer_atl, baseline_warmstart, baseline_scratch, eval_source, verify_theory };

inline ExperimentKind parse_kind(const std::string& s) {
    if (s == "train-source") return ExperimentKind::train_source;
    if (s == "transfer-atl") return ExperimentKind::transfer_atl;
    if (s == "baseline-warmstart") return ExperimentKind::baseline_warmstart;
    if (s == "baseline-scratch") return ExperimentKind::baseline_scratch;
    if (s == "eval-source" || s == "eval-source-on-target") return ExperimentKind::eval_source;
    if (s == "verify-theory") return ExperimentKind::verify_theory;
    throw std::invalid_argument("unknown experiment kind '" + s + "'");
}

inline std::string to_string(ExperimentKind k) {
    switch (k) {
        case ExperimentKind::train_source: return "train-source";
        case ExperimentKind::transfer_atl: return "transfer-atl";
        case ExperimentKind::baseline_warmstart: return "baseline-warmstart";
        case ExperimentKind::baseline_scratch: return "baseline-scratch";
        case ExperimentKind::eval_source: return "eval-source";
        case ExperimentKind::verify_theory: return "verify-theory";
    }
    return "?";
}

struct TheoryConfig {
    int lemma_instances = 1000;
    int max_states = 10;
    int max_actions = 4;
    std::vector<double> gammas{0.8, 0.9, 0.95};
    int pac_states = 3;
    int pac_actions = 2;
    double pac_gamma = 0.8;
    double pac_eps = 0.2;
    double pac_delta = 0.1;
    int pac_trials = 500;
};

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::transfer_atl;
    std::string source_env = "pendulum";
    std::string target_env;  ///< defaults to source_env
    envs::PerturbationSpec perturbation;
    std::string perturbation_text;
    adapt::AtlConfig atl;  ///< atl.train holds the PPO settings shared by every kind
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    int iterations = 100;
    std::string out_dir = "runs";
    std::string source_snapshot;  ///< may contain "{seed}"
    int eval_episodes = 20;
    TheoryConfig theory;

    void validate() const {
        if (seeds.empty()) throw std::invalid_argument("seeds must be non-empty");
        if (iterations < 0) throw std::invalid_argument("iterations must be >= 0");
        if (kind != ExperimentKind::verify_theory) {
            atl.validate();
            // Constructing the environments checks names and perturbation validity.
            envs::make_environment(source_env, {}, atl.train.horizon);
            envs::make_environment(target_env.empty() ? source_env : target_env, perturbation, atl.train.horizon);
        }
    }

    std::string snapshot_for(std::uint64_t seed) const {
        std::string path = source_snapshot;
        const auto pos = path.find("{seed}");
        if (pos != std::string::npos) path.replace(pos, 6, std::to_string(seed));
        return path;
    }
};

template <typename T>
std::vector<T> parse_list(const std::string& text) {
    std::vector<T> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.find_first_not_of(" \t") == std::string::npos) continue;
        std::istringstream is(item);
        T v{};
        if (!(is >> v)) throw std::invalid_argument("cannot parse list element '" + item + "'");
        out.push_back(v);
    }
    return out;
}

inline bool parse_bool(const std::string& s) {
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw std::invalid_argument("not a boolean: '" + s + "'");
}

namespace detail {

inline const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys{
        "experiment.kind", "experiment.seeds", "experiment.iterations", "experiment.out",
        "experiment.record_wallclock", "env.source", "env.target", "env.perturbation", "env.horizon",
        "source.snapshot", "source.eval_episodes", "ppo.preset", "ppo.gamma", "ppo.lambda", "ppo.batch_episodes",
        "ppo.clip_epsilon", "ppo.epochs", "ppo.minibatch_size", "ppo.lr", "ppo.target_kl",
        "ppo.normalize_advantages", "ppo.critic_lr", "ppo.critic_epochs", "ppo.critic_minibatch", "ppo.hidden",
        "ppo.init_log_std", "atl.sigma", "atl.sigma_scale", "atl.sigma_episodes", "atl.beta_init", "atl.beta_lr",
        "atl.test_episodes", "atl.beta_gradient_mode", "atl.intrinsic_sign", "atl.beta_fixed", "atl.init_from_source",
        "theory.lemma_instances", "theory.max_states", "theory.max_actions", "theory.gammas", "theory.pac_states",
        "theory.pac_actions", "theory.pac_gamma", "theory.pac_eps", "theory.pac_delta", "theory.pac_trials",
    };
    return keys;
}

}  // namespace detail

using ConfigTree = boost::property_tree::ptree;

inline ConfigTree read_config_file(const std::string& path) {
    ConfigTree tree;
    boost::property_tree::ini_parser::read_ini(path, tree);
    return tree;
}

/// Applies "section.key=value".
inline void apply_override(ConfigTree& tree, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got '" + assignment + "'");
    auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t");
        const auto e = s.find_last_not_of(" \t");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    tree.put(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

/// Applies a named hyperparameter preset before explicit keys are read.
inline void apply_preset(TrainConfig& t, const std::string& preset) {
    if (preset.empty() || preset == "default") return;
    // Policy-network settings reported for the MuJoCo locomotion tasks.
    if (preset == "table2-hopper") {
        t.gamma = 0.995;
        t.clip.lr = 1.5e-5;
        t.batch_episodes = 20;
    } else if (preset == "table2-walker2d") {
        t.gamma = 0.995;
        t.clip.lr = 8.7e-6;
        t.batch_episodes = 20;
    } else if (preset == "table2-halfcheetah") {
        t.gamma = 0.995;
        t.clip.lr = 9e-6;
        t.batch_episodes = 5;
    } else {
        throw std::invalid_argument("unknown ppo.preset '" + preset + "'");
    }
}

inline ExperimentConfig config_from_tree(const ConfigTree& tree) {
    for (const auto& [section, body] : tree) {
        if (body.empty()) {
            if (!body.data().empty())
                throw std::invalid_argument("config key '" + section + "' must be inside a section");
            continue;
        }
        for (const auto& [key, value] : body) {
            if (!detail::known_keys().count(section + "." + key))
                throw std::invalid_argument("unknown config key '" + section + "." + key + "'");
        }
    }
    auto get = [&](const std::string& key) { return tree.get_optional<std::string>(key); };

    ExperimentConfig c;
    if (auto v = get("experiment.kind")) c.kind = parse_kind(*v);
    if (auto v = get("experiment.seeds")) c.seeds = parse_list<std::uint64_t>(*v);
    if (auto v = get("experiment.iterations")) c.iterations = std::stoi(*v);
    if (auto v = get("experiment.out")) c.out_dir = *v;
    if (auto v = get("env.source")) c.source_env = *v;
    if (auto v = get("env.target")) c.target_env = *v;
    if (auto v = get("env.perturbation")) {
        c.perturbation_text = *v;
        c.perturbation = envs::parse_perturbation(*v);
    }
    if (auto v = get("source.snapshot")) c.source_snapshot = *v;
    if (auto v = get("source.eval_episodes")) c.eval_episodes = std::stoi(*v);

    TrainConfig& t = c.atl.train;
    if (auto v = get("ppo.preset")) apply_preset(t, *v);
    if (auto v = get("experiment.record_wallclock")) t.record_wallclock = parse_bool(*v);
    if (auto v = get("env.horizon")) t.horizon = std::stoi(*v);
    if (auto v = get("ppo.gamma")) t.gamma = std::stod(*v);
    if (auto v = get("ppo.lambda")) t.lambda = std::stod(*v);
    if (auto v = get("ppo.batch_episodes")) t.batch_episodes = std::stoi(*v);
    if (auto v = get("ppo.clip_epsilon")) t.clip.clip_epsilon = std::stod(*v);
    if (auto v = get("ppo.epochs")) t.clip.epochs = std::stoi(*v);
    if (auto v = get("ppo.minibatch_size")) t.clip.minibatch_size = std::stoi(*v);
    if (auto v = get("ppo.lr")) t.clip.lr = std::stod(*v);
    if (auto v = get("ppo.target_kl")) t.clip.target_kl = std::stod(*v);
    if (auto v = get("ppo.normalize_advantages")) t.clip.normalize_advantages = parse_bool(*v);
    if (auto v = get("ppo.critic_lr")) t.critic_lr = std::stod(*v);
    if (auto v = get("ppo.critic_epochs")) t.critic_epochs = std::stoi(*v);
    if (auto v = get("ppo.critic_minibatch")) t.critic_minibatch = std::stoi(*v);
    if (auto v = get("ppo.hidden")) t.hidden = parse_list<int>(*v);
    if (auto v = get("ppo.init_log_std")) t.init_log_std = std::stod(*v);

    adapt::AtlConfig& a = c.atl;
    if (auto v = get("atl.sigma")) a.sigma = std::stod(*v);
    if (auto v = get("atl.sigma_scale")) a.sigma_scale = std::stod(*v);
    if (auto v = get("atl.sigma_episodes")) a.sigma_episodes = std::stoi(*v);
    if (auto v = get("atl.beta_init")) a.beta_init = std::stod(*v);
    if (auto v = get("atl.beta_lr")) a.beta_lr = std::stod(*v);
    if (auto v = get("atl.test_episodes")) a.test_episodes = std::stoi(*v);
    if (auto v = get("atl.beta_gradient_mode")) a.beta_mode = adapt::parse_beta_mode(*v);
    if (auto v = get("atl.intrinsic_sign")) a.intrinsic_sign = adapt::parse_intrinsic_sign(*v);
    if (auto v = get("atl.beta_fixed"); v && !v->empty() && *v != "none") a.beta_fixed = std::stod(*v);
    if (auto v = get("atl.init_from_source")) a.init_from_source = parse_bool(*v);

    TheoryConfig& th = c.theory;
    if (auto v = get("theory.lemma_instances")) th.lemma_instances = std::stoi(*v);
    if (auto v = get("theory.max_states")) th.max_states = std::stoi(*v);
    if (auto v = get("theory.max_actions")) th.max_actions = std::stoi(*v);
    if (auto v = get("theory.gammas")) th.gammas = parse_list<double>(*v);
    if (auto v = get("theory.pac_states")) th.pac_states = std::stoi(*v);
    if (auto v = get("theory.pac_actions")) th.pac_actions = std::stoi(*v);
    if (auto v = get("theory.pac_gamma")) th.pac_gamma = std::stod(*v);
    if (auto v = get("theory.pac_eps")) th.pac_eps = std::stod(*v);
    if (auto v = get("theory.pac_delta")) th.pac_delta = std::stod(*v);
    if (auto v = get("theory.pac_trials")) th.pac_trials = std::stoi(*v);
    return c;
}

}  // namespace atl::harness
