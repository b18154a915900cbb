#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace atl {

/// One learning-curve row per policy iteration.
struct ExperimentRecord {
    long iteration = 0;
    long episodes_so_far = 0;
    long env_steps_so_far = 0;
    double mean_env_return = 0.0;
    double mean_intrinsic_log_return = 0.0;  ///< mean over episodes of sum_t zeta_t
    double mean_intrinsic_exp_return = 0.0;  ///< mean over episodes of -sum_t exp(zeta_t)
    double beta = 0.0;
    std::uint64_t seed = 0;
    double wallclock_ms = 0.0;
};

inline constexpr std::array<std::string_view, 9> kRecordColumns{
    "iteration",
    "episodes_so_far",
    "env_steps_so_far",
    "mean_env_return",
    "mean_intrinsic_log_return",
    "mean_intrinsic_exp_return",
    "beta",
    "seed",
    "wallclock_ms",
};

}  // namespace atl
