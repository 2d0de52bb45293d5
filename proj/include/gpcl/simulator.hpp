#pragma once

#include "gpcl/loss_engine.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

namespace gpcl {

/// Jump of one repeated cluster process: every name in `cluster`, and only
/// those names, is hit at `time`.
struct ShockEvent {
    double time = 0.0;
    std::size_t mode = 0; // schedule mode that generated the shock
    std::vector<int> cluster; // sorted name indices in [0, M)
};

/// Generator for path `path` of a run seeded with `seed`. Independent
/// reproducible substreams per path.
std::mt19937_64 path_rng(std::uint64_t seed, std::uint64_t path);

/// Shocks on [0, horizon]. Each mode is an inhomogeneous Poisson process with
/// cumulated rate given by the schedule (table convention), sampled by
/// inversion; every shock hits a uniformly drawn subset of its amplitude's size.
/// Result is sorted by time, ties by mode.
std::vector<ShockEvent> sample_shock_stream(const PoolSpec& pool, const IntensitySchedule& schedule,
                                            double horizon, std::mt19937_64& rng);
std::vector<ShockEvent> sample_shock_stream(const PoolSpec& pool, const IntensitySchedule& schedule,
                                            double horizon, std::uint64_t seed);

struct CountStep {
    double time = 0.0;
    int increment = 0;
};

struct PathState {
    Strategy strategy = Strategy::repeated;
    int pool_size = 0;
    std::vector<char> defaulted;
    std::vector<double> default_time; // NaN while alive; kept for s1/s2 only
    long count = 0;
    std::vector<CountStep> log; // one entry per shock, accepted increment may be 0

    /// Counting process at time t (right-continuous).
    long count_at(double t) const;
};

/// Runs one shock stream through a default-avoidance strategy.
PathState apply_strategy(const PoolSpec& pool, std::span<const ShockEvent> events, Strategy strategy);

/// Default time per name; empty optional for survivors. Only meaningful for
/// strategies that keep name identities (s1, s2).
std::vector<std::optional<double>> single_name_default_times(const PathState& path);

struct EmpiricalDistribution {
    LossDistribution dist;       // probs[M] holds all mass at or above M
    std::vector<double> std_err; // binomial standard error per bin
    double overflow = 0.0;       // repeated strategy only: P(count > M)
    Strategy strategy = Strategy::repeated;
    std::size_t n_paths = 0;
    std::uint64_t seed = 0;
};

/// Monte Carlo frequency of the default count at t over `n_paths` paths.
EmpiricalDistribution empirical_distribution(const PoolSpec& pool, const IntensitySchedule& schedule,
                                             Strategy strategy, double t, std::size_t n_paths, std::uint64_t seed,
                                             unsigned threads = 0);

/// Empirical default probability of each name by time t under a name-preserving strategy.
std::vector<double> empirical_marginals(const PoolSpec& pool, const IntensitySchedule& schedule, Strategy strategy,
                                        double t, std::size_t n_paths, std::uint64_t seed);

} // namespace gpcl
