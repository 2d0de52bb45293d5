#include "gpcl/simulator.hpp"

#include "gpcl/error.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <limits>
#include <numeric>
#include <thread>

namespace gpcl {

std::mt19937_64 path_rng(std::uint64_t seed, std::uint64_t path) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(path), static_cast<std::uint32_t>(path >> 32)};
    return std::mt19937_64(seq);
}

namespace {

// Time at which the cumulated rate of `mode` first reaches `level`.
double invert_cumulated(const IntensitySchedule& s, std::size_t mode, double level) {
    const auto& knots = s.knots();
    const auto& v = s.table()[mode];
    double t0 = 0.0;
    double v0 = 0.0;
    for (std::size_t k = 0; k < knots.size(); ++k) {
        if (level <= v[k] && v[k] > v0)
            return t0 + (level - v0) / (v[k] - v0) * (knots[k] - t0);
        t0 = knots[k];
        v0 = v[k];
    }
    const double slope = s.rate(mode, knots.back() + 1.0);
    if (slope <= 0.0)
        return std::numeric_limits<double>::infinity();
    return knots.back() + (level - v0) / slope;
}

} // namespace

std::vector<ShockEvent> sample_shock_stream(const PoolSpec& pool, const IntensitySchedule& schedule,
                                            double horizon, std::mt19937_64& rng) {
    schedule.check_pool(pool);
    if (!(horizon > 0.0))
        throw DomainError("simulation horizon must be positive");
    std::vector<int> names(static_cast<std::size_t>(pool.size));
    std::iota(names.begin(), names.end(), 0);
    std::exponential_distribution<double> arrival(1.0);

    std::vector<ShockEvent> events;
    for (std::size_t j = 0; j < schedule.modes(); ++j) {
        const double total = schedule.cumulated(j, horizon);
        const auto size = static_cast<std::size_t>(schedule.amplitudes()[j]);
        for (double level = arrival(rng); level <= total; level += arrival(rng)) {
            ShockEvent e;
            e.time = std::min(invert_cumulated(schedule, j, level), horizon);
            e.mode = j;
            e.cluster.reserve(size);
            std::sample(names.begin(), names.end(), std::back_inserter(e.cluster), size, rng);
            events.push_back(std::move(e));
        }
    }
    std::stable_sort(events.begin(), events.end(), [](const ShockEvent& a, const ShockEvent& b) {
        return a.time < b.time || (a.time == b.time && a.mode < b.mode);
    });
    return events;
}

std::vector<ShockEvent> sample_shock_stream(const PoolSpec& pool, const IntensitySchedule& schedule,
                                            double horizon, std::uint64_t seed) {
    auto rng = path_rng(seed, 0);
    return sample_shock_stream(pool, schedule, horizon, rng);
}

// ---------------------------------------------------------------------------

long PathState::count_at(double t) const {
    long c = 0;
    for (const auto& s : log) {
        if (s.time > t)
            break;
        c += s.increment;
    }
    return c;
}

PathState apply_strategy(const PoolSpec& pool, std::span<const ShockEvent> events, Strategy strategy) {
    pool.validate();
    for (std::size_t i = 1; i < events.size(); ++i)
        if (events[i].time < events[i - 1].time)
            throw InputError("shock events are not sorted by time");

    const int m = pool.size;
    PathState st;
    st.strategy = strategy;
    st.pool_size = m;
    const bool names = strategy == Strategy::name_adjusted || strategy == Strategy::cluster_adjusted;
    if (names) {
        st.defaulted.assign(static_cast<std::size_t>(m), 0);
        st.default_time.assign(static_cast<std::size_t>(m), std::numeric_limits<double>::quiet_NaN());
    }
    st.log.reserve(events.size());

    long raw = 0;
    for (const auto& e : events) {
        const auto size = static_cast<long>(e.cluster.size());
        long inc = 0;
        switch (strategy) {
        case Strategy::repeated: inc = size; break;
        case Strategy::capped:
            raw += size;
            inc = std::min<long>(raw, m) - st.count;
            break;
        case Strategy::name_adjusted:
            for (const int k : e.cluster) {
                auto& flag = st.defaulted[static_cast<std::size_t>(k)];
                if (!flag) {
                    flag = 1;
                    st.default_time[static_cast<std::size_t>(k)] = e.time;
                    ++inc;
                }
            }
            break;
        case Strategy::cluster_adjusted: {
            const bool intact = std::none_of(e.cluster.begin(), e.cluster.end(),
                                             [&](int k) { return st.defaulted[static_cast<std::size_t>(k)] != 0; });
            if (intact) {
                for (const int k : e.cluster) {
                    st.defaulted[static_cast<std::size_t>(k)] = 1;
                    st.default_time[static_cast<std::size_t>(k)] = e.time;
                }
                inc = size;
            }
            break;
        }
        }
        st.count += inc;
        st.log.push_back({e.time, static_cast<int>(inc)});
    }
    return st;
}

std::vector<std::optional<double>> single_name_default_times(const PathState& path) {
    if (path.strategy != Strategy::name_adjusted && path.strategy != Strategy::cluster_adjusted)
        throw InputError("default times need a name-preserving strategy (s1 or s2), got " + to_string(path.strategy));
    std::vector<std::optional<double>> tau(path.default_time.size());
    for (std::size_t k = 0; k < tau.size(); ++k)
        if (path.defaulted[k])
            tau[k] = path.default_time[k];
    return tau;
}

// ---------------------------------------------------------------------------

EmpiricalDistribution empirical_distribution(const PoolSpec& pool, const IntensitySchedule& schedule,
                                             Strategy strategy, double t, std::size_t n_paths, std::uint64_t seed,
                                             unsigned threads) {
    if (n_paths < 1)
        throw InputError("need at least one path");
    schedule.check_pool(pool);
    const int m = pool.size;
    if (threads == 0)
        threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, n_paths));

    struct Tally {
        std::vector<std::size_t> hist;
        std::size_t overflow = 0;
    };
    std::vector<Tally> tallies(threads, Tally{std::vector<std::size_t>(static_cast<std::size_t>(m) + 1, 0), 0});

    const auto run = [&](unsigned w) {
        auto& tally = tallies[w];
        for (std::size_t p = w; p < n_paths; p += threads) {
            long c = 0;
            if (t > 0.0) {
                auto rng = path_rng(seed, p);
                const auto events = sample_shock_stream(pool, schedule, t, rng);
                c = apply_strategy(pool, events, strategy).count;
            }
            if (c > m)
                ++tally.overflow;
            ++tally.hist[static_cast<std::size_t>(std::min<long>(c, m))];
        }
    };
    if (threads == 1) {
        run(0);
    } else {
        std::vector<std::jthread> pool_threads;
        for (unsigned w = 0; w < threads; ++w)
            pool_threads.emplace_back(run, w);
    }

    EmpiricalDistribution out;
    out.strategy = strategy;
    out.n_paths = n_paths;
    out.seed = seed;
    out.dist.t = t;
    out.dist.probs.assign(static_cast<std::size_t>(m) + 1, 0.0);
    out.std_err.assign(out.dist.probs.size(), 0.0);
    std::size_t overflow = 0;
    for (const auto& tally : tallies) {
        overflow += tally.overflow;
        for (std::size_t c = 0; c < tally.hist.size(); ++c)
            out.dist.probs[c] += static_cast<double>(tally.hist[c]);
    }
    const auto n = static_cast<double>(n_paths);
    for (std::size_t c = 0; c < out.dist.probs.size(); ++c) {
        const double p = out.dist.probs[c] / n;
        out.dist.probs[c] = p;
        out.std_err[c] = std::sqrt(p * (1.0 - p) / n);
    }
    out.overflow = static_cast<double>(overflow) / n;
    return out;
}

std::vector<double> empirical_marginals(const PoolSpec& pool, const IntensitySchedule& schedule, Strategy strategy,
                                        double t, std::size_t n_paths, std::uint64_t seed) {
    if (strategy != Strategy::name_adjusted && strategy != Strategy::cluster_adjusted)
        throw InputError("marginals need a name-preserving strategy (s1 or s2)");
    std::vector<double> freq(static_cast<std::size_t>(pool.size), 0.0);
    for (std::size_t p = 0; p < n_paths; ++p) {
        auto rng = path_rng(seed, p);
        const auto path = apply_strategy(pool, sample_shock_stream(pool, schedule, t, rng), strategy);
        for (std::size_t k = 0; k < freq.size(); ++k)
            freq[k] += path.defaulted[k] ? 1.0 : 0.0;
    }
    for (auto& f : freq)
        f /= static_cast<double>(n_paths);
    return freq;
}

} // namespace gpcl
