#pragma once

#include "gpcl/io.hpp"
#include "gpcl/loss_engine.hpp"
#include "gpcl/market_data.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace gpcl::test {

inline std::string data_path(const std::string& name) { return std::string(GPCL_DATA_DIR) + "/" + name; }

inline IntensitySchedule itraxx_gpl() { return load_schedule_file(data_path("itraxx_gpl_schedule.json")); }
inline IntensitySchedule itraxx_gpcl() { return load_schedule_file(data_path("itraxx_gpcl_schedule.json")); }

inline QuotePanel itraxx_panel() { return load_quotes_file(data_path("itraxx_quotes.csv")); }
inline QuotePanel cdx_panel() { return load_quotes_file(data_path("cdx_quotes.csv")); }
inline DiscountCurve eur_curve(Date valuation) { return load_curve_file(data_path("eur_curve.csv"), valuation); }

inline double total_variation(const std::vector<double>& p, const std::vector<double>& q) {
    double tv = 0.0;
    for (std::size_t i = 0; i < std::max(p.size(), q.size()); ++i)
        tv += std::abs((i < p.size() ? p[i] : 0.0) - (i < q.size() ? q[i] : 0.0));
    return 0.5 * tv;
}

/// Poisson(lambda) pmf on {0, ..., n} computed term by term.
inline std::vector<double> poisson_pmf(double lambda, int n) {
    std::vector<double> p(static_cast<std::size_t>(n) + 1);
    double term = std::exp(-lambda);
    for (int k = 0; k <= n; ++k) {
        p[static_cast<std::size_t>(k)] = term;
        term *= lambda / (k + 1);
    }
    return p;
}

/// Distribution of min(sum_j a_j Z_j, M), Z_j ~ Poisson(lambda_j), by direct
/// convolution of the scaled Poisson laws. Truncation at `cutoff` jumps per mode.
inline std::vector<double> capped_compound_by_convolution(int m, const std::vector<int>& amps,
                                                          const std::vector<double>& lambdas, int cutoff = 200) {
    // Uncapped support up to m; everything beyond collapses into m.
    std::vector<double> dist(static_cast<std::size_t>(m) + 1, 0.0);
    dist[0] = 1.0;
    for (std::size_t j = 0; j < amps.size(); ++j) {
        const auto pz = poisson_pmf(lambdas[j], cutoff);
        std::vector<double> next(dist.size(), 0.0);
        for (int x = 0; x <= m; ++x) {
            if (dist[static_cast<std::size_t>(x)] == 0.0)
                continue;
            for (int z = 0; z <= cutoff; ++z) {
                const long y = std::min<long>(m, x + static_cast<long>(amps[j]) * z);
                next[static_cast<std::size_t>(y)] += dist[static_cast<std::size_t>(x)] * pz[static_cast<std::size_t>(z)];
            }
        }
        dist = std::move(next);
    }
    return dist;
}

/// Pure-death law of a single-amplitude GPCL chain: each name survives
/// independently with probability exp(-lambda~), so the count is Binomial(M, 1 - exp(-lambda~)).
inline std::vector<double> binomial_pmf(int m, double p) {
    std::vector<double> out(static_cast<std::size_t>(m) + 1);
    for (int k = 0; k <= m; ++k)
        out[static_cast<std::size_t>(k)] =
            std::exp(log_binomial(m, k) + k * std::log(p) + (m - k) * std::log1p(-p));
    return out;
}

} // namespace gpcl::test
