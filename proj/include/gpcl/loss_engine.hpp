#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace gpcl {

/// Homogeneous pool of `size` names with unit total notional.
struct PoolSpec {
    int size = 125;
    double recovery = 0.40;

    void validate() const;
};

enum class ModelKind { gpl, gpcl };

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& text);

/// Cumulated intensities per jump amplitude, piecewise linear between knots.
///
/// Values are stored in the table convention: for GPL the cumulated mode
/// intensities directly, for GPCL the cluster cumulated intensity multiplied by
/// the number of clusters of that size at time zero, C(M, alpha) * Lambda(t).
/// Either way a value is the cumulated rate of all size-alpha shocks in a
/// pool with no defaults. Lambda(0) = 0 and the last slope is extrapolated.
class IntensitySchedule {
public:
    IntensitySchedule() = default;

    /// `cumulated[j][k]` is the value of mode j at knot k. Modes are reordered
    /// by increasing amplitude.
    IntensitySchedule(ModelKind model, std::vector<int> amplitudes, std::vector<double> knots,
                      std::vector<std::vector<double>> cumulated);

    /// All-zero schedule with the given modes and knots.
    static IntensitySchedule zero(ModelKind model, std::vector<int> amplitudes, std::vector<double> knots);

    ModelKind model() const { return model_; }
    std::size_t modes() const { return amplitudes_.size(); }
    std::size_t knot_count() const { return knots_.size(); }
    const std::vector<int>& amplitudes() const { return amplitudes_; }
    const std::vector<double>& knots() const { return knots_; }
    const std::vector<std::vector<double>>& table() const { return cumulated_; }

    /// Index of the mode with this amplitude; throws if absent.
    std::size_t mode_of(int amplitude) const;

    /// Table-convention cumulated value of mode j at time t >= 0.
    double cumulated(std::size_t mode, double t) const;

    /// Table-convention intensity (slope) of mode j on the knot interval containing t.
    double rate(std::size_t mode, double t) const;

    /// Knot interval boundaries {0, T_1, ..., T_b}.
    std::vector<double> breakpoints() const;

    /// Throws InputError when an amplitude exceeds the pool size.
    void check_pool(const PoolSpec& pool) const;

private:
    ModelKind model_ = ModelKind::gpcl;
    std::vector<int> amplitudes_;
    std::vector<double> knots_;
    std::vector<std::vector<double>> cumulated_;
};

/// Probability vector over default counts {0, ..., M} at time t.
struct LossDistribution {
    double t = 0.0;
    std::vector<double> probs;

    int pool_size() const { return static_cast<int>(probs.size()) - 1; }
    double mean() const;
    /// P(C_t >= k)
    double tail(int k) const;

    static LossDistribution point_mass(int pool_size, int count, double t = 0.0);
};

/// Generator (or its integral over an interval) of the GPCL counting chain.
/// Entry (x, y) is the rate from state y to state x; columns sum to zero.
using RateMatrix = Eigen::MatrixXd;

/// C(M - y, j) / C(M, j) for y in [0, M]; computed as a running product so
/// large binomials never materialise.
double binomial_ratio(int pool_size, int defaulted, int amplitude);

/// log C(n, k)
double log_binomial(int n, int k);

/// Cluster-level cumulated intensity Lambda~_j(t) = table value / C(M, alpha_j).
double cluster_lambda_from_table(const PoolSpec& pool, const IntensitySchedule& schedule, int amplitude, double t);

/// Integral of the GPCL generator over [t0, t1].
RateMatrix build_cumulated_generator(const PoolSpec& pool, const IntensitySchedule& schedule, double t0, double t1);

/// exp(A) by scaling and squaring with a diagonal Pade approximant.
Eigen::MatrixXd matrix_exponential(const Eigen::MatrixXd& a);

/// exp(G) for a generator G, with negative round-off clamped to zero.
/// `clamped` receives the largest clamped magnitude when non-null.
Eigen::MatrixXd transition_matrix(const RateMatrix& generator, double* clamped = nullptr);

/// GPCL counting distribution at t as an ordered product of per-interval
/// transition matrices applied to a point mass at zero.
LossDistribution gpcl_distribution(const PoolSpec& pool, const IntensitySchedule& schedule, double t);

/// GPL counting distribution min(sum_j alpha_j Z_j, M) via Panjer recursion.
LossDistribution gpl_distribution(const PoolSpec& pool, const IntensitySchedule& schedule, double t);

/// Dispatches on the schedule's model kind.
LossDistribution loss_distribution(const PoolSpec& pool, const IntensitySchedule& schedule, double t);

/// Distributions at many increasing times. GPCL propagates the distribution
/// forward with the sparse generator action instead of dense exponentials.
std::vector<LossDistribution> loss_term_structure(const PoolSpec& pool, const IntensitySchedule& schedule,
                                                  std::span<const double> times);

/// How repeated defaults are removed from the cluster shock construction.
enum class Strategy {
    repeated,          // no adjustment, count grows without bound
    capped,            // strategy 0 (GPL): min(count, M)
    name_adjusted,     // strategy 1: each name defaults at most once
    cluster_adjusted,  // strategy 2 (GPCL): a cluster fires only if all its names survive
};

std::string to_string(Strategy s);
Strategy parse_strategy(const std::string& text);

/// Pool counting intensity given c defaults. `aggregate_rates[j]` is
/// C(M, alpha_j) * lambda~_j, i.e. table-convention rates.
double counting_intensity(Strategy strategy, const PoolSpec& pool, std::span<const int> amplitudes,
                          std::span<const double> aggregate_rates, int defaults);

} // namespace gpcl
