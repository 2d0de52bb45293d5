#pragma once

#include "gpcl/loss_engine.hpp"
#include "gpcl/market_data.hpp"

#include <span>
#include <vector>

namespace gpcl {

struct TrancheDef {
    double attachment = 0.0;
    double detachment = 1.0;

    double thickness() const { return detachment - attachment; }
    void validate() const;
};

/// Loss on [A, B] rescaled by the tranche thickness; `loss` is the pool loss fraction.
double tranched_loss(double loss, const TrancheDef& tranche);

/// E[tranched loss] with the constant-recovery map L = (1 - R) C / M.
double expected_tranched_loss(const LossDistribution& dist, const TrancheDef& tranche, const PoolSpec& pool);

/// Payoff of a tranche per default count, `payoff[c] = tranched_loss((1 - R) c / M)`.
std::vector<double> tranche_payoff(const TrancheDef& tranche, const PoolSpec& pool);

/// Loss distributions on an increasing time grid. Lookups must hit a grid time.
class LossTermStructure {
public:
    LossTermStructure() = default;
    LossTermStructure(std::vector<double> times, std::vector<LossDistribution> dists);

    static LossTermStructure compute(const PoolSpec& pool, const IntensitySchedule& schedule,
                                     std::vector<double> times);

    const std::vector<double>& times() const { return times_; }
    const LossDistribution& at(double t) const;
    std::size_t index_of(double t) const;
    const LossDistribution& operator[](std::size_t i) const { return dists_[i]; }

private:
    std::vector<double> times_;
    std::vector<LossDistribution> dists_;
};

/// Default-leg integration grid: 0, every payment date, and equal subdivisions of
/// each payment period no longer than `grid_step` years.
std::vector<double> pricing_grid(const PaymentSchedule& schedule, double grid_step);

/// Sorted union of several grids with near-duplicates (< 1e-12) merged.
std::vector<double> merge_grids(std::span<const std::vector<double>> grids);

struct LegValues {
    double default_leg = 0.0;
    double annuity = 0.0; // premium leg per unit running spread
    double upfront = 0.0;
};

enum class QuoteConvention { running, upfront };

/// sum_i D(0, mid_i) (EL(t_i) - EL(t_{i-1})) over the pricing grid.
double default_leg(const LossTermStructure& losses, const TrancheDef& tranche, const PoolSpec& pool,
                   const DiscountCurve& curve, const PaymentSchedule& schedule, double grid_step);

/// sum_i delta_i D(0, T_i) (1 - EL(T_i)), payments on the notional left at each date.
double tranche_premium_leg(const LossTermStructure& losses, const TrancheDef& tranche, const PoolSpec& pool,
                           const DiscountCurve& curve, const PaymentSchedule& schedule);

LegValues tranche_legs(const LossTermStructure& losses, const TrancheDef& tranche, const PoolSpec& pool,
                       const DiscountCurve& curve, const PaymentSchedule& schedule, double grid_step);

/// Running: S = default leg / annuity. Upfront: U = default leg - running * annuity,
/// as a fraction of tranche notional.
double tranche_spread_or_upfront(const LegValues& legs, QuoteConvention convention,
                                 double running_spread = kEquityRunningBp * 1e-4);

/// Breakeven index spread. The premium notional is reduced by the default
/// count, not by the loss.
double index_spread(const LossTermStructure& losses, const PoolSpec& pool, const DiscountCurve& curve,
                    const PaymentSchedule& schedule, double grid_step);

/// Default grid step, about one month.
inline constexpr double kDefaultGridStep = 30.0 / 365.0;

} // namespace gpcl
