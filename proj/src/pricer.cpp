#include "gpcl/pricer.hpp"

#include "gpcl/error.hpp"

#include <algorithm>
#include <cmath>

namespace gpcl {

void TrancheDef::validate() const {
    if (!(attachment >= 0.0 && attachment < detachment && detachment <= 1.0))
        throw InputError("tranche needs 0 <= A < B <= 1");
}

double tranched_loss(double loss, const TrancheDef& tranche) {
    if (!(loss >= 0.0 && loss <= 1.0))
        throw DomainError("pool loss fraction outside [0, 1]");
    if (loss <= tranche.attachment)
        return 0.0;
    if (loss >= tranche.detachment)
        return 1.0;
    return (loss - tranche.attachment) / tranche.thickness();
}

std::vector<double> tranche_payoff(const TrancheDef& tranche, const PoolSpec& pool) {
    tranche.validate();
    std::vector<double> payoff(static_cast<std::size_t>(pool.size) + 1);
    for (int c = 0; c <= pool.size; ++c)
        payoff[static_cast<std::size_t>(c)] = tranched_loss((1.0 - pool.recovery) * c / pool.size, tranche);
    return payoff;
}

double expected_tranched_loss(const LossDistribution& dist, const TrancheDef& tranche, const PoolSpec& pool) {
    if (dist.pool_size() != pool.size)
        throw InputError("distribution support does not match the pool size");
    const auto payoff = tranche_payoff(tranche, pool);
    double e = 0.0;
    for (std::size_t c = 0; c < payoff.size(); ++c)
        e += dist.probs[c] * payoff[c];
    return e;
}

// ---------------------------------------------------------------------------

LossTermStructure::LossTermStructure(std::vector<double> times, std::vector<LossDistribution> dists)
    : times_(std::move(times)), dists_(std::move(dists)) {
    if (times_.size() != dists_.size())
        throw InputError("term structure: times and distributions differ in length");
}

LossTermStructure LossTermStructure::compute(const PoolSpec& pool, const IntensitySchedule& schedule,
                                             std::vector<double> times) {
    auto dists = loss_term_structure(pool, schedule, times);
    return {std::move(times), std::move(dists)};
}

std::size_t LossTermStructure::index_of(double t) const {
    const auto it = std::lower_bound(times_.begin(), times_.end(), t - 1e-12);
    if (it == times_.end() || std::abs(*it - t) > 1e-12)
        throw InputError("term structure has no distribution at t = " + std::to_string(t));
    return static_cast<std::size_t>(it - times_.begin());
}

const LossDistribution& LossTermStructure::at(double t) const { return dists_[index_of(t)]; }

std::vector<double> pricing_grid(const PaymentSchedule& schedule, double grid_step) {
    if (!(grid_step > 0.0))
        throw DomainError("grid step must be positive");
    std::vector<double> grid{0.0};
    double prev = 0.0;
    for (const double t : schedule.times) {
        const int pieces = std::max(1, static_cast<int>(std::ceil((t - prev) / grid_step - 1e-9)));
        for (int k = 1; k < pieces; ++k)
            grid.push_back(prev + (t - prev) * k / pieces);
        grid.push_back(t);
        prev = t;
    }
    return grid;
}

std::vector<double> merge_grids(std::span<const std::vector<double>> grids) {
    std::vector<double> all;
    for (const auto& g : grids)
        all.insert(all.end(), g.begin(), g.end());
    std::sort(all.begin(), all.end());
    std::vector<double> out;
    for (const double t : all)
        if (out.empty() || t - out.back() > 1e-12)
            out.push_back(t);
    return out;
}

// ---------------------------------------------------------------------------

double default_leg(const LossTermStructure& losses, const TrancheDef& tranche, const PoolSpec& pool,
                   const DiscountCurve& curve, const PaymentSchedule& schedule, double grid_step) {
    const auto payoff = tranche_payoff(tranche, pool);
    const auto expected = [&](double t) {
        const auto& d = losses.at(t);
        double e = 0.0;
        for (std::size_t c = 0; c < payoff.size(); ++c)
            e += d.probs[c] * payoff[c];
        return e;
    };
    const auto grid = pricing_grid(schedule, grid_step);
    double pv = 0.0;
    double prev_loss = expected(grid.front());
    for (std::size_t i = 1; i < grid.size(); ++i) {
        const double loss = expected(grid[i]);
        pv += curve.discount(0.5 * (grid[i - 1] + grid[i])) * (loss - prev_loss);
        prev_loss = loss;
    }
    return pv;
}

double tranche_premium_leg(const LossTermStructure& losses, const TrancheDef& tranche, const PoolSpec& pool,
                           const DiscountCurve& curve, const PaymentSchedule& schedule) {
    double annuity = 0.0;
    for (std::size_t i = 0; i < schedule.times.size(); ++i) {
        const double t = schedule.times[i];
        annuity += schedule.accruals[i] * curve.discount(t) *
                   (1.0 - expected_tranched_loss(losses.at(t), tranche, pool));
    }
    return annuity;
}

LegValues tranche_legs(const LossTermStructure& losses, const TrancheDef& tranche, const PoolSpec& pool,
                       const DiscountCurve& curve, const PaymentSchedule& schedule, double grid_step) {
    return {default_leg(losses, tranche, pool, curve, schedule, grid_step),
            tranche_premium_leg(losses, tranche, pool, curve, schedule), 0.0};
}

double tranche_spread_or_upfront(const LegValues& legs, QuoteConvention convention, double running_spread) {
    if (!(legs.annuity > 0.0))
        throw NumericalError("tranche premium leg is zero: the tranche is certainly wiped out");
    if (convention == QuoteConvention::running)
        return (legs.default_leg - legs.upfront) / legs.annuity;
    return legs.default_leg - running_spread * legs.annuity;
}

double index_spread(const LossTermStructure& losses, const PoolSpec& pool, const DiscountCurve& curve,
                    const PaymentSchedule& schedule, double grid_step) {
    const double protection = default_leg(losses, TrancheDef{0.0, 1.0}, pool, curve, schedule, grid_step);
    double annuity = 0.0;
    for (std::size_t i = 0; i < schedule.times.size(); ++i) {
        const double t = schedule.times[i];
        annuity += schedule.accruals[i] * curve.discount(t) * (1.0 - losses.at(t).mean() / pool.size);
    }
    if (!(annuity > 0.0))
        throw NumericalError("index premium leg is zero");
    return protection / annuity;
}

} // namespace gpcl
