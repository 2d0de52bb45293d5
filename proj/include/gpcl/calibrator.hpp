#pragma once

#include "gpcl/loss_engine.hpp"
#include "gpcl/market_data.hpp"
#include "gpcl/pricer.hpp"

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace gpcl {

/// (model - mid) / width. Positive when the model prices above mid.
double weighted_error(double model_value, double mid, double width);

enum class InstrumentKind { index, tranche };

struct Instrument {
    InstrumentKind kind = InstrumentKind::tranche;
    TrancheDef tranche{0.0, 1.0};
    Date maturity;
    double maturity_years = 0.0;
    PaymentSchedule schedule;
    double mid = 0.0;
    double width = 0.0;
    QuoteConvention convention = QuoteConvention::running;
    double running = 0.0;

    /// "index" or "A-B" in percent, e.g. "3-6".
    std::string name() const;
};

/// Quote panel plus everything needed to price it repeatedly.
class CalibrationProblem {
public:
    CalibrationProblem(const QuotePanel& panel, DiscountCurve curve, PoolSpec pool,
                       double grid_step = kDefaultGridStep);

    const PoolSpec& pool() const { return pool_; }
    const DiscountCurve& curve() const { return curve_; }
    const QuotePanel& panel() const { return panel_; }
    double grid_step() const { return grid_step_; }
    const std::vector<Instrument>& instruments() const { return instruments_; }
    /// Distinct quoted maturities as year fractions; these are the schedule knots.
    const std::vector<double>& knots() const { return knots_; }
    const std::vector<Date>& maturity_dates() const { return maturity_dates_; }
    /// Union of all instrument pricing grids.
    const std::vector<double>& grid() const { return grid_; }

    /// Model quote of every instrument, in the same units as `Instrument::mid`.
    std::vector<double> model_values(const IntensitySchedule& schedule) const;
    double model_value(const Instrument& instrument, const LossTermStructure& losses) const;

private:
    QuotePanel panel_;
    DiscountCurve curve_;
    PoolSpec pool_;
    double grid_step_;
    std::vector<Instrument> instruments_;
    std::vector<double> knots_;
    std::vector<Date> maturity_dates_;
    std::vector<double> grid_;

    // Per-instrument pricing data precomputed on `grid_`.
    struct Plan {
        std::size_t payoff = 0;             // column of `payoffs_`
        std::vector<std::size_t> legs;      // default-leg grid points
        std::vector<double> mid_discount;   // one per default-leg step
        std::vector<std::size_t> payments;  // payment dates on the grid
        std::vector<double> weights;        // accrual x discount
    };
    std::vector<Plan> plans_;
    Eigen::MatrixXd payoffs_; // (M + 1) x distinct payoffs; the last column is C / M
    void build_plans();
};

struct ObjectiveValue {
    double f = 0.0;
    std::vector<double> errors;
    std::vector<double> model_values;
};

/// f = sum of squared bid-ask weighted errors over the whole panel.
ObjectiveValue objective(const IntensitySchedule& schedule, const CalibrationProblem& problem);

/// Sum of squared errors restricted to instruments maturing at `maturity_years`.
double objective_at_maturity(const ObjectiveValue& value, const CalibrationProblem& problem, double maturity_years);

struct FitOptions {
    int max_evaluations = 3000;
    /// A restart that improves f by less than this ends the fit.
    double restart_tolerance = 1e-6;
    int max_restarts = 4;
    std::uint64_t seed = 20061002;
};

struct FitResult {
    IntensitySchedule schedule;
    ObjectiveValue value;
    int evaluations = 0;
    bool budget_exhausted = false;
};

/// Free parameters are the non-negative increments of every mode on every
/// knot interval; amplitudes stay fixed. Projected Levenberg-Marquardt on the
/// weighted errors with secant Jacobian updates and seeded restarts.
FitResult fit_intensities(const CalibrationProblem& problem, const IntensitySchedule& initial,
                          const FitOptions& options = {});

struct GreedyOptions {
    ModelKind model = ModelKind::gpcl;
    int max_modes = 7;
    double f_threshold = 1e-6;
    /// A newly added mode whose cumulated intensity at the last knot is below this is dropped.
    double negligible = 1e-7;
    int candidate_budget = 200;
    int refine_budget = 4000;
    /// Number of best-scoring candidates refined with the full budget before choosing.
    int finalists = 3;
    std::uint64_t seed = 20061002;
    /// Candidate amplitudes; empty means every integer in [1, M].
    std::vector<int> candidates;
};

struct CandidateScore {
    int amplitude = 0;
    double f = 0.0;
};

struct GreedyStep {
    int amplitude = 0;
    double f = 0.0;
    std::vector<CandidateScore> candidates;
};

struct CalibrationResult {
    IntensitySchedule schedule;
    ObjectiveValue value;
    std::vector<GreedyStep> log;
    bool budget_warning = false;
    GreedyOptions options;
};

/// Adds jump amplitudes one at a time, scanning every candidate size and keeping the best.
CalibrationResult greedy_calibrate(const CalibrationProblem& problem, const GreedyOptions& options = {});

/// Increments <-> cumulated table, row-major by mode then knot interval.
Eigen::VectorXd schedule_increments(const IntensitySchedule& schedule);
IntensitySchedule schedule_from_increments(ModelKind model, const std::vector<int>& amplitudes,
                                           const std::vector<double>& knots, const Eigen::VectorXd& increments);

} // namespace gpcl
