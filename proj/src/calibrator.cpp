#include "gpcl/calibrator.hpp"

#include "gpcl/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>

namespace gpcl {

double weighted_error(double model_value, double mid, double width) {
    if (!(width > 0.0))
        throw DomainError("bid-ask width must be positive");
    return (model_value - mid) / width;
}

std::string Instrument::name() const {
    if (kind == InstrumentKind::index)
        return "index";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g-%g", std::round(tranche.attachment * 1e4) / 100.0,
                  std::round(tranche.detachment * 1e4) / 100.0);
    return buf;
}

// ---------------------------------------------------------------------------

CalibrationProblem::CalibrationProblem(const QuotePanel& panel, DiscountCurve curve, PoolSpec pool, double grid_step)
    : panel_(panel), curve_(std::move(curve)), pool_(pool), grid_step_(grid_step) {
    pool_.validate();
    if (!(grid_step_ > 0.0))
        throw InputError("grid step must be positive");
    if (panel_.empty())
        throw InputError("calibration needs at least one quote");

    const Date valuation = panel_.valuation_date;
    maturity_dates_ = panel_.maturities();
    std::vector<PaymentSchedule> schedules;
    std::vector<std::vector<double>> grids;
    for (const auto d : maturity_dates_) {
        knots_.push_back(year_fraction(valuation, d));
        schedules.push_back(quarterly_schedule(valuation, d));
        grids.push_back(pricing_grid(schedules.back(), grid_step_));
    }
    grid_ = merge_grids(grids);

    const auto schedule_for = [&](Date d) -> const PaymentSchedule& {
        const auto it = std::find(maturity_dates_.begin(), maturity_dates_.end(), d);
        return schedules[static_cast<std::size_t>(it - maturity_dates_.begin())];
    };
    for (const auto& q : panel_.index) {
        Instrument inst;
        inst.kind = InstrumentKind::index;
        inst.maturity = q.maturity;
        inst.maturity_years = year_fraction(valuation, q.maturity);
        inst.schedule = schedule_for(q.maturity);
        inst.mid = q.mid();
        inst.width = q.width();
        instruments_.push_back(std::move(inst));
    }
    for (const auto& q : panel_.tranches) {
        Instrument inst;
        inst.kind = InstrumentKind::tranche;
        inst.tranche = {q.attachment, q.detachment};
        inst.maturity = q.maturity;
        inst.maturity_years = year_fraction(valuation, q.maturity);
        inst.schedule = schedule_for(q.maturity);
        inst.mid = q.mid();
        inst.width = q.width();
        inst.convention = q.is_upfront ? QuoteConvention::upfront : QuoteConvention::running;
        inst.running = q.running();
        instruments_.push_back(std::move(inst));
    }
    // Group by maturity so error tables read naturally.
    std::stable_sort(instruments_.begin(), instruments_.end(),
                     [](const auto& a, const auto& b) { return a.maturity_years < b.maturity_years; });
    build_plans();
}

void CalibrationProblem::build_plans() {
    const auto index_on_grid = [&](double t) {
        const auto it = std::lower_bound(grid_.begin(), grid_.end(), t - 1e-12);
        return static_cast<std::size_t>(it - grid_.begin());
    };
    std::vector<TrancheDef> distinct;
    for (const auto& inst : instruments_) {
        Plan plan;
        auto it = std::find_if(distinct.begin(), distinct.end(), [&](const TrancheDef& d) {
            return d.attachment == inst.tranche.attachment && d.detachment == inst.tranche.detachment;
        });
        if (it == distinct.end())
            it = distinct.insert(distinct.end(), inst.tranche);
        plan.payoff = static_cast<std::size_t>(it - distinct.begin());
        const auto g = pricing_grid(inst.schedule, grid_step_);
        for (std::size_t i = 0; i < g.size(); ++i) {
            plan.legs.push_back(index_on_grid(g[i]));
            if (i > 0)
                plan.mid_discount.push_back(curve_.discount(0.5 * (g[i - 1] + g[i])));
        }
        for (std::size_t i = 0; i < inst.schedule.times.size(); ++i) {
            plan.payments.push_back(index_on_grid(inst.schedule.times[i]));
            plan.weights.push_back(inst.schedule.accruals[i] * curve_.discount(inst.schedule.times[i]));
        }
        plans_.push_back(std::move(plan));
    }
    const auto states = static_cast<Eigen::Index>(pool_.size) + 1;
    payoffs_.resize(states, static_cast<Eigen::Index>(distinct.size()) + 1);
    for (std::size_t k = 0; k < distinct.size(); ++k) {
        const auto p = tranche_payoff(distinct[k], pool_);
        for (Eigen::Index c = 0; c < states; ++c)
            payoffs_(c, static_cast<Eigen::Index>(k)) = p[static_cast<std::size_t>(c)];
    }
    for (Eigen::Index c = 0; c < states; ++c)
        payoffs_(c, payoffs_.cols() - 1) = static_cast<double>(c) / pool_.size;
}

double CalibrationProblem::model_value(const Instrument& inst, const LossTermStructure& losses) const {
    if (inst.kind == InstrumentKind::index)
        return index_spread(losses, pool_, curve_, inst.schedule, grid_step_);
    const auto legs = tranche_legs(losses, inst.tranche, pool_, curve_, inst.schedule, grid_step_);
    return tranche_spread_or_upfront(legs, inst.convention, inst.running);
}

std::vector<double> CalibrationProblem::model_values(const IntensitySchedule& schedule) const {
    const auto dists = loss_term_structure(pool_, schedule, grid_);
    const auto states = payoffs_.rows();
    Eigen::MatrixXd probs(static_cast<Eigen::Index>(dists.size()), states);
    for (std::size_t i = 0; i < dists.size(); ++i)
        probs.row(static_cast<Eigen::Index>(i)) =
            Eigen::Map<const Eigen::RowVectorXd>(dists[i].probs.data(), states);
    // expected[i, k]: expectation of payoff k at grid time i
    const Eigen::MatrixXd expected = probs * payoffs_;
    const Eigen::Index counts = payoffs_.cols() - 1;

    std::vector<double> values;
    values.reserve(instruments_.size());
    for (std::size_t n = 0; n < instruments_.size(); ++n) {
        const auto& inst = instruments_[n];
        const auto& plan = plans_[n];
        const auto k = static_cast<Eigen::Index>(plan.payoff);
        double protection = 0.0;
        for (std::size_t i = 1; i < plan.legs.size(); ++i)
            protection += plan.mid_discount[i - 1] * (expected(static_cast<Eigen::Index>(plan.legs[i]), k) -
                                                      expected(static_cast<Eigen::Index>(plan.legs[i - 1]), k));
        const Eigen::Index notional = inst.kind == InstrumentKind::index ? counts : k;
        double annuity = 0.0;
        for (std::size_t i = 0; i < plan.payments.size(); ++i)
            annuity += plan.weights[i] * (1.0 - expected(static_cast<Eigen::Index>(plan.payments[i]), notional));
        if (inst.kind == InstrumentKind::index) {
            if (!(annuity > 0.0))
                throw NumericalError("index premium leg is zero");
            values.push_back(protection / annuity);
        } else {
            values.push_back(tranche_spread_or_upfront({protection, annuity, 0.0}, inst.convention, inst.running));
        }
    }
    return values;
}

ObjectiveValue objective(const IntensitySchedule& schedule, const CalibrationProblem& problem) {
    ObjectiveValue out;
    out.model_values = problem.model_values(schedule);
    const auto& insts = problem.instruments();
    for (std::size_t i = 0; i < insts.size(); ++i) {
        const double e = weighted_error(out.model_values[i], insts[i].mid, insts[i].width);
        out.errors.push_back(e);
        out.f += e * e;
    }
    return out;
}

double objective_at_maturity(const ObjectiveValue& value, const CalibrationProblem& problem, double maturity_years) {
    double f = 0.0;
    const auto& insts = problem.instruments();
    for (std::size_t i = 0; i < insts.size(); ++i)
        if (std::abs(insts[i].maturity_years - maturity_years) < 1e-9)
            f += value.errors[i] * value.errors[i];
    return f;
}

// ---------------------------------------------------------------------------

Eigen::VectorXd schedule_increments(const IntensitySchedule& schedule) {
    const std::size_t b = schedule.knot_count();
    Eigen::VectorXd x(static_cast<Eigen::Index>(schedule.modes() * b));
    for (std::size_t j = 0; j < schedule.modes(); ++j) {
        double prev = 0.0;
        for (std::size_t k = 0; k < b; ++k) {
            const double v = schedule.table()[j][k];
            x(static_cast<Eigen::Index>(j * b + k)) = v - prev;
            prev = v;
        }
    }
    return x;
}

IntensitySchedule schedule_from_increments(ModelKind model, const std::vector<int>& amplitudes,
                                           const std::vector<double>& knots, const Eigen::VectorXd& increments) {
    const std::size_t b = knots.size();
    if (static_cast<std::size_t>(increments.size()) != amplitudes.size() * b)
        throw InputError("increment vector does not match modes x knots");
    std::vector<std::vector<double>> table(amplitudes.size(), std::vector<double>(b));
    for (std::size_t j = 0; j < amplitudes.size(); ++j) {
        double acc = 0.0;
        for (std::size_t k = 0; k < b; ++k) {
            acc += std::max(0.0, increments(static_cast<Eigen::Index>(j * b + k)));
            table[j][k] = acc;
        }
    }
    return IntensitySchedule(model, amplitudes, knots, std::move(table));
}

namespace {

constexpr double kFailedResidual = 1e6;

/// Least-squares view of the calibration: increments -> weighted errors.
class Residuals {
public:
    Residuals(const CalibrationProblem& problem, ModelKind model, std::vector<int> amplitudes)
        : problem_(problem), model_(model), amplitudes_(std::move(amplitudes)) {}

    Eigen::VectorXd operator()(const Eigen::VectorXd& x) {
        ++evaluations;
        const auto n = static_cast<Eigen::Index>(problem_.instruments().size());
        try {
            const auto value = objective(schedule(x), problem_);
            Eigen::VectorXd r(n);
            for (Eigen::Index i = 0; i < n; ++i)
                r(i) = value.errors[static_cast<std::size_t>(i)];
            if (r.allFinite())
                return r;
        } catch (const NumericalError&) {
        }
        return Eigen::VectorXd::Constant(n, kFailedResidual);
    }

    IntensitySchedule schedule(const Eigen::VectorXd& x) const {
        return schedule_from_increments(model_, amplitudes_, problem_.knots(), x);
    }

    Eigen::VectorXd column(const Eigen::VectorXd& x, const Eigen::VectorXd& r, Eigen::Index i) {
        const double h = 1e-7 + 1e-6 * x(i);
        Eigen::VectorXd xp = x;
        xp(i) += h;
        return ((*this)(xp) - r) / h;
    }

    Eigen::MatrixXd jacobian(const Eigen::VectorXd& x, const Eigen::VectorXd& r) {
        Eigen::MatrixXd j(r.size(), x.size());
        for (Eigen::Index i = 0; i < x.size(); ++i)
            j.col(i) = column(x, r, i);
        return j;
    }

    int evaluations = 0;

private:
    const CalibrationProblem& problem_;
    ModelKind model_;
    std::vector<int> amplitudes_;
};

bool failed(const Eigen::VectorXd& r) { return r.size() > 0 && r(0) == kFailedResidual; }

struct LmPoint {
    Eigen::VectorXd x;
    Eigen::VectorXd r;
    double f = 0.0;
};

/// Projected Levenberg-Marquardt with Broyden updates; refreshes the finite
/// difference Jacobian when the secant model stalls. Stops on the evaluation
/// budget or when a fresh Jacobian cannot produce a decrease.
void levenberg_marquardt(Residuals& res, LmPoint& pt, Eigen::MatrixXd jac, int budget) {
    const Eigen::Index p = pt.x.size();
    double mu = 1e-3;
    int rejects = 0;
    // f when the current Jacobian was last recomputed by finite differences
    double f_at_refresh = pt.f;
    while (res.evaluations < budget) {
        const Eigen::VectorXd g = jac.transpose() * pt.r;
        std::vector<Eigen::Index> free;
        for (Eigen::Index i = 0; i < p; ++i)
            if (!(pt.x(i) <= 0.0 && g(i) > 0.0))
                free.push_back(i);
        bool stalled = free.empty();
        if (!stalled) {
            const auto nf = static_cast<Eigen::Index>(free.size());
            Eigen::MatrixXd jf(jac.rows(), nf);
            Eigen::VectorXd gf(nf);
            for (Eigen::Index k = 0; k < nf; ++k) {
                jf.col(k) = jac.col(free[static_cast<std::size_t>(k)]);
                gf(k) = g(free[static_cast<std::size_t>(k)]);
            }
            Eigen::MatrixXd h = jf.transpose() * jf;
            const double floor = std::max(1e-12 * h.diagonal().maxCoeff(), 1e-300);
            for (Eigen::Index k = 0; k < nf; ++k)
                h(k, k) += mu * std::max(h(k, k), floor);
            const Eigen::VectorXd step = h.ldlt().solve(-gf);

            Eigen::VectorXd trial = pt.x;
            for (Eigen::Index k = 0; k < nf; ++k) {
                const auto i = free[static_cast<std::size_t>(k)];
                trial(i) = std::max(0.0, trial(i) + step(k));
            }
            const Eigen::VectorXd s = trial - pt.x;
            if (!step.allFinite() || s.norm() <= 1e-15 * (1.0 + pt.x.norm())) {
                stalled = true;
            } else {
                const Eigen::VectorXd rt = res(trial);
                if (!failed(rt))
                    jac += (rt - pt.r - jac * s) * s.transpose() / s.squaredNorm();
                const double ft = rt.squaredNorm();
                if (ft < pt.f) {
                    const double gain = pt.f - ft;
                    pt = {trial, rt, ft};
                    mu = std::max(mu / 3.0, 1e-10);
                    rejects = 0;
                    stalled = gain < 1e-12 * (1.0 + pt.f);
                } else {
                    mu *= 4.0;
                    stalled = ++rejects >= 6;
                }
            }
        }
        if (!stalled)
            continue;
        // A whole cycle on one finite-difference Jacobian gained (almost) nothing.
        if (f_at_refresh - pt.f <= 1e-9 * (1.0 + pt.f) || res.evaluations + p > budget)
            return;
        jac = res.jacobian(pt.x, pt.r);
        f_at_refresh = pt.f;
        mu = 1e-3;
        rejects = 0;
    }
}

LmPoint fit_with_restarts(Residuals& res, Eigen::VectorXd x0, const Eigen::MatrixXd* jac0, const FitOptions& opt,
                          int max_restarts) {
    LmPoint best{x0.cwiseMax(0.0), {}, 0.0};
    best.r = res(best.x);
    best.f = best.r.squaredNorm();
    if (best.x.size() == 0)
        return best;
    {
        Eigen::MatrixXd jac = jac0 ? *jac0 : res.jacobian(best.x, best.r);
        levenberg_marquardt(res, best, std::move(jac), opt.max_evaluations);
    }
    std::mt19937_64 rng(opt.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int k = 0; k < max_restarts && res.evaluations < opt.max_evaluations; ++k) {
        LmPoint trial{best.x, {}, 0.0};
        const double scale = std::max(best.x.maxCoeff(), 1e-3);
        for (Eigen::Index i = 0; i < trial.x.size(); ++i) {
            const double z = normal(rng);
            trial.x(i) = trial.x(i) > 0.0 ? trial.x(i) * std::exp(0.25 * z) : std::max(0.0, 1e-3 * scale * z);
        }
        trial.r = res(trial.x);
        trial.f = trial.r.squaredNorm();
        if (res.evaluations + trial.x.size() > opt.max_evaluations)
            break;
        levenberg_marquardt(res, trial, res.jacobian(trial.x, trial.r), opt.max_evaluations);
        const double gain = best.f - trial.f;
        if (gain > 0.0)
            best = trial;
        if (gain < opt.restart_tolerance)
            break;
    }
    return best;
}

FitResult make_fit_result(const Residuals& res, const LmPoint& pt, const CalibrationProblem& problem,
                          const FitOptions& opt) {
    FitResult out;
    out.schedule = res.schedule(pt.x);
    out.value = objective(out.schedule, problem);
    out.evaluations = res.evaluations;
    out.budget_exhausted = res.evaluations >= opt.max_evaluations;
    return out;
}

std::vector<int> insertion_amplitudes(const IntensitySchedule& s) { return s.amplitudes(); }

double last_value(const IntensitySchedule& s, int amplitude) {
    return s.table()[s.mode_of(amplitude)].back();
}

/// Initial single-mode guess: the expected default count implied by the index
/// spreads, L(T) ~ M S T / (1 - R).
IntensitySchedule initial_guess(const CalibrationProblem& problem, ModelKind model) {
    const auto& knots = problem.knots();
    std::vector<double> values;
    const auto& pool = problem.pool();
    for (const double t : knots) {
        double spread = 0.0;
        double nearest = std::numeric_limits<double>::infinity();
        for (const auto& inst : problem.instruments())
            if (inst.kind == InstrumentKind::index && std::abs(inst.maturity_years - t) < nearest) {
                nearest = std::abs(inst.maturity_years - t);
                spread = inst.mid;
            }
        if (spread <= 0.0)
            spread = 0.01;
        const double v = pool.size * spread * t / std::max(1.0 - pool.recovery, 0.05);
        values.push_back(std::max(v, values.empty() ? 0.0 : values.back()));
    }
    return IntensitySchedule(model, {1}, knots, {values});
}

} // namespace

FitResult fit_intensities(const CalibrationProblem& problem, const IntensitySchedule& initial,
                          const FitOptions& options) {
    if (problem.instruments().empty())
        throw InputError("calibration needs at least one quote");
    if (initial.knots() != problem.knots())
        throw InputError("initial schedule knots must equal the quoted maturities");
    initial.check_pool(problem.pool());
    Residuals res(problem, initial.model(), insertion_amplitudes(initial));
    const auto best = fit_with_restarts(res, schedule_increments(initial), nullptr, options, options.max_restarts);
    return make_fit_result(res, best, problem, options);
}

CalibrationResult greedy_calibrate(const CalibrationProblem& problem, const GreedyOptions& options) {
    if (options.max_modes < 1)
        throw InputError("max_modes must be at least 1");
    const int m = problem.pool().size;
    const std::size_t b = problem.knots().size();

    CalibrationResult result;
    result.options = options;

    FitOptions refine;
    refine.max_evaluations = options.refine_budget;
    refine.seed = options.seed;

    // Step 1: a single mode of amplitude one.
    auto current = fit_intensities(problem, initial_guess(problem, options.model), refine);
    result.budget_warning = current.budget_exhausted;
    result.log.push_back({1, current.value.f, {}});

    std::vector<int> candidates = options.candidates;
    if (candidates.empty())
        for (int a = 1; a <= m; ++a)
            candidates.push_back(a);

    while (static_cast<int>(current.schedule.modes()) < options.max_modes && current.value.f >= options.f_threshold) {
        const auto& chosen = current.schedule.amplitudes();
        const Eigen::VectorXd base_x = schedule_increments(current.schedule);

        // Jacobian columns of the incumbent modes are shared by every candidate.
        Residuals base(problem, options.model, chosen);
        const Eigen::VectorXd base_r = base(base_x);
        const Eigen::MatrixXd base_jac = base.jacobian(base_x, base_r);

        GreedyStep step;
        struct Scored {
            double f;
            int amplitude;
            FitResult fit;
        };
        std::vector<Scored> scored;
        for (const int a : candidates) {
            if (a < 1 || a > m || std::find(chosen.begin(), chosen.end(), a) != chosen.end())
                continue;
            std::vector<int> amps = chosen;
            amps.push_back(a);
            Residuals res(problem, options.model, amps);
            Eigen::VectorXd x0(base_x.size() + static_cast<Eigen::Index>(b));
            x0 << base_x, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(b));
            Eigen::MatrixXd jac(base_r.size(), x0.size());
            jac.leftCols(base_x.size()) = base_jac;
            for (std::size_t k = 0; k < b; ++k) {
                const auto col = base_x.size() + static_cast<Eigen::Index>(k);
                jac.col(col) = res.column(x0, base_r, col);
            }
            FitOptions scan;
            scan.max_evaluations = options.candidate_budget;
            scan.seed = options.seed + static_cast<std::uint64_t>(a);
            const auto pt = fit_with_restarts(res, x0, &jac, scan, 0);
            step.candidates.push_back({a, pt.f});
            scored.push_back({pt.f, a, make_fit_result(res, pt, problem, scan)});
        }
        if (scored.empty())
            break;
        const auto keep = std::min<std::size_t>(static_cast<std::size_t>(std::max(options.finalists, 1)), scored.size());
        std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep), scored.end(),
                          [](const auto& x, const auto& y) { return x.f < y.f; });

        FitResult refined;
        int best_amp = 0;
        for (std::size_t i = 0; i < keep; ++i) {
            auto r = fit_intensities(problem, scored[i].fit.schedule, refine);
            if (r.value.f > scored[i].fit.value.f)
                r = scored[i].fit;
            if (best_amp == 0 || r.value.f < refined.value.f) {
                best_amp = scored[i].amplitude;
                refined = std::move(r);
            }
        }
        result.budget_warning = result.budget_warning || refined.budget_exhausted;
        step.amplitude = best_amp;
        step.f = refined.value.f;
        result.log.push_back(std::move(step));

        if (last_value(refined.schedule, best_amp) < options.negligible || refined.value.f > current.value.f) {
            // The new mode is not worth keeping.
            break;
        }
        current = std::move(refined);
    }

    // Drop modes that ended up with no intensity.
    std::vector<int> amps;
    std::vector<std::vector<double>> table;
    for (std::size_t j = 0; j < current.schedule.modes(); ++j)
        if (current.schedule.table()[j].back() >= options.negligible) {
            amps.push_back(current.schedule.amplitudes()[j]);
            table.push_back(current.schedule.table()[j]);
        }
    if (amps.empty()) {
        amps = current.schedule.amplitudes();
        table = current.schedule.table();
    }
    result.schedule = IntensitySchedule(options.model, amps, problem.knots(), table);
    result.value = objective(result.schedule, problem);
    return result;
}

} // namespace gpcl
