#include "gpcl/loss_engine.hpp"

#include "gpcl/error.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>

namespace gpcl {

void PoolSpec::validate() const {
    if (size < 1)
        throw InputError("pool size must be at least 1, got " + std::to_string(size));
    if (!(recovery >= 0.0 && recovery <= 1.0))
        throw InputError("recovery must lie in [0, 1], got " + std::to_string(recovery));
}

std::string to_string(ModelKind kind) { return kind == ModelKind::gpl ? "gpl" : "gpcl"; }

ModelKind parse_model_kind(const std::string& text) {
    if (text == "gpl" || text == "GPL")
        return ModelKind::gpl;
    if (text == "gpcl" || text == "GPCL")
        return ModelKind::gpcl;
    throw InputError("unknown model kind '" + text + "' (expected gpl or gpcl)");
}

// ---------------------------------------------------------------------------

IntensitySchedule::IntensitySchedule(ModelKind model, std::vector<int> amplitudes, std::vector<double> knots,
                                     std::vector<std::vector<double>> cumulated)
    : model_(model) {
    if (knots.empty())
        throw InputError("schedule: at least one knot required");
    for (std::size_t k = 0; k < knots.size(); ++k) {
        if (!std::isfinite(knots[k]) || knots[k] <= 0.0)
            throw InputError("schedule: knots must be finite and positive");
        if (k > 0 && knots[k] <= knots[k - 1])
            throw InputError("schedule: knots must be strictly increasing");
    }
    if (cumulated.size() != amplitudes.size())
        throw InputError("schedule: one row of cumulated values per amplitude required");

    std::vector<std::size_t> order(amplitudes.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return amplitudes[a] < amplitudes[b]; });

    for (std::size_t i = 0; i < order.size(); ++i) {
        const int alpha = amplitudes[order[i]];
        if (alpha < 1)
            throw InputError("schedule: amplitudes must be positive integers");
        if (i > 0 && alpha == amplitudes_.back())
            throw InputError("schedule: duplicate amplitude " + std::to_string(alpha));
        const auto& row = cumulated[order[i]];
        if (row.size() != knots.size())
            throw InputError("schedule: amplitude " + std::to_string(alpha) + " has " +
                             std::to_string(row.size()) + " values for " + std::to_string(knots.size()) +
                             " knots");
        double prev = 0.0;
        for (const double v : row) {
            if (!std::isfinite(v) || v < 0.0)
                throw InputError("schedule: cumulated values must be finite and non-negative");
            if (v < prev)
                throw InputError("schedule: cumulated values of amplitude " + std::to_string(alpha) +
                                 " decrease in time");
            prev = v;
        }
        amplitudes_.push_back(alpha);
        cumulated_.push_back(row);
    }
    knots_ = std::move(knots);
}

IntensitySchedule IntensitySchedule::zero(ModelKind model, std::vector<int> amplitudes, std::vector<double> knots) {
    std::vector<std::vector<double>> values(amplitudes.size(), std::vector<double>(knots.size(), 0.0));
    return IntensitySchedule(model, std::move(amplitudes), std::move(knots), std::move(values));
}

std::size_t IntensitySchedule::mode_of(int amplitude) const {
    const auto it = std::find(amplitudes_.begin(), amplitudes_.end(), amplitude);
    if (it == amplitudes_.end())
        throw InputError("schedule has no amplitude " + std::to_string(amplitude));
    return static_cast<std::size_t>(it - amplitudes_.begin());
}

double IntensitySchedule::cumulated(std::size_t mode, double t) const {
    if (t < 0.0)
        throw DomainError("cumulated intensity requested at negative time");
    const auto& v = cumulated_.at(mode);
    if (t == 0.0)
        return 0.0;
    const std::size_t b = knots_.size();
    if (t >= knots_.back()) {
        const double t0 = b > 1 ? knots_[b - 2] : 0.0;
        const double v0 = b > 1 ? v[b - 2] : 0.0;
        return v[b - 1] + (v[b - 1] - v0) / (knots_[b - 1] - t0) * (t - knots_[b - 1]);
    }
    const auto k = static_cast<std::size_t>(std::lower_bound(knots_.begin(), knots_.end(), t) - knots_.begin());
    const double t0 = k > 0 ? knots_[k - 1] : 0.0;
    const double v0 = k > 0 ? v[k - 1] : 0.0;
    return v0 + (v[k] - v0) * (t - t0) / (knots_[k] - t0);
}

double IntensitySchedule::rate(std::size_t mode, double t) const {
    const auto& v = cumulated_.at(mode);
    auto k = static_cast<std::size_t>(std::lower_bound(knots_.begin(), knots_.end(), t) - knots_.begin());
    k = std::min(k, knots_.size() - 1);
    const double t0 = k > 0 ? knots_[k - 1] : 0.0;
    const double v0 = k > 0 ? v[k - 1] : 0.0;
    return (v[k] - v0) / (knots_[k] - t0);
}

std::vector<double> IntensitySchedule::breakpoints() const {
    std::vector<double> b{0.0};
    b.insert(b.end(), knots_.begin(), knots_.end());
    return b;
}

void IntensitySchedule::check_pool(const PoolSpec& pool) const {
    pool.validate();
    for (const int a : amplitudes_)
        if (a > pool.size)
            throw InputError("schedule amplitude " + std::to_string(a) + " exceeds pool size " +
                             std::to_string(pool.size));
}

// ---------------------------------------------------------------------------

double LossDistribution::mean() const {
    double m = 0.0;
    for (std::size_t c = 0; c < probs.size(); ++c)
        m += static_cast<double>(c) * probs[c];
    return m;
}

double LossDistribution::tail(int k) const {
    double s = 0.0;
    for (std::size_t c = static_cast<std::size_t>(std::max(k, 0)); c < probs.size(); ++c)
        s += probs[c];
    return s;
}

LossDistribution LossDistribution::point_mass(int pool_size, int count, double t) {
    LossDistribution d{t, std::vector<double>(static_cast<std::size_t>(pool_size) + 1, 0.0)};
    d.probs.at(static_cast<std::size_t>(count)) = 1.0;
    return d;
}

// ---------------------------------------------------------------------------

double log_binomial(int n, int k) {
    if (k < 0 || k > n)
        return -INFINITY;
    return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

double binomial_ratio(int pool_size, int defaulted, int amplitude) {
    const int alive = pool_size - defaulted;
    if (amplitude > alive)
        return 0.0;
    double r = 1.0;
    for (int i = 0; i < amplitude; ++i)
        r *= static_cast<double>(alive - i) / static_cast<double>(pool_size - i);
    return r;
}

double cluster_lambda_from_table(const PoolSpec& pool, const IntensitySchedule& schedule, int amplitude, double t) {
    if (schedule.model() != ModelKind::gpcl)
        throw InputError("cluster intensities are defined for GPCL schedules only");
    const std::size_t j = schedule.mode_of(amplitude);
    const double value = schedule.cumulated(j, t);
    if (value == 0.0)
        return 0.0;
    return std::exp(std::log(value) - log_binomial(pool.size, amplitude));
}

namespace {

void require_gpcl(const PoolSpec& pool, const IntensitySchedule& schedule) {
    if (schedule.model() != ModelKind::gpcl)
        throw InputError("operation requires a GPCL schedule");
    schedule.check_pool(pool);
}

// ratio[j][y] = C(M - y, alpha_j) / C(M, alpha_j)
std::vector<std::vector<double>> ratio_table(int pool_size, const std::vector<int>& amplitudes) {
    std::vector<std::vector<double>> table;
    table.reserve(amplitudes.size());
    for (const int a : amplitudes) {
        std::vector<double> row(static_cast<std::size_t>(pool_size) + 1);
        for (int y = 0; y <= pool_size; ++y)
            row[static_cast<std::size_t>(y)] = binomial_ratio(pool_size, y, a);
        table.push_back(std::move(row));
    }
    return table;
}

} // namespace

RateMatrix build_cumulated_generator(const PoolSpec& pool, const IntensitySchedule& schedule, double t0, double t1) {
    require_gpcl(pool, schedule);
    if (!(t0 >= 0.0) || !(t1 > t0))
        throw DomainError("cumulated generator needs 0 <= t0 < t1");
    const int m = pool.size;
    RateMatrix g = RateMatrix::Zero(m + 1, m + 1);
    const auto& amps = schedule.amplitudes();
    for (std::size_t j = 0; j < amps.size(); ++j) {
        const double delta = schedule.cumulated(j, t1) - schedule.cumulated(j, t0);
        if (delta == 0.0)
            continue;
        const int a = amps[j];
        for (int y = 0; y + a <= m; ++y) {
            const double rate = binomial_ratio(m, y, a) * delta;
            g(y + a, y) += rate;
            g(y, y) -= rate;
        }
    }
    return g;
}

Eigen::MatrixXd matrix_exponential(const Eigen::MatrixXd& a) {
    if (a.rows() != a.cols())
        throw DomainError("matrix exponential of a non-square matrix");
    if (!a.allFinite())
        throw DomainError("matrix exponential of a matrix with non-finite entries");
    const Eigen::Index n = a.rows();
    if (n == 0)
        return a;

    const double norm = a.cwiseAbs().colwise().sum().maxCoeff();
    int squarings = 0;
    if (norm > 0.5)
        squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
    const Eigen::MatrixXd x = a / std::ldexp(1.0, squarings);

    // Diagonal [8/8] approximant: c_k = (2m-k)! m! / ((2m)! k! (m-k)!)
    constexpr int order = 8;
    double c[order + 1];
    c[0] = 1.0;
    for (int k = 1; k <= order; ++k)
        c[k] = c[k - 1] * (order - k + 1) / (k * (2.0 * order - k + 1));

    const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
    const Eigen::MatrixXd x2 = x * x;
    const Eigen::MatrixXd x4 = x2 * x2;
    const Eigen::MatrixXd x6 = x4 * x2;
    const Eigen::MatrixXd x8 = x4 * x4;
    const Eigen::MatrixXd even = c[0] * id + c[2] * x2 + c[4] * x4 + c[6] * x6 + c[8] * x8;
    const Eigen::MatrixXd odd = x * (c[1] * id + c[3] * x2 + c[5] * x4 + c[7] * x6);

    Eigen::MatrixXd r = (even - odd).partialPivLu().solve(even + odd);
    for (int i = 0; i < squarings; ++i)
        r = r * r;
    return r;
}

Eigen::MatrixXd transition_matrix(const RateMatrix& generator, double* clamped) {
    Eigen::MatrixXd p = matrix_exponential(generator);
    double worst = 0.0;
    for (Eigen::Index j = 0; j < p.cols(); ++j)
        for (Eigen::Index i = 0; i < p.rows(); ++i)
            if (p(i, j) < 0.0) {
                worst = std::max(worst, -p(i, j));
                p(i, j) = 0.0;
            }
    if (worst > 1e-12)
        std::clog << "gpcl: warning: transition matrix clamped a negative entry of magnitude " << worst << '\n';
    if (clamped)
        *clamped = worst;
    const double drift = (p.colwise().sum().array() - 1.0).abs().maxCoeff();
    if (drift > 1e-9)
        throw NumericalError("transition matrix columns do not sum to one (deviation " + std::to_string(drift) + ")");
    return p;
}

namespace {

// Interval boundaries of [0, t] split at the schedule knots.
std::vector<double> segments_to(const IntensitySchedule& schedule, double t) {
    std::vector<double> cuts{0.0};
    for (const double k : schedule.knots()) {
        if (k >= t)
            break;
        cuts.push_back(k);
    }
    if (t > 0.0)
        cuts.push_back(t);
    return cuts;
}

void clamp_negative(std::vector<double>& p) {
    for (auto& x : p)
        if (x < 0.0)
            x = 0.0;
}

} // namespace

LossDistribution gpcl_distribution(const PoolSpec& pool, const IntensitySchedule& schedule, double t) {
    require_gpcl(pool, schedule);
    if (t < 0.0)
        throw DomainError("distribution requested at negative time");
    const int m = pool.size;
    Eigen::VectorXd pi = Eigen::VectorXd::Zero(m + 1);
    pi(0) = 1.0;
    const auto cuts = segments_to(schedule, t);
    for (std::size_t i = 1; i < cuts.size(); ++i)
        pi = transition_matrix(build_cumulated_generator(pool, schedule, cuts[i - 1], cuts[i])) * pi;
    LossDistribution d{t, std::vector<double>(pi.data(), pi.data() + pi.size())};
    clamp_negative(d.probs);
    return d;
}

LossDistribution gpl_distribution(const PoolSpec& pool, const IntensitySchedule& schedule, double t) {
    if (schedule.model() != ModelKind::gpl)
        throw InputError("operation requires a GPL schedule");
    schedule.check_pool(pool);
    if (t < 0.0)
        throw DomainError("distribution requested at negative time");

    const int m = pool.size;
    const auto& amps = schedule.amplitudes();
    std::vector<double> weight(amps.size()); // alpha_j * Lambda0_j(t)
    double total = 0.0;
    for (std::size_t j = 0; j < amps.size(); ++j) {
        const double lambda = schedule.cumulated(j, t);
        total += lambda;
        weight[j] = amps[j] * lambda;
    }

    LossDistribution d{t, std::vector<double>(static_cast<std::size_t>(m) + 1, 0.0)};
    auto& p = d.probs;
    p[0] = std::exp(-total);
    double mass = m > 0 ? p[0] : 0.0;
    for (int n = 1; n < m; ++n) {
        double s = 0.0;
        for (std::size_t j = 0; j < amps.size(); ++j)
            if (amps[j] <= n)
                s += weight[j] * p[static_cast<std::size_t>(n - amps[j])];
        p[static_cast<std::size_t>(n)] = s / n;
        mass += p[static_cast<std::size_t>(n)];
    }
    // Everything at or beyond the pool size is capped into state M.
    if (m > 0)
        p[static_cast<std::size_t>(m)] = std::max(0.0, 1.0 - mass);
    else
        p[0] = 1.0;
    return d;
}

LossDistribution loss_distribution(const PoolSpec& pool, const IntensitySchedule& schedule, double t) {
    return schedule.model() == ModelKind::gpl ? gpl_distribution(pool, schedule, t)
                                              : gpcl_distribution(pool, schedule, t);
}

namespace {

/// Propagates a GPCL distribution with exp(G) v evaluated by a truncated
/// Taylor series on the sparse generator.
class SparsePropagator {
public:
    SparsePropagator(const PoolSpec& pool, const IntensitySchedule& schedule)
        : m_(pool.size), amps_(schedule.amplitudes()), ratio_(ratio_table(pool.size, amps_)),
          coef_(amps_.size(), std::vector<double>(static_cast<std::size_t>(m_) + 1)),
          diag_(static_cast<std::size_t>(m_) + 1), term_(diag_.size()), next_(diag_.size()) {}

    void step(std::vector<double>& v, const std::vector<double>& deltas) {
        double total = 0.0;
        for (const double d : deltas)
            total += d;
        if (total <= 0.0)
            return;
        // |G|_1 <= 2 * sum(deltas); substep so each factor has norm <= 1.
        const int substeps = std::max(1, static_cast<int>(std::ceil(2.0 * total)));
        std::fill(diag_.begin(), diag_.end(), 0.0);
        for (std::size_t j = 0; j < amps_.size(); ++j) {
            const double d = deltas[j] / substeps;
            for (int y = 0; y + amps_[j] <= m_; ++y) {
                const auto k = static_cast<std::size_t>(y);
                coef_[j][k] = d * ratio_[j][k];
                diag_[k] += coef_[j][k];
            }
        }
        for (int s = 0; s < substeps; ++s)
            taylor(v);
        clamp_negative(v);
    }

private:
    // next = G term / k, where G flows mass from y to y + a_j
    double apply(int k) {
        const std::size_t n = diag_.size();
        const double inv = 1.0 / k;
        double* out = next_.data();
        const double* in = term_.data();
        for (std::size_t i = 0; i < n; ++i)
            out[i] = -diag_[i] * in[i];
        for (std::size_t j = 0; j < amps_.size(); ++j) {
            const auto a = static_cast<std::size_t>(amps_[j]);
            const double* c = coef_[j].data();
            for (std::size_t y = 0; y + a < n; ++y)
                out[y + a] += c[y] * in[y];
        }
        double biggest = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            out[i] *= inv;
            biggest = std::max(biggest, std::abs(out[i]));
        }
        return biggest;
    }

    void taylor(std::vector<double>& v) {
        term_ = v;
        for (int k = 1; k <= 40; ++k) {
            const double biggest = apply(k);
            std::swap(term_, next_);
            for (std::size_t i = 0; i < v.size(); ++i)
                v[i] += term_[i];
            if (biggest < 1e-18)
                break;
        }
    }

    int m_;
    std::vector<int> amps_;
    std::vector<std::vector<double>> ratio_;
    std::vector<std::vector<double>> coef_;
    std::vector<double> diag_;
    std::vector<double> term_;
    std::vector<double> next_;
};

} // namespace

std::vector<LossDistribution> loss_term_structure(const PoolSpec& pool, const IntensitySchedule& schedule,
                                                  std::span<const double> times) {
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (!(times[i] >= 0.0))
            throw DomainError("term structure times must be non-negative");
        if (i > 0 && times[i] < times[i - 1])
            throw DomainError("term structure times must be non-decreasing");
    }
    std::vector<LossDistribution> out;
    out.reserve(times.size());
    if (schedule.model() == ModelKind::gpl) {
        for (const double t : times)
            out.push_back(gpl_distribution(pool, schedule, t));
        return out;
    }

    require_gpcl(pool, schedule);
    SparsePropagator prop(pool, schedule);
    std::vector<double> v(static_cast<std::size_t>(pool.size) + 1, 0.0);
    v[0] = 1.0;
    std::vector<double> deltas(schedule.modes());
    const auto& knots = schedule.knots();
    double now = 0.0;
    for (const double t : times) {
        while (now < t) {
            const auto next_knot = std::upper_bound(knots.begin(), knots.end(), now);
            const double end = next_knot == knots.end() ? t : std::min(t, *next_knot);
            for (std::size_t j = 0; j < deltas.size(); ++j)
                deltas[j] = schedule.cumulated(j, end) - schedule.cumulated(j, now);
            prop.step(v, deltas);
            now = end;
        }
        out.push_back({t, v});
    }
    return out;
}

// ---------------------------------------------------------------------------

std::string to_string(Strategy s) {
    switch (s) {
    case Strategy::repeated: return "repeated";
    case Strategy::capped: return "s0";
    case Strategy::name_adjusted: return "s1";
    case Strategy::cluster_adjusted: return "s2";
    }
    return "?";
}

Strategy parse_strategy(const std::string& text) {
    if (text == "repeated")
        return Strategy::repeated;
    if (text == "s0" || text == "capped" || text == "gpl")
        return Strategy::capped;
    if (text == "s1" || text == "name_adjusted")
        return Strategy::name_adjusted;
    if (text == "s2" || text == "cluster_adjusted" || text == "gpcl")
        return Strategy::cluster_adjusted;
    throw InputError("unknown strategy '" + text + "' (expected repeated, s0, s1 or s2)");
}

double counting_intensity(Strategy strategy, const PoolSpec& pool, std::span<const int> amplitudes,
                          std::span<const double> aggregate_rates, int defaults) {
    const int m = pool.size;
    if (defaults < 0 || defaults > m)
        throw DomainError("default count " + std::to_string(defaults) + " outside [0, " + std::to_string(m) + "]");
    if (amplitudes.size() != aggregate_rates.size())
        throw InputError("counting intensity: amplitudes and rates differ in length");

    double h = 0.0;
    for (std::size_t j = 0; j < amplitudes.size(); ++j) {
        const int a = amplitudes[j];
        const double r = aggregate_rates[j];
        switch (strategy) {
        case Strategy::repeated:
        case Strategy::name_adjusted: h += a * r; break;
        case Strategy::capped: h += std::min(a, std::max(m - defaults, 0)) * r; break;
        case Strategy::cluster_adjusted: h += a * binomial_ratio(m, defaults, a) * r; break;
        }
    }
    if (strategy == Strategy::name_adjusted)
        h *= 1.0 - static_cast<double>(defaults) / m;
    return h;
}

} // namespace gpcl
