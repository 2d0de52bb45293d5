#include "support.hpp"

#include "gpcl/error.hpp"
#include "gpcl/loss_engine.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>

using namespace gpcl;

namespace {

// sum_{k<=30} A^k / k!, the series oracle for the matrix exponential
Eigen::MatrixXd taylor_exp(const Eigen::MatrixXd& a, int order = 30) {
    Eigen::MatrixXd term = Eigen::MatrixXd::Identity(a.rows(), a.cols());
    Eigen::MatrixXd sum = term;
    for (int k = 1; k <= order; ++k) {
        term = term * a / k;
        sum += term;
    }
    return sum;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

} // namespace

TEST_CASE("pool validation") {
    CHECK_NOTHROW(PoolSpec{}.validate());
    CHECK_THROWS_AS((PoolSpec{0, 0.4}.validate()), InputError);
    CHECK_THROWS_AS((PoolSpec{125, 1.5}.validate()), InputError);
    CHECK_THROWS_AS((PoolSpec{125, -0.1}.validate()), InputError);
}

TEST_CASE("schedule validation and interpolation") {
    CHECK_THROWS_AS(IntensitySchedule(ModelKind::gpcl, {1}, {3.0, 5.0}, {{0.2, 0.1}}), InputError);
    CHECK_THROWS_AS(IntensitySchedule(ModelKind::gpcl, {1}, {5.0, 3.0}, {{0.1, 0.2}}), InputError);
    CHECK_THROWS_AS(IntensitySchedule(ModelKind::gpcl, {0}, {3.0}, {{0.1}}), InputError);
    CHECK_THROWS_AS(IntensitySchedule(ModelKind::gpcl, {2, 2}, {3.0}, {{0.1}, {0.1}}), InputError);
    CHECK_THROWS_AS(IntensitySchedule(ModelKind::gpcl, {1}, {3.0}, {{-0.1}}), InputError);
    CHECK_THROWS_AS(IntensitySchedule(ModelKind::gpcl, {1}, {3.0}, {{NAN}}), InputError);

    const IntensitySchedule s(ModelKind::gpcl, {3, 1}, {2.0, 4.0}, {{0.2, 0.4}, {1.0, 3.0}});
    CHECK(s.amplitudes() == std::vector<int>{1, 3});
    CHECK(s.cumulated(0, 0.0) == 0.0);
    CHECK(s.cumulated(0, 1.0) == doctest::Approx(0.5));
    CHECK(s.cumulated(0, 3.0) == doctest::Approx(2.0));
    CHECK(s.cumulated(0, 6.0) == doctest::Approx(5.0)); // last slope extrapolated
    CHECK(s.rate(1, 3.0) == doctest::Approx(0.1));
    CHECK_THROWS_AS(s.mode_of(2), InputError);
    CHECK_THROWS_AS(IntensitySchedule(ModelKind::gpcl, {200}, {1.0}, {{0.1}}).check_pool(PoolSpec{}), InputError);
}

TEST_CASE("cluster intensities from the table convention") {
    const auto s = test::itraxx_gpcl();
    const PoolSpec pool;
    const double t3 = s.knots()[0];
    CHECK(cluster_lambda_from_table(pool, s, 1, t3) == doctest::Approx(0.882 / 125));
    CHECK(cluster_lambda_from_table(pool, s, 1, 0.0) == 0.0);
    CHECK(cluster_lambda_from_table(pool, s, 125, s.knots()[3]) == doctest::Approx(0.042));
    CHECK(cluster_lambda_from_table(pool, s, 3, t3) ==
          doctest::Approx(0.128 / std::exp(log_binomial(125, 3))).epsilon(1e-12));
}

TEST_CASE("binomial ratio") {
    CHECK(binomial_ratio(125, 0, 7) == 1.0);
    CHECK(binomial_ratio(125, 125, 1) == 0.0);
    CHECK(binomial_ratio(125, 120, 6) == 0.0);
    CHECK(binomial_ratio(10, 3, 2) == doctest::Approx(21.0 / 45.0));
    CHECK(binomial_ratio(125, 1, 125) == 0.0);
    for (int y = 0; y < 125; ++y)
        CHECK(binomial_ratio(125, y, 1) == doctest::Approx((125.0 - y) / 125.0));
}

TEST_CASE("generator construction") {
    const PoolSpec pool{3, 0.4};
    CHECK(build_cumulated_generator(pool, IntensitySchedule::zero(ModelKind::gpcl, {1}, {1.0}), 0.0, 1.0).isZero());

    // table value 3c means cluster intensity c for each single name
    const double c = 0.7;
    const IntensitySchedule s(ModelKind::gpcl, {1}, {1.0}, {{3.0 * c}});
    const auto g = build_cumulated_generator(pool, s, 0.0, 1.0);
    CHECK(g(1, 0) == doctest::Approx(3 * c));
    CHECK(g(2, 1) == doctest::Approx(2 * c));
    CHECK(g(3, 2) == doctest::Approx(c));
    CHECK(g(0, 0) == doctest::Approx(-3 * c));
    CHECK(g(1, 1) == doctest::Approx(-2 * c));
    CHECK(g(2, 2) == doctest::Approx(-c));
    CHECK(g(3, 3) == 0.0);

    const auto big = build_cumulated_generator(PoolSpec{}, test::itraxx_gpcl(), 0.0, 10.0);
    for (Eigen::Index y = 0; y < big.cols(); ++y)
        CHECK(std::abs(big.col(y).sum()) < 1e-12);
    for (Eigen::Index x = 0; x < big.rows(); ++x)
        for (Eigen::Index y = x + 1; y < big.cols(); ++y)
            CHECK(big(x, y) == 0.0);

    CHECK_THROWS_AS(build_cumulated_generator(pool, s, 1.0, 1.0), DomainError);
    CHECK_THROWS_AS(build_cumulated_generator(pool, s, -1.0, 1.0), DomainError);
    CHECK_THROWS_AS(build_cumulated_generator(pool, IntensitySchedule(ModelKind::gpl, {1}, {1.0}, {{1.0}}), 0.0, 1.0),
                    InputError);
}

TEST_CASE("matrix exponential") {
    CHECK(matrix_exponential(Eigen::MatrixXd::Zero(5, 5)).isIdentity(0.0));

    const double a = 0.8;
    Eigen::MatrixXd g(2, 2);
    g << -a, 0, a, 0;
    const auto e = matrix_exponential(g);
    CHECK(e(0, 0) == doctest::Approx(std::exp(-a)).epsilon(1e-15));
    CHECK(e(1, 0) == doctest::Approx(1 - std::exp(-a)).epsilon(1e-15));
    CHECK(e(0, 1) == 0.0);
    CHECK(e(1, 1) == doctest::Approx(1.0).epsilon(1e-15));

    // 126x126 GPCL generator against the order-30 series. The 3y block has a
    // small enough norm for the plain series to converge.
    const auto big = build_cumulated_generator(PoolSpec{}, test::itraxx_gpcl(), 0.0, 1.0);
    const auto ours = matrix_exponential(big);
    const auto oracle = taylor_exp(big);
    CHECK((ours - oracle).cwiseAbs().maxCoeff() < 1e-8);

    // larger norm: compare against the series on a scaled-down matrix squared up
    const auto ten = build_cumulated_generator(PoolSpec{}, test::itraxx_gpcl(), 0.0, 10.0);
    Eigen::MatrixXd sq = taylor_exp(ten / 64.0);
    for (int i = 0; i < 6; ++i)
        sq = sq * sq;
    CHECK((matrix_exponential(ten) - sq).cwiseAbs().maxCoeff() < 1e-8);

    Eigen::MatrixXd bad = Eigen::MatrixXd::Zero(2, 2);
    bad(0, 0) = NAN;
    CHECK_THROWS_AS(matrix_exponential(bad), DomainError);
}

TEST_CASE("transition matrix is stochastic") {
    const auto g = build_cumulated_generator(PoolSpec{}, test::itraxx_gpcl(), 0.0, 10.2);
    double clamped = -1.0;
    const auto p = transition_matrix(g, &clamped);
    CHECK(clamped >= 0.0);
    CHECK((p.array() >= 0.0).all());
    for (Eigen::Index y = 0; y < p.cols(); ++y)
        CHECK(std::abs(p.col(y).sum() - 1.0) < 1e-10);
}

TEST_CASE("GPCL distribution special cases") {
    const PoolSpec pool;
    const auto zero = gpcl_distribution(pool, IntensitySchedule::zero(ModelKind::gpcl, {1, 5}, {3.0, 5.0}), 4.0);
    CHECK(zero.probs[0] == 1.0);
    CHECK(zero.mean() == 0.0);

    // a single armageddon cluster: two-state chain
    const double c = 0.3;
    const IntensitySchedule arm(ModelKind::gpcl, {125}, {1.0}, {{c}});
    const auto d = gpcl_distribution(pool, arm, 1.0);
    CHECK(d.probs[0] == doctest::Approx(std::exp(-c)).epsilon(1e-12));
    CHECK(d.probs[125] == doctest::Approx(1 - std::exp(-c)).epsilon(1e-12));
    CHECK(std::accumulate(d.probs.begin() + 1, d.probs.end() - 1, 0.0) < 1e-14);

    CHECK_THROWS_AS(gpcl_distribution(pool, arm, -1.0), DomainError);
    CHECK(gpcl_distribution(pool, arm, 0.0).probs[0] == 1.0);
}

TEST_CASE("GPCL single names match the binomial pure-death law") {
    for (const int m : {5, 30, 125}) {
        const PoolSpec pool{m, 0.4};
        const double lt = 0.35; // cluster cumulated intensity at t = 2
        const IntensitySchedule s(ModelKind::gpcl, {1}, {1.0, 2.0}, {{0.5 * m * lt, m * lt}});
        const auto d = gpcl_distribution(pool, s, 2.0);
        CHECK(max_abs_diff(d.probs, test::binomial_pmf(m, 1 - std::exp(-lt))) < 1e-8);
        const auto ts = loss_term_structure(pool, s, std::vector<double>{2.0});
        CHECK(max_abs_diff(ts[0].probs, d.probs) < 1e-10);
    }
}

TEST_CASE("GPL distribution") {
    // single mode, pool large enough: truncated Poisson
    const PoolSpec pool;
    const IntensitySchedule one(ModelKind::gpl, {1}, {1.0}, {{2.5}});
    const auto d = gpl_distribution(pool, one, 1.0);
    const auto p = test::poisson_pmf(2.5, 125);
    for (int k = 0; k < 125; ++k)
        CHECK(d.probs[static_cast<std::size_t>(k)] == doctest::Approx(p[static_cast<std::size_t>(k)]).epsilon(1e-12));

    // small pool: cap collects the tail
    const PoolSpec small{10, 0.4};
    const IntensitySchedule two(ModelKind::gpl, {2, 3}, {1.0}, {{1.4}, {0.9}});
    const auto capped = gpl_distribution(small, two, 1.0);
    const auto oracle = test::capped_compound_by_convolution(10, {2, 3}, {1.4, 0.9});
    CHECK(max_abs_diff(capped.probs, oracle) < 1e-12);

    CHECK_THROWS_AS(gpl_distribution(small, IntensitySchedule(ModelKind::gpl, {11}, {1.0}, {{0.1}}), 1.0), InputError);
}

TEST_CASE("sparse term structure agrees with the dense engine") {
    const auto s = test::itraxx_gpcl();
    const PoolSpec pool;
    const std::vector<double> times{0.5, 3.219178082191781, 4.0, 7.0, 10.224657534246575, 11.0};
    const auto ts = loss_term_structure(pool, s, times);
    for (std::size_t i = 0; i < times.size(); ++i)
        CHECK(max_abs_diff(ts[i].probs, gpcl_distribution(pool, s, times[i]).probs) < 1e-10);

    const auto gpl = test::itraxx_gpl();
    const auto tg = loss_term_structure(pool, gpl, times);
    for (std::size_t i = 0; i < times.size(); ++i)
        CHECK(max_abs_diff(tg[i].probs, gpl_distribution(pool, gpl, times[i]).probs) == 0.0);

    CHECK_THROWS_AS(loss_term_structure(pool, s, std::vector<double>{2.0, 1.0}), DomainError);
}

TEST_CASE("distribution invariants") {
    const PoolSpec pool;
    for (const auto& s : {test::itraxx_gpl(), test::itraxx_gpcl()}) {
        std::vector<double> times;
        for (double t = 0.25; t <= 12.0; t += 0.25)
            times.push_back(t);
        const auto ts = loss_term_structure(pool, s, times);
        for (std::size_t i = 0; i < ts.size(); ++i) {
            const auto& p = ts[i].probs;
            CHECK(std::all_of(p.begin(), p.end(), [](double x) { return x >= 0.0; }));
            CHECK(std::abs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0) < 1e-10);
            if (i > 0)
                for (int k = 1; k <= pool.size; ++k)
                    CHECK(ts[i].tail(k) >= ts[i - 1].tail(k) - 1e-12);
        }
    }
}

TEST_CASE("counting intensities") {
    const PoolSpec pool;
    const std::vector<int> amps{1, 3, 15, 125};
    const std::vector<double> rates{0.3, 0.1, 0.01, 0.004};
    const double h0 = counting_intensity(Strategy::repeated, pool, amps, rates, 0);
    CHECK(h0 == doctest::Approx(0.3 + 0.3 + 0.15 + 0.5));
    for (const auto s : {Strategy::capped, Strategy::name_adjusted, Strategy::cluster_adjusted})
        CHECK(counting_intensity(s, pool, amps, rates, 0) == doctest::Approx(h0));
    for (int c = 0; c <= 125; ++c)
        CHECK(counting_intensity(Strategy::name_adjusted, pool, amps, rates, c) / h0 ==
              doctest::Approx(1.0 - c / 125.0));
    CHECK(counting_intensity(Strategy::cluster_adjusted, pool, amps, rates, 125) == 0.0);
    CHECK(counting_intensity(Strategy::capped, pool, amps, rates, 125) == 0.0);
    CHECK_THROWS_AS(counting_intensity(Strategy::capped, pool, amps, rates, 126), DomainError);
    CHECK_THROWS_AS(counting_intensity(Strategy::capped, pool, amps, rates, -1), DomainError);

    CHECK(parse_strategy("s2") == Strategy::cluster_adjusted);
    CHECK(to_string(Strategy::capped) == "s0");
    CHECK_THROWS_AS(parse_strategy("s3"), InputError);
}
