#include "support.hpp"

#include "gpcl/error.hpp"
#include "gpcl/market_data.hpp"

#include <doctest.h>

#include <sstream>

using namespace gpcl;
using namespace std::chrono;

namespace {
const Date kValuation = parse_date("02-Oct-06");
}

TEST_CASE("dates parse and format") {
    CHECK(parse_date("20-Dec-06") == year{2006} / December / 20);
    CHECK(parse_date("20-Dec-2016") == year{2016} / December / 20);
    CHECK(parse_date("01-Jan-75") == year{1975} / January / 1);
    CHECK(format_date(year{2009} / December / 20) == "20-Dec-09");
    CHECK_THROWS_AS(parse_date("31-Feb-07"), InputError);
    CHECK_THROWS_AS(parse_date("20/12/06"), InputError);
    CHECK(year_fraction(kValuation, parse_date("02-Oct-07")) == doctest::Approx(1.0));
}

TEST_CASE("curve rows become pillars") {
    std::istringstream in("date,zero_rate\n20-Dec-06,3.41%\n20-Mar-07,0.0357\n");
    const auto curve = load_curve(in, kValuation);
    REQUIRE(curve.pillars().size() == 2);
    CHECK(curve.pillars()[0].date == year{2006} / December / 20);
    CHECK(curve.pillars()[0].zero_rate == doctest::Approx(0.0341).epsilon(1e-14));
    CHECK(curve.pillars()[1].zero_rate == doctest::Approx(0.0357).epsilon(1e-14));
}

TEST_CASE("bad curves are rejected") {
    std::istringstream empty("");
    CHECK_THROWS_WITH_AS(load_curve(empty, kValuation), doctest::Contains("no pillars"), InputError);
    std::istringstream header_only("date,zero_rate\n");
    CHECK_THROWS_AS(load_curve(header_only, kValuation), InputError);
    std::istringstream unordered("20-Mar-07,3.57%\n20-Dec-06,3.41%\n");
    CHECK_THROWS_AS(load_curve(unordered, kValuation), InputError);
    std::istringstream garbage("20-Dec-06,abc\n");
    CHECK_THROWS_AS(load_curve(garbage, kValuation), InputError);
}

TEST_CASE("discount factors") {
    const auto curve = test::eur_curve(kValuation);
    CHECK(curve.pillars().size() == 41);
    CHECK(curve.discount(0.0) == 1.0);
    CHECK_THROWS_AS(curve.discount(-0.1), DomainError);

    const double t1 = year_fraction(kValuation, parse_date("20-Dec-06"));
    CHECK(curve.discount(t1) == doctest::Approx(std::exp(-0.0341 * t1)).epsilon(1e-14));
    // flat before the first pillar
    CHECK(curve.zero_rate(0.05) == doctest::Approx(0.0341).epsilon(1e-14));

    // hand interpolation between 20-Dec-06 (3.41%) and 20-Mar-07 (3.57%)
    const double t2 = year_fraction(kValuation, parse_date("20-Mar-07"));
    const double tm = 0.5 * (t1 + t2);
    const double r = 0.0341 + (0.0357 - 0.0341) * 0.5;
    CHECK(curve.discount(tm) == doctest::Approx(std::exp(-r * tm)).epsilon(1e-14));

    // flat beyond the last pillar
    CHECK(curve.zero_rate(40.0) == doctest::Approx(0.0388).epsilon(1e-14));
    for (double t = 0.0; t < 15.0; t += 0.1) {
        CHECK(curve.discount(t) > 0.0);
        CHECK(curve.discount(t) <= 1.0);
        CHECK(curve.discount(t + 0.1) < curve.discount(t));
    }
}

TEST_CASE("iTraxx quotes load") {
    const auto panel = test::itraxx_panel();
    CHECK(panel.valuation_date == kValuation);
    CHECK(panel.index.size() == 4);
    CHECK(panel.tranches.size() == 21);
    CHECK(panel.maturities().size() == 4);

    const auto find = [&](const char* mat, double a) {
        for (const auto& q : panel.tranches)
            if (q.maturity == parse_date(mat) && std::abs(q.attachment - a) < 1e-12)
                return q;
        FAIL("tranche not found");
        return TrancheQuote{};
    };
    const auto mezz = find("20-Dec-11", 0.03);
    CHECK(mezz.quote_bp == 75.0);
    CHECK(mezz.bid_ask_bp == 1.0);
    CHECK_FALSE(mezz.is_upfront);

    const auto equity = find("20-Dec-11", 0.0);
    CHECK(equity.is_upfront);
    CHECK(equity.mid() == doctest::Approx(0.1975));
    CHECK(equity.width() == doctest::Approx(0.0025));
    CHECK(equity.running() == doctest::Approx(0.05));
}

TEST_CASE("CDX quotes load") {
    const auto panel = test::cdx_panel();
    CHECK(panel.index.size() == 4);
    CHECK(panel.tranches.size() == 20);
    bool seen = false;
    for (const auto& q : panel.tranches)
        if (q.maturity == parse_date("20-Dec-16") && std::abs(q.attachment - 0.15) < 1e-12) {
            CHECK(q.quote_bp == 15.5);
            CHECK(q.bid_ask_bp == 0.9);
            CHECK(q.detachment == doctest::Approx(0.30));
            seen = true;
        }
    CHECK(seen);
}

TEST_CASE("quote validation") {
    const std::string header = "# valuation_date=02-Oct-06\npool,maturity,attach,detach,quote_bp,bid_ask_bp,is_upfront\n";
    std::istringstream inverted(header + "x,20-Dec-11,0.06,0.03,10,1,0\n");
    CHECK_THROWS_AS(load_quotes(inverted), InputError);
    std::istringstream no_width(header + "x,20-Dec-11,0.03,0.06,10,,0\n");
    CHECK_THROWS_WITH_AS(load_quotes(no_width), doctest::Contains("bid_ask"), InputError);
    std::istringstream zero_width(header + "x,20-Dec-11,0.03,0.06,10,0,0\n");
    CHECK_THROWS_AS(load_quotes(zero_width), InputError);
    std::istringstream expired(header + "x,20-Dec-05,,,30,0.5,0\n");
    CHECK_THROWS_AS(load_quotes(expired), InputError);
    std::istringstream no_date("pool,maturity,attach,detach,quote_bp,bid_ask_bp,is_upfront\nx,20-Dec-11,,,30,0.5,0\n");
    CHECK_THROWS_AS(load_quotes(no_date), InputError);
    const Date v = kValuation;
    std::istringstream given("pool,maturity,attach,detach,quote_bp,bid_ask_bp,is_upfront\nx,20-Dec-11,,,30,0.5,0\n");
    CHECK(load_quotes(given, &v).index.size() == 1);
}

TEST_CASE("quotes round-trip through the writer") {
    const auto panel = test::itraxx_panel();
    std::ostringstream out;
    write_quotes(out, panel);
    std::istringstream in(out.str());
    const auto again = load_quotes(in);
    CHECK(again.valuation_date == panel.valuation_date);
    REQUIRE(again.tranches.size() == panel.tranches.size());
    for (std::size_t i = 0; i < panel.tranches.size(); ++i) {
        CHECK(again.tranches[i].maturity == panel.tranches[i].maturity);
        CHECK(again.tranches[i].attachment == panel.tranches[i].attachment);
        CHECK(again.tranches[i].detachment == panel.tranches[i].detachment);
        CHECK(again.tranches[i].quote_bp == panel.tranches[i].quote_bp);
        CHECK(again.tranches[i].bid_ask_bp == panel.tranches[i].bid_ask_bp);
        CHECK(again.tranches[i].is_upfront == panel.tranches[i].is_upfront);
    }
    REQUIRE(again.index.size() == panel.index.size());
    for (std::size_t i = 0; i < panel.index.size(); ++i)
        CHECK(again.index[i].spread_bp == panel.index[i].spread_bp);
}

TEST_CASE("quarterly schedule") {
    const auto s = quarterly_schedule(kValuation, parse_date("20-Dec-11"));
    REQUIRE(s.dates.size() == 21);
    CHECK(s.dates.front() == year{2006} / December / 20);
    CHECK(s.dates.back() == year{2011} / December / 20);
    CHECK(s.accruals.front() == doctest::Approx(79.0 / 365.0));
    double sum = 0.0;
    for (std::size_t i = 0; i < s.times.size(); ++i) {
        sum += s.accruals[i];
        CHECK(sum == doctest::Approx(s.times[i]));
    }
    CHECK_THROWS_AS(quarterly_schedule(kValuation, kValuation), InputError);
}
