#pragma once

#include <chrono>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace gpcl {

using Date = std::chrono::year_month_day;

/// Parses `DD-Mon-YY` (two-digit years map to 19xx for >= 70) or `DD-Mon-YYYY`.
Date parse_date(std::string_view text);

/// Formats as `DD-Mon-YY`.
std::string format_date(Date date);

/// ACT/365 year fraction between two dates (negative if `to` precedes `from`).
double year_fraction(Date from, Date to);

struct CurvePillar {
    Date date;
    double zero_rate; // continuously compounded, ACT/365
};

/// Zero-rate discount curve anchored at a valuation date.
///
/// Rates are interpolated linearly in the year fraction between pillars and
/// held flat beyond the first and last pillar, so D(t) = exp(-r(t) t).
class DiscountCurve {
public:
    DiscountCurve(Date valuation_date, std::vector<CurvePillar> pillars);

    /// Flat continuously-compounded curve, mostly for tests.
    static DiscountCurve flat(Date valuation_date, double rate);

    Date valuation_date() const { return valuation_date_; }
    const std::vector<CurvePillar>& pillars() const { return pillars_; }

    double zero_rate(double t) const;
    double discount(double t) const;

    /// Copy whose discount factors are all multiplied by `factor`.
    DiscountCurve scaled(double factor) const;

private:
    Date valuation_date_;
    std::vector<CurvePillar> pillars_;
    std::vector<double> times_;
    double scale_ = 1.0;
};

/// Reads `date,zero_rate` rows. Rates are decimals (0.0341) or percent-suffixed (3.41%).
DiscountCurve load_curve(std::istream& in, Date valuation_date);
DiscountCurve load_curve_file(const std::string& path, Date valuation_date);

struct TrancheQuote {
    std::string pool;
    Date maturity;
    double attachment = 0.0;
    double detachment = 0.0;
    double quote_bp = 0.0;      // running spread, or upfront in bp of tranche notional
    double bid_ask_bp = 0.0;
    bool is_upfront = false;
    double running_bp = 0.0;    // 500 for upfront-quoted tranches, otherwise 0

    double mid() const { return quote_bp * 1e-4; }
    double width() const { return bid_ask_bp * 1e-4; }
    double running() const { return running_bp * 1e-4; }
};

struct IndexQuote {
    std::string pool;
    Date maturity;
    double spread_bp = 0.0;
    double bid_ask_bp = 0.0;

    double mid() const { return spread_bp * 1e-4; }
    double width() const { return bid_ask_bp * 1e-4; }
};

inline constexpr double kEquityRunningBp = 500.0;

struct QuotePanel {
    Date valuation_date;
    std::vector<IndexQuote> index;      // sorted by maturity
    std::vector<TrancheQuote> tranches; // sorted by maturity, then attachment

    std::vector<Date> maturities() const;
    std::size_t size() const { return index.size() + tranches.size(); }
    bool empty() const { return size() == 0; }
};

/// Reads the quotes CSV:
///   pool,maturity,attach,detach,quote_bp,bid_ask_bp,is_upfront
/// Index rows leave attach/detach empty. A leading `# valuation_date=DD-Mon-YY`
/// comment sets the valuation date unless one is passed explicitly.
QuotePanel load_quotes(std::istream& in, const Date* valuation_date = nullptr);
QuotePanel load_quotes_file(const std::string& path, const Date* valuation_date = nullptr);

/// Writes the panel back in the CSV layout accepted by `load_quotes`.
void write_quotes(std::ostream& out, const QuotePanel& panel);

nlohmann::json to_json(const QuotePanel& panel);
nlohmann::json to_json(const DiscountCurve& curve);

/// Premium payment dates T_1 < ... < T_b with accruals delta_i = T_i - T_{i-1}.
struct PaymentSchedule {
    std::vector<Date> dates;
    std::vector<double> times;    // year fractions from valuation
    std::vector<double> accruals; // delta_i, with T_0 the valuation date

    double maturity() const { return times.back(); }
};

/// Quarterly schedule on the 20th of Mar/Jun/Sep/Dec strictly after the
/// valuation date, ending on `maturity`.
PaymentSchedule quarterly_schedule(Date valuation_date, Date maturity);

} // namespace gpcl
