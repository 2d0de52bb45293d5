#include "gpcl/market_data.hpp"

#include "gpcl/error.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace gpcl {

namespace {

constexpr std::array<std::string_view, 12> kMonths = {
    "Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"};

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos)
        return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        fields.push_back(trim(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start)));
        if (comma == std::string_view::npos)
            break;
        start = comma + 1;
    }
    return fields;
}

double parse_number(std::string_view text) {
    double value = 0.0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc{} || ptr != end || !std::isfinite(value))
        throw InputError("not a finite number: '" + std::string(text) + "'");
    return value;
}

int parse_int(std::string_view text) {
    int value = 0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc{} || ptr != end)
        throw InputError("not an integer: '" + std::string(text) + "'");
    return value;
}

double parse_rate(std::string_view text) {
    if (!text.empty() && text.back() == '%')
        return parse_number(trim(text.substr(0, text.size() - 1))) / 100.0;
    return parse_number(text);
}

bool parse_flag(std::string_view text) {
    if (text == "1" || text == "true" || text == "TRUE" || text == "yes")
        return true;
    if (text == "0" || text == "false" || text == "FALSE" || text == "no")
        return false;
    throw InputError("not a boolean flag: '" + std::string(text) + "'");
}

std::string line_error(const std::string& what, int line_no, const std::string& detail) {
    return what + " line " + std::to_string(line_no) + ": " + detail;
}

std::string format_number(double v) {
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

} // namespace

Date parse_date(std::string_view text) {
    text = trim(text);
    const auto d1 = text.find('-');
    const auto d2 = d1 == text.npos ? text.npos : text.find('-', d1 + 1);
    if (d2 == text.npos)
        throw InputError("bad date '" + std::string(text) + "', expected DD-Mon-YY");
    const int day = parse_int(text.substr(0, d1));
    const auto mon = text.substr(d1 + 1, d2 - d1 - 1);
    const auto it = std::find(kMonths.begin(), kMonths.end(), mon);
    if (it == kMonths.end())
        throw InputError("bad month in date '" + std::string(text) + "'");
    const auto year_text = text.substr(d2 + 1);
    int year = parse_int(year_text);
    if (year_text.size() == 2)
        year += year >= 70 ? 1900 : 2000;
    else if (year_text.size() != 4)
        throw InputError("bad year in date '" + std::string(text) + "'");
    const Date date{std::chrono::year{year},
                    std::chrono::month{static_cast<unsigned>(it - kMonths.begin() + 1)},
                    std::chrono::day{static_cast<unsigned>(day)}};
    if (!date.ok())
        throw InputError("invalid calendar date '" + std::string(text) + "'");
    return date;
}

std::string format_date(Date date) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%02u-%s-%02d", static_cast<unsigned>(date.day()),
                  kMonths[static_cast<unsigned>(date.month()) - 1].data(),
                  static_cast<int>(date.year()) % 100);
    return buf;
}

double year_fraction(Date from, Date to) {
    using std::chrono::sys_days;
    return static_cast<double>((sys_days{to} - sys_days{from}).count()) / 365.0;
}

// ---------------------------------------------------------------------------

DiscountCurve::DiscountCurve(Date valuation_date, std::vector<CurvePillar> pillars)
    : valuation_date_(valuation_date), pillars_(std::move(pillars)) {
    if (pillars_.empty())
        throw InputError("discount curve: no pillars");
    times_.reserve(pillars_.size());
    for (std::size_t i = 0; i < pillars_.size(); ++i) {
        if (!std::isfinite(pillars_[i].zero_rate))
            throw InputError("discount curve: non-finite rate at pillar " + format_date(pillars_[i].date));
        if (i > 0 && std::chrono::sys_days{pillars_[i].date} <= std::chrono::sys_days{pillars_[i - 1].date})
            throw InputError("discount curve: pillar dates not strictly increasing at " +
                             format_date(pillars_[i].date));
        times_.push_back(year_fraction(valuation_date_, pillars_[i].date));
    }
}

DiscountCurve DiscountCurve::flat(Date valuation_date, double rate) {
    using namespace std::chrono;
    return DiscountCurve(valuation_date, {{year_month_day{sys_days{valuation_date} + days{365}}, rate}});
}

double DiscountCurve::zero_rate(double t) const {
    if (t <= times_.front())
        return pillars_.front().zero_rate;
    if (t >= times_.back())
        return pillars_.back().zero_rate;
    const auto hi = static_cast<std::size_t>(std::upper_bound(times_.begin(), times_.end(), t) - times_.begin());
    const std::size_t lo = hi - 1;
    const double w = (t - times_[lo]) / (times_[hi] - times_[lo]);
    return (1.0 - w) * pillars_[lo].zero_rate + w * pillars_[hi].zero_rate;
}

double DiscountCurve::discount(double t) const {
    if (t < 0.0)
        throw DomainError("discount factor requested at negative time " + std::to_string(t));
    return scale_ * std::exp(-zero_rate(t) * t);
}

DiscountCurve DiscountCurve::scaled(double factor) const {
    DiscountCurve copy = *this;
    copy.scale_ *= factor;
    return copy;
}

DiscountCurve load_curve(std::istream& in, Date valuation_date) {
    std::vector<CurvePillar> pillars;
    std::string line;
    int line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        const auto body = trim(line);
        if (body.empty() || body.front() == '#')
            continue;
        const auto fields = split_csv(body);
        if (!header_seen) {
            header_seen = true;
            if (fields.size() >= 2 && fields[0] == "date" && fields[1] == "zero_rate")
                continue;
        }
        if (fields.size() != 2)
            throw InputError(line_error("curve", line_no, "expected 2 fields, got " + std::to_string(fields.size())));
        try {
            pillars.push_back({parse_date(fields[0]), parse_rate(fields[1])});
        } catch (const InputError& e) {
            throw InputError(line_error("curve", line_no, e.what()));
        }
    }
    if (pillars.empty())
        throw InputError("curve: no pillars");
    return DiscountCurve(valuation_date, std::move(pillars));
}

DiscountCurve load_curve_file(const std::string& path, Date valuation_date) {
    std::ifstream in(path);
    if (!in)
        throw InputError("cannot open curve file '" + path + "'");
    return load_curve(in, valuation_date);
}

// ---------------------------------------------------------------------------

std::vector<Date> QuotePanel::maturities() const {
    std::vector<std::chrono::sys_days> days;
    for (const auto& q : index)
        days.push_back(q.maturity);
    for (const auto& q : tranches)
        days.push_back(q.maturity);
    std::sort(days.begin(), days.end());
    days.erase(std::unique(days.begin(), days.end()), days.end());
    return {days.begin(), days.end()};
}

QuotePanel load_quotes(std::istream& in, const Date* valuation_date) {
    QuotePanel panel;
    bool have_valuation = valuation_date != nullptr;
    if (have_valuation)
        panel.valuation_date = *valuation_date;

    std::string line;
    int line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        const auto body = trim(line);
        if (body.empty())
            continue;
        if (body.front() == '#') {
            constexpr std::string_view key = "valuation_date=";
            const auto pos = body.find(key);
            if (pos != body.npos && valuation_date == nullptr) {
                panel.valuation_date = parse_date(body.substr(pos + key.size()));
                have_valuation = true;
            }
            continue;
        }
        const auto fields = split_csv(body);
        if (!header_seen) {
            header_seen = true;
            if (!fields.empty() && fields[0] == "pool")
                continue;
        }
        if (fields.size() != 7)
            throw InputError(line_error("quotes", line_no, "expected 7 fields, got " + std::to_string(fields.size())));
        try {
            const std::string pool(fields[0]);
            const Date maturity = parse_date(fields[1]);
            if (fields[4].empty())
                throw InputError("missing quote");
            if (fields[5].empty())
                throw InputError("missing bid_ask");
            const double quote = parse_number(fields[4]);
            const double width = parse_number(fields[5]);
            if (!(width > 0.0))
                throw InputError("bid_ask must be positive");
            const bool upfront = fields[6].empty() ? false : parse_flag(fields[6]);

            if (fields[2].empty() && fields[3].empty()) {
                if (upfront)
                    throw InputError("index quotes cannot be upfront");
                if (!(quote > 0.0))
                    throw InputError("index spread must be positive");
                panel.index.push_back({pool, maturity, quote, width});
                continue;
            }
            if (fields[2].empty() || fields[3].empty())
                throw InputError("tranche rows need both attach and detach");
            const double a = parse_number(fields[2]);
            const double b = parse_number(fields[3]);
            if (!(a >= 0.0 && a < b && b <= 1.0))
                throw InputError("need 0 <= attach < detach <= 1");
            panel.tranches.push_back({pool, maturity, a, b, quote, width, upfront,
                                      upfront ? kEquityRunningBp : 0.0});
        } catch (const InputError& e) {
            throw InputError(line_error("quotes", line_no, e.what()));
        }
    }
    if (!have_valuation)
        throw InputError("quotes: no valuation date (add '# valuation_date=DD-Mon-YY' or pass one)");

    using std::chrono::sys_days;
    for (const auto d : panel.maturities())
        if (sys_days{d} <= sys_days{panel.valuation_date})
            throw InputError("quotes: maturity " + format_date(d) + " not after valuation date");

    std::stable_sort(panel.index.begin(), panel.index.end(),
                     [](const auto& x, const auto& y) { return sys_days{x.maturity} < sys_days{y.maturity}; });
    std::stable_sort(panel.tranches.begin(), panel.tranches.end(), [](const auto& x, const auto& y) {
        if (x.maturity != y.maturity)
            return sys_days{x.maturity} < sys_days{y.maturity};
        return x.attachment < y.attachment;
    });
    return panel;
}

QuotePanel load_quotes_file(const std::string& path, const Date* valuation_date) {
    std::ifstream in(path);
    if (!in)
        throw InputError("cannot open quotes file '" + path + "'");
    return load_quotes(in, valuation_date);
}

void write_quotes(std::ostream& out, const QuotePanel& panel) {
    out << "# valuation_date=" << format_date(panel.valuation_date) << '\n';
    out << "pool,maturity,attach,detach,quote_bp,bid_ask_bp,is_upfront\n";
    for (const auto& q : panel.index)
        out << q.pool << ',' << format_date(q.maturity) << ",,," << format_number(q.spread_bp) << ','
            << format_number(q.bid_ask_bp) << ",0\n";
    for (const auto& q : panel.tranches)
        out << q.pool << ',' << format_date(q.maturity) << ',' << format_number(q.attachment) << ','
            << format_number(q.detachment) << ',' << format_number(q.quote_bp) << ','
            << format_number(q.bid_ask_bp) << ',' << (q.is_upfront ? 1 : 0) << '\n';
}

nlohmann::json to_json(const QuotePanel& panel) {
    nlohmann::json j;
    j["valuation_date"] = format_date(panel.valuation_date);
    j["index"] = nlohmann::json::array();
    for (const auto& q : panel.index)
        j["index"].push_back({{"pool", q.pool},
                              {"maturity", format_date(q.maturity)},
                              {"spread_bp", q.spread_bp},
                              {"bid_ask_bp", q.bid_ask_bp}});
    j["tranches"] = nlohmann::json::array();
    for (const auto& q : panel.tranches)
        j["tranches"].push_back({{"pool", q.pool},
                                 {"maturity", format_date(q.maturity)},
                                 {"attachment", q.attachment},
                                 {"detachment", q.detachment},
                                 {"quote_bp", q.quote_bp},
                                 {"bid_ask_bp", q.bid_ask_bp},
                                 {"is_upfront", q.is_upfront},
                                 {"running_bp", q.running_bp}});
    return j;
}

nlohmann::json to_json(const DiscountCurve& curve) {
    nlohmann::json j;
    j["valuation_date"] = format_date(curve.valuation_date());
    j["pillars"] = nlohmann::json::array();
    for (const auto& p : curve.pillars())
        j["pillars"].push_back({{"date", format_date(p.date)}, {"zero_rate", p.zero_rate}});
    return j;
}

// ---------------------------------------------------------------------------

PaymentSchedule quarterly_schedule(Date valuation_date, Date maturity) {
    using namespace std::chrono;
    const sys_days start{valuation_date};
    const sys_days end{maturity};
    if (end <= start)
        throw InputError("payment schedule: maturity " + format_date(maturity) + " not after valuation date");

    PaymentSchedule s;
    year_month ym{valuation_date.year(), valuation_date.month()};
    // Step forward to the first quarterly month.
    while ((static_cast<unsigned>(ym.month()) % 3) != 0)
        ym += months{1};
    for (;; ym += months{3}) {
        const sys_days d{ym / day{20}};
        if (d <= start)
            continue;
        if (d >= end)
            break;
        s.dates.push_back(year_month_day{d});
    }
    s.dates.push_back(maturity);

    double prev = 0.0;
    for (const auto d : s.dates) {
        const double t = year_fraction(valuation_date, d);
        s.times.push_back(t);
        s.accruals.push_back(t - prev);
        prev = t;
    }
    return s;
}

} // namespace gpcl
