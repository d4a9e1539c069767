#include "stst/backtest.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace stst {

namespace {

double price_or_throw(const std::map<std::string, double>& prices, const std::string& ticker,
                      const Date& date) {
    auto it = prices.find(ticker);
    if (it == prices.end())
        throw ValueError("simulation: no price for " + ticker + " on " + date.str());
    return it->second;
}

bool holdings_changed(const std::map<std::string, double>& before,
                      const std::map<std::string, double>& after) {
    if (before.size() != after.size()) return true;
    auto a = before.begin();
    auto b = after.begin();
    for (; a != before.end(); ++a, ++b) {
        if (a->first != b->first) return true;
        const double tol = 1e-12 * std::max(1.0, std::abs(a->second));
        if (std::abs(a->second - b->second) > tol) return true;
    }
    return false;
}

}  // namespace

std::vector<std::string> select_portfolio(const DailyPredictions& preds, double threshold,
                                          std::size_t k) {
    std::vector<std::pair<std::string, double>> positives;
    for (const auto& [ticker, prob] : preds.entries)
        if (prob > threshold) positives.emplace_back(ticker, prob);
    std::sort(positives.begin(), positives.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    if (positives.size() > k) positives.resize(k);
    std::vector<std::string> out;
    out.reserve(positives.size());
    for (const auto& [ticker, prob] : positives) out.push_back(ticker);
    return out;
}

PortfolioState step_portfolio(const PortfolioState& state, const std::vector<std::string>& selection,
                              const std::map<std::string, double>& prices, const Date& date) {
    double value = state.cash;
    for (const auto& [ticker, shares] : state.holdings)
        value += shares * price_or_throw(prices, ticker, date);

    PortfolioState next;
    if (selection.empty()) {
        next.cash = value;
        return next;
    }
    const double allocation = value / double(selection.size());
    next.cash = 0.0;
    for (const auto& ticker : selection)
        next.holdings[ticker] = allocation / price_or_throw(prices, ticker, date);
    return next;
}

double annualized_return(double cumulative, const Date& start, const Date& end) {
    const long span = days_between(start, end);
    if (span <= 0)
        throw ValueError("annualized_return: span must be positive, got [" + start.str() + ", " +
                         end.str() + "]");
    return std::pow(1.0 + cumulative, 365.25 / double(span)) - 1.0;
}

SimulationResult run_simulation(const std::vector<DailyPredictions>& days, const PriceTable& prices,
                                double initial, double threshold, std::size_t k) {
    if (days.empty()) throw ValueError("run_simulation: no prediction days");
    for (std::size_t i = 1; i < days.size(); ++i)
        if (!(days[i - 1].date < days[i].date))
            throw ValueError("run_simulation: prediction days not strictly increasing at " +
                             days[i].date.str());

    SimulationResult result;
    PortfolioState state;
    state.cash = initial;

    for (const auto& day : days) {
        std::set<std::string> seen;
        for (const auto& [ticker, prob] : day.entries)
            if (!seen.insert(ticker).second)
                throw ValueError("run_simulation: duplicate prediction for " + ticker + " on " +
                                 day.date.str());

        // Prices for everything held or about to be bought.
        const std::vector<std::string> selection = select_portfolio(day, threshold, k);
        std::map<std::string, double> quotes;
        auto quote = [&](const std::string& ticker) {
            if (quotes.count(ticker)) return;
            auto series = prices.find(ticker);
            if (series == prices.end() || !series->second.count(day.date))
                throw ValueError("simulation: no price for " + ticker + " on " + day.date.str());
            quotes[ticker] = series->second.at(day.date);
        };
        for (const auto& [ticker, shares] : state.holdings) quote(ticker);
        for (const auto& ticker : selection) quote(ticker);

        const PortfolioState next = step_portfolio(state, selection, quotes, day.date);
        double value = next.cash;
        for (const auto& [ticker, shares] : next.holdings) value += shares * quotes.at(ticker);
        if (holdings_changed(state.holdings, next.holdings)) ++result.summary.trade_count;
        state = next;
        result.equity.emplace_back(day.date, value);
    }

    SimulationSummary& s = result.summary;
    s.initial_value = initial;
    s.final_value = result.equity.back().second;
    s.cumulative_return = s.final_value / initial - 1.0;
    s.start = result.equity.front().first;
    s.end = result.equity.back().first;
    s.annualized = s.end > s.start ? annualized_return(s.cumulative_return, s.start, s.end)
                                   : s.cumulative_return;
    double peak = initial;
    for (const auto& [date, value] : result.equity) {
        peak = std::max(peak, value);
        s.max_drawdown = std::max(s.max_drawdown, (peak - value) / peak);
    }
    return result;
}

std::vector<BenchmarkRow> compare_benchmark(const std::vector<std::pair<Date, double>>& equity,
                                            const std::vector<std::pair<Date, double>>& benchmark) {
    std::map<Date, double> bench(benchmark.begin(), benchmark.end());
    std::vector<BenchmarkRow> rows;
    double equity_base = 0, bench_base = 0;
    for (const auto& [date, value] : equity) {
        auto it = bench.find(date);
        if (it == bench.end()) continue;
        if (rows.empty()) {
            equity_base = value;
            bench_base = it->second;
        }
        BenchmarkRow row;
        row.date = date;
        row.portfolio_norm = value / equity_base;
        row.benchmark_norm = it->second / bench_base;
        row.excess = row.portfolio_norm - row.benchmark_norm;
        rows.push_back(row);
    }
    if (rows.empty())
        throw ValueError("compare_benchmark: no overlapping dates between equity curve and benchmark");
    return rows;
}

}  // namespace stst
