#pragma once

#include <map>
#include <string>
#include <vector>

#include "stst/common.hpp"

namespace stst {

// Cash plus fractional share holdings; no leverage, no shorting.
struct PortfolioState {
    double cash = 0.0;
    std::map<std::string, double> holdings;  // ticker -> shares
};

struct DailyPredictions {
    Date date;
    std::vector<std::pair<std::string, double>> entries;  // (ticker, probability)
};

// ticker -> date -> adjusted close
using PriceTable = std::map<std::string, std::map<Date, double>>;

// Tickers with probability above threshold, highest first (ties by ticker
// name), truncated to k. Empty when nothing is positive (hold).
std::vector<std::string> select_portfolio(const DailyPredictions& preds, double threshold = 0.5,
                                          std::size_t k = 5);

// Liquidates everything at the day's prices, then splits total value evenly
// across the selection at those same prices; zero transaction costs. An
// empty selection parks the full value in cash.
PortfolioState step_portfolio(const PortfolioState& state, const std::vector<std::string>& selection,
                              const std::map<std::string, double>& prices, const Date& date);

// (1 + cumulative)^(365.25 / calendar_days) - 1.
double annualized_return(double cumulative, const Date& start, const Date& end);

struct SimulationSummary {
    double initial_value = 0;
    double final_value = 0;
    double cumulative_return = 0;
    double annualized = 0;
    double max_drawdown = 0;
    std::size_t trade_count = 0;
    Date start, end;
};

struct SimulationResult {
    std::vector<std::pair<Date, double>> equity;  // value after each day's rebalance
    SimulationSummary summary;
};

// Iterates prediction days in order, selecting and rebalancing at each day's
// close. Prediction days must be strictly increasing and each ticker may
// appear at most once per day.
SimulationResult run_simulation(const std::vector<DailyPredictions>& days, const PriceTable& prices,
                                double initial = 10000.0, double threshold = 0.5, std::size_t k = 5);

struct BenchmarkRow {
    Date date;
    double portfolio_norm = 0;  // both normalized to 1.0 at the common start
    double benchmark_norm = 0;
    double excess = 0;  // portfolio_norm - benchmark_norm
};

// Aligns the equity curve with a benchmark index on their common dates.
std::vector<BenchmarkRow> compare_benchmark(const std::vector<std::pair<Date, double>>& equity,
                                            const std::vector<std::pair<Date, double>>& benchmark);

}  // namespace stst
