#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "stst/common.hpp"

namespace stst {

// One trading day of OHLCV data.
struct Bar {
    Date date;
    double open = 0;
    double high = 0;
    double low = 0;
    double close = 0;
    double adj_close = 0;
    double volume = 0;
};

inline constexpr std::size_t kNumTimeFeatures = 4;
inline constexpr std::size_t kNumPriceColumns = 6;  // open high low close adj_close volume
inline constexpr std::size_t kNumSignals = 18;
inline constexpr std::size_t kNumMarketFeatures = kNumPriceColumns + kNumSignals;  // 24
inline constexpr std::size_t kSampleWidth = kNumTimeFeatures + kNumMarketFeatures;  // 28

// 200-day moving averages dominate the warm-up; one extra margin row keeps a
// frame useful for at least one labeled window position.
inline constexpr std::size_t kMinBarsForFrame = 210;

// Market-feature column names in their fixed declared order.
const std::array<std::string, kNumMarketFeatures>& market_column_names();

// A binary signal over a bar series; rows before first_valid are undefined.
struct SignalSeries {
    std::size_t first_valid = 0;  // == size() when nothing is defined
    std::vector<std::uint8_t> value;
};

// Per-ticker feature matrix: 4 normalized date features and 24 market
// features (6 normalized price/volume columns, then the 18 binary signals).
struct FeatureFrame {
    std::string ticker;
    std::vector<Date> dates;
    std::vector<double> time_features;    // rows x 4, row-major
    std::vector<double> market_features;  // rows x 24, row-major
    std::vector<double> adj_close;        // unnormalized, for labeling
    std::size_t valid_from = 0;

    std::size_t rows() const { return dates.size(); }
    double time_at(std::size_t r, std::size_t c) const { return time_features[r * kNumTimeFeatures + c]; }
    double market_at(std::size_t r, std::size_t c) const {
        return market_features[r * kNumMarketFeatures + c];
    }
};

// (year/3000, month/12, day/31, iso_weekday/7)
std::array<double, 4> date_features(const Date& date);

// Signal is 1 iff close is strictly above the N-day average. EMA uses
// smoothing 2/(N+1) seeded with the first N-bar SMA.
struct SmaEmaSignals {
    SignalSeries sma;
    SignalSeries ema;
};
SmaEmaSignals sma_ema_signals(const std::vector<double>& closes, std::size_t n);

// MOM(i) = close(i) - close(i-10), signal 1 iff MOM > 0.
// ROC(i) = 100*(close(i)/close(i-10) - 1), signal 1 iff ROC rose vs previous.
struct MomentumRocSignals {
    SignalSeries momentum;
    SignalSeries roc;
};
MomentumRocSignals momentum_roc_signals(const std::vector<double>& closes);

// Stochastic oscillator family, all with (len=14, k=3, d=3) and rsi_len=14.
// Zero high-low range inside a window yields K = 50; flat RSI windows yield
// a stochastic-RSI of 50; zero average loss yields RSI = 100.
struct StochasticSignals {
    SignalSeries stochrsi;
    SignalSeries stoch_k;
    SignalSeries stoch_d;
};
StochasticSignals stochastic_signals(const std::vector<Bar>& bars);

// MACD(12,26) vs its 9-day signal line; 1 iff signal line < MACD.
SignalSeries macd_signal(const std::vector<double>& closes);

// CCI(14) with constant 0.015 (zero mean deviation -> CCI 0) and MFI(14)
// from typical-price flows (zero total flow -> 50, zero negative flow -> 100).
struct CciMfiSignals {
    SignalSeries cci;
    SignalSeries mfi;
};
CciMfiSignals cci_mfi_signals(const std::vector<Bar>& bars);

// Accumulation/Distribution and On-Balance Volume; 1 iff the running index
// strictly rose versus the previous row.
struct VolumeSignals {
    SignalSeries ad;
    SignalSeries obv;
};
VolumeSignals volume_signals(const std::vector<Bar>& bars);

// Full feature frame: price columns divided by the final adjusted close,
// volume by the maximum volume, signals in declared order, valid_from set to
// the first row where every signal is defined. Throws ValueError on series
// shorter than kMinBarsForFrame.
FeatureFrame assemble_feature_frame(const std::vector<Bar>& bars, std::string ticker);

}  // namespace stst
