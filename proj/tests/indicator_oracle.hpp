#pragma once

// Brute-force reference for every binary signal, recomputed directly from
// the indicator definitions with no code shared with the library. Values are
// 0/1 where defined and -1 before the warm-up.

#include <cmath>
#include <cstdlib>
#include <vector>

#include "stst/indicators.hpp"

namespace oracle {

using stst::Bar;

inline std::vector<double> closes_of(const std::vector<Bar>& bars) {
    std::vector<double> out;
    for (const auto& b : bars) out.push_back(b.close);
    return out;
}

inline std::vector<int> sma_signal(const std::vector<Bar>& bars, int n) {
    const auto close = closes_of(bars);
    std::vector<int> sig(bars.size(), -1);
    for (int i = n - 1; i < int(bars.size()); ++i) {
        double s = 0;
        for (int j = i - n + 1; j <= i; ++j) s += close[j];
        sig[i] = close[i] > s / n ? 1 : 0;
    }
    return sig;
}

// EMA with smoothing 2/(n+1) seeded by the first n-bar SMA; -infinity marks
// undefined entries.
inline std::vector<double> ema_values(const std::vector<double>& x, int n, int start = 0) {
    std::vector<double> ema(x.size(), -std::numeric_limits<double>::infinity());
    if (start + n > int(x.size())) return ema;
    double seed = 0;
    for (int j = start; j < start + n; ++j) seed += x[j];
    ema[start + n - 1] = seed / n;
    const double alpha = 2.0 / (n + 1.0);
    for (int i = start + n; i < int(x.size()); ++i) ema[i] = alpha * x[i] + (1 - alpha) * ema[i - 1];
    return ema;
}

inline std::vector<int> ema_signal(const std::vector<Bar>& bars, int n) {
    const auto close = closes_of(bars);
    const auto ema = ema_values(close, n);
    std::vector<int> sig(bars.size(), -1);
    for (int i = n - 1; i < int(bars.size()); ++i) sig[i] = close[i] > ema[i] ? 1 : 0;
    return sig;
}

inline std::vector<int> momentum_signal(const std::vector<Bar>& bars) {
    const auto close = closes_of(bars);
    std::vector<int> sig(bars.size(), -1);
    for (int i = 10; i < int(bars.size()); ++i) sig[i] = close[i] - close[i - 10] > 0 ? 1 : 0;
    return sig;
}

inline std::vector<int> roc_signal(const std::vector<Bar>& bars) {
    const auto close = closes_of(bars);
    std::vector<int> sig(bars.size(), -1);
    auto roc = [&](int i) { return 100.0 * (close[i] / close[i - 10] - 1.0); };
    for (int i = 11; i < int(bars.size()); ++i) sig[i] = roc(i) > roc(i - 1) ? 1 : 0;
    return sig;
}

inline double rsi_at(const std::vector<double>& close, int i) {
    double gain = 0, loss = 0;
    for (int j = i - 13; j <= i; ++j) {
        const double d = close[j] - close[j - 1];
        if (d > 0) gain += d;
        else loss -= d;
    }
    if (loss / 14.0 == 0.0) return 100.0;
    return 100.0 - 100.0 / (1.0 + (gain / 14.0) / (loss / 14.0));
}

// Smoothed stochastic of the 14-day RSI: raw stochastic over the last 14 RSI
// values, then a 3-day mean. Defined from index 29.
inline std::vector<int> stochrsi_signal(const std::vector<Bar>& bars) {
    const auto close = closes_of(bars);
    const int len = int(bars.size());
    std::vector<int> sig(len, -1);
    auto raw = [&](int i) {  // needs i >= 27
        double lo = rsi_at(close, i - 13), hi = lo;
        for (int j = i - 12; j <= i; ++j) {
            const double r = rsi_at(close, j);
            lo = std::min(lo, r);
            hi = std::max(hi, r);
        }
        if (hi == lo) return 50.0;
        return 100.0 * (rsi_at(close, i) - lo) / (hi - lo);
    };
    auto srsi = [&](int i) { return (raw(i - 2) + raw(i - 1) + raw(i)) / 3.0; };  // i >= 29
    for (int i = 30; i < len; ++i) {
        const double cur = srsi(i), prev = srsi(i - 1);
        sig[i] = (cur <= 25.0 || (cur > prev && cur < 75.0)) ? 1 : 0;
    }
    return sig;
}

inline double stoch_raw(const std::vector<Bar>& bars, int i) {  // i >= 13
    double lo = bars[i - 13].low, hi = bars[i - 13].high;
    for (int j = i - 12; j <= i; ++j) {
        lo = std::min(lo, bars[j].low);
        hi = std::max(hi, bars[j].high);
    }
    if (hi == lo) return 50.0;
    return 100.0 * (bars[i].close - lo) / (hi - lo);
}

inline double stoch_k(const std::vector<Bar>& bars, int i) {  // i >= 15
    return (stoch_raw(bars, i - 2) + stoch_raw(bars, i - 1) + stoch_raw(bars, i)) / 3.0;
}

inline double stoch_d(const std::vector<Bar>& bars, int i) {  // i >= 17
    return (stoch_k(bars, i - 2) + stoch_k(bars, i - 1) + stoch_k(bars, i)) / 3.0;
}

inline std::vector<int> stoch_k_signal(const std::vector<Bar>& bars) {
    std::vector<int> sig(bars.size(), -1);
    for (int i = 16; i < int(bars.size()); ++i) sig[i] = stoch_k(bars, i) > stoch_k(bars, i - 1) ? 1 : 0;
    return sig;
}

inline std::vector<int> stoch_d_signal(const std::vector<Bar>& bars) {
    std::vector<int> sig(bars.size(), -1);
    for (int i = 18; i < int(bars.size()); ++i) sig[i] = stoch_d(bars, i) > stoch_d(bars, i - 1) ? 1 : 0;
    return sig;
}

inline std::vector<int> macd_signal_oracle(const std::vector<Bar>& bars) {
    const auto close = closes_of(bars);
    const int len = int(bars.size());
    std::vector<int> sig(len, -1);
    const auto ema12 = ema_values(close, 12);
    const auto ema26 = ema_values(close, 26);
    std::vector<double> macd(len, 0.0);
    for (int i = 25; i < len; ++i) macd[i] = ema12[i] - ema26[i];
    const auto line = ema_values(macd, 9, 25);
    for (int i = 33; i < len; ++i) sig[i] = line[i] < macd[i] ? 1 : 0;
    return sig;
}

inline double cci_at(const std::vector<Bar>& bars, int i) {  // i >= 13
    auto tp = [&](int j) { return (bars[j].high + bars[j].low + bars[j].close) / 3.0; };
    double s = 0;
    for (int j = i - 13; j <= i; ++j) s += tp(j);
    const double avg = s / 14.0;
    double dev = 0;
    for (int j = i - 13; j <= i; ++j) dev += std::abs(tp(j) - avg);
    dev /= 14.0;
    if (dev == 0.0) return 0.0;
    return (tp(i) - avg) / (0.015 * dev);
}

inline std::vector<int> cci_signal(const std::vector<Bar>& bars) {
    std::vector<int> sig(bars.size(), -1);
    for (int i = 14; i < int(bars.size()); ++i)
        sig[i] = (cci_at(bars, i) <= 100.0 || cci_at(bars, i) > cci_at(bars, i - 1)) ? 1 : 0;
    return sig;
}

inline double mfi_at(const std::vector<Bar>& bars, int i) {  // i >= 14
    auto tp = [&](int j) { return (bars[j].high + bars[j].low + bars[j].close) / 3.0; };
    double pos = 0, neg = 0;
    for (int j = i - 13; j <= i; ++j) {
        const double flow = tp(j) * bars[j].volume;
        if (tp(j) > tp(j - 1)) pos += flow;
        if (tp(j) < tp(j - 1)) neg += flow;
    }
    if (pos + neg == 0.0) return 50.0;
    if (neg == 0.0) return 100.0;
    return 100.0 - 100.0 / (1.0 + pos / neg);
}

inline std::vector<int> mfi_signal(const std::vector<Bar>& bars) {
    std::vector<int> sig(bars.size(), -1);
    for (int i = 15; i < int(bars.size()); ++i) {
        const double cur = mfi_at(bars, i), prev = mfi_at(bars, i - 1);
        sig[i] = (cur <= 20.0 || (cur > prev && cur < 80.0)) ? 1 : 0;
    }
    return sig;
}

inline std::vector<int> ad_signal(const std::vector<Bar>& bars) {
    const int len = int(bars.size());
    std::vector<double> ad(len, 0.0);
    double acc = 0;
    for (int i = 0; i < len; ++i) {
        const Bar& b = bars[i];
        if (b.high != b.low) acc += b.volume * ((b.close - b.low) - (b.high - b.close)) / (b.high - b.low);
        ad[i] = acc;
    }
    std::vector<int> sig(len, -1);
    for (int i = 1; i < len; ++i) sig[i] = ad[i] > ad[i - 1] ? 1 : 0;
    return sig;
}

inline std::vector<int> obv_signal(const std::vector<Bar>& bars) {
    const int len = int(bars.size());
    std::vector<double> obv(len, 0.0);
    for (int i = 1; i < len; ++i) {
        obv[i] = obv[i - 1];
        if (bars[i].close > bars[i - 1].close) obv[i] += bars[i].volume;
        if (bars[i].close < bars[i - 1].close) obv[i] -= bars[i].volume;
    }
    std::vector<int> sig(len, -1);
    for (int i = 1; i < len; ++i) sig[i] = obv[i] > obv[i - 1] ? 1 : 0;
    return sig;
}

// All 18 signals in the declared column order.
inline std::vector<std::vector<int>> all_signals(const std::vector<Bar>& bars) {
    return {
        sma_signal(bars, 10),  sma_signal(bars, 30),  sma_signal(bars, 50),  sma_signal(bars, 200),
        ema_signal(bars, 10),  ema_signal(bars, 30),  ema_signal(bars, 50),  ema_signal(bars, 200),
        momentum_signal(bars), stochrsi_signal(bars), stoch_d_signal(bars),  stoch_k_signal(bars),
        macd_signal_oracle(bars), cci_signal(bars),   mfi_signal(bars),      ad_signal(bars),
        obv_signal(bars),      roc_signal(bars),
    };
}

}  // namespace oracle
