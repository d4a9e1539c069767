#include "stst/indicators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace stst {

namespace {

// Real-valued series with a leading undefined region.
struct RealSeries {
    std::size_t first_valid = 0;
    std::vector<double> value;

    static RealSeries undefined(std::size_t n) { return {n, std::vector<double>(n, 0.0)}; }
};

SignalSeries undefined_signal(std::size_t n) {
    return {n, std::vector<std::uint8_t>(n, 0)};
}

// Simple moving average over the trailing n entries of a series that itself
// starts at `start`.
RealSeries sma_over(const std::vector<double>& x, std::size_t start, std::size_t n) {
    const std::size_t len = x.size();
    RealSeries out = RealSeries::undefined(len);
    if (start + n > len) return out;
    out.first_valid = start + n - 1;
    for (std::size_t i = out.first_valid; i < len; ++i) {
        double s = 0.0;
        for (std::size_t j = i + 1 - n; j <= i; ++j) s += x[j];
        out.value[i] = s / double(n);
    }
    return out;
}

// EMA with smoothing 2/(n+1), seeded with the SMA of the first n defined
// entries.
RealSeries ema_over(const std::vector<double>& x, std::size_t start, std::size_t n) {
    const std::size_t len = x.size();
    RealSeries out = RealSeries::undefined(len);
    if (start + n > len) return out;
    out.first_valid = start + n - 1;
    double s = 0.0;
    for (std::size_t j = start; j < start + n; ++j) s += x[j];
    out.value[out.first_valid] = s / double(n);
    const double alpha = 2.0 / (double(n) + 1.0);
    for (std::size_t i = out.first_valid + 1; i < len; ++i)
        out.value[i] = alpha * x[i] + (1.0 - alpha) * out.value[i - 1];
    return out;
}

// 14-day RSI from simple averages of gains and losses; zero average loss
// yields 100.
RealSeries rsi_series(const std::vector<double>& closes, std::size_t n = 14) {
    const std::size_t len = closes.size();
    RealSeries out = RealSeries::undefined(len);
    if (len < n + 1) return out;
    out.first_valid = n;
    for (std::size_t i = n; i < len; ++i) {
        double gain = 0.0, loss = 0.0;
        for (std::size_t j = i + 1 - n; j <= i; ++j) {
            const double change = closes[j] - closes[j - 1];
            if (change > 0)
                gain += change;
            else
                loss -= change;
        }
        const double avg_gain = gain / double(n);
        const double avg_loss = loss / double(n);
        if (avg_loss == 0.0) {
            out.value[i] = 100.0;
        } else {
            const double rs = avg_gain / avg_loss;
            out.value[i] = 100.0 - 100.0 / (1.0 + rs);
        }
    }
    return out;
}

// Raw stochastic of a series against its own trailing window; flat window
// yields 50.
RealSeries stochastic_of(const RealSeries& s, std::size_t window) {
    const std::size_t len = s.value.size();
    RealSeries out = RealSeries::undefined(len);
    if (s.first_valid + window > len) return out;
    out.first_valid = s.first_valid + window - 1;
    for (std::size_t i = out.first_valid; i < len; ++i) {
        double lo = s.value[i + 1 - window], hi = lo;
        for (std::size_t j = i + 2 - window; j <= i; ++j) {
            lo = std::min(lo, s.value[j]);
            hi = std::max(hi, s.value[j]);
        }
        out.value[i] = hi == lo ? 50.0 : 100.0 * (s.value[i] - lo) / (hi - lo);
    }
    return out;
}

// Trailing-n mean of an already partially-defined series.
RealSeries smooth(const RealSeries& s, std::size_t n) {
    const std::size_t len = s.value.size();
    RealSeries out = RealSeries::undefined(len);
    if (s.first_valid + n > len) return out;
    out.first_valid = s.first_valid + n - 1;
    for (std::size_t i = out.first_valid; i < len; ++i) {
        double acc = 0.0;
        for (std::size_t j = i + 1 - n; j <= i; ++j) acc += s.value[j];
        out.value[i] = acc / double(n);
    }
    return out;
}

// 1 iff the series strictly rose versus the previous row.
SignalSeries rose_signal(const RealSeries& s) {
    const std::size_t len = s.value.size();
    SignalSeries out = undefined_signal(len);
    if (s.first_valid + 1 > len) return out;
    out.first_valid = s.first_valid + 1;
    for (std::size_t i = out.first_valid; i < len; ++i)
        out.value[i] = s.value[i] > s.value[i - 1] ? 1 : 0;
    return out;
}

std::vector<double> typical_prices(const std::vector<Bar>& bars) {
    std::vector<double> tp(bars.size());
    for (std::size_t i = 0; i < bars.size(); ++i)
        tp[i] = (bars[i].high + bars[i].low + bars[i].close) / 3.0;
    return tp;
}

}  // namespace

const std::array<std::string, kNumMarketFeatures>& market_column_names() {
    static const std::array<std::string, kNumMarketFeatures> names = {
        "open",         "high",        "low",         "close",       "adj_close",  "volume",
        "sig_sma_10",   "sig_sma_30",  "sig_sma_50",  "sig_sma_200", "sig_ema_10", "sig_ema_30",
        "sig_ema_50",   "sig_ema_200", "sig_momentum", "sig_stochrsi", "sig_stoch_d", "sig_stoch_k",
        "sig_macd",     "sig_cci",     "sig_mfi",     "sig_ad",      "sig_obv",    "sig_roc"};
    return names;
}

std::array<double, 4> date_features(const Date& date) {
    return {double(date.year) / 3000.0, double(date.month) / 12.0, double(date.day) / 31.0,
            double(date.iso_weekday()) / 7.0};
}

SmaEmaSignals sma_ema_signals(const std::vector<double>& closes, std::size_t n) {
    const RealSeries sma = sma_over(closes, 0, n);
    const RealSeries ema = ema_over(closes, 0, n);
    SmaEmaSignals out{undefined_signal(closes.size()), undefined_signal(closes.size())};
    out.sma.first_valid = sma.first_valid;
    out.ema.first_valid = ema.first_valid;
    for (std::size_t i = sma.first_valid; i < closes.size(); ++i)
        out.sma.value[i] = closes[i] > sma.value[i] ? 1 : 0;
    for (std::size_t i = ema.first_valid; i < closes.size(); ++i)
        out.ema.value[i] = closes[i] > ema.value[i] ? 1 : 0;
    return out;
}

MomentumRocSignals momentum_roc_signals(const std::vector<double>& closes) {
    const std::size_t len = closes.size();
    const std::size_t lag = 10;
    MomentumRocSignals out{undefined_signal(len), undefined_signal(len)};
    if (len < lag + 1) return out;
    out.momentum.first_valid = lag;
    for (std::size_t i = lag; i < len; ++i)
        out.momentum.value[i] = closes[i] - closes[i - lag] > 0.0 ? 1 : 0;

    RealSeries roc = RealSeries::undefined(len);
    roc.first_valid = lag;
    for (std::size_t i = lag; i < len; ++i) roc.value[i] = 100.0 * (closes[i] / closes[i - lag] - 1.0);
    out.roc = rose_signal(roc);
    return out;
}

StochasticSignals stochastic_signals(const std::vector<Bar>& bars) {
    const std::size_t len = bars.size();
    const std::size_t window = 14, k_smooth = 3, d_smooth = 3;
    StochasticSignals out{undefined_signal(len), undefined_signal(len), undefined_signal(len)};

    // Price stochastic: raw %K against the highest high / lowest low.
    RealSeries raw_k = RealSeries::undefined(len);
    if (len >= window) {
        raw_k.first_valid = window - 1;
        for (std::size_t i = raw_k.first_valid; i < len; ++i) {
            double lo = bars[i + 1 - window].low, hi = bars[i + 1 - window].high;
            for (std::size_t j = i + 2 - window; j <= i; ++j) {
                lo = std::min(lo, bars[j].low);
                hi = std::max(hi, bars[j].high);
            }
            raw_k.value[i] = hi == lo ? 50.0 : 100.0 * (bars[i].close - lo) / (hi - lo);
        }
    }
    const RealSeries k_band = smooth(raw_k, k_smooth);
    const RealSeries d_band = smooth(k_band, d_smooth);
    out.stoch_k = rose_signal(k_band);
    out.stoch_d = rose_signal(d_band);

    // Stochastic RSI: the stochastic formula applied to 14-day RSI values,
    // smoothed like the %K band.
    std::vector<double> closes(len);
    for (std::size_t i = 0; i < len; ++i) closes[i] = bars[i].close;
    const RealSeries rsi = rsi_series(closes);
    const RealSeries srsi = smooth(stochastic_of(rsi, window), k_smooth);
    if (srsi.first_valid + 1 <= len) {
        out.stochrsi.first_valid = srsi.first_valid + 1;
        for (std::size_t i = out.stochrsi.first_valid; i < len; ++i) {
            const double cur = srsi.value[i], prev = srsi.value[i - 1];
            out.stochrsi.value[i] = (cur <= 25.0 || (cur > prev && cur < 75.0)) ? 1 : 0;
        }
    }
    return out;
}

SignalSeries macd_signal(const std::vector<double>& closes) {
    const std::size_t len = closes.size();
    const RealSeries fast = ema_over(closes, 0, 12);
    const RealSeries slow = ema_over(closes, 0, 26);
    if (slow.first_valid >= len) return undefined_signal(len);

    std::vector<double> macd(len, 0.0);
    for (std::size_t i = slow.first_valid; i < len; ++i) macd[i] = fast.value[i] - slow.value[i];
    const RealSeries signal_line = ema_over(macd, slow.first_valid, 9);
    SignalSeries out = undefined_signal(len);
    if (signal_line.first_valid >= len) return out;
    out.first_valid = signal_line.first_valid;
    for (std::size_t i = out.first_valid; i < len; ++i)
        out.value[i] = signal_line.value[i] < macd[i] ? 1 : 0;
    return out;
}

CciMfiSignals cci_mfi_signals(const std::vector<Bar>& bars) {
    const std::size_t len = bars.size();
    const std::size_t window = 14;
    CciMfiSignals out{undefined_signal(len), undefined_signal(len)};
    const std::vector<double> tp = typical_prices(bars);

    RealSeries cci = RealSeries::undefined(len);
    if (len >= window) {
        cci.first_valid = window - 1;
        for (std::size_t i = cci.first_valid; i < len; ++i) {
            double s = 0.0;
            for (std::size_t j = i + 1 - window; j <= i; ++j) s += tp[j];
            const double avg = s / double(window);
            double dev = 0.0;
            for (std::size_t j = i + 1 - window; j <= i; ++j) dev += std::abs(tp[j] - avg);
            dev /= double(window);
            cci.value[i] = dev == 0.0 ? 0.0 : (tp[i] - avg) / (0.015 * dev);
        }
    }
    if (cci.first_valid + 1 <= len) {
        out.cci.first_valid = cci.first_valid + 1;
        for (std::size_t i = out.cci.first_valid; i < len; ++i)
            out.cci.value[i] = (cci.value[i] <= 100.0 || cci.value[i] > cci.value[i - 1]) ? 1 : 0;
    }

    RealSeries mfi = RealSeries::undefined(len);
    if (len >= window + 1) {
        mfi.first_valid = window;
        for (std::size_t i = mfi.first_valid; i < len; ++i) {
            double pos = 0.0, neg = 0.0;
            for (std::size_t j = i + 1 - window; j <= i; ++j) {
                const double flow = tp[j] * bars[j].volume;
                if (tp[j] > tp[j - 1])
                    pos += flow;
                else if (tp[j] < tp[j - 1])
                    neg += flow;
            }
            if (pos + neg == 0.0)
                mfi.value[i] = 50.0;
            else if (neg == 0.0)
                mfi.value[i] = 100.0;
            else
                mfi.value[i] = 100.0 - 100.0 / (1.0 + pos / neg);
        }
    }
    if (mfi.first_valid + 1 <= len) {
        out.mfi.first_valid = mfi.first_valid + 1;
        for (std::size_t i = out.mfi.first_valid; i < len; ++i) {
            const double cur = mfi.value[i], prev = mfi.value[i - 1];
            out.mfi.value[i] = (cur <= 20.0 || (cur > prev && cur < 80.0)) ? 1 : 0;
        }
    }
    return out;
}

VolumeSignals volume_signals(const std::vector<Bar>& bars) {
    const std::size_t len = bars.size();
    VolumeSignals out{undefined_signal(len), undefined_signal(len)};
    if (len < 2) return out;

    RealSeries ad = RealSeries::undefined(len);
    ad.first_valid = 0;
    double acc = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
        const Bar& b = bars[i];
        const double range = b.high - b.low;
        if (range != 0.0) acc += b.volume * ((b.close - b.low) - (b.high - b.close)) / range;
        ad.value[i] = acc;
    }
    out.ad = rose_signal(ad);

    RealSeries obv = RealSeries::undefined(len);
    obv.first_valid = 0;
    double running = 0.0;
    obv.value[0] = 0.0;
    for (std::size_t i = 1; i < len; ++i) {
        if (bars[i].close > bars[i - 1].close)
            running += bars[i].volume;
        else if (bars[i].close < bars[i - 1].close)
            running -= bars[i].volume;
        obv.value[i] = running;
    }
    out.obv = rose_signal(obv);
    return out;
}

FeatureFrame assemble_feature_frame(const std::vector<Bar>& bars, std::string ticker) {
    if (bars.size() < kMinBarsForFrame)
        throw ValueError("ticker " + ticker + ": insufficient history, need at least " +
                         std::to_string(kMinBarsForFrame) + " bars but got " +
                         std::to_string(bars.size()) + " (limiting indicator: sig_sma_200)");
    const std::size_t len = bars.size();
    std::vector<double> closes(len);
    for (std::size_t i = 0; i < len; ++i) closes[i] = bars[i].close;

    const SmaEmaSignals s10 = sma_ema_signals(closes, 10);
    const SmaEmaSignals s30 = sma_ema_signals(closes, 30);
    const SmaEmaSignals s50 = sma_ema_signals(closes, 50);
    const SmaEmaSignals s200 = sma_ema_signals(closes, 200);
    const MomentumRocSignals momroc = momentum_roc_signals(closes);
    const StochasticSignals stoch = stochastic_signals(bars);
    const SignalSeries macd = macd_signal(closes);
    const CciMfiSignals ccimfi = cci_mfi_signals(bars);
    const VolumeSignals vol = volume_signals(bars);

    const SignalSeries* signals[kNumSignals] = {
        &s10.sma,       &s30.sma,      &s50.sma,      &s200.sma,  &s10.ema,   &s30.ema,
        &s50.ema,       &s200.ema,     &momroc.momentum, &stoch.stochrsi, &stoch.stoch_d,
        &stoch.stoch_k, &macd,         &ccimfi.cci,   &ccimfi.mfi, &vol.ad,   &vol.obv,
        &momroc.roc};

    FeatureFrame frame;
    frame.ticker = std::move(ticker);
    frame.dates.reserve(len);
    frame.time_features.resize(len * kNumTimeFeatures);
    frame.market_features.resize(len * kNumMarketFeatures);
    frame.adj_close.resize(len);

    const double price_scale = bars.back().adj_close;
    double max_volume = 0.0;
    for (const Bar& b : bars) max_volume = std::max(max_volume, b.volume);
    const double volume_scale = max_volume > 0.0 ? max_volume : 1.0;

    frame.valid_from = 0;
    for (const SignalSeries* s : signals) frame.valid_from = std::max(frame.valid_from, s->first_valid);

    for (std::size_t i = 0; i < len; ++i) {
        const Bar& b = bars[i];
        frame.dates.push_back(b.date);
        frame.adj_close[i] = b.adj_close;
        const std::array<double, 4> tf = date_features(b.date);
        for (std::size_t c = 0; c < kNumTimeFeatures; ++c)
            frame.time_features[i * kNumTimeFeatures + c] = tf[c];
        double* row = frame.market_features.data() + i * kNumMarketFeatures;
        row[0] = b.open / price_scale;
        row[1] = b.high / price_scale;
        row[2] = b.low / price_scale;
        row[3] = b.close / price_scale;
        row[4] = b.adj_close / price_scale;
        row[5] = b.volume / volume_scale;
        for (std::size_t s = 0; s < kNumSignals; ++s)
            row[kNumPriceColumns + s] = double(signals[s]->value[i]);
    }
    return frame;
}

}  // namespace stst
