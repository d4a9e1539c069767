#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "stst/indicators.hpp"

namespace stst {

// Movement label for the day after a window: down, up, or dropped because
// the return fell inside the ignore band (-0.5%, +0.55%).
enum class Label { Down = 0, Up = 1, Ignored };

// One model input: N consecutive valid feature rows plus the next day's
// movement label. Columns are time features first, then market features.
struct WindowSample {
    std::string ticker;
    Date end_date;
    std::size_t n_rows = 0;
    std::size_t n_cols = kSampleWidth;
    std::vector<double> x;  // n_rows x n_cols, time-ordered oldest to newest
    int label = 0;

    double at(std::size_t r, std::size_t c) const { return x[r * n_cols + c]; }
};

// Half-open [start, end) date intervals; ordered and disjoint.
struct SplitSpec {
    Date train_start, train_end;
    Date valid_start, valid_end;
    Date test_start, test_end;

    void validate() const;
};

struct SplitSamples {
    std::vector<WindowSample> train;
    std::vector<WindowSample> valid;
    std::vector<WindowSample> test;
};

// Loads one ticker's OHLCV CSV (header date,open,high,low,close,adj_close,
// volume). Rows must be in strictly increasing date order; bar invariants
// are enforced with the offending line in the message.
std::vector<Bar> load_bars(const std::filesystem::path& path);

// All *.csv files of a directory, keyed by filename stem, in name order.
std::map<std::string, std::vector<Bar>> load_bar_directory(const std::filesystem::path& dir);

// Movement label per the +0.55% / -0.5% thresholds. Comparisons are done in
// cross-multiplied form (1000*next <= 995*prev, 10000*next >= 10055*prev) so
// exact-boundary prices classify exactly.
Label compute_label(double adj_close_t, double adj_close_t1);

// Every window of n consecutive rows at or past frame.valid_from whose next
// day exists and whose label is not ignored.
std::vector<WindowSample> build_windows(const FeatureFrame& frame, std::size_t n);

// Assignment by end_date membership; samples outside all ranges are dropped.
SplitSamples split_by_date(const std::vector<WindowSample>& samples, const SplitSpec& spec);

// Fractions (up, down); throws on an empty list.
std::pair<double, double> class_balance(const std::vector<WindowSample>& samples);

}  // namespace stst
