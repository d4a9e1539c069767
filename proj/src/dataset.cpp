#include "stst/dataset.hpp"

#include <algorithm>

#include "stst/csv.hpp"

namespace stst {

void SplitSpec::validate() const {
    auto check = [](const char* name, const Date& a, const Date& b) {
        if (!(a < b))
            throw ValueError(std::string("split ") + name + " range is empty or reversed: [" + a.str() +
                             ", " + b.str() + ")");
    };
    check("train", train_start, train_end);
    check("valid", valid_start, valid_end);
    check("test", test_start, test_end);
    if (train_end > valid_start || valid_end > test_start)
        throw ValueError("split ranges must be ordered train < valid < test");
}

std::vector<Bar> load_bars(const std::filesystem::path& path) {
    std::vector<std::string> header;
    const auto rows = read_csv(path, header);
    expect_header(path, header, {"date", "open", "high", "low", "close", "adj_close", "volume"});

    std::vector<Bar> bars;
    bars.reserve(rows.size());
    for (const auto& row : rows) {
        const std::string where = path.string() + ":" + std::to_string(row.line);
        if (row.fields.size() != 7)
            throw ValueError(where + ": expected 7 fields, got " + std::to_string(row.fields.size()));
        Bar b;
        b.date = Date::parse(row.fields[0]);
        b.open = parse_double(row.fields[1], where);
        b.high = parse_double(row.fields[2], where);
        b.low = parse_double(row.fields[3], where);
        b.close = parse_double(row.fields[4], where);
        b.adj_close = parse_double(row.fields[5], where);
        b.volume = parse_double(row.fields[6], where);

        if (!(b.open > 0 && b.high > 0 && b.low > 0 && b.close > 0 && b.adj_close > 0))
            throw ValueError(where + ": prices must be positive");
        if (b.volume < 0) throw ValueError(where + ": volume must be nonnegative");
        if (b.low > std::min(b.open, b.close) || b.high < std::max(b.open, b.close))
            throw ValueError(where + ": bar range [" + fnum(b.low) + ", " + fnum(b.high) +
                             "] does not contain open/close");
        if (!bars.empty()) {
            if (b.date == bars.back().date)
                throw ValueError(where + ": duplicate date " + b.date.str());
            if (b.date < bars.back().date)
                throw ValueError(where + ": dates not increasing at " + b.date.str());
        }
        bars.push_back(b);
    }
    return bars;
}

std::map<std::string, std::vector<Bar>> load_bar_directory(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir))
        throw ValueError("not a directory: " + dir.string());
    std::map<std::string, std::vector<Bar>> out;
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".csv")
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) out[f.stem().string()] = load_bars(f);
    if (out.empty()) throw ValueError("no .csv files in " + dir.string());
    return out;
}

Label compute_label(double adj_close_t, double adj_close_t1) {
    if (!(adj_close_t > 0.0) || !(adj_close_t1 > 0.0))
        throw ValueError("compute_label: prices must be positive, got " + fnum(adj_close_t) + " and " +
                         fnum(adj_close_t1));
    // next/prev - 1 <= -0.5%   <=>  1000*next <= 995*prev
    if (1000.0 * adj_close_t1 <= 995.0 * adj_close_t) return Label::Down;
    // next/prev - 1 >= 0.55%   <=>  10000*next >= 10055*prev
    if (10000.0 * adj_close_t1 >= 10055.0 * adj_close_t) return Label::Up;
    return Label::Ignored;
}

std::vector<WindowSample> build_windows(const FeatureFrame& frame, std::size_t n) {
    if (n < 1) throw ValueError("build_windows: window size must be >= 1");
    std::vector<WindowSample> out;
    const std::size_t rows = frame.rows();
    if (rows < frame.valid_from + n + 1) return out;
    for (std::size_t start = frame.valid_from; start + n < rows; ++start) {
        const std::size_t end = start + n - 1;  // inclusive last window row
        const Label label = compute_label(frame.adj_close[end], frame.adj_close[end + 1]);
        if (label == Label::Ignored) continue;
        WindowSample s;
        s.ticker = frame.ticker;
        s.end_date = frame.dates[end];
        s.n_rows = n;
        s.n_cols = kSampleWidth;
        s.label = label == Label::Up ? 1 : 0;
        s.x.resize(n * kSampleWidth);
        for (std::size_t r = 0; r < n; ++r) {
            double* dst = s.x.data() + r * kSampleWidth;
            const std::size_t src = start + r;
            for (std::size_t c = 0; c < kNumTimeFeatures; ++c)
                dst[c] = frame.time_features[src * kNumTimeFeatures + c];
            for (std::size_t c = 0; c < kNumMarketFeatures; ++c)
                dst[kNumTimeFeatures + c] = frame.market_features[src * kNumMarketFeatures + c];
        }
        out.push_back(std::move(s));
    }
    return out;
}

SplitSamples split_by_date(const std::vector<WindowSample>& samples, const SplitSpec& spec) {
    spec.validate();
    SplitSamples out;
    for (const auto& s : samples) {
        if (s.end_date >= spec.train_start && s.end_date < spec.train_end)
            out.train.push_back(s);
        else if (s.end_date >= spec.valid_start && s.end_date < spec.valid_end)
            out.valid.push_back(s);
        else if (s.end_date >= spec.test_start && s.end_date < spec.test_end)
            out.test.push_back(s);
    }
    return out;
}

std::pair<double, double> class_balance(const std::vector<WindowSample>& samples) {
    if (samples.empty()) throw ValueError("class_balance: empty sample list");
    std::size_t up = 0;
    for (const auto& s : samples) up += s.label == 1 ? 1 : 0;
    const double frac_up = double(up) / double(samples.size());
    return {frac_up, 1.0 - frac_up};
}

}  // namespace stst
