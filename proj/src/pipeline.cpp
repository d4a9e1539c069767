#include "stst/pipeline.hpp"

#include <algorithm>
#include <iostream>
#include <map>

#include "stst/csv.hpp"

namespace stst {

namespace {

void write_resolved_config(const RunConfiguration& cfg) {
    AtomicFile file(cfg.output_dir / "resolved-config.cfg");
    file.out() << cfg.normalized();
    file.commit();
}

void write_run_metrics(const std::filesystem::path& path, const RunRecord& record) {
    AtomicFile file(path);
    file.write_row({"epoch", "train_loss", "train_acc", "valid_loss", "valid_acc"});
    for (std::size_t e = 0; e < record.epochs.size(); ++e) {
        const EpochStats& s = record.epochs[e];
        file.write_row({std::to_string(e), fnum(s.train_loss), fnum(s.train_acc),
                        fnum(s.valid_loss), fnum(s.valid_acc)});
    }
    file.commit();
}

void write_eval_metrics(const std::filesystem::path& path, const std::string& dataset,
                        const std::vector<std::pair<std::string, const EvalResult*>>& rows) {
    AtomicFile file(path);
    file.write_row({"variant", "dataset", "accuracy", "mcc", "tp", "tn", "fp", "fn"});
    for (const auto& [variant, result] : rows) {
        if (result) {
            file.write_row({variant, dataset, fnum(result->accuracy_value), fnum(result->mcc_value),
                            std::to_string(result->counts.tp), std::to_string(result->counts.tn),
                            std::to_string(result->counts.fp), std::to_string(result->counts.fn)});
        } else {
            file.write_row({variant, dataset, "", "", "", "", "", ""});
        }
    }
    file.commit();
}

void require_data_dir(const RunConfiguration& cfg) {
    if (cfg.data_dir.empty()) throw UsageError("missing configuration key 'data_dir'");
    if (!std::filesystem::is_directory(cfg.data_dir))
        throw ValueError("data_dir does not exist: " + cfg.data_dir.string());
}

}  // namespace

std::vector<FeatureFrame> build_frames(const std::filesystem::path& data_dir) {
    std::vector<FeatureFrame> frames;
    for (auto& [ticker, bars] : load_bar_directory(data_dir))
        frames.push_back(assemble_feature_frame(bars, ticker));
    return frames;
}

std::vector<WindowSample> windows_for(const std::vector<FeatureFrame>& frames, std::size_t n) {
    std::vector<WindowSample> out;
    for (const auto& frame : frames) {
        auto windows = build_windows(frame, n);
        out.insert(out.end(), std::make_move_iterator(windows.begin()),
                   std::make_move_iterator(windows.end()));
    }
    return out;
}

void cmd_features(const RunConfiguration& cfg) {
    require_data_dir(cfg);
    write_resolved_config(cfg);
    const auto frames = build_frames(cfg.data_dir);
    for (const auto& frame : frames) {
        AtomicFile file(cfg.output_dir / "features" / (frame.ticker + ".csv"));
        std::vector<std::string> header = {"date", "year", "month", "day", "weekday"};
        for (const auto& name : market_column_names()) header.push_back(name);
        header.push_back("valid");
        file.write_row(header);
        for (std::size_t r = 0; r < frame.rows(); ++r) {
            std::vector<std::string> row;
            row.reserve(header.size());
            row.push_back(frame.dates[r].str());
            for (std::size_t c = 0; c < kNumTimeFeatures; ++c) row.push_back(fnum(frame.time_at(r, c)));
            for (std::size_t c = 0; c < kNumMarketFeatures; ++c)
                row.push_back(fnum(frame.market_at(r, c)));
            row.push_back(r >= frame.valid_from ? "1" : "0");
            file.write_row(row);
        }
        file.commit();
    }
}

RunRecord cmd_train(const RunConfiguration& cfg) {
    require_data_dir(cfg);
    cfg.model.validate();
    write_resolved_config(cfg);
    const SplitSpec split = cfg.split();
    const auto frames = build_frames(cfg.data_dir);
    const auto samples = windows_for(frames, cfg.model.context_window);
    SplitSamples parts = split_by_date(samples, split);

    StstParameters params = StstParameters::init(cfg.model, cfg.train.seed);
    RunRecord record = fit(params, parts.train, parts.valid, cfg.train);
    save_checkpoint(cfg.checkpoint_path(), params);
    write_run_metrics(cfg.output_dir / "metrics.csv", record);
    return record;
}

void cmd_gridsearch(const RunConfiguration& cfg, std::size_t jobs) {
    require_data_dir(cfg);
    write_resolved_config(cfg);
    const SplitSpec split = cfg.split();
    const auto frames = build_frames(cfg.data_dir);

    std::map<std::size_t, SplitSamples> cache;
    WindowProvider provider = [&](std::size_t n) {
        auto it = cache.find(n);
        if (it == cache.end()) {
            SplitSamples parts = split_by_date(windows_for(frames, n), split);
            it = cache.emplace(n, std::move(parts)).first;
        }
        return std::make_pair(it->second.train, it->second.valid);
    };

    // Window construction is cached up front so parallel trials only read.
    std::vector<std::size_t> window_sizes = {cfg.model.context_window};
    for (const auto& [key, values] : cfg.train.grid)
        if (key == "context_window")
            for (const auto& v : values) window_sizes.push_back(parse_long(v, key));
    for (std::size_t n : window_sizes) provider(n);

    const auto trials = grid_search(cfg.model, cfg.train, provider, cfg.gridsearch_budget, jobs);

    AtomicFile file(cfg.output_dir / "gridsearch.csv");
    file.write_row({"rank", "trial", "valid_accuracy", "valid_mcc", "best_epoch", "n_epochs",
                    "status", "assignment"});
    for (std::size_t rank = 0; rank < trials.size(); ++rank) {
        const GridTrial& t = trials[rank];
        std::string assignment;
        for (const auto& [k, v] : t.assignment) assignment += (assignment.empty() ? "" : ";") + k + "=" + v;
        if (t.failed) {
            file.write_row({std::to_string(rank), std::to_string(t.index), "", "", "", "",
                            "failed: " + t.error, assignment});
        } else {
            file.write_row({std::to_string(rank), std::to_string(t.index),
                            fnum(t.record.valid_accuracy), fnum(t.record.valid_mcc),
                            std::to_string(t.record.best_epoch),
                            std::to_string(t.record.epochs.size()), "ok", assignment});
        }
    }
    file.commit();
}

EvalResult cmd_evaluate(const RunConfiguration& cfg) {
    require_data_dir(cfg);
    write_resolved_config(cfg);
    StstParameters params = load_checkpoint(cfg.checkpoint_path());
    const SplitSpec split = cfg.split();
    const auto frames = build_frames(cfg.data_dir);
    const auto samples = windows_for(frames, params.config.context_window);
    SplitSamples parts = split_by_date(samples, split);
    if (parts.test.empty()) throw ValueError("evaluate: no samples in the test range");

    const EvalResult result = evaluate(params, parts.test, cfg.threshold);
    const std::string variant = variant_name(params.config.embedding, params.config.head);
    write_eval_metrics(cfg.output_dir / "eval_metrics.csv", cfg.dataset_name, {{variant, &result}});

    AtomicFile preds(cfg.predictions_path());
    preds.write_row({"ticker", "end_date", "probability", "prediction", "label"});
    for (std::size_t i = 0; i < parts.test.size(); ++i) {
        const WindowSample& s = parts.test[i];
        preds.write_row({s.ticker, s.end_date.str(), fnum(result.probabilities[i]),
                         std::to_string(result.predictions[i]), std::to_string(s.label)});
    }
    preds.commit();
    return result;
}

void cmd_ablate(const RunConfiguration& cfg) {
    require_data_dir(cfg);
    cfg.model.validate();
    write_resolved_config(cfg);
    const SplitSpec split = cfg.split();
    const auto frames = build_frames(cfg.data_dir);
    const auto samples = windows_for(frames, cfg.model.context_window);
    SplitSamples parts = split_by_date(samples, split);

    const auto outcomes = ablation_suite(parts.train, parts.valid, parts.test, cfg.model, cfg.train);
    std::vector<std::pair<std::string, const EvalResult*>> rows;
    for (const auto& outcome : outcomes) {
        if (outcome.failed) {
            std::cerr << "stst: variant " << outcome.variant.name << " failed: " << outcome.error
                      << "\n";
            rows.emplace_back(outcome.variant.name, nullptr);
            continue;
        }
        rows.emplace_back(outcome.variant.name, &outcome.test);
        write_run_metrics(cfg.output_dir / ("metrics_" + outcome.variant.name + ".csv"),
                          outcome.record);
    }
    write_eval_metrics(cfg.output_dir / "ablation.csv", cfg.dataset_name, rows);
}

SimulationResult cmd_backtest(const RunConfiguration& cfg) {
    require_data_dir(cfg);
    write_resolved_config(cfg);

    std::vector<std::string> header;
    const auto pred_rows = read_csv(cfg.predictions_path(), header);
    expect_header(cfg.predictions_path(), header,
                  {"ticker", "end_date", "probability", "prediction", "label"});
    std::map<Date, DailyPredictions> by_date;
    for (const auto& row : pred_rows) {
        const std::string where = cfg.predictions_path().string() + ":" + std::to_string(row.line);
        if (row.fields.size() != 5) throw ValueError(where + ": expected 5 fields");
        const Date date = Date::parse(row.fields[1]);
        auto& day = by_date[date];
        day.date = date;
        day.entries.emplace_back(row.fields[0], parse_double(row.fields[2], where));
    }
    std::vector<DailyPredictions> days;
    days.reserve(by_date.size());
    for (auto& [date, day] : by_date) days.push_back(std::move(day));

    PriceTable prices;
    for (const auto& [ticker, bars] : load_bar_directory(cfg.data_dir))
        for (const Bar& b : bars) prices[ticker][b.date] = b.adj_close;

    const SimulationResult result =
        run_simulation(days, prices, cfg.initial_cash, cfg.threshold, cfg.top_k);

    std::vector<BenchmarkRow> bench_rows;
    bool have_benchmark = false;
    if (!cfg.benchmark_csv.empty()) {
        std::vector<std::string> bhdr;
        const auto rows = read_csv(cfg.benchmark_csv, bhdr);
        expect_header(cfg.benchmark_csv, bhdr, {"date", "adj_close"});
        std::vector<std::pair<Date, double>> series;
        for (const auto& row : rows) {
            const std::string where = cfg.benchmark_csv.string() + ":" + std::to_string(row.line);
            if (row.fields.size() != 2) throw ValueError(where + ": expected 2 fields");
            series.emplace_back(Date::parse(row.fields[0]), parse_double(row.fields[1], where));
        }
        bench_rows = compare_benchmark(result.equity, series);
        have_benchmark = true;
    }

    AtomicFile curve(cfg.output_dir / "equity.csv");
    curve.write_row({"date", "portfolio_value", "benchmark_value", "excess"});
    std::map<Date, const BenchmarkRow*> bench_by_date;
    for (const auto& row : bench_rows) bench_by_date[row.date] = &row;
    for (const auto& [date, value] : result.equity) {
        std::string bench_value, excess;
        if (have_benchmark) {
            auto it = bench_by_date.find(date);
            if (it != bench_by_date.end()) {
                // Benchmark rebased to the portfolio's dollars at the common
                // start; excess is the normalized return difference.
                bench_value = fnum(it->second->benchmark_norm * cfg.initial_cash);
                excess = fnum(it->second->excess);
            }
        }
        curve.write_row({date.str(), fnum(value), bench_value, excess});
    }
    curve.commit();

    const SimulationSummary& s = result.summary;
    AtomicFile summary(cfg.output_dir / "summary.txt");
    summary.out() << "period: " << s.start.str() << " .. " << s.end.str() << "\n"
                  << "initial value: " << fnum(s.initial_value) << "\n"
                  << "final value: " << fnum(s.final_value) << "\n"
                  << "cumulative return: " << fnum(s.cumulative_return * 100.0) << "%\n"
                  << "annualized return: " << fnum(s.annualized * 100.0) << "%\n"
                  << "max drawdown: " << fnum(s.max_drawdown * 100.0) << "%\n"
                  << "trades: " << s.trade_count << "\n";
    summary.commit();
    return result;
}

}  // namespace stst
