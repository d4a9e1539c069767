#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "stst/dataset.hpp"
#include "stst/training.hpp"

namespace stst {

// Everything a pipeline run needs, parsed from one key=value file plus
// --set overrides. normalized() emits a canonical dump that reparses to the
// identical configuration.
struct RunConfiguration {
    std::filesystem::path data_dir;
    std::filesystem::path output_dir = "out";
    std::filesystem::path benchmark_csv;    // optional
    std::filesystem::path checkpoint;       // defaults to output_dir/checkpoint.stst
    std::filesystem::path predictions_csv;  // defaults to output_dir/predictions.csv
    std::string dataset_name = "dataset";

    std::optional<Date> train_start, train_end;
    std::optional<Date> valid_start, valid_end;
    std::optional<Date> test_start, test_end;

    ModelConfig model;
    TrainSpec train;

    double threshold = 0.5;
    std::size_t top_k = 5;
    double initial_cash = 10000.0;
    std::size_t gridsearch_budget = 0;  // 0 = full grid

    static RunConfiguration load(const std::filesystem::path& path);
    static RunConfiguration parse_text(const std::string& text, const std::string& origin);

    // One key=value override; throws UsageError on unknown keys.
    void apply_set(const std::string& key, const std::string& value);

    std::string normalized() const;

    SplitSpec split() const;  // throws if any of the six dates is missing
    std::filesystem::path checkpoint_path() const {
        return checkpoint.empty() ? output_dir / "checkpoint.stst" : checkpoint;
    }
    std::filesystem::path predictions_path() const {
        return predictions_csv.empty() ? output_dir / "predictions.csv" : predictions_csv;
    }
};

}  // namespace stst
