#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <vector>

#include "stst/pipeline.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "run configuration file")->required();
    cmd->add_option("--set", args.overrides, "override a configuration key (key=value)");
}

stst::RunConfiguration load_config(const CommonArgs& args) {
    auto cfg = stst::RunConfiguration::load(args.config_path);
    for (const auto& kv : args.overrides) {
        const std::size_t eq = kv.find('=');
        if (eq == std::string::npos)
            throw stst::UsageError("--set expects key=value, got '" + kv + "'");
        cfg.apply_set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"STST stock-movement pipeline"};
    app.require_subcommand(1);

    CommonArgs args;
    std::size_t jobs = 1;

    CLI::App* features = app.add_subcommand("features", "generate per-ticker feature CSVs");
    CLI::App* train = app.add_subcommand("train", "train a model and write a checkpoint");
    CLI::App* gridsearch = app.add_subcommand("gridsearch", "run the hyperparameter grid search");
    CLI::App* evaluate = app.add_subcommand("evaluate", "evaluate a checkpoint on the test split");
    CLI::App* ablate = app.add_subcommand("ablate", "train and compare the four model variants");
    CLI::App* backtest = app.add_subcommand("backtest", "run the investment simulation");
    for (CLI::App* cmd : {features, train, gridsearch, evaluate, ablate, backtest})
        add_common(cmd, args);
    gridsearch->add_option("--jobs", jobs, "parallel trials")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        const auto cfg = load_config(args);
        if (features->parsed()) stst::cmd_features(cfg);
        else if (train->parsed()) stst::cmd_train(cfg);
        else if (gridsearch->parsed()) stst::cmd_gridsearch(cfg, jobs);
        else if (evaluate->parsed()) stst::cmd_evaluate(cfg);
        else if (ablate->parsed()) stst::cmd_ablate(cfg);
        else if (backtest->parsed()) stst::cmd_backtest(cfg);
        return 0;
    } catch (const stst::UsageError& e) {
        std::cerr << "stst: " << e.what() << "\n";
        return 1;
    } catch (const stst::DivergenceError& e) {
        std::cerr << "stst: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "stst: " << e.what() << "\n";
        return 2;
    }
}
