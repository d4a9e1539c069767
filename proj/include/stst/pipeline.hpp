#pragma once

#include "stst/backtest.hpp"
#include "stst/config.hpp"
#include "stst/evaluation.hpp"

namespace stst {

// Subcommand bodies shared by the CLI binary and the test suites. Every
// command materializes its artifacts under cfg.output_dir (written atomically
// via .partial files) next to a resolved-config.cfg dump.

void cmd_features(const RunConfiguration& cfg);
RunRecord cmd_train(const RunConfiguration& cfg);
void cmd_gridsearch(const RunConfiguration& cfg, std::size_t jobs = 1);
EvalResult cmd_evaluate(const RunConfiguration& cfg);
void cmd_ablate(const RunConfiguration& cfg);
SimulationResult cmd_backtest(const RunConfiguration& cfg);

// Feature frames for every ticker CSV under data_dir, in ticker order.
std::vector<FeatureFrame> build_frames(const std::filesystem::path& data_dir);

// Windows of size n for all frames, concatenated in ticker order.
std::vector<WindowSample> windows_for(const std::vector<FeatureFrame>& frames, std::size_t n);

}  // namespace stst
